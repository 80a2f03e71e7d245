use crate::dag::{Dag, Op, Source, Transform};

/// Transform matrices of a Winograd `F(e, r)` minimal filter, generated
/// by Toom-Cook with the point at infinity.
#[derive(Clone, Debug, PartialEq)]
pub struct WinogradMatrices {
    /// `Bᵀ`, `(e+r−1) × (e+r−1)`.
    pub bt: Vec<Vec<f64>>,
    /// `G`, `(e+r−1) × r`.
    pub g: Vec<Vec<f64>>,
    /// `Aᵀ`, `e × (e+r−1)`.
    pub at: Vec<Vec<f64>>,
}

const POINTS: [f64; 12] = [
    0.0, 1.0, -1.0, 2.0, -2.0, 0.5, -0.5, 3.0, -3.0, 0.25, -0.25, 4.0,
];

/// Coefficients (ascending powers) of `∏ (x − p)` over `roots`.
fn poly_from_roots(roots: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut c = vec![1.0];
    for p in roots {
        let mut next = vec![0.0; c.len() + 1];
        for (i, &ci) in c.iter().enumerate() {
            next[i + 1] += ci;
            next[i] -= p * ci;
        }
        c = next;
    }
    c
}

impl WinogradMatrices {
    /// Matrices for `F(e, r)`; `None` when more interpolation points are
    /// needed than the built-in list provides.
    pub fn toom_cook(e: usize, r: usize) -> Option<Self> {
        let n = e + r - 1;
        if n - 1 > POINTS.len() {
            return None;
        }
        let pts = &POINTS[..n - 1];
        let mut at = vec![vec![0.0; n]; e];
        let mut g = vec![vec![0.0; r]; n];
        let mut bt = vec![vec![0.0; n]; n];
        for (j, &p) in pts.iter().enumerate() {
            for (i, row) in at.iter_mut().enumerate() {
                row[j] = p.powi(i as i32);
            }
            let others = || {
                pts.iter()
                    .enumerate()
                    .filter(move |&(l, _)| l != j)
                    .map(|(_, &q)| q)
            };
            let f: f64 = others().map(|q| p - q).product();
            for (k, gk) in g[j].iter_mut().enumerate() {
                *gk = p.powi(k as i32) / f;
            }
            for (i, c) in poly_from_roots(others()).into_iter().enumerate() {
                bt[j][i] = c;
            }
        }
        at[e - 1][n - 1] = 1.0;
        g[n - 1][r - 1] = 1.0;
        for (i, c) in poly_from_roots(pts.iter().copied()).into_iter().enumerate() {
            bt[n - 1][i] = c;
        }
        Some(WinogradMatrices { bt, g, at })
    }

    fn coeff(&self, t: Transform, row: (u8, u8), col: (u8, u8)) -> f64 {
        let m = match t {
            Transform::Input => &self.bt,
            Transform::Kernel => &self.g,
            Transform::Output => &self.at,
        };
        m[row.0 as usize][col.0 as usize] * m[row.1 as usize][col.1 as usize]
    }
}

impl Dag {
    /// Evaluate every vertex numerically. `input` supplies the value of each
    /// labeled primary input; scale vertices need `mats`.
    ///
    /// Panics if the DAG has no labels or a scale vertex is met without
    /// matrices.
    pub fn evaluate(
        &self,
        input: impl Fn(Source) -> f64,
        mats: Option<&WinogradMatrices>,
    ) -> Vec<f64> {
        let labels = self.labels().expect("evaluation needs labeled inputs");
        let mut val = vec![0.0; self.len()];
        for &(v, src) in &labels.inputs {
            val[v as usize] = input(src);
        }
        for v in self.topo_order() {
            let p = self.preds(v);
            val[v as usize] = match self.info(v).op {
                Op::Input | Op::Opaque => val[v as usize],
                Op::Mul => val[p[0] as usize] * val[p[1] as usize],
                Op::Add => p.iter().map(|&u| val[u as usize]).sum(),
                Op::Scale {
                    transform,
                    row,
                    col,
                } => {
                    let m = mats.expect("scale vertex needs transform matrices");
                    m.coeff(transform, row, col) * val[p[0] as usize]
                }
            };
        }
        val
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn correlate_1d(m: &WinogradMatrices, d: &[f64], g: &[f64]) -> Vec<f64> {
        let n = m.bt.len();
        let u: Vec<f64> = (0..n)
            .map(|j| (0..g.len()).map(|k| m.g[j][k] * g[k]).sum())
            .collect();
        let v: Vec<f64> = (0..n)
            .map(|j| (0..n).map(|i| m.bt[j][i] * d[i]).sum())
            .collect();
        m.at.iter()
            .map(|row| (0..n).map(|j| row[j] * u[j] * v[j]).sum())
            .collect()
    }

    #[test]
    fn toom_cook_computes_correlation() {
        for (e, r) in [(1, 1), (2, 1), (2, 3), (4, 3), (3, 2)] {
            let m = WinogradMatrices::toom_cook(e, r).unwrap();
            let d: Vec<f64> = (0..e + r - 1).map(|i| 0.5 + i as f64 * 0.75).collect();
            let g: Vec<f64> = (0..r).map(|k| 1.25 - k as f64 * 0.5).collect();
            let y = correlate_1d(&m, &d, &g);
            for (i, yi) in y.iter().enumerate() {
                let want: f64 = (0..r).map(|k| g[k] * d[i + k]).sum();
                assert!((yi - want).abs() < 1e-9, "F({e},{r}) y[{i}] {yi} vs {want}");
            }
        }
    }

    #[test]
    fn f2_3_matches_textbook_up_to_row_scaling() {
        let m = WinogradMatrices::toom_cook(2, 3).unwrap();
        assert_eq!(
            m.at,
            vec![vec![1.0, 1.0, 1.0, 0.0], vec![0.0, 1.0, -1.0, 1.0]]
        );
        assert_eq!(m.bt[0], vec![-1.0, 0.0, 1.0, 0.0]);
        assert_eq!(m.g[0], vec![-1.0, 0.0, 0.0]);
    }
}
