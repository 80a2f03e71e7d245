//! The searching domain: every tunable parameter of a tiled dataflow and
//! the constraints that prune it.

use std::collections::HashSet;

use rand::Rng;
use serde::Serialize;

use crate::dataflow::{axis_candidates, divisors, extents, Layout, TileConfig};
use crate::error::{Error, Result};
use crate::model::{Algorithm, ConvShape, HwModel};
use crate::surd::Q;

/// Upper limit on `n_xt·n_yt·n_zt` in both space variants.
pub const MAX_THREADS: u64 = 1024;

/// Number of tunable axes.
pub const AXES: usize = 8;

const LAYOUT: usize = 0;
const SB: usize = 1;

/// Enumerable configuration space of one problem.
#[derive(Clone, Debug, Serialize)]
pub struct ConfigSpace {
    pub shape: ConvShape,
    pub hw: HwModel,
    pub algorithm: Algorithm,
    /// Whether the Table-1 constraints beyond divisibility and capacity are
    /// applied.
    pub constrained: bool,
    /// Candidate values of each axis in ascending order: layout index,
    /// `s_b`, `x`, `y`, `z`, `n_xt`, `n_yt`, `n_zt`.
    axes: [Vec<u64>; AXES],
}

/// Cross-multiplied square-root constraints:
/// `z²·R ≤ s_eff` and `(xy)² ≤ s_eff·R`.
fn sqrt_constraints(x: u64, y: u64, z: u64, s_eff: Q, reuse: Q) -> bool {
    let (z, xy) = (Q::from_integer(z as i128), Q::from_integer((x * y) as i128));
    z * z * reuse <= s_eff && xy * xy <= s_eff * reuse
}

impl ConfigSpace {
    fn with_axes(
        shape: &ConvShape,
        hw: &HwModel,
        alg: Algorithm,
        constrained: bool,
    ) -> Result<Self> {
        if let Algorithm::Winograd(p) = alg {
            p.check_shape(shape)?;
        }
        let (w, h) = extents(shape, &alg);
        let top = hw.per_processor();
        let mut s_b: Vec<u64> = (1..).map(|i| 1u64 << i).take_while(|&v| v < top).collect();
        s_b.push(top);
        let widen = |v: Vec<u32>| v.into_iter().map(u64::from).collect::<Vec<_>>();
        let axes = [
            (0..Layout::ALL.len() as u64).collect(),
            s_b,
            widen(axis_candidates(w, &alg)),
            widen(axis_candidates(h, &alg)),
            widen(divisors(shape.c_out())),
            widen(divisors(w)),
            widen(divisors(h)),
            widen(divisors(shape.c_out())),
        ];
        let space = ConfigSpace {
            shape: *shape,
            hw: *hw,
            algorithm: alg,
            constrained,
            axes,
        };
        if space.iter().next().is_none() {
            return Err(Error::Infeasible(format!(
                "empty configuration space for {} with s_b <= {top}",
                alg.name()
            )));
        }
        Ok(space)
    }

    /// Space pruned by `s_b ≤ s_sm/2`, capacity, and `z ≤ √(s_b/R)`,
    /// `xy ≤ √(s_b·R)`.
    pub fn build(shape: &ConvShape, hw: &HwModel, alg: Algorithm) -> Result<Self> {
        Self::with_axes(shape, hw, alg, true)
    }

    /// Divisibility and capacity only.
    pub fn unconstrained(shape: &ConvShape, hw: &HwModel, alg: Algorithm) -> Result<Self> {
        Self::with_axes(shape, hw, alg, false)
    }

    /// Keep only the given layouts.
    pub fn with_layouts(mut self, layouts: &[Layout]) -> Result<Self> {
        let mut keep: Vec<u64> = layouts.iter().map(|l| l.index() as u64).collect();
        keep.sort_unstable();
        keep.dedup();
        self.axes[LAYOUT] = keep;
        if self.iter().next().is_none() {
            return Err(Error::Infeasible(
                "no layout left in the configuration space".into(),
            ));
        }
        Ok(self)
    }

    pub fn axis(&self, i: usize) -> &[u64] {
        &self.axes[i]
    }

    /// Membership predicate.
    pub fn contains(&self, t: &TileConfig) -> bool {
        let e = match self.algorithm {
            Algorithm::Direct => None,
            Algorithm::Winograd(p) => Some(p.e),
        };
        if t.e != e || t.s_b > self.hw.per_processor() || t.threads() > MAX_THREADS {
            return false;
        }
        if t.check(&self.shape, &self.algorithm).is_err() {
            return false;
        }
        let acc = t.accumulator_words(&self.algorithm);
        if acc > t.s_b {
            return false;
        }
        if !self.constrained {
            return true;
        }
        if 2 * t.s_b > self.hw.s_sm {
            return false;
        }
        // Winograd keeps 2(e+r−1)²/e² words per output, so the budget the
        // tile dimensions see is scaled down by that factor.
        let s_eff = match self.algorithm {
            Algorithm::Direct => Q::from_integer(t.s_b as i128),
            Algorithm::Winograd(p) => {
                let a = p.patch() as i128;
                Q::new(t.s_b as i128 * (p.e as i128).pow(2), 2 * a * a)
            }
        };
        sqrt_constraints(
            t.x as u64,
            t.y as u64,
            t.z as u64,
            s_eff,
            self.algorithm.reuse(&self.shape),
        )
    }

    /// Configuration at the given axis indices, if it lies in the space.
    pub fn at(&self, idx: &[usize; AXES]) -> Option<TileConfig> {
        let v = |i: usize| self.axes[i][idx[i]];
        let t = TileConfig {
            x: v(2) as u32,
            y: v(3) as u32,
            z: v(4) as u32,
            s_b: v(SB),
            n_xt: v(5) as u32,
            n_yt: v(6) as u32,
            n_zt: v(7) as u32,
            layout: Layout::ALL[v(LAYOUT) as usize],
            e: match self.algorithm {
                Algorithm::Direct => None,
                Algorithm::Winograd(p) => Some(p.e),
            },
        };
        self.contains(&t).then_some(t)
    }

    /// Axis indices of a configuration.
    pub fn index_of(&self, t: &TileConfig) -> Option<[usize; AXES]> {
        let vals = [
            t.layout.index() as u64,
            t.s_b,
            t.x as u64,
            t.y as u64,
            t.z as u64,
            t.n_xt as u64,
            t.n_yt as u64,
            t.n_zt as u64,
        ];
        let mut idx = [0; AXES];
        for i in 0..AXES {
            idx[i] = self.axes[i].binary_search(&vals[i]).ok()?;
        }
        Some(idx)
    }

    /// Size of the full axis grid before any constraint.
    pub fn grid_size(&self) -> u64 {
        self.axes.iter().map(|a| a.len() as u64).product()
    }

    /// Members in axis order (layout slowest, `n_zt` fastest).
    pub fn iter(&self) -> impl Iterator<Item = TileConfig> + '_ {
        let dims: Vec<usize> = self.axes.iter().map(Vec::len).collect();
        let total = self.grid_size();
        (0..total).filter_map(move |mut n| {
            let mut idx = [0; AXES];
            for i in (0..AXES).rev() {
                idx[i] = (n % dims[i] as u64) as usize;
                n /= dims[i] as u64;
            }
            self.at(&idx)
        })
    }

    /// Exact number of members.
    pub fn cardinality(&self) -> u64 {
        self.iter().count() as u64
    }

    /// Uniformly random member not in `exclude`, or `None` once every
    /// member is excluded.
    pub fn sample(&self, rng: &mut impl Rng, exclude: &HashSet<TileConfig>) -> Option<TileConfig> {
        for _ in 0..512 {
            let mut idx = [0; AXES];
            for (i, slot) in idx.iter_mut().enumerate() {
                *slot = rng.gen_range(0..self.axes[i].len());
            }
            if let Some(t) = self.at(&idx) {
                if !exclude.contains(&t) {
                    return Some(t);
                }
            }
        }
        let rest: Vec<TileConfig> = self.iter().filter(|t| !exclude.contains(t)).collect();
        if rest.is_empty() {
            None
        } else {
            Some(rest[rng.gen_range(0..rest.len())])
        }
    }

    /// Members reachable by moving one axis to the nearest value in either
    /// direction that keeps the configuration feasible.
    pub fn neighbors(&self, t: &TileConfig) -> Vec<TileConfig> {
        let Some(idx) = self.index_of(t) else {
            return Vec::new();
        };
        let mut out = Vec::new();
        for axis in 0..AXES {
            let len = self.axes[axis].len();
            for up in [false, true] {
                let mut j = idx;
                loop {
                    if up {
                        if j[axis] + 1 >= len {
                            break;
                        }
                        j[axis] += 1;
                    } else {
                        if j[axis] == 0 {
                            break;
                        }
                        j[axis] -= 1;
                    }
                    if let Some(n) = self.at(&j) {
                        out.push(n);
                        break;
                    }
                }
            }
        }
        out
    }
}

/// `|constrained| / |unconstrained|` on one problem.
pub fn reduction_ratio(shape: &ConvShape, hw: &HwModel, alg: Algorithm) -> Result<(u64, u64, f64)> {
    let c = ConfigSpace::build(shape, hw, alg)?.cardinality();
    let u = ConfigSpace::unconstrained(shape, hw, alg)?.cardinality();
    Ok((c, u, c as f64 / u as f64))
}
