//! Gradient-boosted regression trees with squared-error loss.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoostParams {
    pub trees: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub min_leaf: usize,
    /// Fraction of rows each tree is fit on; `1.0` uses all of them.
    pub subsample: f64,
    pub seed: u64,
}

impl Default for BoostParams {
    fn default() -> Self {
        BoostParams {
            trees: 100,
            max_depth: 4,
            learning_rate: 0.1,
            min_leaf: 1,
            subsample: 1.0,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
enum Node {
    Leaf(f64),
    Split {
        feature: usize,
        threshold: f64,
        left: Box<Node>,
        right: Box<Node>,
    },
}

impl Node {
    fn predict(&self, x: &[f64]) -> f64 {
        match self {
            Node::Leaf(v) => *v,
            Node::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                if x[*feature] <= *threshold {
                    left.predict(x)
                } else {
                    right.predict(x)
                }
            }
        }
    }
}

/// A fitted ensemble.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Gbdt {
    pub params: BoostParams,
    base: f64,
    trees: Vec<Node>,
    n_features: usize,
}

fn mean(idx: &[usize], y: &[f64]) -> f64 {
    idx.iter().map(|&i| y[i]).sum::<f64>() / idx.len() as f64
}

struct Best {
    gain: f64,
    feature: usize,
    threshold: f64,
}

/// Best variance-reducing split of the rows in `idx`, scanning every
/// feature's sorted values.
fn best_split(x: &[Vec<f64>], y: &[f64], idx: &[usize], min_leaf: usize) -> Option<Best> {
    let n = idx.len();
    let total: f64 = idx.iter().map(|&i| y[i]).sum();
    let base = total * total / n as f64;
    let mut best: Option<Best> = None;
    let mut order = idx.to_vec();
    for f in 0..x[idx[0]].len() {
        order.sort_by(|&a, &b| x[a][f].total_cmp(&x[b][f]).then(a.cmp(&b)));
        let mut left = 0.0;
        for k in 0..n - 1 {
            left += y[order[k]];
            let (lo, hi) = (x[order[k]][f], x[order[k + 1]][f]);
            if lo == hi || k + 1 < min_leaf || n - k - 1 < min_leaf {
                continue;
            }
            let right = total - left;
            let nl = (k + 1) as f64;
            let gain = left * left / nl + right * right / (n as f64 - nl) - base;
            if gain > 1e-12 * base.abs().max(1.0) && best.as_ref().is_none_or(|b| gain > b.gain) {
                best = Some(Best {
                    gain,
                    feature: f,
                    threshold: lo + (hi - lo) / 2.0,
                });
            }
        }
    }
    best
}

fn grow(x: &[Vec<f64>], y: &[f64], idx: &[usize], depth: usize, p: &BoostParams) -> Node {
    if depth == 0 || idx.len() < 2 * p.min_leaf.max(1) {
        return Node::Leaf(mean(idx, y));
    }
    match best_split(x, y, idx, p.min_leaf.max(1)) {
        None => Node::Leaf(mean(idx, y)),
        Some(b) => {
            let (l, r): (Vec<usize>, Vec<usize>) =
                idx.iter().partition(|&&i| x[i][b.feature] <= b.threshold);
            Node::Split {
                feature: b.feature,
                threshold: b.threshold,
                left: Box::new(grow(x, y, &l, depth - 1, p)),
                right: Box::new(grow(x, y, &r, depth - 1, p)),
            }
        }
    }
}

impl Gbdt {
    pub fn fit(x: &[Vec<f64>], y: &[f64], params: BoostParams) -> Result<Self> {
        if x.is_empty() || x.len() != y.len() {
            return Err(Error::Training(format!(
                "need matching nonempty rows, got {} features and {} targets",
                x.len(),
                y.len()
            )));
        }
        let n_features = x[0].len();
        if x.iter().any(|r| r.len() != n_features) || y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Training(
                "ragged features or non-finite target".into(),
            ));
        }
        let all: Vec<usize> = (0..y.len()).collect();
        let base = mean(&all, y);
        let mut pred = vec![base; y.len()];
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        let take = ((params.subsample.clamp(0.0, 1.0) * y.len() as f64).ceil() as usize).max(1);
        let mut trees = Vec::with_capacity(params.trees);
        for _ in 0..params.trees {
            let resid: Vec<f64> = y.iter().zip(&pred).map(|(t, p)| t - p).collect();
            let rows = if take < y.len() {
                let mut r = all.clone();
                r.shuffle(&mut rng);
                r.truncate(take);
                r.sort_unstable();
                r
            } else {
                all.clone()
            };
            let tree = grow(x, &resid, &rows, params.max_depth, &params);
            for (i, p) in pred.iter_mut().enumerate() {
                *p += params.learning_rate * tree.predict(&x[i]);
            }
            trees.push(tree);
        }
        Ok(Gbdt {
            params,
            base,
            trees,
            n_features,
        })
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.n_features);
        self.base + self.params.learning_rate * self.trees.iter().map(|t| t.predict(x)).sum::<f64>()
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }
}

pub fn rmse(pred: &[f64], truth: &[f64]) -> f64 {
    let n = truth.len().max(1) as f64;
    (pred
        .iter()
        .zip(truth)
        .map(|(p, t)| (p - t).powi(2))
        .sum::<f64>()
        / n)
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn constant_target_is_exact() {
        let x = vec![vec![1.0, 2.0]; 5];
        let y = vec![3.5; 5];
        let m = Gbdt::fit(&x, &y, BoostParams::default()).unwrap();
        assert!((m.predict(&[7.0, -1.0]) - 3.5).abs() <= 3.5e-6);
    }

    #[test]
    fn learns_a_step() {
        let x: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64]).collect();
        let y: Vec<f64> = (0..20).map(|i| if i < 10 { 1.0 } else { 5.0 }).collect();
        let m = Gbdt::fit(&x, &y, BoostParams::default()).unwrap();
        assert!((m.predict(&[3.0]) - 1.0).abs() < 1e-3);
        assert!((m.predict(&[15.0]) - 5.0).abs() < 1e-3);
    }

    #[test]
    fn beats_the_mean_on_held_out_rows() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rows: Vec<Vec<f64>> = (0..80)
            .map(|_| vec![rng.gen_range(0.0..4.0), rng.gen_range(0.0..4.0)])
            .collect();
        let y: Vec<f64> = rows.iter().map(|r| r[0] * r[0] + 3.0 * r[1]).collect();
        let m = Gbdt::fit(&rows[..60], &y[..60], BoostParams::default()).unwrap();
        let pred: Vec<f64> = rows[60..].iter().map(|r| m.predict(r)).collect();
        let mu = y[..60].iter().sum::<f64>() / 60.0;
        assert!(rmse(&pred, &y[60..]) < rmse(&[mu; 20], &y[60..]));
    }

    #[test]
    fn seeded_subsampling_is_deterministic() {
        let x: Vec<Vec<f64>> = (0..30).map(|i| vec![(i % 7) as f64, i as f64]).collect();
        let y: Vec<f64> = (0..30).map(|i| (i * i % 11) as f64).collect();
        let p = BoostParams {
            subsample: 0.7,
            seed: 9,
            ..Default::default()
        };
        assert_eq!(Gbdt::fit(&x, &y, p).unwrap(), Gbdt::fit(&x, &y, p).unwrap());
    }

    #[test]
    fn rejects_bad_data() {
        assert!(Gbdt::fit(&[], &[], BoostParams::default()).is_err());
        assert!(Gbdt::fit(&[vec![1.0]], &[f64::INFINITY], BoostParams::default()).is_err());
    }
}
