//! Random-walk configuration explorer.

use std::collections::{HashMap, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::space::ConfigSpace;
use crate::dataflow::TileConfig;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WalkParams {
    pub max_steps: usize,
    /// Probability of a sideways move when no neighbor improves.
    pub epsilon: f64,
}

impl Default for WalkParams {
    fn default() -> Self {
        WalkParams {
            max_steps: 200,
            epsilon: 0.05,
        }
    }
}

/// RNG of walk `walk` in round `round` under a master seed.
pub fn walk_rng(seed: u64, round: u64, walk: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ round.wrapping_mul(0x9e37_79b9_7f4a_7c15));
    rng.set_stream(walk);
    rng
}

/// Greedy walk on predicted cost. Each step proposes a uniformly random
/// feasible neighbor and moves if it is strictly cheaper. At a local
/// minimum the walk stops, except that with probability `epsilon` it takes
/// a move to an equally cheap neighbor.
pub fn random_walk<F>(
    space: &ConfigSpace,
    start: TileConfig,
    cost: &F,
    params: &WalkParams,
    rng: &mut impl Rng,
) -> TileConfig
where
    F: Fn(&TileConfig) -> f64,
{
    let mut memo: HashMap<TileConfig, f64> = HashMap::new();
    let mut eval = |t: &TileConfig| *memo.entry(*t).or_insert_with(|| cost(t));
    let mut cur = start;
    let mut cur_cost = eval(&cur);
    for _ in 0..params.max_steps {
        let nbrs = space.neighbors(&cur);
        if nbrs.is_empty() {
            break;
        }
        let pick = nbrs[rng.gen_range(0..nbrs.len())];
        let c = eval(&pick);
        if c < cur_cost {
            cur = pick;
            cur_cost = c;
            continue;
        }
        let costs: Vec<f64> = nbrs.iter().map(&mut eval).collect();
        let better: Vec<usize> = (0..nbrs.len()).filter(|&i| costs[i] < cur_cost).collect();
        if !better.is_empty() {
            let i = better[rng.gen_range(0..better.len())];
            cur = nbrs[i];
            cur_cost = costs[i];
            continue;
        }
        let level: Vec<usize> = (0..nbrs.len()).filter(|&i| costs[i] == cur_cost).collect();
        if level.is_empty() || rng.gen::<f64>() >= params.epsilon {
            break;
        }
        cur = nbrs[level[rng.gen_range(0..level.len())]];
    }
    cur
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExploreParams {
    pub n_s: usize,
    pub walk: WalkParams,
    /// Extra rounds of fresh walks for endpoints above the threshold.
    pub retry_cap: usize,
    /// Share of walks started from fresh random configurations instead of
    /// the previous endpoints.
    pub fresh_fraction: f64,
}

impl Default for ExploreParams {
    fn default() -> Self {
        ExploreParams {
            n_s: 16,
            walk: WalkParams::default(),
            retry_cap: 3,
            fresh_fraction: 0.25,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Exploration {
    pub endpoints: Vec<TileConfig>,
    pub predicted: Vec<f64>,
    pub rounds: usize,
    /// Every endpoint's prediction is at or below the threshold.
    pub threshold_met: bool,
}

/// Run `n_s` walks. Walks start from `starts` (cycled) except for a
/// `fresh_fraction` share of random starts; all starts are random when
/// `starts` is empty. Walks ending above `threshold` are restarted from
/// random configurations for up to `retry_cap` rounds, keeping the cheaper
/// endpoint of each slot.
pub fn explore<F>(
    space: &ConfigSpace,
    cost: &F,
    params: &ExploreParams,
    starts: &[TileConfig],
    threshold: Option<f64>,
    seed: u64,
) -> Exploration
where
    F: Fn(&TileConfig) -> f64 + Sync,
{
    let n_s = params.n_s.max(1);
    let fresh = if starts.is_empty() {
        n_s
    } else {
        ((params.fresh_fraction * n_s as f64).round() as usize).min(n_s)
    };
    let none = HashSet::new();
    let run = |round: u64, slots: &[usize], seeded: bool| -> Vec<(TileConfig, f64)> {
        slots
            .par_iter()
            .map(|&w| {
                let mut rng = walk_rng(seed, round, w as u64);
                let start = if seeded && w >= fresh {
                    starts[(w - fresh) % starts.len()]
                } else {
                    space.sample(&mut rng, &none).expect("space is nonempty")
                };
                let end = random_walk(space, start, cost, &params.walk, &mut rng);
                (end, cost(&end))
            })
            .collect()
    };
    let all: Vec<usize> = (0..n_s).collect();
    let mut result = run(0, &all, !starts.is_empty());
    let above = |r: &[(TileConfig, f64)]| -> Vec<usize> {
        match threshold {
            None => Vec::new(),
            Some(th) => (0..r.len()).filter(|&i| r[i].1 > th).collect(),
        }
    };
    let mut rounds = 1;
    let mut pending = above(&result);
    while !pending.is_empty() && rounds <= params.retry_cap {
        let retry = run(rounds as u64, &pending, false);
        for (slot, cand) in pending.iter().zip(retry) {
            if cand.1 < result[*slot].1 {
                result[*slot] = cand;
            }
        }
        rounds += 1;
        pending = above(&result);
    }
    Exploration {
        endpoints: result.iter().map(|r| r.0).collect(),
        predicted: result.iter().map(|r| r.1).collect(),
        rounds,
        threshold_met: pending.is_empty(),
    }
}
