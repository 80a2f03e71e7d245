//! The iterative tuning loop and its baselines.

use std::collections::HashSet;

use log::debug;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cost::{measure, train, CostModel, Measurement};
use super::explore::{explore, ExploreParams};
use super::gbdt::BoostParams;
use super::space::ConfigSpace;
use crate::dataflow::TileConfig;
use crate::error::{Error, Result};
use crate::model::{Algorithm, ConvShape, HwModel};

/// Largest space [`exhaustive_oracle`] will enumerate.
pub const ORACLE_CAP: u64 = 100_000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TuneParams {
    /// Measurements this run may spend.
    pub budget: usize,
    /// Iterations without improvement before stopping.
    pub patience: usize,
    /// Quantile of measured costs that explorer endpoints must reach.
    pub threshold_quantile: f64,
    pub seed: u64,
    pub explore: ExploreParams,
    pub boost: BoostParams,
}

impl Default for TuneParams {
    fn default() -> Self {
        TuneParams {
            budget: 256,
            patience: 50,
            threshold_quantile: 0.2,
            seed: 0,
            explore: ExploreParams::default(),
            boost: BoostParams::default(),
        }
    }
}

/// One measured configuration in tuning order.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistoryRow {
    pub iteration: u64,
    pub config: TileConfig,
    pub predicted: Option<f64>,
    pub measured: f64,
    pub best_so_far: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Budget,
    Patience,
    Exhausted,
}

/// Explorer outcome of one iteration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ExploreLog {
    pub iteration: u64,
    pub threshold: f64,
    pub rounds: usize,
    pub threshold_met: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct TuneSession {
    pub params: TuneParams,
    pub dataset: Vec<Measurement>,
    pub history: Vec<HistoryRow>,
    pub best: Option<Measurement>,
    pub iterations: u64,
    pub stop: StopReason,
    pub explore_log: Vec<ExploreLog>,
    #[serde(skip)]
    pub model: Option<CostModel>,
}

impl TuneSession {
    pub fn best_cost(&self) -> f64 {
        self.best.map_or(f64::INFINITY, |m| m.cost)
    }
}

fn quantile(costs: &[f64], q: f64) -> f64 {
    let mut v: Vec<f64> = costs.iter().copied().filter(|c| c.is_finite()).collect();
    v.sort_by(f64::total_cmp);
    let i = ((v.len() - 1) as f64 * q.clamp(0.0, 1.0)).floor() as usize;
    v[i]
}

fn better(a: &Measurement, b: &Option<Measurement>) -> bool {
    a.cost.is_finite() && b.is_none_or(|b| a.cost < b.cost)
}

fn measure_all(space: &ConfigSpace, configs: &[TileConfig], iteration: u64) -> Vec<Measurement> {
    configs
        .par_iter()
        .map(|c| Measurement {
            iteration,
            ..measure(c, &space.shape, &space.hw, &space.algorithm)
        })
        .collect()
}

/// Measure `n_s` random configurations, then repeat {train, explore,
/// measure} until the budget is spent, the best cost has not improved for
/// `patience` iterations, or every member has been measured. `prior`
/// resumes an earlier session; its measurements do not count against the
/// budget.
pub fn run_tuner(
    space: &ConfigSpace,
    params: &TuneParams,
    prior: &[Measurement],
) -> Result<TuneSession> {
    let n_s = params.explore.n_s;
    if n_s == 0 || params.budget < n_s {
        return Err(Error::Argument(format!(
            "budget {} must be at least n_s {} (n_s >= 1)",
            params.budget, n_s
        )));
    }
    let mut dataset = prior.to_vec();
    let mut seen: HashSet<TileConfig> = prior.iter().map(|m| m.config).collect();
    let mut best = None;
    for m in prior {
        if better(m, &best) {
            best = Some(*m);
        }
    }
    let mut iteration = prior.iter().map(|m| m.iteration + 1).max().unwrap_or(0);
    let mut history = Vec::new();
    let mut explore_log = Vec::new();
    let mut starts: Vec<TileConfig> = Vec::new();
    let mut model = None;
    let mut remaining = params.budget;
    let mut stale = 0;
    let mut done = 0;
    let stop = loop {
        if remaining == 0 {
            break StopReason::Budget;
        }
        let batch = n_s.min(remaining);
        let mut picks: Vec<(TileConfig, Option<f64>)> = Vec::new();
        let finite: Vec<f64> = dataset
            .iter()
            .map(|m| m.cost)
            .filter(|c| c.is_finite())
            .collect();
        if finite.len() >= 2 {
            let m = train(space, &dataset, params.boost)?;
            let threshold = quantile(&finite, params.threshold_quantile);
            let seed = params.seed ^ iteration.wrapping_mul(0xd1b5_4a32_d192_ed03);
            let ex = explore(
                space,
                &|t: &TileConfig| m.predict(t),
                &params.explore,
                &starts,
                Some(threshold),
                seed,
            );
            explore_log.push(ExploreLog {
                iteration,
                threshold,
                rounds: ex.rounds,
                threshold_met: ex.threshold_met,
            });
            let mut fresh: Vec<(TileConfig, f64)> = Vec::new();
            for (t, p) in ex.endpoints.iter().zip(&ex.predicted) {
                if !seen.contains(t) && !fresh.iter().any(|f| f.0 == *t) {
                    fresh.push((*t, *p));
                }
            }
            fresh.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
            picks.extend(fresh.into_iter().take(batch).map(|(t, p)| (t, Some(p))));
            starts = ex.endpoints;
            model = Some(m);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        rng.set_stream(iteration);
        let mut taken: HashSet<TileConfig> = seen.clone();
        taken.extend(picks.iter().map(|p| p.0));
        while picks.len() < batch {
            let Some(t) = space.sample(&mut rng, &taken) else {
                break;
            };
            taken.insert(t);
            let p = model.as_ref().map(|m| m.predict(&t));
            picks.push((t, p));
        }
        if picks.is_empty() {
            break StopReason::Exhausted;
        }
        let configs: Vec<TileConfig> = picks.iter().map(|p| p.0).collect();
        let measured = measure_all(space, &configs, iteration);
        let mut improved = false;
        for (m, (_, p)) in measured.iter().zip(&picks) {
            if better(m, &best) {
                best = Some(*m);
                improved = true;
            }
            history.push(HistoryRow {
                iteration,
                config: m.config,
                predicted: *p,
                measured: m.cost,
                best_so_far: best.map_or(f64::INFINITY, |b| b.cost),
            });
            seen.insert(m.config);
            dataset.push(*m);
        }
        debug!(
            "iteration {iteration}: {} measured, best {:?}",
            measured.len(),
            best.map(|b| b.cost)
        );
        remaining -= measured.len();
        iteration += 1;
        done += 1;
        stale = if improved { 0 } else { stale + 1 };
        if stale >= params.patience {
            break StopReason::Patience;
        }
    };
    Ok(TuneSession {
        params: *params,
        dataset,
        history,
        best,
        iterations: done,
        stop,
        explore_log,
        model,
    })
}

/// Tune with default parameters, `budget` measurements and `seed`.
pub fn tune(
    shape: &ConvShape,
    hw: &HwModel,
    alg: Algorithm,
    budget: usize,
    seed: u64,
) -> Result<TuneSession> {
    let space = ConfigSpace::build(shape, hw, alg)?;
    let params = TuneParams {
        budget,
        seed,
        ..Default::default()
    };
    run_tuner(&space, &params, &[])
}

/// Measure every member; the cheapest wins, ties to the smaller config.
pub fn exhaustive_oracle(space: &ConfigSpace) -> Result<(TileConfig, f64)> {
    let n = space.cardinality();
    if n > ORACLE_CAP {
        return Err(Error::Size {
            what: "configuration space".into(),
            count: n,
            cap: ORACLE_CAP,
        });
    }
    let members: Vec<TileConfig> = space.iter().collect();
    measure_all(space, &members, 0)
        .into_iter()
        .map(|m| (m.config, m.cost))
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
        .ok_or_else(|| Error::Infeasible("empty configuration space".into()))
}

/// Measure `budget` distinct uniformly random members.
pub fn random_search(
    space: &ConfigSpace,
    budget: usize,
    seed: u64,
) -> (Option<Measurement>, Vec<Measurement>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut taken = HashSet::new();
    let mut picks = Vec::new();
    while picks.len() < budget {
        let Some(t) = space.sample(&mut rng, &taken) else {
            break;
        };
        taken.insert(t);
        picks.push(t);
    }
    let measured = measure_all(space, &picks, 0);
    let mut best = None;
    for m in &measured {
        if better(m, &best) {
            best = Some(*m);
        }
    }
    (best, measured)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn space() -> ConfigSpace {
        let shape = ConvShape::from_output(4, 4, 8, 4, 3, 3, 1).unwrap();
        let hw = HwModel::new(128, 256, 1)
            .unwrap()
            .with_warp_width(4)
            .unwrap();
        ConfigSpace::build(&shape, &hw, Algorithm::Direct).unwrap()
    }

    fn params(budget: usize, seed: u64) -> TuneParams {
        TuneParams {
            budget,
            seed,
            explore: ExploreParams {
                n_s: 8,
                ..Default::default()
            },
            ..Default::default()
        }
    }

    #[test]
    fn budget_of_one_batch_is_one_iteration() {
        let s = run_tuner(&space(), &params(8, 1), &[]).unwrap();
        assert_eq!(s.iterations, 1);
        assert_eq!(s.history.len(), 8);
        assert_eq!(s.stop, StopReason::Budget);
    }

    #[test]
    fn budget_below_batch_is_rejected() {
        assert!(matches!(
            run_tuner(&space(), &params(4, 1), &[]),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn best_is_monotone_and_seeded() {
        let sp = space();
        let a = run_tuner(&sp, &params(48, 3), &[]).unwrap();
        let b = run_tuner(&sp, &params(48, 3), &[]).unwrap();
        assert_eq!(a.history, b.history);
        assert!(a
            .history
            .windows(2)
            .all(|w| w[1].best_so_far <= w[0].best_so_far));
        let distinct: HashSet<_> = a.history.iter().map(|h| h.config).collect();
        assert_eq!(distinct.len(), a.history.len());
    }

    #[test]
    fn resume_continues_the_curve() {
        let sp = space();
        let first = run_tuner(&sp, &params(16, 5), &[]).unwrap();
        let second = run_tuner(&sp, &params(16, 5), &first.dataset).unwrap();
        assert!(second.best_cost() <= first.best_cost());
        assert!(second.history[0].iteration >= first.iterations);
        assert!(second
            .history
            .iter()
            .all(|h| h.best_so_far <= first.best_cost()));
        assert_eq!(second.dataset.len(), 32);
    }

    #[test]
    fn oracle_is_stable() {
        let sp = space();
        let a = exhaustive_oracle(&sp).unwrap();
        assert_eq!(a, exhaustive_oracle(&sp).unwrap());
        let all: Vec<_> = sp.iter().collect();
        assert!(all
            .iter()
            .all(|t| measure(t, &sp.shape, &sp.hw, &sp.algorithm).cost >= a.1));
    }

    #[test]
    fn exhausting_a_small_space_stops() {
        let shape = ConvShape::from_output(2, 1, 1, 1, 1, 1, 1).unwrap();
        let hw = HwModel::new(4, 8, 1).unwrap();
        let sp = ConfigSpace::build(&shape, &hw, Algorithm::Direct).unwrap();
        let n = sp.cardinality() as usize;
        let p = TuneParams {
            budget: n + 10,
            explore: ExploreParams {
                n_s: 2,
                ..Default::default()
            },
            ..Default::default()
        };
        let s = run_tuner(&sp, &p, &[]).unwrap();
        assert_eq!(s.stop, StopReason::Exhausted);
        assert_eq!(s.history.len(), n);
        assert_eq!(s.best_cost(), exhaustive_oracle(&sp).unwrap().1);
    }
}
