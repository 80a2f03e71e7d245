//! Auto-tuning over the searching domain: a constrained configuration
//! space, simulator-backed measurements, a boosted-tree cost model and a
//! random-walk explorer driving an iterative train/explore/measure loop.

mod cost;
mod explore;
mod gbdt;
mod space;
mod tune;

pub use cost::{features, measure, train, CostModel, Measurement, FEATURE_NAMES};
pub use explore::{explore, random_walk, walk_rng, Exploration, ExploreParams, WalkParams};
pub use gbdt::{rmse, BoostParams, Gbdt};
pub use space::{reduction_ratio, ConfigSpace, AXES, MAX_THREADS};
pub use tune::{
    exhaustive_oracle, random_search, run_tuner, tune, ExploreLog, HistoryRow, StopReason,
    TuneParams, TuneSession, ORACLE_CAP,
};
