//! Exhaustive red-blue pebbling and S-partition oracles for tiny DAGs.

pub mod corpus;
mod game;
mod partition;

pub use game::{
    min_io_pebbling, replay, solve_pebbling, Move, PebbleLimits, PebbleSolution, PebbleState,
    DEFAULT_PEBBLE_VERTEX_CAP, DEFAULT_STATE_CAP,
};
pub use partition::{
    brute_force_p, check_hong_kung, check_hong_kung_with, generated, min_dominator, minimum_set,
    verify_s_partition, Defect, HongKung, PResult, PartitionCheck, SPartition,
    DEFAULT_PARTITION_CAP,
};
