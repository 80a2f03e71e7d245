//! Tiled output-stationary dataflows, their simulator and the analytic
//! I/O-volume formulas.

mod analytic;
mod schedule;
mod sim;
mod tile;

pub use analytic::{analytic_dc_io, analytic_wa_io, optimal_dc_io, optimal_wa_io, IoVolume};
pub use schedule::{plan_direct_dataflow, plan_winograd_dataflow, BlockPlan, Schedule, Stage};
pub use sim::{runtime_proxy, simulate, stage_trace, warp_factor, SimReport, StageTrace};
pub use tile::{
    axis_candidates, dc_input_tile, dc_reading, divisors, extents, optimal_tile_dc,
    optimal_tile_wa, wa_reading, Layout, TileConfig,
};
