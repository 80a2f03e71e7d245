//! I/O complexity toolkit for CNN convolutions.
//!
//! * [`model`]: convolution geometry, the reuse factor `R` and the
//!   two-level memory machine.
//! * [`dag`]: exact computation DAGs for direct and Winograd convolution,
//!   labeled with their sub-computation steps.
//! * [`pebble`]: exhaustive red-blue pebbling and S-partition oracles for
//!   tiny DAGs.
//! * [`bounds`]: vertex-generation profiles, `T(S)` and I/O lower bounds.
//! * [`dataflow`]: tiled schedules, a traffic-counting simulator and the
//!   analytic I/O-volume formulas.
//! * [`autotune`]: the constrained configuration space, a boosted-tree
//!   cost model and the random-walk tuner.

pub mod autotune;
pub mod bounds;
pub mod dag;
pub mod dataflow;
pub mod error;
pub mod model;
pub mod pebble;
pub mod surd;

pub use error::{Error, Result};
pub use model::{reuse_factor, Algorithm, ConvShape, HwModel, WinogradParams};
pub use surd::{Surd, Q};
