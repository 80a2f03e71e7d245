//! Vertex-generation profiles, `T(S)` and I/O lower bounds.

mod lower;
mod profile;
mod tupper;

pub use lower::{
    exact_bound_for_dag, lower_bound_dc, lower_bound_wa, omega_dc, omega_wa, pebbling_bound,
    BoundReport, Exact,
};
pub use profile::{phi_psi_dc, phi_psi_wa, PhiPsiProfile};
pub use tupper::{
    nested_generation, t_upper_dc, t_upper_generic, t_upper_wa, TUpper, EXHAUSTIVE_BUDGET,
};
