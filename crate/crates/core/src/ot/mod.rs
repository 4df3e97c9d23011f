//! Exact discrete optimal transport.

mod cost;
mod simplex;
mod transport;
mod vertices;

pub use cost::CostMatrix;
pub use simplex::{transport_simplex, TransportSolution};
pub use transport::{
    additive_cost, conditional_ot, ot_cost, ot_dual, ot_solve, Coupling, DualPotentials, OtSolution,
};

pub use vertices::dual_vertices;

pub(crate) use transport::ot_slices;
