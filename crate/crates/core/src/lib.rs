//! Concentration and isoperimetric exponents of finite product spaces.
//!
//! The crate is organised bottom-up:
//!
//! * [`prob`] — distributions, divergences, tilting and I-projections;
//! * [`ot`] — exact discrete optimal transport and Kantorovich potentials;
//! * [`exponents`] — primal solvers for the exponent functionals;
//! * [`envelope`] — convex/concave envelopes and generalized inverses;
//! * [`duals`] — dual formulas and certificates;
//! * [`bruteforce`] — exhaustive finite-`n` ground truth.
//!
//! The primitives are generic over the scalar type (see [`scalar`]); the
//! aliases below fix `f64`, which is what the solvers use.

pub mod bruteforce;
pub mod duals;
pub mod envelope;
pub mod error;
pub mod exponents;
pub mod ext;
pub mod optim;
pub mod ot;
pub mod prob;
pub mod scalar;

pub use error::{Error, Result};

/// Library version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// `f64` instantiations.
pub type Distribution = prob::Distribution<f64>;
pub type Kernel = prob::Kernel<f64>;
pub type WeightedKernel = prob::WeightedKernel<f64>;
pub type ExtReal = ext::ExtReal<f64>;
pub type CostMatrix = ot::CostMatrix<f64>;
