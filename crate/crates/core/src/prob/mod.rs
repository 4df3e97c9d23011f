//! Finite-alphabet probability primitives.

mod distribution;
mod divergence;
mod iproj;

pub use distribution::{Alphabet, Distribution, Kernel, WeightedKernel};
pub use divergence::{binary_kl, conditional_kl, kl, renyi0, tv};
pub use iproj::{iproj_halfspace, kl_ball_max_mean, log_mgf, tilt, BallMax, IProjection};

pub(crate) use distribution::dot;
pub(crate) use divergence::kl_slice;
pub(crate) use iproj::{ball_into, ball_value, iproj_into, tilt_into};
