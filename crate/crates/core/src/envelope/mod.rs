//! Convex and concave envelopes of sampled exponent curves.
//!
//! One-dimensional envelopes are monotone-chain hulls. The two-dimensional
//! lower envelope is evaluated as the smallest mixture of grid cells that
//! reproduces the query point — a three-row linear program whose basic
//! solutions use at most three cells, which is the same thing as the lower
//! hull of the point cloud by Carathéodory.

mod curve;
mod hull2d;
mod pwl;

pub use curve::ExponentCurve;
pub use hull2d::{lce_2d, Envelope2d};
pub use pwl::{gen_inverse, lce_1d, uce_1d, Pwl};
