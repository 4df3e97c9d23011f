//! Primal solvers for the exponent functionals.
//!
//! Everything here is driven by [`Problem`], which fixes `(P_X, P_Y, c)`,
//! restricts to the supports (anything off-support has infinite
//! divergence) and caches the dual vertices of the restricted transport
//! polytope and small simplex-mesh tables.
//!
//! With the dual vertices `V` in hand the closed exponent is exact:
//!
//! `φ_≥(α, τ) = min_{(f,g) ∈ V} inf { D(Q‖P_Y) : Q(g) ≥ τ − sup_{D(R‖P_X) ≤ α} R(f) }`
//!
//! because `C(Q_X, Q_Y)` is the max over `V` of `Q_X(f) + Q_Y(g)`. For
//! larger alphabets the same linearization drives a convex–concave
//! iteration from deterministic starts.

mod bounds;
mod phi;
mod problem;
mod psi;

pub use bounds::{gaussian_bound, gl_bound, hamming_l, hamming_l_inverse, hamming_phi_lb};
pub use phi::{
    kappa_x, phi, phi_geq, phi_geq_curve, phi_lambda_geq, varphi, varphi_curve, varphi_x,
    varphi_x_curve,
};
pub use problem::Problem;
pub(crate) use problem::dirichlet;
pub use psi::{psi, PsiEstimate};

use std::fmt;

use crate::error::{Error, Result};
use crate::ext::ExtReal;
use crate::prob::Distribution;

/// A point `(α, τ)` of the exponent plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExponentQuery {
    /// Divergence budget in nats.
    pub alpha: f64,
    /// Transport budget in cost units.
    pub tau: f64,
}

impl ExponentQuery {
    pub fn new(alpha: f64, tau: f64) -> Result<Self> {
        let q = Self { alpha, tau };
        q.validate()?;
        Ok(q)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("alpha", self.alpha), ("tau", self.tau)] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Domain(format!("{name} = {v} must be finite and ≥ 0")));
            }
        }
        Ok(())
    }
}

/// Search effort and reproducibility knobs.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchConfig {
    /// Simplex mesh step `δ` of the certifying grids.
    pub grid_step: f64,
    /// Random starts on top of the deterministic ones.
    pub multistarts: usize,
    /// Iteration cap of each convex–concave run.
    pub ccp_iters: usize,
    /// Relative improvement below which an iteration stops.
    pub tol: f64,
    pub seed: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            grid_step: 1.0 / 64.0,
            multistarts: 8,
            ccp_iters: 100,
            tol: 1e-12,
            seed: 0,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.grid_step > 0.0 && self.grid_step <= 0.25) {
            return Err(Error::Config(format!(
                "grid_step = {} must lie in (0, 1/4]",
                self.grid_step
            )));
        }
        if self.multistarts == 0 || self.ccp_iters == 0 {
            return Err(Error::Config("multistarts and ccp_iters must be ≥ 1".into()));
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Error::Config(format!("tol = {} must be positive", self.tol)));
        }
        Ok(())
    }

    /// Mesh resolution `round(1/δ)`.
    pub fn mesh(&self) -> usize {
        (1.0 / self.grid_step).round().max(1.0) as usize
    }

    /// Steps coarser than 1/16 are accepted but flagged on results.
    pub fn is_coarse(&self) -> bool {
        self.grid_step > 1.0 / 16.0
    }
}

/// How a value was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    /// Closed-form boundary case.
    Trivial,
    /// Exact minimum over the dual vertices.
    Vertex,
    /// Convex–concave iteration.
    Ccp,
    /// Simplex-mesh search.
    Grid,
    /// Strict constraint evaluated through the closed one at a shifted point.
    ClosedShift,
    /// Best found without a vertex certificate.
    Heuristic,
    /// `+∞`: the constraint set is empty.
    Empty,
    /// `+∞`: on the boundary of the effective domain.
    Dom,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Trivial => "trivial",
            Method::Vertex => "vertex",
            Method::Ccp => "ccp",
            Method::Grid => "grid",
            Method::ClosedShift => "closed-shift",
            Method::Heuristic => "heuristic",
            Method::Empty => "+inf:empty",
            Method::Dom => "+inf:dom",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "trivial" => Method::Trivial,
            "vertex" => Method::Vertex,
            "ccp" => Method::Ccp,
            "grid" => Method::Grid,
            "closed-shift" => Method::ClosedShift,
            "heuristic" => Method::Heuristic,
            "+inf:empty" => Method::Empty,
            "+inf:dom" => Method::Dom,
            _ => return None,
        })
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A solver answer: the value, its provenance and a feasible witness
/// `(Q_X, Q_Y)` whenever the value is finite.
#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    pub value: ExtReal<f64>,
    pub method: Method,
    pub witness: Option<(Distribution<f64>, Distribution<f64>)>,
    /// Set when the configured mesh is coarser than 1/16.
    pub coarse_grid: bool,
}

impl Estimate {
    pub(crate) fn infinite(method: Method) -> Self {
        Self {
            value: ExtReal::PosInf,
            method,
            witness: None,
            coarse_grid: false,
        }
    }
}
