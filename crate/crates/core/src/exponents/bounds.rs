use crate::envelope::Pwl;
use crate::error::{Error, Result};
use crate::ext::ExtReal;
use crate::optim::scan_golden_min;
use crate::ot::CostMatrix;
use crate::prob::binary_kl;

use super::ExponentQuery;

/// `L(τ) = min_{p ∈ [0, 1−τ]} d(p‖p+τ)`, the worst-case Hamming exponent,
/// with `d` the binary relative entropy.
///
/// `d(p‖p+τ)` is convex in `p`, so a coarse scan plus golden section is
/// enough; `L(0) = 0` and `L(1) = +∞`.
pub fn hamming_l(tau: f64) -> Result<ExtReal<f64>> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::Domain(format!("tau = {tau} outside [0, 1]")));
    }
    if tau == 0.0 {
        return Ok(ExtReal::Finite(0.0));
    }
    if tau == 1.0 {
        return Ok(ExtReal::PosInf);
    }
    let d = |p: f64| binary_kl(p, p + tau).map_or(f64::INFINITY, |v| v.to_float());
    let (_, v) = scan_golden_min(d, 0.0, 1.0 - tau, 64, 1e-13, 200);
    Ok(ExtReal::Finite(v))
}

/// Generalized inverse `inf { τ ∈ [0, 1] : L(τ) ≥ α }` by bisection; `L` is
/// continuous and increasing from 0 to `+∞`.
pub fn hamming_l_inverse(alpha: f64) -> Result<f64> {
    if !(alpha >= 0.0) {
        return Err(Error::Domain(format!("alpha = {alpha} must be ≥ 0")));
    }
    if alpha == 0.0 {
        return Ok(0.0);
    }
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if hamming_l(mid)? >= ExtReal::Finite(alpha) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// `L([τ − L⁻¹(α)]⁺)`, the Hamming lower bound on `φ(α, τ)`.
pub fn hamming_phi_lb(q: ExponentQuery) -> Result<ExtReal<f64>> {
    q.validate()?;
    if q.tau > 1.0 {
        return Err(Error::Domain(format!("tau = {} outside [0, 1]", q.tau)));
    }
    let arg = (q.tau - hamming_l_inverse(q.alpha)?).max(0.0);
    hamming_l(arg)
}

/// `(τ^{1/p}/√γ − √α)⁺²`, the Gaussian-type lower bound.
pub fn gaussian_bound(q: ExponentQuery, gamma: f64, pexp: f64) -> Result<f64> {
    q.validate()?;
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::Domain(format!("gamma = {gamma} must be positive")));
    }
    if !(pexp >= 1.0 && pexp.is_finite()) {
        return Err(Error::Domain(format!("p = {pexp} must be ≥ 1")));
    }
    let base = (q.tau.powf(1.0 / pexp) / gamma.sqrt() - q.alpha.sqrt()).max(0.0);
    Ok(base * base)
}

/// `φ̆_X((τ^{1/p} − κ̂_X(α)^{1/p})⁺ᵖ)` for a metric `d` with cost `d^p`.
///
/// `phi_x_env` is the lower convex envelope of `φ_X` in `τ`, `kappa_env` the
/// upper concave envelope of `κ_X` in `α`. A `κ` value of `−∞` (empty ball)
/// or below zero contributes nothing.
pub fn gl_bound(
    q: ExponentQuery,
    metric: &CostMatrix<f64>,
    pexp: f64,
    phi_x_env: &Pwl,
    kappa_env: &Pwl,
) -> Result<ExtReal<f64>> {
    q.validate()?;
    if !metric.is_metric() {
        return Err(Error::InvalidCost("the bound needs a validated metric".into()));
    }
    if !(pexp >= 1.0 && pexp.is_finite()) {
        return Err(Error::Domain(format!("p = {pexp} must be ≥ 1")));
    }
    if q.tau == 0.0 {
        return Ok(ExtReal::Finite(0.0));
    }
    let kappa = match kappa_env.eval(q.alpha) {
        ExtReal::Finite(k) if k > 0.0 => k,
        ExtReal::PosInf => return Ok(ExtReal::Finite(0.0)),
        _ => 0.0,
    };
    let base = (q.tau.powf(1.0 / pexp) - kappa.powf(1.0 / pexp)).max(0.0);
    let arg = base.powf(pexp);
    if arg == 0.0 {
        return Ok(ExtReal::Finite(0.0));
    }
    Ok(phi_x_env.eval(arg))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Oracle: `L(0.25)` from a 1e-6 step scan over `p`, refined.
    const L_025: f64 = 0.126_796_653_506_387_25;

    #[test]
    fn hamming_l_values() {
        assert_eq!(hamming_l(0.0).unwrap(), ExtReal::Finite(0.0));
        assert!(hamming_l(1.0).unwrap().is_pos_inf());
        assert!(hamming_l(1.5).is_err());
        let v = hamming_l(0.25).unwrap().to_float();
        assert!((v - L_025).abs() < 1e-12, "{v}");
        // Independent scan.
        let mut best = f64::INFINITY;
        for k in 0..=750_000 {
            let p = k as f64 * 1e-6;
            best = best.min(binary_kl(p, p + 0.25).unwrap().to_float());
        }
        assert!((best - v).abs() < 1e-9);
    }

    #[test]
    fn inverse_and_composite() {
        let a = hamming_l(0.3).unwrap().to_float();
        assert!((hamming_l_inverse(a).unwrap() - 0.3).abs() < 1e-9);
        let q = ExponentQuery::new(a, 0.2).unwrap();
        assert_eq!(hamming_phi_lb(q).unwrap(), ExtReal::Finite(0.0));
        let q = ExponentQuery::new(0.0, 0.25).unwrap();
        assert!((hamming_phi_lb(q).unwrap().to_float() - L_025).abs() < 1e-12);
    }

    #[test]
    fn gaussian_examples() {
        let q = |a, t| ExponentQuery::new(a, t).unwrap();
        assert_eq!(gaussian_bound(q(0.0, 0.0), 2.0, 1.0).unwrap(), 0.0);
        assert!((gaussian_bound(q(0.0, 0.25), 2.0, 1.0).unwrap() - 0.03125).abs() < 1e-15);
        assert!(gaussian_bound(q(0.03125, 0.25), 2.0, 1.0).unwrap() < 1e-15);
    }
}
