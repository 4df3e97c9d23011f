//! Dual formulas: every evaluated potential pair is a one-sided bound on
//! its primal exponent, so reported values always carry a certificate.
//!
//! Two reductions keep the evaluations exact rather than grid based:
//!
//! * `inf_{η>0} ηα + η ln P(e^{(λ/η) f})` is positively homogeneous in `λ`;
//!   writing `η = λs` it equals `λ · B_α(f)` with
//!   `B_α(f) = inf_{s>0} sα + s ln P(e^{f/s})`, a 1D convex problem. The
//!   joint `(λ, η)` search therefore splits into a search over `s` and a
//!   1D Legendre transform in `λ`.
//! * `sup_{λ≥0} λθ − ln P(e^{λg})` is concave in `λ` and solved by
//!   bisection on its derivative `θ − Q_λ(g)`.

mod metric;
mod phi;
mod psi;

pub use metric::{
    abs_lg, abs_r, dual_varphi_x, lipschitz_vertices, AbsR, LgValue, LipschitzVector, LogMgfMax,
    MetricSpace, VERTEX_POINTS,
};
pub use phi::{
    check_equivalence, check_equivalence_refined, dual_phi_geq, dual_varphi_geq, DualEstimate, EquivalenceReport, PhiCertificate};
pub use psi::{dual_psi, DualPsi, PsiCandidate, PsiCertificate};

use crate::ext::ExtReal;
use crate::prob::{dot, tilt_into};

/// Largest support value of `g` under `p` and the mass sitting there.
fn top(p: &[f64], g: &[f64]) -> (f64, f64) {
    let m = p
        .iter()
        .zip(g)
        .filter(|(pi, _)| **pi > 0.0)
        .map(|(_, x)| *x)
        .fold(f64::NEG_INFINITY, f64::max);
    let slack = 1e-12 * m.abs().max(1.0);
    let mass = p.iter().zip(g).filter(|(pi, x)| **pi > 0.0 && **x >= m - slack).map(|(pi, _)| pi).sum();
    (m, mass)
}

/// `sup_{λ ≥ 0} λθ − ln P(e^{λg})` and its smallest maximizer (`+∞` when
/// the supremum is only approached).
pub(crate) fn legendre(p: &[f64], g: &[f64], theta: f64) -> (ExtReal<f64>, f64) {
    let mean = dot(p, g);
    if theta <= mean {
        return (ExtReal::Finite(0.0), 0.0);
    }
    let (m, mass) = top(p, g);
    let slack = 1e-12 * m.abs().max(theta.abs()).max(1.0);
    if theta > m + slack {
        return (ExtReal::PosInf, f64::INFINITY);
    }
    if theta >= m - slack {
        return (ExtReal::Finite(-mass.ln()), f64::INFINITY);
    }
    let mut out = vec![0.0; p.len()];
    let mut slope = |l: f64| {
        tilt_into(p, g, l, &mut out);
        theta - dot(&out, g)
    };
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    while slope(hi) > 0.0 {
        lo = hi;
        hi *= 2.0;
        if hi > 1e15 {
            break;
        }
    }
    for _ in 0..300 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if slope(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let lz = tilt_into(p, g, hi, &mut out);
    (ExtReal::Finite((hi * theta - lz).max(0.0)), hi)
}

/// `B_α(f) = inf_{s>0} sα + s ln P(e^{f/s})` and the minimizing `s`
/// (`+∞` for `α = 0`, where the value is `P(f)`).
pub(crate) fn ball_dual(p: &[f64], f: &[f64], alpha: f64) -> (f64, f64) {
    if alpha <= 0.0 {
        return (dot(p, f), f64::INFINITY);
    }
    let mut out = vec![0.0; p.len()];
    let mut h = |t: f64| {
        let s = t.exp();
        s * alpha + s * tilt_into(p, f, 1.0 / s, &mut out)
    };
    let (t, v) = crate::optim::scan_golden_min(&mut h, (1e-9f64).ln(), (1e9f64).ln(), 240, 1e-12, 300);
    // s → 0 gives the support maximum.
    let (m, _) = top(p, f);
    if m <= v {
        (m, 0.0)
    } else {
        (v, t.exp())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prob::{ball_value, binary_kl};

    #[test]
    fn legendre_binary() {
        let p = [0.5, 0.5];
        let g = [0.0, 1.0];
        let (v, l) = legendre(&p, &g, 0.75);
        assert!((v.to_float() - binary_kl(0.75, 0.5).unwrap().to_float()).abs() < 1e-12);
        assert!((l - 3f64.ln()).abs() < 1e-9);
        assert_eq!(legendre(&p, &g, 0.2).0, ExtReal::Finite(0.0));
        assert!((legendre(&p, &g, 1.0).0.to_float() - 2f64.ln()).abs() < 1e-15);
        assert!(legendre(&p, &g, 1.1).0.is_pos_inf());
    }

    #[test]
    fn ball_dual_matches_primal() {
        let p = [0.2, 0.5, 0.3];
        let f = [1.0, -0.5, 2.0];
        for a in [1e-4, 0.01, 0.3, 2.0] {
            let (b, _) = ball_dual(&p, &f, a);
            assert!((b - ball_value(&p, &f, a)).abs() < 1e-8, "{a}: {b}");
        }
        assert!((ball_dual(&p, &f, 0.0).0 - dot(&p, &f)).abs() < 1e-15);
        // Beyond −ln p(max) the ball contains the point mass.
        assert!((ball_dual(&p, &f, 5.0).0 - 2.0).abs() < 1e-12);
    }
}
