//! Exponential tilting and the two I-projection dualities
//!
//! ```text
//! inf { D(Q‖P) : Q(f) ≥ τ }   = sup_{λ≥0} λτ − ln P(e^{λf})
//! sup { Q(f)   : D(Q‖P) ≤ α } = inf_{η>0} ηα + η ln P(e^{f/η})
//! ```

use crate::error::{check_len, Error, Result};
use crate::ext::ExtReal;
use crate::optim::{golden_min, increasing_root};
use crate::prob::distribution::dot;
use crate::prob::Distribution;
use crate::scalar::Real;

/// `Q_λ ∝ p · e^{λf}`.
pub fn tilt<T: Real>(p: &Distribution<T>, f: &[T], lambda: T) -> Result<Distribution<T>> {
    check_len("tilt function", p.len(), f.len())?;
    if !(lambda >= T::zero()) || !lambda.is_finite() {
        return Err(Error::Domain(format!("tilt parameter {lambda} must be finite and ≥ 0")));
    }
    check_finite(f)?;
    let mut q = vec![T::zero(); p.len()];
    tilt_into(p.mass(), f, lambda, &mut q);
    Ok(p.sibling(q))
}

fn check_finite<T: Real>(f: &[T]) -> Result<()> {
    if let Some(i) = f.iter().position(|x| !x.is_finite()) {
        return Err(Error::Domain(format!("function value f[{i}] is not finite")));
    }
    Ok(())
}

/// Support statistics reused by every routine here.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Support<T> {
    pub mean: T,
    pub max: T,
    /// `max |f|` over the support, at least one.
    pub scale: T,
}

pub(crate) fn support_stats<T: Real>(p: &[T], f: &[T]) -> Support<T> {
    let mut max = T::neg_infinity();
    let mut scale = T::one();
    for (&pi, &fi) in p.iter().zip(f) {
        if pi > T::zero() {
            max = max.max(fi);
            scale = scale.max(fi.abs());
        }
    }
    Support {
        mean: dot(p, f),
        max,
        scale,
    }
}

/// Writes `Q_λ` into `out` and returns `(Q_λ(f), ln Σ p e^{λ(f − shift)})`.
fn tilt_shifted<T: Real>(p: &[T], f: &[T], lambda: T, shift: T, out: &mut [T]) -> (T, T) {
    let mut z = T::zero();
    for ((o, &pi), &fi) in out.iter_mut().zip(p).zip(f) {
        *o = if pi > T::zero() {
            pi * (lambda * (fi - shift)).exp()
        } else {
            T::zero()
        };
        z = z + *o;
    }
    let mut mean = T::zero();
    for (o, &fi) in out.iter_mut().zip(f) {
        *o = *o / z;
        if *o > T::zero() {
            mean = mean + *o * fi;
        }
    }
    (mean, z.ln())
}

/// Tilts into `out` and returns `ln P(e^{λf})`.
pub(crate) fn tilt_into<T: Real>(p: &[T], f: &[T], lambda: T, out: &mut [T]) -> T {
    // Shift by the support point with the largest exponent.
    let pick = if lambda >= T::zero() { T::max } else { T::min };
    let shift = p
        .iter()
        .zip(f)
        .filter(|(pi, _)| **pi > T::zero())
        .map(|(_, fi)| *fi)
        .reduce(pick)
        .unwrap_or(T::zero());
    let (_, lz) = tilt_shifted(p, f, lambda, shift, out);
    lambda * shift + lz
}

/// Centered cumulant `K(λ) = ln P(e^{λ(f − P f)})`, accurate for small `λ`.
fn centered_cgf<T: Real>(p: &[T], f: &[T], mean: T, lambda: T) -> T {
    let mut big = false;
    let mut acc = T::zero();
    for (&pi, &fi) in p.iter().zip(f) {
        if pi > T::zero() {
            let x = lambda * (fi - mean);
            if x.abs() > T::lit(0.5) {
                big = true;
                break;
            }
            acc = acc + pi * x.exp_m1();
        }
    }
    if !big {
        return acc.ln_1p();
    }
    let mut m = T::neg_infinity();
    for (&pi, &fi) in p.iter().zip(f) {
        if pi > T::zero() {
            m = m.max(lambda * (fi - mean));
        }
    }
    let mut z = T::zero();
    for (&pi, &fi) in p.iter().zip(f) {
        if pi > T::zero() {
            z = z + pi * (lambda * (fi - mean) - m).exp();
        }
    }
    m + z.ln()
}

/// `ln P(e^{λf})` for `λ ≥ 0`.
pub fn log_mgf<T: Real>(p: &[T], f: &[T], lambda: T) -> T {
    let mean = dot(p, f);
    lambda * mean + centered_cgf(p, f, mean, lambda)
}

/// Solution of `inf { D(Q‖P) : Q(f) ≥ τ }`.
#[derive(Debug, Clone, PartialEq)]
pub struct IProjection<T> {
    pub value: ExtReal<T>,
    /// The optimal tilted law; `None` when the constraint set is empty.
    pub q: Option<Distribution<T>>,
    /// Optimal multiplier; `+∞` when the optimum is the point mass on
    /// `argmax f`.
    pub lambda: ExtReal<T>,
}

/// Value, multiplier and the optimal law written into `out`.
pub(crate) struct Projected<T> {
    pub value: ExtReal<T>,
    pub lambda: ExtReal<T>,
    pub feasible: bool,
}

/// Core of [`iproj_halfspace`] on raw slices. `out` receives the optimal
/// law when one exists.
pub(crate) fn iproj_into<T: Real>(p: &[T], f: &[T], tau: T, out: &mut [T]) -> Projected<T> {
    let s = support_stats(p, f);
    if tau <= s.mean {
        out.copy_from_slice(p);
        return Projected {
            value: ExtReal::Finite(T::zero()),
            lambda: ExtReal::Finite(T::zero()),
            feasible: true,
        };
    }
    let slack = T::tol(1e-12) * s.scale;
    if tau > s.max + slack {
        return Projected {
            value: ExtReal::PosInf,
            lambda: ExtReal::PosInf,
            feasible: false,
        };
    }
    let point_mass = |out: &mut [T]| {
        let mut mass = T::zero();
        for ((o, &pi), &fi) in out.iter_mut().zip(p).zip(f) {
            *o = if pi > T::zero() && fi >= s.max - slack {
                pi
            } else {
                T::zero()
            };
            mass = mass + *o;
        }
        for o in out.iter_mut() {
            *o = *o / mass;
        }
        Projected {
            value: ExtReal::Finite((-mass.min(T::one()).ln()).max(T::zero())),
            lambda: ExtReal::PosInf,
            feasible: true,
        }
    };
    if tau >= s.max - T::tol(1e-10) * s.scale {
        return point_mass(out);
    }
    // Q_λ(f) is nondecreasing with derivative Var_λ(f).
    let mut buf = vec![T::zero(); p.len()];
    let mean_var = |lambda: T, buf: &mut [T]| {
        let (m, _) = tilt_shifted(p, f, lambda, s.max, buf);
        let v: T = buf
            .iter()
            .zip(f)
            .filter(|(q, _)| **q > T::zero())
            .map(|(q, fi)| *q * (*fi - m) * (*fi - m))
            .sum();
        (m, v)
    };
    let ftol = T::tol(1e-13) * s.scale;
    let lambda = increasing_root(
        |l| mean_var(l, &mut buf),
        tau,
        T::zero(),
        T::lit(1e300),
        ftol,
        200,
    );
    let Some(lambda) = lambda else {
        return point_mass(out);
    };
    let (m, lz) = tilt_shifted(p, f, lambda, s.max, out);
    let value = (lambda * (m - s.max) - lz).max(T::zero());
    Projected {
        value: ExtReal::Finite(value),
        lambda: ExtReal::Finite(lambda),
        feasible: true,
    }
}

/// `inf { D(Q‖P) : Q(f) ≥ τ }` with the optimal tilted law and multiplier.
///
/// The returned law always satisfies the constraint: the multiplier is
/// taken on the feasible side of the root of `Q_λ(f) = τ`, and the value is
/// `D(Q_λ‖P)` of that law. Thresholds within `1e-10 · max|f|` of `max f`
/// are resolved by the point mass on `argmax f`.
pub fn iproj_halfspace<T: Real>(p: &Distribution<T>, f: &[T], tau: T) -> Result<IProjection<T>> {
    check_len("iproj function", p.len(), f.len())?;
    check_finite(f)?;
    if tau.is_nan() {
        return Err(Error::Domain("threshold is NaN".into()));
    }
    let mut out = vec![T::zero(); p.len()];
    let r = iproj_into(p.mass(), f, tau, &mut out);
    Ok(IProjection {
        value: r.value,
        q: r.feasible.then(|| p.sibling(out)),
        lambda: r.lambda,
    })
}

/// Solution of `sup { Q(f) : D(Q‖P) ≤ α }`.
#[derive(Debug, Clone, PartialEq)]
pub struct BallMax<T> {
    pub value: T,
    /// A maximizer (the tilted law with `D(Q‖P) ≤ α`).
    pub q: Distribution<T>,
    /// Dual scale `η = 1/λ`; `+∞` at `α = 0`, `0` when the ball holds the
    /// point mass on `argmax f`.
    pub eta: ExtReal<T>,
}

pub(crate) struct Ball<T> {
    pub value: T,
    pub lambda: ExtReal<T>,
}

/// Core of [`kl_ball_max_mean`]. Writes a feasible maximizer into `out`.
pub(crate) fn ball_into<T: Real>(p: &[T], f: &[T], alpha: T, out: &mut [T]) -> Ball<T> {
    let s = support_stats(p, f);
    let slack = T::tol(1e-12) * s.scale;
    let top: T = p
        .iter()
        .zip(f)
        .filter(|(pi, fi)| **pi > T::zero() && **fi >= s.max - slack)
        .map(|(pi, _)| *pi)
        .sum();
    let reach = (-top.min(T::one()).ln()).max(T::zero());
    if alpha <= T::zero() || s.max - s.mean <= slack {
        out.copy_from_slice(p);
        return Ball {
            value: s.mean,
            lambda: ExtReal::Finite(T::zero()),
        };
    }
    if alpha >= reach {
        for ((o, &pi), &fi) in out.iter_mut().zip(p).zip(f) {
            *o = if pi > T::zero() && fi >= s.max - slack {
                pi / top
            } else {
                T::zero()
            };
        }
        return Ball {
            value: s.max,
            lambda: ExtReal::PosInf,
        };
    }
    // D(Q_λ‖P) = λ Q_λ(f) − ln P(e^{λf}) is increasing with derivative λ Var_λ(f).
    let mut buf = vec![T::zero(); p.len()];
    let div = |lambda: T, buf: &mut [T]| {
        let (m, lz) = tilt_shifted(p, f, lambda, s.max, buf);
        let v: T = buf
            .iter()
            .zip(f)
            .filter(|(q, _)| **q > T::zero())
            .map(|(q, fi)| *q * (*fi - m) * (*fi - m))
            .sum();
        ((lambda * (m - s.max) - lz).max(T::zero()), lambda * v)
    };
    // Root on the upper side, then step back to guarantee D ≤ α.
    let hi = increasing_root(
        |l| div(l, &mut buf),
        alpha,
        T::zero(),
        T::lit(1e300),
        T::tol(1e-14) * alpha.max(T::one()),
        200,
    )
    .unwrap_or(T::lit(1e300));
    let mut lam = hi;
    for _ in 0..60 {
        let (d, _) = div(lam, &mut buf);
        if d <= alpha {
            break;
        }
        lam = lam * (T::one() - T::tol(1e-12));
    }
    let (primal, _) = tilt_shifted(p, f, lam, s.max, out);

    // Dual objective in λ = 1/η: P f + (α + K(λ)) / λ.
    let h = |l: T| s.mean + (alpha + centered_cgf(p, f, s.mean, l)) / l;
    let ln_lam = lam.ln();
    let (u, hv) = golden_min(
        |u: T| h(u.exp()),
        ln_lam - T::one(),
        ln_lam + T::one(),
        T::tol(1e-12),
        120,
    );
    let dual = hv.min(h(lam));
    let _ = u;
    // The dual upper-bounds the sup and the tilt lower-bounds it.
    let value = dual.max(primal).min(s.max);
    Ball {
        value,
        lambda: ExtReal::Finite(lam),
    }
}

/// `sup { Q(f) : D(Q‖P) ≤ α }`, by golden-section over `ln η` on the dual,
/// with the maximizer recovered as the tilt at the dual optimum.
pub fn kl_ball_max_mean<T: Real>(p: &Distribution<T>, f: &[T], alpha: T) -> Result<BallMax<T>> {
    check_len("ball function", p.len(), f.len())?;
    check_finite(f)?;
    if !(alpha >= T::zero()) {
        return Err(Error::Domain(format!("radius {alpha} must be ≥ 0")));
    }
    let mut out = vec![T::zero(); p.len()];
    let b = ball_into(p.mass(), f, alpha, &mut out);
    let eta = match b.lambda {
        ExtReal::Finite(l) if l > T::zero() => ExtReal::Finite(T::one() / l),
        ExtReal::Finite(_) => ExtReal::PosInf,
        _ => ExtReal::Finite(T::zero()),
    };
    Ok(BallMax {
        value: b.value,
        q: p.sibling(out),
        eta,
    })
}

/// Value-only ball maximum.
pub(crate) fn ball_value<T: Real>(p: &[T], f: &[T], alpha: T) -> T {
    let mut out = vec![T::zero(); p.len()];
    ball_into(p, f, alpha, &mut out).value
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prob::kl;
    use proptest::prelude::*;

    const D_34_12: f64 = 0.130_812_035_941_136_97;

    fn bern(p: f64) -> Distribution<f64> {
        Distribution::bernoulli(p).unwrap()
    }

    #[test]
    fn tilt_examples() {
        let p = bern(0.5);
        assert_eq!(tilt(&p, &[0.0, 1.0], 0.0).unwrap(), p);
        let q = tilt(&Distribution::from_mass(vec![0.2_f64, 0.3, 0.5]).unwrap(), &[2.0; 3], 5.0)
            .unwrap();
        assert!((q.mass()[1] - 0.3).abs() < 1e-15);
        let q = tilt(&p, &[0.0, 1.0], 3f64.ln()).unwrap();
        assert!((q.mass()[1] - 0.75).abs() < 1e-15);
    }

    #[test]
    fn iproj_examples() {
        let p = bern(0.5);
        let r = iproj_halfspace(&p, &[0.0, 1.0], 0.25).unwrap();
        assert_eq!(r.value, ExtReal::Finite(0.0));
        assert_eq!(r.q.unwrap(), p);

        let r = iproj_halfspace(&p, &[0.0, 1.0], 0.75).unwrap();
        assert!((r.value.finite().unwrap() - D_34_12).abs() < 1e-12);
        assert!((r.lambda.finite().unwrap() - 3f64.ln()).abs() < 1e-9);
        let q = r.q.unwrap();
        assert!(q.mass()[1] >= 0.75 && q.mass()[1] < 0.75 + 1e-12);

        let r = iproj_halfspace(&p, &[0.0, 1.0], 1.0).unwrap();
        assert!((r.value.finite().unwrap() - std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(r.lambda, ExtReal::PosInf);

        let r = iproj_halfspace(&p, &[0.0, 1.0], 1.5).unwrap();
        assert_eq!(r.value, ExtReal::PosInf);
        assert!(r.q.is_none());
    }

    #[test]
    fn ball_examples() {
        let p = bern(0.5);
        let f = [0.0, 1.0];
        assert_eq!(kl_ball_max_mean(&p, &f, 0.0).unwrap().value, 0.5);
        assert_eq!(kl_ball_max_mean(&p, &f, 10.0).unwrap().value, 1.0);
        let b = kl_ball_max_mean(&p, &f, D_34_12).unwrap();
        assert!((b.value - 0.75).abs() < 1e-9, "{}", b.value);
        assert!(kl(&b.q, &p).unwrap().finite().unwrap() <= D_34_12 + 1e-15);
        assert!((b.eta.finite().unwrap() - 1.0 / 3f64.ln()).abs() < 1e-6);
    }

    #[test]
    fn ball_tiny_radius() {
        let p = Distribution::from_mass(vec![0.2_f64, 0.5, 0.3]).unwrap();
        let f = [0.3_f64, -1.0, 2.0];
        let alpha = 1e-10;
        let b = kl_ball_max_mean(&p, &f, alpha).unwrap();
        let m = p.expect(&f).unwrap();
        let var: f64 = p.mass().iter().zip(&f).map(|(q, x)| q * (x - m).powi(2)).sum();
        // Second-order expansion sup ≈ m + sqrt(2 α Var).
        assert!((b.value - (m + (2.0 * alpha * var).sqrt())).abs() < 1e-9);
    }

    #[test]
    fn f32_iproj() {
        let p = Distribution::<f32>::bernoulli(0.5).unwrap();
        let r = iproj_halfspace(&p, &[0.0, 1.0], 0.75).unwrap();
        assert!((r.value.finite().unwrap() - D_34_12 as f32).abs() < 1e-5);
    }

    fn instance() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<f64>, f64)> {
        (2usize..=6).prop_flat_map(|k| {
            (
                proptest::collection::vec(0.01..1.0_f64, k),
                proptest::collection::vec(0.01..1.0_f64, k),
                proptest::collection::vec(-3.0..3.0_f64, k),
                0.0..4.0_f64,
            )
        })
    }

    fn norm(v: Vec<f64>) -> Distribution<f64> {
        let s: f64 = v.iter().sum();
        Distribution::from_mass(v.into_iter().map(|x| x / s).collect()).unwrap()
    }

    proptest! {
        #[test]
        fn tilting_identity((q, p, f, lam) in instance()) {
            let q = norm(q);
            let p = norm(p);
            let t = tilt(&p, &f, lam).unwrap();
            let d = |a: &Distribution<f64>, b: &Distribution<f64>| kl(a, b).unwrap().finite().unwrap();
            let lhs = d(&q, &p) - d(&t, &p);
            let rhs = d(&q, &t) + lam * (q.expect(&f).unwrap() - t.expect(&f).unwrap());
            prop_assert!((lhs - rhs).abs() <= 1e-10);
        }

        #[test]
        fn iproj_is_feasible_and_consistent((_q, p, f, s) in instance()) {
            let p = norm(p);
            let lo = p.expect(&f).unwrap();
            let hi = f.iter().cloned().fold(f64::MIN, f64::max);
            let tau = lo + (hi - lo) * (s / 4.0);
            let r = iproj_halfspace(&p, &f, tau).unwrap();
            let q = r.q.unwrap();
            prop_assert!(q.expect(&f).unwrap() >= tau - 1e-10 * hi.abs().max(1.0));
            let v = r.value.finite().unwrap();
            prop_assert!((kl(&q, &p).unwrap().finite().unwrap() - v).abs() < 1e-9);
            // Round trip through the ball dual.
            let b = kl_ball_max_mean(&p, &f, v).unwrap();
            prop_assert!(b.value >= tau - 1e-7);
        }
    }
}
