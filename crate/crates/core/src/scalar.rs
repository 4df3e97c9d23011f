//! Scalar abstractions.
//!
//! The transportation simplex only needs ordered-field arithmetic, so it is
//! generic over [`Field`] and runs unchanged on `f32`, `f64` and exact
//! rationals. Everything that takes logarithms or exponentials needs
//! [`Real`].

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_rational::Ratio;
use num_traits::{Float, FloatConst, FromPrimitive, Num, Signed, ToPrimitive};

/// Ordered field arithmetic for the exact LP solvers.
pub trait Field:
    Num + Copy + PartialOrd + Signed + Debug + Send + Sync + 'static
{
    /// Reduced costs above `-pivot_tol()` count as nonnegative.
    fn pivot_tol() -> Self;

    /// Allowed mismatch between supply and demand totals, relative to the
    /// total.
    fn balance_tol() -> Self;

    /// Slack allowed when validating metric axioms.
    fn metric_tol() -> Self;

    /// Lossy view used for reporting only.
    fn approx_f64(self) -> f64;

    fn is_finite_value(self) -> bool {
        true
    }

    fn max_of(self, other: Self) -> Self {
        if other > self {
            other
        } else {
            self
        }
    }

    fn min_of(self, other: Self) -> Self {
        if other < self {
            other
        } else {
            self
        }
    }
}

impl Field for f64 {
    fn pivot_tol() -> Self {
        1e-11
    }
    fn balance_tol() -> Self {
        1e-9
    }
    fn metric_tol() -> Self {
        1e-12
    }
    fn approx_f64(self) -> f64 {
        self
    }
    fn is_finite_value(self) -> bool {
        self.is_finite()
    }
}

impl Field for f32 {
    fn pivot_tol() -> Self {
        1e-5
    }
    fn balance_tol() -> Self {
        1e-5
    }
    fn metric_tol() -> Self {
        1e-6
    }
    fn approx_f64(self) -> f64 {
        self as f64
    }
    fn is_finite_value(self) -> bool {
        self.is_finite()
    }
}

impl Field for Ratio<i64> {
    fn pivot_tol() -> Self {
        Ratio::from_integer(0)
    }
    fn balance_tol() -> Self {
        Ratio::from_integer(0)
    }
    fn metric_tol() -> Self {
        Ratio::from_integer(0)
    }
    fn approx_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

/// Floating-point scalar for the information-theoretic code.
pub trait Real: Field + Float + FloatConst + FromPrimitive + Display + Sum {
    /// Converts an `f64` literal.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable")
    }

    /// A tolerance of nominal size `x`, never finer than the type can resolve.
    fn tol(x: f64) -> Self {
        let floor = Self::epsilon() * Self::lit(16.0);
        Self::lit(x).max(floor)
    }
}

impl Real for f64 {}
impl Real for f32 {}

/// Numerically stable `ln Σ exp(v_i)` over the entries with `weight > 0`,
/// computing `ln Σ w_i exp(v_i)`.
pub fn log_sum_exp_weighted<T: Real>(weights: &[T], values: &[T]) -> T {
    let mut max = T::neg_infinity();
    for (w, v) in weights.iter().zip(values) {
        if *w > T::zero() && *v > max {
            max = *v;
        }
    }
    if max == T::neg_infinity() {
        return T::neg_infinity();
    }
    let mut acc = T::zero();
    for (w, v) in weights.iter().zip(values) {
        if *w > T::zero() {
            acc = acc + *w * (*v - max).exp();
        }
    }
    max + acc.ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weighted_lse_skips_zero_weights() {
        let w = [0.5_f64, 0.0, 0.5];
        let v = [0.0, 1e6, 0.0];
        assert!((log_sum_exp_weighted(&w, &v) - 0.0).abs() < 1e-15);
    }

    #[test]
    fn weighted_lse_large_values() {
        let w = [0.5_f64, 0.5];
        let v = [1000.0, 1000.0];
        assert!((log_sum_exp_weighted(&w, &v) - 1000.0).abs() < 1e-12);
    }

    #[test]
    fn tolerance_floor_for_f32() {
        assert!(f32::tol(1e-12) > 1e-7);
        assert_eq!(f64::tol(1e-9), 1e-9);
    }
}
