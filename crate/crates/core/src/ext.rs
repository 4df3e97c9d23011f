//! Extended reals with explicit infinity markers.

use std::cmp::Ordering;
use std::fmt;
use std::ops::Add;

use crate::scalar::Real;

/// A real value or an explicit infinity. Never NaN.
///
/// Addition saturates; when opposite infinities meet, `+∞` wins (every
/// quantity here is an infimum, and `inf ∅ = +∞`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExtReal<T> {
    NegInf,
    Finite(T),
    PosInf,
}

impl<T: Real> ExtReal<T> {
    pub const INFINITY: Self = ExtReal::PosInf;

    /// Lifts a float, mapping `±inf` to the markers. Panics on NaN.
    pub fn from_float(x: T) -> Self {
        assert!(!x.is_nan(), "ExtReal::from_float called with NaN");
        if x == T::infinity() {
            ExtReal::PosInf
        } else if x == T::neg_infinity() {
            ExtReal::NegInf
        } else {
            ExtReal::Finite(x)
        }
    }

    pub fn finite(self) -> Option<T> {
        match self {
            ExtReal::Finite(x) => Some(x),
            _ => None,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, ExtReal::Finite(_))
    }

    pub fn is_pos_inf(self) -> bool {
        matches!(self, ExtReal::PosInf)
    }

    /// Float view with IEEE infinities.
    pub fn to_float(self) -> T {
        match self {
            ExtReal::NegInf => T::neg_infinity(),
            ExtReal::Finite(x) => x,
            ExtReal::PosInf => T::infinity(),
        }
    }

    /// Multiplies by a nonnegative weight with `0 · ∞ = 0`.
    pub fn scale(self, w: T) -> Self {
        debug_assert!(w >= T::zero());
        if w == T::zero() {
            return ExtReal::Finite(T::zero());
        }
        match self {
            ExtReal::Finite(x) => ExtReal::Finite(x * w),
            other => other,
        }
    }

    pub fn min(self, other: Self) -> Self {
        if other < self {
            other
        } else {
            self
        }
    }

    pub fn max(self, other: Self) -> Self {
        if other > self {
            other
        } else {
            self
        }
    }
}

impl<T: Real> Add for ExtReal<T> {
    type Output = Self;

    fn add(self, rhs: Self) -> Self {
        match (self, rhs) {
            (ExtReal::PosInf, _) | (_, ExtReal::PosInf) => ExtReal::PosInf,
            (ExtReal::NegInf, _) | (_, ExtReal::NegInf) => ExtReal::NegInf,
            (ExtReal::Finite(a), ExtReal::Finite(b)) => ExtReal::Finite(a + b),
        }
    }
}

impl<T: Real> PartialOrd for ExtReal<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        use ExtReal::*;
        match (self, other) {
            (NegInf, NegInf) | (PosInf, PosInf) => Some(Ordering::Equal),
            (NegInf, _) | (_, PosInf) => Some(Ordering::Less),
            (_, NegInf) | (PosInf, _) => Some(Ordering::Greater),
            (Finite(a), Finite(b)) => a.partial_cmp(b),
        }
    }
}

impl<T: Real> From<T> for ExtReal<T> {
    fn from(x: T) -> Self {
        ExtReal::from_float(x)
    }
}

impl<T: Real> fmt::Display for ExtReal<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtReal::NegInf => f.write_str("-inf"),
            ExtReal::PosInf => f.write_str("inf"),
            ExtReal::Finite(x) => write!(f, "{x}"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    type E = ExtReal<f64>;

    #[test]
    fn saturating_add() {
        assert_eq!(E::Finite(1.0) + E::PosInf, E::PosInf);
        assert_eq!(E::NegInf + E::Finite(3.0), E::NegInf);
        assert_eq!(E::PosInf + E::NegInf, E::PosInf);
        assert_eq!(E::Finite(1.5) + E::Finite(2.0), E::Finite(3.5));
    }

    #[test]
    fn zero_times_infinity_is_zero() {
        assert_eq!(E::PosInf.scale(0.0), E::Finite(0.0));
        assert_eq!(E::PosInf.scale(0.5), E::PosInf);
    }

    #[test]
    fn ordering() {
        assert!(E::NegInf < E::Finite(-1e300));
        assert!(E::Finite(1e300) < E::PosInf);
        assert_eq!(E::from_float(f64::INFINITY), E::PosInf);
        assert_eq!(E::Finite(2.0).min(E::PosInf), E::Finite(2.0));
    }

    #[test]
    #[should_panic]
    fn nan_rejected() {
        let _ = E::from_float(f64::NAN);
    }
}
