use crate::error::{check_len, Error, Result};
use crate::ext::ExtReal;
use crate::prob::{Distribution, Kernel};
use crate::scalar::Real;

/// `D(q‖p) = Σ q_i ln(q_i/p_i)` in nats.
///
/// Only lengths are compared; labels are assumed to be aligned by index.
pub fn kl<T: Real>(q: &Distribution<T>, p: &Distribution<T>) -> Result<ExtReal<T>> {
    check_len("kl alphabets", p.len(), q.len())?;
    Ok(kl_slice(q.mass(), p.mass()))
}

pub(crate) fn kl_slice<T: Real>(q: &[T], p: &[T]) -> ExtReal<T> {
    let mut acc = T::zero();
    for (&qi, &pi) in q.iter().zip(p) {
        if qi <= T::zero() {
            continue;
        }
        if pi <= T::zero() {
            return ExtReal::PosInf;
        }
        acc = acc + qi * (qi / pi).ln();
    }
    // Rounding can leave tiny negatives when q ≈ p.
    ExtReal::Finite(acc.max(T::zero()))
}

/// `Σ_w w(w) · D(q_w‖p)`, skipping rows with zero weight.
pub fn conditional_kl<T: Real>(
    q: &Kernel<T>,
    p: &Distribution<T>,
    w: &Distribution<T>,
) -> Result<ExtReal<T>> {
    check_len("conditioning weights", q.len(), w.len())?;
    check_len("kernel output alphabet", p.len(), q.width())?;
    let mut acc = ExtReal::Finite(T::zero());
    for (row, &wi) in q.rows().iter().zip(w.mass()) {
        if wi > T::zero() {
            acc = acc + kl_slice(row.mass(), p.mass()).scale(wi);
        }
    }
    Ok(acc)
}

/// Total variation `½ Σ |q_i − p_i|`.
pub fn tv<T: Real>(q: &Distribution<T>, p: &Distribution<T>) -> Result<T> {
    check_len("tv alphabets", p.len(), q.len())?;
    let s: T = q
        .mass()
        .iter()
        .zip(p.mass())
        .map(|(a, b)| (*a - *b).abs())
        .sum();
    Ok(s * T::lit(0.5))
}

/// Binary relative entropy `d(p‖q)` between `Bern(p)` and `Bern(q)`.
///
/// This is the reading used for the two-point divergence in the Hamming
/// worst-case function `L`.
pub fn binary_kl<T: Real>(p: T, q: T) -> Result<ExtReal<T>> {
    let unit = |x: T| x >= T::zero() && x <= T::one();
    if !unit(p) || !unit(q) {
        return Err(Error::Domain(format!(
            "binary_kl arguments ({p}, {q}) must lie in [0,1]"
        )));
    }
    Ok(kl_slice(&[T::one() - p, p], &[T::one() - q, q]))
}

/// Rényi divergence of order zero, `−ln p(supp q)`.
pub fn renyi0<T: Real>(q: &Distribution<T>, p: &Distribution<T>) -> Result<ExtReal<T>> {
    check_len("renyi0 alphabets", p.len(), q.len())?;
    let covered: T = q
        .mass()
        .iter()
        .zip(p.mass())
        .filter(|(qi, _)| **qi > T::zero())
        .map(|(_, pi)| *pi)
        .sum();
    if covered <= T::zero() {
        return Ok(ExtReal::PosInf);
    }
    Ok(ExtReal::Finite((-covered.min(T::one()).ln()).max(T::zero())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const D_34_12: f64 = 0.130_812_035_941_136_97;

    fn bern(p: f64) -> Distribution<f64> {
        Distribution::bernoulli(p).unwrap()
    }

    #[test]
    fn kl_examples() {
        assert_eq!(kl(&bern(0.3), &bern(0.3)).unwrap(), ExtReal::Finite(0.0));
        let v = kl(&bern(1.0), &bern(0.5)).unwrap().finite().unwrap();
        assert!((v - std::f64::consts::LN_2).abs() < 1e-15);
        let v = kl(&bern(0.75), &bern(0.5)).unwrap().finite().unwrap();
        assert!((v - D_34_12).abs() < 1e-15);
        assert_eq!(kl(&bern(0.5), &bern(0.0)).unwrap(), ExtReal::PosInf);
    }

    #[test]
    fn kl_dimension_error() {
        let e = kl(&bern(0.5), &Distribution::uniform(3)).unwrap_err();
        assert!(matches!(e, Error::Dimension { .. }));
    }

    #[test]
    fn conditional_kl_examples() {
        let k = Kernel::new(vec![bern(0.75), bern(0.25)]).unwrap();
        let w = Distribution::uniform(2);
        let v = conditional_kl(&k, &bern(0.5), &w).unwrap().finite().unwrap();
        assert!((v - D_34_12).abs() < 1e-15);
        let w0 = Distribution::point(2, 1);
        let v = conditional_kl(&k, &bern(0.5), &w0).unwrap().finite().unwrap();
        assert!((v - D_34_12).abs() < 1e-15);
        // An infinite row with zero weight does not contaminate.
        let k = Kernel::new(vec![bern(1.0), bern(0.0)]).unwrap();
        let v = conditional_kl(&k, &bern(0.0), &Distribution::point(2, 1)).unwrap();
        assert_eq!(v, ExtReal::Finite(0.0));
    }

    #[test]
    fn tv_and_binary_examples() {
        assert_eq!(tv(&bern(1.0), &bern(0.0)).unwrap(), 1.0);
        assert_eq!(tv(&bern(0.75), &bern(0.5)).unwrap(), 0.25);
        let v = binary_kl(0.75, 0.5).unwrap().finite().unwrap();
        assert!((v - D_34_12).abs() < 1e-15);
        assert!(binary_kl(1.2, 0.5).is_err());
        assert_eq!(binary_kl(0.2, 0.2).unwrap(), ExtReal::Finite(0.0));
    }

    #[test]
    fn renyi0_examples() {
        assert_eq!(renyi0(&bern(0.5), &bern(0.25)).unwrap(), ExtReal::Finite(0.0));
        let v = renyi0(&bern(1.0), &bern(0.5)).unwrap().finite().unwrap();
        assert!((v - std::f64::consts::LN_2).abs() < 1e-15);
    }

    fn simplex(k: usize) -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(0.0..1.0_f64, k).prop_filter_map("positive", |v| {
            let s: f64 = v.iter().sum();
            (s > 1e-3).then(|| v.iter().map(|x| x / s).collect())
        })
    }

    fn pair() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (1usize..=8).prop_flat_map(|k| (simplex(k), simplex(k)))
    }

    proptest! {
        #[test]
        fn kl_nonnegative_and_pinsker((q, p) in pair()) {
            let q = Distribution::from_mass(q).unwrap();
            let p = Distribution::from_mass(p).unwrap();
            let d = kl(&q, &p).unwrap();
            prop_assert!(d >= ExtReal::Finite(0.0));
            if let Some(d) = d.finite() {
                prop_assert!(tv(&q, &p).unwrap() <= (2.0 * d).sqrt() + 1e-12);
            }
            prop_assert!(renyi0(&q, &p).unwrap() <= d);
            prop_assert_eq!(kl(&p, &p).unwrap(), ExtReal::Finite(0.0));
        }
    }
}
