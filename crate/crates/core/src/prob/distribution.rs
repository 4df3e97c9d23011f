use std::collections::HashSet;
use std::sync::Arc;

use crate::error::{check_len, Error, Result};
use crate::scalar::Real;

/// Ordered, shared list of symbol labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alphabet(Arc<[String]>);

impl Alphabet {
    pub fn new(labels: Vec<String>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(labels.len());
        for l in &labels {
            if !seen.insert(l.as_str()) {
                return Err(Error::InvalidDistribution(format!("duplicate label {l:?}")));
            }
        }
        Ok(Alphabet(labels.into()))
    }

    /// Labels `"0"`, `"1"`, ... `"k-1"`.
    pub fn indexed(k: usize) -> Self {
        Alphabet((0..k).map(|i| i.to_string()).collect::<Vec<_>>().into())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.0
    }
}

/// A probability vector over a finite labelled alphabet.
///
/// Masses are nonnegative and sum to one. Inputs whose sum is within `1e-9`
/// of one are renormalized; anything further off is rejected.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution<T> {
    alphabet: Alphabet,
    mass: Vec<T>,
}

impl<T: Real> Distribution<T> {
    pub fn new(alphabet: Alphabet, mass: Vec<T>) -> Result<Self> {
        check_len("distribution masses", alphabet.len(), mass.len())?;
        if mass.is_empty() {
            return Err(Error::InvalidDistribution("empty alphabet".into()));
        }
        for (i, &m) in mass.iter().enumerate() {
            if !m.is_finite() || m < T::zero() {
                return Err(Error::InvalidDistribution(format!(
                    "mass[{i}] = {m} is not a nonnegative finite number"
                )));
            }
        }
        let sum: T = mass.iter().copied().sum();
        if (sum - T::one()).abs() > T::tol(1e-9) {
            return Err(Error::InvalidDistribution(format!(
                "masses sum to {sum}, not 1"
            )));
        }
        Ok(Self::renormalized(alphabet, mass))
    }

    /// Masses over indexed labels.
    pub fn from_mass(mass: Vec<T>) -> Result<Self> {
        Self::new(Alphabet::indexed(mass.len()), mass)
    }

    pub fn with_labels(labels: Vec<String>, mass: Vec<T>) -> Result<Self> {
        Self::new(Alphabet::new(labels)?, mass)
    }

    /// Divides by the total without validation. Callers guarantee a
    /// nonnegative vector with positive total.
    pub(crate) fn renormalized(alphabet: Alphabet, mut mass: Vec<T>) -> Self {
        let sum: T = mass.iter().copied().sum();
        for m in &mut mass {
            *m = (*m / sum).max(T::zero());
        }
        Distribution { alphabet, mass }
    }

    /// Builds from solver output on the same alphabet as `self`.
    pub(crate) fn sibling(&self, mass: Vec<T>) -> Self {
        Self::renormalized(self.alphabet.clone(), mass)
    }

    pub fn uniform(k: usize) -> Self {
        let m = T::one() / T::lit(k as f64);
        Distribution {
            alphabet: Alphabet::indexed(k),
            mass: vec![m; k],
        }
    }

    pub fn point(k: usize, at: usize) -> Self {
        let mut mass = vec![T::zero(); k];
        mass[at] = T::one();
        Distribution {
            alphabet: Alphabet::indexed(k),
            mass,
        }
    }

    /// `Bern(p)` on `{0, 1}` with mass `p` on symbol `1`.
    pub fn bernoulli(p: T) -> Result<Self> {
        if !(p >= T::zero() && p <= T::one()) {
            return Err(Error::Domain(format!("Bernoulli parameter {p} outside [0,1]")));
        }
        Ok(Distribution {
            alphabet: Alphabet::indexed(2),
            mass: vec![T::one() - p, p],
        })
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn labels(&self) -> &[String] {
        self.alphabet.labels()
    }

    pub fn mass(&self) -> &[T] {
        &self.mass
    }

    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    /// Indices with positive mass.
    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.mass
            .iter()
            .enumerate()
            .filter(|(_, m)| **m > T::zero())
            .map(|(i, _)| i)
    }

    /// `Σ mass_i f_i`.
    pub fn expect(&self, f: &[T]) -> Result<T> {
        check_len("function values", self.len(), f.len())?;
        Ok(dot(&self.mass, f))
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.mass
            .iter()
            .zip(&other.mass)
            .map(|(a, b)| (*a - *b).abs())
            .fold(T::zero(), |a, b| a.max(b))
    }
}

/// Expectation over the positive-mass entries only, so `0 · ±∞` never
/// arises.
pub(crate) fn dot<T: Real>(p: &[T], f: &[T]) -> T {
    p.iter()
        .zip(f)
        .filter(|(m, _)| **m > T::zero())
        .map(|(m, v)| *m * *v)
        .sum()
}

/// One conditional distribution per conditioning symbol, all over the
/// same output alphabet.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel<T> {
    rows: Vec<Distribution<T>>,
}

impl<T: Real> Kernel<T> {
    pub fn new(rows: Vec<Distribution<T>>) -> Result<Self> {
        if let Some(first) = rows.first() {
            for r in &rows[1..] {
                check_len("kernel row", first.len(), r.len())?;
            }
        }
        Ok(Kernel { rows })
    }

    pub fn rows(&self) -> &[Distribution<T>] {
        &self.rows
    }

    pub fn row(&self, w: usize) -> &Distribution<T> {
        &self.rows[w]
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Output alphabet size.
    pub fn width(&self) -> usize {
        self.rows.first().map_or(0, |r| r.len())
    }
}

/// A mixing weight over `W` together with the kernel it mixes.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedKernel<T> {
    pub weight: Distribution<T>,
    pub kernel: Kernel<T>,
}

impl<T: Real> WeightedKernel<T> {
    pub fn new(weight: Distribution<T>, kernel: Kernel<T>) -> Result<Self> {
        check_len("weight vs kernel rows", kernel.len(), weight.len())?;
        Ok(WeightedKernel { weight, kernel })
    }

    /// `Σ_w weight(w) · row_w`.
    pub fn mixture(&self) -> Distribution<T> {
        let k = self.kernel.width();
        let mut mass = vec![T::zero(); k];
        for (w, row) in self.weight.mass().iter().zip(self.kernel.rows()) {
            for (m, r) in mass.iter_mut().zip(row.mass()) {
                *m = *m + *w * *r;
            }
        }
        self.kernel.rows()[0].sibling(mass)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalizes_small_rounding() {
        let d = Distribution::from_mass(vec![0.5_f64, 0.5 + 5e-10]).unwrap();
        let s: f64 = d.mass().iter().sum();
        assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_sum() {
        let e = Distribution::from_mass(vec![0.5_f64, 0.4]).unwrap_err();
        assert!(matches!(e, Error::InvalidDistribution(_)));
    }

    #[test]
    fn rejects_negative_and_nan() {
        assert!(Distribution::from_mass(vec![1.5_f64, -0.5]).is_err());
        assert!(Distribution::from_mass(vec![f64::NAN, 1.0]).is_err());
    }

    #[test]
    fn rejects_duplicate_labels() {
        let e = Distribution::<f64>::with_labels(vec!["a".into(), "a".into()], vec![0.5, 0.5]);
        assert!(e.is_err());
    }

    #[test]
    fn works_in_f32() {
        let d = Distribution::<f32>::from_mass(vec![0.25, 0.75]).unwrap();
        assert_eq!(d.expect(&[0.0, 1.0]).unwrap(), 0.75);
    }

    #[test]
    fn mixture_of_weighted_kernel() {
        let k = Kernel::new(vec![
            Distribution::bernoulli(0.75_f64).unwrap(),
            Distribution::bernoulli(0.25).unwrap(),
        ])
        .unwrap();
        let wk = WeightedKernel::new(Distribution::uniform(2), k).unwrap();
        assert_eq!(wk.mixture().mass(), &[0.5, 0.5]);
    }
}
