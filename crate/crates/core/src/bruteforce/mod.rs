//! Finite-n ground truth on product spaces `𝒳ⁿ`.
//!
//! Points of `𝒳ⁿ` are enumerated lexicographically (first coordinate most
//! significant), so a point index is the base-`|𝒳|` reading of its digits.
//! Subsets of up to [`SUBSET_POINTS`] points are `u64` codes (bit `i` is
//! point `i`); larger sets use [`SubsetMask`].

mod gamma;
mod levels;
mod sweeps;
mod types;

pub use gamma::{exponents_e, gamma_exhaustive, Exponents, GammaResult, Sampling};
pub use levels::{convergence_report, gamma_levels, ConvergenceRow, Levels};
pub use sweeps::{
    dimension_free_check, strassen_gt, talagrand_sweep, DimensionFreeReport, Strassen,
    TalagrandReport,
};
pub use types::{enlarge_types, gamma_exchangeable, ExchangeableGamma, TypeSet};

use crate::error::{check_len, Error, Result};
use crate::ot::CostMatrix;

/// Largest product space for mask construction.
pub const MASK_POINTS: usize = 1 << 25;
/// Largest product space handled by `u64` subset codes.
pub const SUBSET_POINTS: usize = 25;
/// Largest product space enumerated exhaustively (`2^16` subsets).
pub const EXHAUSTIVE_POINTS: usize = 16;
/// Slack on `c_n ≤ t`.
pub const ENLARGE_SLACK: f64 = 1e-12;

/// `kⁿ`, or a guard error beyond `limit`.
pub(crate) fn product_len(k: usize, n: usize, limit: usize) -> Result<usize> {
    let mut acc: usize = 1;
    for _ in 0..n {
        acc = acc
            .checked_mul(k)
            .filter(|v| *v <= limit)
            .ok_or_else(|| Error::Guard(format!("{k}^{n} points exceed the limit {limit}")))?;
    }
    Ok(acc)
}

/// Digits of point `idx`, most significant first.
pub(crate) fn digits(mut idx: usize, k: usize, n: usize) -> Vec<usize> {
    let mut d = vec![0; n];
    for slot in d.iter_mut().rev() {
        *slot = idx % k;
        idx /= k;
    }
    d
}

/// `P^⊗n` over the enumerated points.
pub(crate) fn product_mass(p: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![1.0];
    for _ in 0..n {
        out = out.iter().flat_map(|m| p.iter().map(move |pi| m * pi)).collect();
    }
    out
}

/// `c_n(x, y)` for all point pairs, row-major.
pub(crate) fn product_cost(c: &CostMatrix<f64>, n: usize) -> Vec<f64> {
    let (kx, ky) = (c.rows(), c.cols());
    let mut out = vec![0.0];
    let (mut nx, mut ny) = (1, 1);
    for _ in 0..n {
        let mut next = vec![0.0; nx * kx * ny * ky];
        for x in 0..nx {
            for a in 0..kx {
                for y in 0..ny {
                    for b in 0..ky {
                        next[(x * kx + a) * (ny * ky) + y * ky + b] = out[x * ny + y] + c.get(a, b);
                    }
                }
            }
        }
        out = next;
        nx *= kx;
        ny *= ky;
    }
    out
}

/// A subset of `𝒳ⁿ` as a bitmask over the lexicographic enumeration.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SubsetMask {
    n: usize,
    k: usize,
    len: usize,
    bits: Vec<u64>,
}

impl SubsetMask {
    pub fn empty(n: usize, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::Domain("empty alphabet".into()));
        }
        let len = product_len(k, n, MASK_POINTS)?;
        Ok(Self {
            n,
            k,
            len,
            bits: vec![0; len.div_ceil(64)],
        })
    }

    pub fn full(n: usize, k: usize) -> Result<Self> {
        let mut m = Self::empty(n, k)?;
        for i in 0..m.len {
            m.insert(i);
        }
        Ok(m)
    }

    pub fn from_points(n: usize, k: usize, points: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut m = Self::empty(n, k)?;
        for p in points {
            if p >= m.len {
                return Err(Error::Domain(format!("point {p} outside {k}^{n}")));
            }
            m.insert(p);
        }
        Ok(m)
    }

    /// Points given as digit sequences.
    pub fn from_sequences(n: usize, k: usize, seqs: &[Vec<usize>]) -> Result<Self> {
        let mut idx = Vec::with_capacity(seqs.len());
        for s in seqs {
            check_len("sequence length", n, s.len())?;
            if s.iter().any(|d| *d >= k) {
                return Err(Error::Domain(format!("symbol outside alphabet of size {k}")));
            }
            idx.push(s.iter().fold(0, |acc, d| acc * k + d));
        }
        Self::from_points(n, k, idx)
    }

    /// From a `u64` subset code over at most 64 points.
    pub fn from_code(n: usize, k: usize, code: u64) -> Result<Self> {
        let m = Self::empty(n, k)?;
        if m.len < 64 && code >> m.len != 0 {
            return Err(Error::Domain(format!("code {code:#x} has bits beyond {} points", m.len)));
        }
        Self::from_points(n, k, (0..64).filter(|i| code >> i & 1 == 1))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn alphabet_len(&self) -> usize {
        self.k
    }

    /// Number of points of the ambient space.
    pub fn space_len(&self) -> usize {
        self.len
    }

    pub fn contains(&self, i: usize) -> bool {
        i < self.len && self.bits[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn insert(&mut self, i: usize) {
        self.bits[i / 64] |= 1 << (i % 64);
    }

    pub fn count(&self) -> usize {
        self.bits.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.iter().all(|w| *w == 0)
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits.iter().enumerate().flat_map(|(w, &word)| {
            (0..64).filter(move |b| word >> b & 1 == 1).map(move |b| w * 64 + b)
        })
    }

    pub fn is_subset_of(&self, other: &Self) -> bool {
        self.len == other.len && self.bits.iter().zip(&other.bits).all(|(a, b)| a & !b == 0)
    }

    pub fn complement(&self) -> Self {
        let mut out = self.clone();
        for (i, w) in out.bits.iter_mut().enumerate() {
            let valid = if (i + 1) * 64 <= self.len { u64::MAX } else { (1u64 << (self.len % 64)) - 1 };
            *w = !*w & valid;
        }
        out
    }

    /// `P^⊗n(self)` for a per-letter law `p`.
    pub fn mass(&self, p: &[f64]) -> Result<f64> {
        check_len("law vs mask alphabet", self.k, p.len())?;
        Ok(self
            .iter()
            .map(|i| digits(i, self.k, self.n).iter().map(|d| p[*d]).product::<f64>())
            .sum())
    }

    /// Hex string, most significant point first, without leading zeros.
    pub fn to_hex(&self) -> String {
        let s: String = self.bits.iter().rev().map(|w| format!("{w:016x}")).collect();
        let t = s.trim_start_matches('0');
        if t.is_empty() { "0".into() } else { t.into() }
    }

    /// Inverse of [`SubsetMask::to_hex`].
    pub fn from_hex(n: usize, k: usize, hex: &str) -> Result<Self> {
        let mut m = Self::empty(n, k)?;
        let h = hex.trim_start_matches("0x");
        for (pos, ch) in h.chars().rev().enumerate() {
            let v = ch
                .to_digit(16)
                .ok_or_else(|| Error::Domain(format!("bad hex digit {ch:?}")))? as u64;
            for b in 0..4 {
                if v >> b & 1 == 1 {
                    let i = pos * 4 + b;
                    if i >= m.len {
                        return Err(Error::Domain(format!("hex mask exceeds {} points", m.len)));
                    }
                    m.insert(i);
                }
            }
        }
        Ok(m)
    }
}

/// `Aᵗ = {yⁿ : ∃xⁿ ∈ A, Σ c(x_i, y_i) ≤ t}` over `𝒴ⁿ`.
pub fn enlarge(a: &SubsetMask, t: f64, c: &CostMatrix<f64>) -> Result<SubsetMask> {
    check_len("mask alphabet vs cost rows", c.rows(), a.k)?;
    if t.is_nan() {
        return Err(Error::Domain("t is NaN".into()));
    }
    let n = a.n;
    let mut out = SubsetMask::empty(n, c.cols())?;
    let xs: Vec<Vec<usize>> = a.iter().map(|i| digits(i, a.k, n)).collect();
    if xs.is_empty() {
        return Ok(out);
    }
    let thr = t + ENLARGE_SLACK;
    for y in 0..out.len {
        let yd = digits(y, c.cols(), n);
        let hit = xs.iter().any(|x| {
            let mut acc = 0.0;
            for (xi, yi) in x.iter().zip(&yd) {
                acc += c.get(*xi, *yi);
                if acc > thr {
                    return false;
                }
            }
            true
        });
        if hit {
            out.insert(y);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn enumeration_is_lexicographic() {
        assert_eq!(digits(5, 2, 3), vec![1, 0, 1]);
        assert_eq!(digits(7, 3, 2), vec![2, 1]);
        let m = product_mass(&[0.25, 0.75], 2);
        assert_eq!(m, vec![0.0625, 0.1875, 0.1875, 0.5625]);
        let c = product_cost(&CostMatrix::hamming(2), 2);
        // (01, 10) differ in both letters.
        assert_eq!(c[4 + 2], 2.0);
        assert_eq!(c[3 * 4 + 3], 0.0);
    }

    #[test]
    fn enlarge_examples() {
        let h = CostMatrix::hamming(2);
        let a = SubsetMask::from_points(1, 2, [0]).unwrap();
        assert_eq!(enlarge(&a, 0.0, &h).unwrap(), a);
        let a = SubsetMask::from_sequences(2, 2, &[vec![0, 0]]).unwrap();
        let e = enlarge(&a, 1.0, &h).unwrap();
        assert_eq!(e.iter().collect::<Vec<_>>(), vec![0, 1, 2]);
        assert_eq!(enlarge(&a, 2.0, &h).unwrap(), SubsetMask::full(2, 2).unwrap());
        let empty = SubsetMask::empty(2, 2).unwrap();
        assert!(enlarge(&empty, 5.0, &h).unwrap().is_empty());
    }

    #[test]
    fn guard_and_hex() {
        assert!(matches!(SubsetMask::empty(26, 2), Err(Error::Guard(_))));
        let m = SubsetMask::from_points(3, 3, [0, 5, 26]).unwrap();
        assert_eq!(m.to_hex(), "4000021");
        assert_eq!(SubsetMask::from_hex(3, 3, &m.to_hex()).unwrap(), m);
        assert_eq!(SubsetMask::empty(1, 2).unwrap().to_hex(), "0");
        assert_eq!(m.complement().count(), 24);
        assert!((SubsetMask::full(2, 3).unwrap().mass(&[0.2, 0.3, 0.5]).unwrap() - 1.0).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn enlarge_is_monotone(code_a in 0u64..512, extra in 0u64..512, t in 0.0f64..3.0, dt in 0.0f64..1.0,
                               cs in proptest::collection::vec(0.0f64..1.0, 9)) {
            let rows: Vec<Vec<f64>> = cs.chunks(3).map(|r| r.to_vec()).collect();
            let c = CostMatrix::new(rows).unwrap();
            let a = SubsetMask::from_code(2, 3, code_a).unwrap();
            let b = SubsetMask::from_code(2, 3, code_a | extra).unwrap();
            let ea = enlarge(&a, t, &c).unwrap();
            prop_assert!(a.is_subset_of(&b));
            prop_assert!(ea.is_subset_of(&enlarge(&b, t, &c).unwrap()));
            prop_assert!(ea.is_subset_of(&enlarge(&a, t + dt, &c).unwrap()));
        }
    }
}
