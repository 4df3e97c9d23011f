use rand::Rng;
use rayon::prelude::*;

use super::{digits, product_cost, product_len, product_mass, SubsetMask, ENLARGE_SLACK, EXHAUSTIVE_POINTS, MASK_POINTS, SUBSET_POINTS};
use crate::error::{check_len, Error, Result};
use crate::ext::ExtReal;
use crate::optim::rng;
use crate::ot::CostMatrix;
use crate::prob::Distribution;

/// Random subsets drawn when `|𝒳|ⁿ` is beyond exhaustive scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Sampling {
    pub subsets: usize,
    pub seed: u64,
}

impl Default for Sampling {
    fn default() -> Self {
        Self {
            subsets: 100_000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GammaResult {
    /// `P_Y^⊗n(Aᵗ)` at the minimizer.
    pub value: f64,
    /// `P_Y^⊗n((Aᵗ)^c)`, summed directly.
    pub one_minus: f64,
    /// `P_X^⊗n(A)` at the minimizer.
    pub x_mass: f64,
    pub argmin: SubsetMask,
    pub sampled: bool,
    pub evaluated: usize,
}

/// Product measures, and for a fixed `t` the `t`-neighbourhood of each
/// `x`-point as a bitset over `𝒴ⁿ`.
pub(crate) struct Space {
    pub n: usize,
    pub kx: usize,
    pub nx: usize,
    pub ny: usize,
    pub px: Vec<f64>,
    pub py: Vec<f64>,
    cost: Vec<f64>,
    neigh: Vec<Vec<u64>>,
}

impl Space {
    pub fn new(n: usize, p_x: &Distribution<f64>, p_y: &Distribution<f64>, c: &CostMatrix<f64>) -> Result<Self> {
        check_len("P_X vs cost rows", c.rows(), p_x.len())?;
        check_len("P_Y vs cost cols", c.cols(), p_y.len())?;
        if n == 0 {
            return Err(Error::Domain("n must be ≥ 1".into()));
        }
        let nx = product_len(p_x.len(), n, SUBSET_POINTS)?;
        let ny = product_len(p_y.len(), n, MASK_POINTS)?;
        if nx.saturating_mul(ny) > 1 << 24 {
            return Err(Error::Guard(format!("{nx}×{ny} point pairs exceed 2^24")));
        }
        Ok(Self {
            n,
            kx: p_x.len(),
            nx,
            ny,
            px: product_mass(p_x.mass(), n),
            py: product_mass(p_y.mass(), n),
            cost: product_cost(c, n),
            neigh: Vec::new(),
        })
    }

    pub fn set_t(&mut self, t: f64) {
        let words = self.ny.div_ceil(64);
        let thr = t + ENLARGE_SLACK;
        self.neigh = (0..self.nx)
            .map(|x| {
                let mut w = vec![0u64; words];
                for y in 0..self.ny {
                    if self.cost[x * self.ny + y] <= thr {
                        w[y / 64] |= 1 << (y % 64);
                    }
                }
                w
            })
            .collect();
    }

    pub fn cost(&self, x: usize, y: usize) -> f64 {
        self.cost[x * self.ny + y]
    }

    pub fn x_mass(&self, code: u64) -> f64 {
        (0..self.nx).filter(|i| code >> i & 1 == 1).map(|i| self.px[i]).sum()
    }

    /// `(P_Y(Aᵗ), P_Y((Aᵗ)^c))` for the current `t`.
    pub fn y_masses(&self, code: u64, buf: &mut Vec<u64>) -> (f64, f64) {
        buf.clear();
        buf.resize(self.ny.div_ceil(64), 0);
        for i in (0..self.nx).filter(|i| code >> i & 1 == 1) {
            for (b, w) in buf.iter_mut().zip(&self.neigh[i]) {
                *b |= w;
            }
        }
        let (mut inside, mut outside) = (0.0, 0.0);
        for (y, p) in self.py.iter().enumerate() {
            if buf[y / 64] >> (y % 64) & 1 == 1 {
                inside += p;
            } else {
                outside += p;
            }
        }
        (inside, outside)
    }

    /// Exhaustive codes, or a sampled family tagged `true`.
    pub fn codes(&self, sampling: Option<&Sampling>) -> Result<(Vec<u64>, bool)> {
        if self.nx <= EXHAUSTIVE_POINTS {
            return Ok(((0..1u64 << self.nx).collect(), false));
        }
        let Some(s) = sampling else {
            return Err(Error::Guard(format!(
                "{} points exceed exhaustive scale ({EXHAUSTIVE_POINTS}); enable sampling",
                self.nx
            )));
        };
        let full = (1u64 << self.nx) - 1;
        let mut out = vec![0, full];
        for i in 0..self.nx {
            out.push(1 << i);
            out.push(full & !(1 << i));
        }
        // Unions of type classes.
        let mut classes: Vec<(Vec<usize>, u64)> = Vec::new();
        for i in 0..self.nx {
            let mut ty = vec![0; self.kx];
            for d in digits(i, self.kx, self.n) {
                ty[d] += 1;
            }
            match classes.iter_mut().find(|(t, _)| *t == ty) {
                Some((_, m)) => *m |= 1 << i,
                None => classes.push((ty, 1 << i)),
            }
        }
        if classes.len() <= 16 {
            for sel in 0..1u32 << classes.len() {
                out.push(classes.iter().enumerate().filter(|(j, _)| sel >> j & 1 == 1).fold(0, |acc, (_, (_, m))| acc | m));
            }
        } else {
            out.extend(classes.iter().map(|(_, m)| *m));
        }
        let mut r = rng(s.seed, 0xb1);
        out.extend((0..s.subsets).map(|_| r.random::<u64>() & full));
        out.sort_unstable();
        out.dedup();
        Ok((out, true))
    }
}

/// `Γ⁽ⁿ⁾(a, t) = min {P_Y^⊗n(Aᵗ) : P_X^⊗n(A) ≥ a}`, exhaustive up to
/// 16 points and sampled up to 25; ties go to the smallest subset code.
pub fn gamma_exhaustive(
    n: usize,
    a: f64,
    t: f64,
    p_x: &Distribution<f64>,
    p_y: &Distribution<f64>,
    c: &CostMatrix<f64>,
    sampling: Option<&Sampling>,
) -> Result<GammaResult> {
    if !(0.0..=1.0).contains(&a) {
        return Err(Error::Domain(format!("a = {a} must lie in [0, 1]")));
    }
    if t.is_nan() {
        return Err(Error::Domain("t is NaN".into()));
    }
    let mut sp = Space::new(n, p_x, p_y, c)?;
    sp.set_t(t);
    let (codes, sampled) = sp.codes(sampling)?;
    let floor = a * (1.0 - 1e-12);
    let best = codes
        .par_iter()
        .map_init(Vec::new, |buf, &code| {
            let xm = sp.x_mass(code);
            if xm < floor {
                return None;
            }
            let (inside, outside) = sp.y_masses(code, buf);
            Some((inside, code, outside, xm))
        })
        .flatten()
        .min_by(|l, r| l.0.total_cmp(&r.0).then(l.1.cmp(&r.1)))
        .ok_or_else(|| Error::Domain(format!("no subset reaches mass {a}")))?;
    Ok(GammaResult {
        value: best.0,
        one_minus: best.2,
        x_mass: best.3,
        argmin: SubsetMask::from_code(n, p_x.len(), best.1)?,
        sampled,
        evaluated: codes.len(),
    })
}

/// `−(1/n) ln m`, `+∞` at `m = 0`.
pub(crate) fn rate(n: usize, m: f64) -> ExtReal<f64> {
    if m <= 0.0 {
        ExtReal::PosInf
    } else {
        ExtReal::Finite((-m.ln() / n as f64).max(0.0))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Exponents {
    pub e0: ExtReal<f64>,
    pub e1: ExtReal<f64>,
    pub gamma: GammaResult,
}

/// `E₀ = −(1/n) ln Γ` and `E₁ = −(1/n) ln(1 − Γ)` at `a = e^{−nα}`,
/// `t = nτ`.
pub fn exponents_e(
    n: usize,
    alpha: f64,
    tau: f64,
    p_x: &Distribution<f64>,
    p_y: &Distribution<f64>,
    c: &CostMatrix<f64>,
    sampling: Option<&Sampling>,
) -> Result<Exponents> {
    if !(alpha >= 0.0) || !tau.is_finite() {
        return Err(Error::Domain(format!("(α, τ) = ({alpha}, {tau}) out of range")));
    }
    let a = (-(n as f64) * alpha).exp();
    if a == 0.0 {
        return Err(Error::Domain(format!("a = e^(-{n}·{alpha}) underflows")));
    }
    let g = gamma_exhaustive(n, a, n as f64 * tau, p_x, p_y, c, sampling)?;
    Ok(Exponents {
        e0: rate(n, g.value),
        e1: rate(n, g.one_minus),
        gamma: g,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fair() -> Distribution<f64> {
        Distribution::bernoulli(0.5).unwrap()
    }

    #[test]
    fn small_examples() {
        let h = CostMatrix::hamming(2);
        let g = gamma_exhaustive(1, 0.5, 0.0, &fair(), &fair(), &h, None).unwrap();
        assert_eq!(g.value, 0.5);
        let p = Distribution::bernoulli(0.3).unwrap();
        let g = gamma_exhaustive(1, 0.2, 1.0, &p, &p, &h, None).unwrap();
        assert_eq!(g.value, 1.0);
        let g = gamma_exhaustive(2, 0.25, 1.0, &fair(), &fair(), &h, None).unwrap();
        assert_eq!(g.value, 0.75);
        assert_eq!(g.argmin, SubsetMask::from_sequences(2, 2, &[vec![0, 0]]).unwrap());
        assert!(!g.sampled);
    }

    #[test]
    fn exponent_examples() {
        let h = CostMatrix::hamming(2);
        let e = exponents_e(2, 4f64.ln() / 2.0, 0.5, &fair(), &fair(), &h, None).unwrap();
        assert_eq!(e.gamma.value, 0.75);
        assert!((e.e1.to_float() - 2f64.ln()).abs() < 1e-12);
        let e = exponents_e(1, 0.0, 1.0, &fair(), &fair(), &h, None).unwrap();
        assert!(e.e1.is_pos_inf());
        // t = 0: the enlargement is A itself, Γ = a.
        let e = exponents_e(2, 2f64.ln(), 0.0, &fair(), &fair(), &h, None).unwrap();
        assert!((e.e0.to_float() - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn sampling_guard() {
        let u = Distribution::uniform(5);
        let h = CostMatrix::hamming(5);
        assert!(matches!(gamma_exhaustive(2, 0.5, 1.0, &u, &u, &h, None), Err(Error::Guard(_))));
        let s = Sampling { subsets: 2000, seed: 7 };
        let g = gamma_exhaustive(2, 0.2, 0.0, &u, &u, &h, Some(&s)).unwrap();
        assert!(g.sampled);
        // t = 0 makes any 5-point set optimal.
        assert!((g.value - 0.2).abs() < 1e-12);
        let again = gamma_exhaustive(2, 0.2, 0.0, &u, &u, &h, Some(&s)).unwrap();
        assert_eq!(g, again);
    }

    #[test]
    fn space_masses_match_masks() {
        let px = Distribution::from_mass(vec![0.2, 0.5, 0.3]).unwrap();
        let py = Distribution::from_mass(vec![0.6, 0.4]).unwrap();
        let c = CostMatrix::new(vec![vec![0.0, 1.0], vec![0.5, 0.2], vec![1.0, 0.0]]).unwrap();
        let mut sp = Space::new(2, &px, &py, &c).unwrap();
        sp.set_t(0.7);
        let mut buf = Vec::new();
        for code in [0b1u64, 0b100010, 0b111000111] {
            let m = SubsetMask::from_code(2, 3, code).unwrap();
            let e = super::super::enlarge(&m, 0.7, &c).unwrap();
            let (inside, outside) = sp.y_masses(code, &mut buf);
            assert!((inside - e.mass(py.mass()).unwrap()).abs() < 1e-15);
            assert!((inside + outside - 1.0).abs() < 1e-15);
            assert!((sp.x_mass(code) - m.mass(px.mass()).unwrap()).abs() < 1e-15);
        }
    }
}
