use super::gamma::{gamma_exhaustive, rate};
use super::types::ln_factorials;
use super::{ENLARGE_SLACK, EXHAUSTIVE_POINTS};
use crate::duals::{abs_r, MetricSpace};
use crate::error::{Error, Result};
use crate::ext::ExtReal;
use crate::ot::CostMatrix;
use crate::prob::Distribution;
use crate::scalar::log_sum_exp_weighted;

/// Largest `n` for the level search.
pub const MAX_LEVEL_N: usize = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub struct Levels {
    pub gamma: f64,
    pub log_gamma: f64,
    /// `ln P((Aᵗ)^c)`, accurate deep in the tail.
    pub log_one_minus: f64,
    /// Weight band `[w₁, w₂]` of the witness (`None` for `a = 0`).
    pub band: Option<(usize, usize)>,
    /// Its enlargement `[w₁ − t, w₂ + t]`, clamped.
    pub enlarged: Option<(usize, usize)>,
}

/// `ln P(|xⁿ| = w)` under `Bern(p)^⊗n`.
fn level_log_masses(n: usize, p: f64) -> Vec<f64> {
    let lf = ln_factorials(n);
    (0..=n)
        .map(|w| {
            let ones = if w == 0 { 0.0 } else if p == 0.0 { f64::NEG_INFINITY } else { w as f64 * p.ln() };
            let zeros = if w == n { 0.0 } else if p == 1.0 { f64::NEG_INFINITY } else { (n - w) as f64 * (1.0 - p).ln() };
            lf[n] - lf[w] - lf[n - w] + ones + zeros
        })
        .collect()
}

fn lse(v: &[f64]) -> f64 {
    log_sum_exp_weighted(&vec![1.0; v.len()], v)
}

fn log_add(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if lo == f64::NEG_INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// Upper bound on `Γ⁽ⁿ⁾(a, t)` for `Bern(p)` on both sides with Hamming
/// cost, over contiguous Hamming-weight bands (lower sets included). The
/// `t`-enlargement of the band `[w₁, w₂]` is exactly `[w₁ − t, w₂ + t]`.
pub fn gamma_levels(n: usize, a: f64, t: f64, p: f64) -> Result<Levels> {
    if n == 0 || n > MAX_LEVEL_N {
        return Err(Error::Domain(format!("n = {n} must lie in 1..={MAX_LEVEL_N}")));
    }
    if !(0.0..=1.0).contains(&a) || !(0.0..=1.0).contains(&p) || t.is_nan() {
        return Err(Error::Domain(format!("(a, t, p) = ({a}, {t}, {p}) out of range")));
    }
    if a == 0.0 || t < -ENLARGE_SLACK {
        // The empty set, or any set with an empty enlargement.
        let band = (a > 0.0).then_some((0, n));
        return Ok(Levels {
            gamma: 0.0,
            log_gamma: f64::NEG_INFINITY,
            log_one_minus: 0.0,
            band,
            enlarged: None,
        });
    }
    let lw = level_log_masses(n, p);
    let s = (t + ENLARGE_SLACK).floor().min(n as f64) as usize;
    let log_a = a.ln() - 1e-12;
    let mut best: Option<(f64, f64, usize, usize, usize, usize)> = None;
    for w1 in 0..=n {
        let mut acc = f64::NEG_INFINITY;
        let Some(w2) = (w1..=n).find(|&w| {
            acc = log_add(acc, lw[w]);
            acc >= log_a
        }) else {
            break;
        };
        let (lo, hi) = (w1.saturating_sub(s), (w2 + s).min(n));
        let inside = lse(&lw[lo..=hi]);
        let outside = log_add(lse(&lw[..lo]), lse(&lw[hi + 1..]));
        let better = match best {
            None => true,
            Some((bi, bo, ..)) => outside > bo || (outside == bo && inside < bi),
        };
        if better {
            best = Some((inside, outside, w1, w2, lo, hi));
        }
    }
    let (log_gamma, log_one_minus, w1, w2, lo, hi) =
        best.ok_or_else(|| Error::Domain(format!("no band reaches mass {a}")))?;
    Ok(Levels {
        gamma: log_gamma.exp().min(1.0),
        log_gamma,
        log_one_minus,
        band: Some((w1, w2)),
        enlarged: Some((lo, hi)),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub n: usize,
    pub alpha: f64,
    pub t: f64,
    pub gamma: f64,
    pub e0: ExtReal<f64>,
    pub e1: ExtReal<f64>,
    /// `r(τ)` of the two-point metric space.
    pub target: ExtReal<f64>,
    /// `|E₁ − r(τ)|`.
    pub gap: f64,
    pub method: &'static str,
}

/// Finite-`n` concentration exponents for `Bern(p)` with Hamming cost at a
/// fixed `a`, next to `r(τ)`. Exhaustive where `2ⁿ ≤ 16`, level bands
/// beyond. Purely a report; no limit is asserted.
pub fn convergence_report(n_list: &[usize], tau: f64, a: f64, p: f64) -> Result<Vec<ConvergenceRow>> {
    if n_list.is_empty() {
        return Ok(Vec::new());
    }
    if !(0.0..1.0).contains(&p) || p == 0.0 || !(a > 0.0 && a <= 1.0) {
        return Err(Error::Domain(format!("(a, p) = ({a}, {p}) out of range")));
    }
    let target = abs_r(tau, &MetricSpace::two_point(p, 1.0)?)?.value;
    let law = Distribution::bernoulli(p)?;
    let h = CostMatrix::hamming(2);
    n_list
        .iter()
        .map(|&n| {
            let t = n as f64 * tau;
            let alpha = -a.ln() / n as f64;
            let exhaustive = n < usize::BITS as usize && (1usize << n) <= EXHAUSTIVE_POINTS;
            let (gamma, e0, e1, method) = if exhaustive {
                let g = gamma_exhaustive(n, a, t, &law, &law, &h, None)?;
                (g.value, rate(n, g.value), rate(n, g.one_minus), "exhaustive")
            } else {
                let l = gamma_levels(n, a, t, p)?;
                let e = |lm: f64| if lm == f64::NEG_INFINITY { ExtReal::PosInf } else { ExtReal::Finite((-lm / n as f64).max(0.0)) };
                (l.gamma, e(l.log_gamma), e(l.log_one_minus), "levels")
            };
            let gap = match (e1, target) {
                (ExtReal::Finite(x), ExtReal::Finite(y)) => (x - y).abs(),
                (x, y) if x == y => 0.0,
                _ => f64::INFINITY,
            };
            Ok(ConvergenceRow { n, alpha, t, gamma, e0, e1, target, gap, method })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bruteforce::gamma_exchangeable;

    /// `ln P(Bin(n, 1/2) > k)` by the ratio recurrence from the top.
    fn upper_tail(n: usize, k: usize) -> f64 {
        let mut term = -(n as f64) * 2f64.ln();
        let mut terms = vec![term];
        for w in (k + 2..=n).rev() {
            // P(w − 1) = P(w) · w / (n − w + 1)
            term += (w as f64 / (n - w + 1) as f64).ln();
            terms.push(term);
        }
        let m = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        m + terms.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
    }

    #[test]
    fn small_band() {
        let l = gamma_levels(4, 0.5, 1.0, 0.5).unwrap();
        assert!((l.gamma - 15.0 / 16.0).abs() < 1e-14);
        assert_eq!(l.band, Some((0, 2)));
        assert_eq!(l.enlarged, Some((0, 3)));
        let fair = Distribution::bernoulli(0.5).unwrap();
        let ex = gamma_exhaustive(4, 0.5, 1.0, &fair, &fair, &CostMatrix::hamming(2), None).unwrap();
        assert!(ex.value <= l.gamma + 1e-15);
        assert_eq!(gamma_levels(7, 1.0, 0.0, 0.3).unwrap().gamma, 1.0);
        assert_eq!(gamma_levels(7, 1.0, 2.5, 0.3).unwrap().log_one_minus, f64::NEG_INFINITY);
    }

    #[test]
    fn binomial_tail() {
        let l = gamma_levels(1024, 0.5, 256.0, 0.5).unwrap();
        let oracle = upper_tail(1024, 768);
        assert!((l.log_one_minus - oracle).abs() < 1e-9 * oracle.abs(), "{} vs {oracle}", l.log_one_minus);
        assert_eq!(l.band, Some((0, 512)));
    }

    #[test]
    fn exchangeable_matches_levels() {
        let fair = Distribution::bernoulli(0.5).unwrap();
        let g = gamma_exchangeable(64, 0.5, 16.0, &fair, &fair, &CostMatrix::hamming(2)).unwrap();
        let l = gamma_levels(64, 0.5, 16.0, 0.5).unwrap();
        assert!((g.log_one_minus - l.log_one_minus).abs() < 1e-9);
        // Whole-level granularity: a central band beats the half cube here.
        assert_eq!(l.band, Some((32, 39)));
        assert!(l.log_one_minus > upper_tail(64, 48));
    }

    #[test]
    fn convergence_trend() {
        assert!(convergence_report(&[], 0.25, 0.5, 0.5).unwrap().is_empty());
        let rows = convergence_report(&[2, 64, 256, 1024], 0.25, 0.5, 0.5).unwrap();
        assert_eq!(rows[0].method, "exhaustive");
        assert!((rows[0].target.to_float() - 0.130812).abs() < 1e-6);
        let last = rows.last().unwrap();
        assert!(last.gap < 0.02, "{last:?}");
        assert!(rows[1].gap > rows[2].gap && rows[2].gap > rows[3].gap);
    }
}
