use rayon::prelude::*;

use crate::error::{check_len, Result};
use crate::exponents::{ExponentQuery, Problem, PsiEstimate};
use crate::ext::ExtReal;
use crate::optim::{golden_min, scan_golden_min};
use crate::ot::CostMatrix;
use crate::prob::{tilt_into, Distribution};

/// Potential pairs `(f_w, g_w)` for `w ∈ {0, 1}`, optionally with a
/// suggested `λ`.
#[derive(Debug, Clone, PartialEq)]
pub struct PsiCandidate {
    pub f: [Vec<f64>; 2],
    pub g: [Vec<f64>; 2],
    pub lambda: Option<f64>,
}

impl PsiCandidate {
    /// The potentials harvested by the primal solver.
    pub fn from_estimate(e: &PsiEstimate) -> Option<Self> {
        let [a, b] = e.potentials.as_slice() else {
            return None;
        };
        Some(Self {
            f: [a.f.clone(), b.f.clone()],
            g: [a.g.clone(), b.g.clone()],
            lambda: e.lambda.is_finite().then_some(e.lambda),
        })
    }

    fn zero(nx: usize, ny: usize) -> Self {
        Self {
            f: [vec![0.0; nx], vec![0.0; nx]],
            g: [vec![0.0; ny], vec![0.0; ny]],
            lambda: Some(0.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PsiCertificate {
    pub candidate: PsiCandidate,
    pub lambda: f64,
    pub eta: f64,
}

/// Lower evidence for `ψ` from its dual.
#[derive(Debug, Clone, PartialEq)]
pub struct DualPsi {
    pub value: ExtReal<f64>,
    pub certificate: Option<PsiCertificate>,
}

/// `inf_{s>0} max_w λ(sα + s ln P_X(e^{f_w/s})) + a_w` with
/// `a_w = −λτ − ln P_Y(e^{−λ g_w})`, i.e. the `η = λs` infimum.
fn eta_inf(px: &[f64], f: &[Vec<f64>; 2], a: [f64; 2], alpha: f64, lambda: f64) -> (f64, f64) {
    let mut out = vec![0.0; px.len()];
    let mut h = |t: f64| {
        let s = t.exp();
        (0..2)
            .map(|w| lambda * (s * alpha + s * tilt_into(px, &f[w], 1.0 / s, &mut out)) + a[w])
            .fold(f64::NEG_INFINITY, f64::max)
    };
    let (t, v) = scan_golden_min(&mut h, (1e-9f64).ln(), (1e9f64).ln(), 240, 1e-12, 300);
    // The s → 0 end: λ max f_w.
    let lim = (0..2)
        .map(|w| {
            let m = px
                .iter()
                .zip(&f[w])
                .filter(|(p, _)| **p > 0.0)
                .map(|(_, x)| *x)
                .fold(f64::NEG_INFINITY, f64::max);
            lambda * m + a[w]
        })
        .fold(f64::NEG_INFINITY, f64::max);
    if lim <= v {
        (lim, 0.0)
    } else {
        (v, t.exp())
    }
}

/// `inf_η max_w [ηα + η ln P_X(e^{(λ/η) f_w}) − λτ − ln P_Y(e^{−λ g_w})]`.
fn objective(px: &[f64], py: &[f64], cand: &PsiCandidate, alpha: f64, tau: f64, lambda: f64) -> (f64, f64) {
    if lambda <= 0.0 {
        return (0.0, 0.0);
    }
    let mut out = vec![0.0; py.len()];
    let a = [0, 1].map(|w| -lambda * tau - tilt_into(py, &cand.g[w], -lambda, &mut out));
    let (v, s) = eta_inf(px, &cand.f, a, alpha, lambda);
    (v, lambda * s)
}

/// Supremum over `λ ≥ 0`: a log-spaced scan (plus the suggested `λ`)
/// refined by golden section around the best scan point.
fn best_lambda(px: &[f64], py: &[f64], cand: &PsiCandidate, alpha: f64, tau: f64) -> (f64, f64, f64) {
    let mut grid: Vec<f64> = (0..=160).map(|k| 10f64.powf(-4.0 + 0.05 * k as f64)).collect();
    if let Some(l) = cand.lambda.filter(|l| *l > 0.0 && l.is_finite()) {
        grid.push(l);
        grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
    }
    let mut best = (0.0, 0.0, 0.0);
    let mut at = None;
    for (k, &l) in grid.iter().enumerate() {
        let (v, eta) = objective(px, py, cand, alpha, tau, l);
        if v > best.0 {
            best = (v, l, eta);
            at = Some(k);
        }
    }
    if let Some(k) = at {
        let lo = if k == 0 { 0.0 } else { grid[k - 1] };
        let hi = grid.get(k + 1).copied().unwrap_or(grid[k] * 2.0);
        let (l, negv) = golden_min(|l| -objective(px, py, cand, alpha, tau, l).0, lo, hi, 1e-12, 200);
        if -negv > best.0 {
            best = (-negv, l, objective(px, py, cand, alpha, tau, l).1);
        }
    }
    best
}

/// Evaluates the two-row dual of `ψ` on each candidate (plus the zero
/// pair) and returns the best. Every candidate gives a valid lower bound.
pub fn dual_psi(
    q: ExponentQuery,
    p_x: &Distribution<f64>,
    p_y: &Distribution<f64>,
    c: &CostMatrix<f64>,
    candidates: &[PsiCandidate],
) -> Result<DualPsi> {
    q.validate()?;
    check_len("P_X vs cost rows", c.rows(), p_x.len())?;
    check_len("P_Y vs cost cols", c.cols(), p_y.len())?;
    let (nx, ny) = (p_x.len(), p_y.len());
    for cand in candidates {
        for w in 0..2 {
            check_len("candidate f", nx, cand.f[w].len())?;
            check_len("candidate g", ny, cand.g[w].len())?;
        }
    }
    let mut all = vec![PsiCandidate::zero(nx, ny)];
    all.extend_from_slice(candidates);
    // Default corners: pairs of dual vertices, when few.
    let pr = Problem::new(p_x, p_y, c)?;
    if let Some(vs) = pr.vertices().filter(|vs| vs.len() <= 12) {
        let lifted: Vec<_> = vs.iter().map(|v| pr.lift_potentials(&v.f, &v.g)).collect();
        for a in &lifted {
            for b in &lifted {
                all.push(PsiCandidate {
                    f: [a.f.clone(), b.f.clone()],
                    g: [a.g.clone(), b.g.clone()],
                    lambda: None,
                });
            }
        }
    }
    let (px, py) = (p_x.mass(), p_y.mass());
    let evals: Vec<(f64, f64, f64)> = all
        .par_iter()
        .map(|cand| best_lambda(px, py, cand, q.alpha, q.tau))
        .collect();
    let (k, &(value, lambda, eta)) = evals
        .iter()
        .enumerate()
        .fold(None::<(usize, &(f64, f64, f64))>, |acc, (k, e)| match acc {
            Some((_, b)) if b.0 >= e.0 => acc,
            _ => Some((k, e)),
        })
        .expect("the zero candidate is always present");
    Ok(DualPsi {
        value: ExtReal::Finite(value),
        certificate: Some(PsiCertificate {
            candidate: all[k].clone(),
            lambda,
            eta,
        }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exponents::{psi, SearchConfig};

    #[test]
    fn degenerate_candidates() {
        let p = Distribution::bernoulli(0.5).unwrap();
        let c = CostMatrix::hamming(2);
        let q = ExponentQuery::new(0.2, 1.0).unwrap();
        let d = dual_psi(q, &p, &p, &c, &[]).unwrap();
        assert!(d.value.to_float().abs() < 1e-12);
        let z = PsiCandidate::zero(2, 2);
        assert_eq!(objective(p.mass(), p.mass(), &z, 0.2, 0.25, 0.0).0, 0.0);
    }

    #[test]
    fn agrees_with_primal() {
        let p = Distribution::bernoulli(0.5).unwrap();
        let c = CostMatrix::hamming(2);
        let q = ExponentQuery::new(0.2, 0.25).unwrap();
        let e = psi(q, &p, &p, &c, &SearchConfig::default()).unwrap();
        let cand = PsiCandidate::from_estimate(&e).unwrap();
        let d = dual_psi(q, &p, &p, &c, &[cand]).unwrap();
        let (a, b) = (e.value.to_float(), d.value.to_float());
        assert!((a - b).abs() < 5e-3, "{a} vs {b}");
    }
}
