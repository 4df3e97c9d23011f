use rayon::prelude::*;

use super::gamma::{Sampling, Space};
use super::{SubsetMask, ENLARGE_SLACK};
use crate::error::{Error, Result};
use crate::ext::ExtReal;
use crate::ot::{ot_slices, CostMatrix};
use crate::prob::Distribution;

/// Largest product space for the coupling LP.
pub const LP_POINTS: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct TalagrandWitness {
    pub mask: SubsetMask,
    pub t: f64,
    pub lambda: f64,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TalagrandReport {
    /// `min e^{−nφ̆_λ(t/n)} − P_Y((Aᵗ)^c)^{1−λ} P_X(A)^λ`.
    pub worst_slack: f64,
    pub witness: Option<TalagrandWitness>,
    pub checked: usize,
    pub sampled: bool,
}

fn rhs(n: usize, b: ExtReal<f64>) -> f64 {
    match b {
        ExtReal::Finite(v) => (-(n as f64) * v).exp(),
        ExtReal::PosInf => 0.0,
        ExtReal::NegInf => f64::INFINITY,
    }
}

/// Checks `P_Y((Aᵗ)^c)^{1−λ} P_X(A)^λ ≤ e^{−n·bound(λ, t/n)}` for every
/// subset and every `(λ, t)` grid cell. The left side is `0` as soon as
/// either factor's base is `0`, also at the endpoints `λ ∈ {0, 1}`.
pub fn talagrand_sweep(
    n: usize,
    lambda_grid: &[f64],
    t_grid: &[f64],
    p_x: &Distribution<f64>,
    p_y: &Distribution<f64>,
    c: &CostMatrix<f64>,
    sampling: Option<&Sampling>,
    mut bound: impl FnMut(f64, f64) -> Result<ExtReal<f64>>,
) -> Result<TalagrandReport> {
    if lambda_grid.iter().any(|l| !(0.0..=1.0).contains(l)) {
        return Err(Error::Domain("λ grid must lie in [0, 1]".into()));
    }
    let mut sp = Space::new(n, p_x, p_y, c)?;
    let (codes, sampled) = sp.codes(sampling)?;
    let mut best: Option<(f64, usize, usize, u64, f64, f64)> = None;
    for (ti, &t) in t_grid.iter().enumerate() {
        let rhs_row: Vec<f64> = lambda_grid
            .iter()
            .map(|&l| bound(l, t / n as f64).map(|b| rhs(n, b)))
            .collect::<Result<_>>()?;
        sp.set_t(t);
        let cell = codes
            .par_iter()
            .map_init(Vec::new, |buf, &code| {
                let xm = sp.x_mass(code);
                let (_, out) = sp.y_masses(code, buf);
                let mut w: Option<(f64, usize, usize, u64, f64, f64)> = None;
                for (li, &l) in lambda_grid.iter().enumerate() {
                    let lhs = if out > 0.0 && xm > 0.0 { out.powf(1.0 - l) * xm.powf(l) } else { 0.0 };
                    let s = rhs_row[li] - lhs;
                    if w.is_none_or(|b| s < b.0) {
                        w = Some((s, ti, li, code, lhs, rhs_row[li]));
                    }
                }
                w
            })
            .flatten()
            .min_by(|a, b| a.0.total_cmp(&b.0).then((a.2, a.3).cmp(&(b.2, b.3))));
        if let Some(cw) = cell {
            if best.is_none_or(|b| cw.0 < b.0) {
                best = Some(cw);
            }
        }
    }
    let witness = match best {
        Some((_, ti, li, code, lhs, rhs)) => Some(TalagrandWitness {
            mask: SubsetMask::from_code(n, p_x.len(), code)?,
            t: t_grid[ti],
            lambda: lambda_grid[li],
            lhs,
            rhs,
        }),
        None => None,
    };
    Ok(TalagrandReport {
        worst_slack: best.map_or(f64::INFINITY, |b| b.0),
        witness,
        checked: codes.len() * t_grid.len() * lambda_grid.len(),
        sampled,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DimensionFreeWitness {
    pub mask: SubsetMask,
    pub t: f64,
    pub alpha: f64,
    pub e1: f64,
    pub bound: ExtReal<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DimensionFreeReport {
    /// Rows with `E₁ < bound − tol`.
    pub violations: usize,
    /// `min E₁ − bound` over non-vacuous rows.
    pub worst_slack: f64,
    pub witness: Option<DimensionFreeWitness>,
    /// Rows with `Aᵗ` the whole space (`E₁ = +∞`).
    pub vacuous: usize,
    /// Rows with `P_X(A) = 0`, where `α_A` is undefined.
    pub skipped: usize,
    pub checked: usize,
    pub sampled: bool,
}

/// Checks `−(1/n) ln(1 − P_Y(Aᵗ)) ≥ bound(α_A, t/n) − tol` for every
/// subset and grid `t`, with `α_A = −(1/n) ln P_X(A)`.
pub fn dimension_free_check(
    n: usize,
    t_grid: &[f64],
    p_x: &Distribution<f64>,
    p_y: &Distribution<f64>,
    c: &CostMatrix<f64>,
    sampling: Option<&Sampling>,
    tol: f64,
    mut bound: impl FnMut(f64, f64) -> Result<ExtReal<f64>>,
) -> Result<DimensionFreeReport> {
    let mut sp = Space::new(n, p_x, p_y, c)?;
    let (codes, sampled) = sp.codes(sampling)?;
    let nf = n as f64;
    let alphas: Vec<f64> = codes.iter().map(|&code| sp.x_mass(code)).map(|m| if m > 0.0 { (-m.ln() / nf).max(0.0) } else { f64::INFINITY }).collect();
    let mut distinct: Vec<f64> = alphas.iter().copied().filter(|a| a.is_finite()).collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    let mut report = DimensionFreeReport {
        violations: 0,
        worst_slack: f64::INFINITY,
        witness: None,
        vacuous: 0,
        skipped: 0,
        checked: 0,
        sampled,
    };
    let mut worst: Option<(f64, usize, f64, ExtReal<f64>, f64)> = None;
    for &t in t_grid {
        let bounds: Vec<ExtReal<f64>> = distinct.iter().map(|&a| bound(a, t / nf)).collect::<Result<_>>()?;
        sp.set_t(t);
        let rows: Vec<Option<(f64, usize, f64, ExtReal<f64>)>> = codes
            .par_iter()
            .zip(&alphas)
            .enumerate()
            .map_init(Vec::new, |buf, (k, (&code, &alpha))| {
                if !alpha.is_finite() {
                    return None;
                }
                let (_, out) = sp.y_masses(code, buf);
                let e1 = if out > 0.0 { (-out.ln() / nf).max(0.0) } else { f64::INFINITY };
                let b = bounds[distinct.partition_point(|d| *d < alpha)];
                let slack = match b {
                    _ if e1 == f64::INFINITY => f64::INFINITY,
                    ExtReal::Finite(v) => e1 - v,
                    ExtReal::PosInf => f64::NEG_INFINITY,
                    ExtReal::NegInf => f64::INFINITY,
                };
                Some((slack, k, e1, b))
            })
            .collect();
        for (k, r) in rows.into_iter().enumerate() {
            report.checked += 1;
            let Some((slack, _, e1, b)) = r else {
                report.skipped += 1;
                continue;
            };
            if e1 == f64::INFINITY {
                report.vacuous += 1;
                continue;
            }
            if slack < -tol {
                report.violations += 1;
            }
            if worst.is_none_or(|w| slack < w.0) {
                worst = Some((slack, k, e1, b, t));
            }
        }
    }
    if let Some((slack, k, e1, b, t)) = worst {
        report.worst_slack = slack;
        report.witness = Some(DimensionFreeWitness {
            mask: SubsetMask::from_code(n, p_x.len(), codes[k])?,
            t,
            alpha: alphas[k],
            e1,
            bound: b,
        });
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Strassen {
    /// `min_π π{c_n > t}` over couplings of the product laws.
    pub lp: f64,
    /// `sup_A P_X(A) − P_Y(Aᵗ)`.
    pub sets: f64,
    pub gap: f64,
    pub argmax: SubsetMask,
}

/// Both sides of Strassen's duality at exhaustive scale.
pub fn strassen_gt(
    n: usize,
    t: f64,
    p_x: &Distribution<f64>,
    p_y: &Distribution<f64>,
    c: &CostMatrix<f64>,
) -> Result<Strassen> {
    let mut sp = Space::new(n, p_x, p_y, c)?;
    if sp.nx > LP_POINTS || sp.ny > LP_POINTS {
        return Err(Error::Guard(format!("{}×{} points exceed the LP limit {LP_POINTS}", sp.nx, sp.ny)));
    }
    let thr = t + ENLARGE_SLACK;
    let mut k = Vec::with_capacity(sp.nx * sp.ny);
    for x in 0..sp.nx {
        for y in 0..sp.ny {
            k.push(if sp.cost(x, y) > thr { 1.0 } else { 0.0 });
        }
    }
    let k = CostMatrix::from_flat(sp.nx, sp.ny, k);
    let (lp, _, _) = ot_slices(&sp.px, &sp.py, &k);
    sp.set_t(t);
    let (codes, _) = sp.codes(None)?;
    let (sets, code) = codes
        .par_iter()
        .map_init(Vec::new, |buf, &code| (sp.x_mass(code) - sp.y_masses(code, buf).0, code))
        .reduce(|| (f64::NEG_INFINITY, u64::MAX), |a, b| match a.0.total_cmp(&b.0) {
            std::cmp::Ordering::Less => b,
            std::cmp::Ordering::Greater => a,
            std::cmp::Ordering::Equal => if a.1 <= b.1 { a } else { b },
        });
    Ok(Strassen {
        lp,
        sets,
        gap: (lp - sets).abs(),
        argmax: SubsetMask::from_code(n, p_x.len(), code)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optim::rng;
    use rand::Rng;

    fn fair() -> Distribution<f64> {
        Distribution::bernoulli(0.5).unwrap()
    }

    #[test]
    fn strassen_examples() {
        let h = CostMatrix::hamming(2);
        let s = strassen_gt(2, 0.0, &fair(), &fair(), &h).unwrap();
        assert!(s.lp.abs() < 1e-12 && s.sets.abs() < 1e-12);
        let s = strassen_gt(1, 0.0, &fair(), &Distribution::bernoulli(0.75).unwrap(), &h).unwrap();
        assert!((s.lp - 0.25).abs() < 1e-12 && (s.sets - 0.25).abs() < 1e-12);
        let mut r = rng(11, 0);
        for _ in 0..20 {
            let px = Distribution::bernoulli(r.random_range(0.0..1.0)).unwrap();
            let py = Distribution::bernoulli(r.random_range(0.0..1.0)).unwrap();
            for t in [0.0, 1.0, 2.0] {
                let s = strassen_gt(2, t, &px, &py, &h).unwrap();
                assert!(s.gap <= 1e-8, "{s:?}");
            }
        }
        let u = Distribution::uniform(3);
        assert!(matches!(strassen_gt(4, 1.0, &u, &u, &CostMatrix::hamming(3)), Err(Error::Guard(_))));
    }

    #[test]
    fn talagrand_trivial_and_detects() {
        let h = CostMatrix::hamming(2);
        let lambdas: Vec<f64> = (0..=20).map(|k| k as f64 * 0.05).collect();
        let r = talagrand_sweep(2, &lambdas, &[0.0, 1.0, 2.0], &fair(), &fair(), &h, None, |_, _| Ok(ExtReal::Finite(0.0))).unwrap();
        assert!(r.worst_slack >= 0.0);
        assert_eq!(r.checked, 16 * 3 * 21);
        // The full space has an empty escape set: 0 ≤ RHS whatever λ.
        let r = talagrand_sweep(1, &[0.0, 1.0], &[1.0], &fair(), &fair(), &h, None, |_, _| Ok(ExtReal::PosInf)).unwrap();
        assert_eq!(r.worst_slack, 0.0);
        // An impossible bound is caught, with a witness.
        let r = talagrand_sweep(2, &[0.5], &[0.0], &fair(), &fair(), &h, None, |_, _| Ok(ExtReal::PosInf)).unwrap();
        assert!((r.worst_slack + 0.5).abs() < 1e-15);
        assert_eq!(r.witness.unwrap().mask, SubsetMask::from_code(2, 2, 0b0011).unwrap());
    }

    #[test]
    fn dimension_free_counts() {
        let h = CostMatrix::hamming(2);
        let r = dimension_free_check(2, &[0.0, 1.0, 2.0], &fair(), &fair(), &h, None, 1e-3, |_, _| Ok(ExtReal::Finite(0.0))).unwrap();
        assert_eq!(r.violations, 0);
        assert_eq!(r.skipped, 3);
        assert_eq!(r.checked, 48);
        // t = 2 makes every nonempty set vacuous.
        assert!(r.vacuous >= 15);
        // Single letter: A = {0}, t = 0 has E₁ = ln 2, so ln 2 + 0.01 is violated.
        let r = dimension_free_check(1, &[0.0], &fair(), &fair(), &h, None, 1e-3, |_, _| Ok(ExtReal::Finite(2f64.ln() + 0.01))).unwrap();
        assert_eq!(r.violations, 2);
        let w = r.witness.unwrap();
        assert!((w.e1 - 2f64.ln()).abs() < 1e-15);
        assert_eq!(w.mask.to_hex(), "1");
    }
}
