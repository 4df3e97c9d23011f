use rayon::prelude::*;

use crate::envelope::lce_1d;
use crate::error::{Error, Result};
use crate::exponents::{varphi_x_curve, ExponentQuery, Problem, SearchConfig};
use crate::ext::ExtReal;
use crate::ot::{ot_slices, CostMatrix};
use crate::prob::{ball_into, dot, iproj_into, Distribution};

use super::{ball_dual, legendre, LogMgfMax, MetricSpace};

/// Potentials `(f, g)` with `f + g ≤ c` and the multipliers attaining the
/// inner supremum (`η = +∞` is the pinned / `α = 0` limit).
#[derive(Debug, Clone, PartialEq)]
pub struct PhiCertificate {
    pub f: Vec<f64>,
    pub g: Vec<f64>,
    pub lambda: f64,
    pub eta: f64,
}

/// An upper bound on a closed exponent from its dual, with certificate.
#[derive(Debug, Clone, PartialEq)]
pub struct DualEstimate {
    pub value: ExtReal<f64>,
    pub certificate: Option<PhiCertificate>,
    /// All dual vertices were evaluated, so the bound is the exact value.
    pub exact: bool,
}

struct Eval {
    value: ExtReal<f64>,
    lambda: f64,
    s: f64,
}

/// `sup_{λ,η} λτ − ln P_Y(e^{λg}) − ηα − η ln P_X(e^{(λ/η)f})`, or with
/// `P_X(f)` in place of the η-part when pinned.
fn evaluate(pr: &Problem, f: &[f64], g: &[f64], alpha: f64, tau: f64, pinned: bool) -> Eval {
    let (b, s) = if pinned { (dot(&pr.px, f), f64::INFINITY) } else { ball_dual(&pr.px, f, alpha) };
    let (value, lambda) = legendre(&pr.py, g, tau - b);
    Eval { value, lambda, s }
}

fn solve(pr: &Problem, alpha: f64, tau: f64, pinned: bool, cfg: &SearchConfig, use_vertices: bool) -> DualEstimate {
    let zero = || PhiCertificate {
        f: vec![0.0; pr.p_x().len()],
        g: vec![0.0; pr.p_y().len()],
        lambda: 0.0,
        eta: f64::INFINITY,
    };
    if tau <= 0.0 {
        return DualEstimate {
            value: ExtReal::Finite(0.0),
            certificate: Some(zero()),
            exact: true,
        };
    }
    let mut best: Option<(ExtReal<f64>, usize, Vec<f64>, Vec<f64>, f64, f64)> = None;
    let mut consider = |idx: usize, f: &[f64], g: &[f64], e: Eval| {
        let better = match &best {
            None => true,
            Some((v, i, ..)) => e.value < *v || (e.value == *v && idx < *i),
        };
        if better {
            best = Some((e.value, idx, f.to_vec(), g.to_vec(), e.lambda, e.s));
        }
    };
    let exact = match pr.vertices().filter(|_| use_vertices) {
        Some(vs) => {
            let evals: Vec<Eval> = vs.par_iter().map(|v| evaluate(pr, &v.f, &v.g, alpha, tau, pinned)).collect();
            for (k, (v, e)) in vs.iter().zip(evals).enumerate() {
                consider(k, &v.f, &v.g, e);
            }
            true
        }
        None => {
            // Descent: the potentials of the linearized optimum never do
            // worse than the pair they came from.
            let starts = pr.starts(tau, pinned, cfg);
            let runs: Vec<Vec<(Vec<f64>, Vec<f64>, Eval)>> = starts
                .into_par_iter()
                .map(|(mut qx, mut qy)| {
                    let mut trail = Vec::new();
                    let mut nx = vec![0.0; qx.len()];
                    let mut ny = vec![0.0; qy.len()];
                    let mut last = ExtReal::PosInf;
                    for _ in 0..cfg.ccp_iters {
                        let (_, f, g) = ot_slices(&qx, &qy, &pr.cs);
                        let e = evaluate(pr, &f, &g, alpha, tau, pinned);
                        let stop = e.value >= last;
                        last = e.value;
                        trail.push((f.clone(), g.clone(), e));
                        if stop {
                            break;
                        }
                        if pinned || alpha <= 0.0 {
                            nx.copy_from_slice(&pr.px);
                        } else {
                            ball_into(&pr.px, &f, alpha, &mut nx);
                        }
                        let r = iproj_into(&pr.py, &g, tau - dot(&nx, &f), &mut ny);
                        if !r.feasible {
                            break;
                        }
                        qx.copy_from_slice(&nx);
                        qy.copy_from_slice(&ny);
                    }
                    trail
                })
                .collect();
            let mut idx = 0;
            for run in runs {
                for (f, g, e) in run {
                    consider(idx, &f, &g, e);
                    idx += 1;
                }
            }
            false
        }
    };
    let (value, _, f, g, lambda, s) = best.expect("at least one candidate");
    let lifted = pr.lift_potentials(&f, &g);
    DualEstimate {
        value,
        certificate: Some(PhiCertificate {
            f: lifted.f,
            g: lifted.g,
            lambda,
            eta: lambda * s,
        }),
        exact,
    }
}

/// Dual of `φ_≥`: the infimum over `f + g ≤ c` of the
/// inner `(λ, η)` supremum. Exact when the dual vertices are enumerable,
/// otherwise the best of a descent from the primal starts.
pub fn dual_phi_geq(
    q: ExponentQuery,
    p_x: &Distribution<f64>,
    p_y: &Distribution<f64>,
    c: &CostMatrix<f64>,
    cfg: &SearchConfig,
) -> Result<DualEstimate> {
    q.validate()?;
    cfg.validate()?;
    let pr = Problem::new(p_x, p_y, c)?;
    Ok(solve(&pr, q.alpha, q.tau, false, cfg, true))
}

/// Dual of `varphi`: `inf_{f+g≤c} sup_{λ≥0} λ(τ − P_X(f)) − ln P_Y(e^{λg})`.
/// A diverging `λ` (threshold above the support of `g`) gives `+∞`.
pub fn dual_varphi_geq(
    tau: f64,
    p_x: &Distribution<f64>,
    p_y: &Distribution<f64>,
    c: &CostMatrix<f64>,
    cfg: &SearchConfig,
) -> Result<DualEstimate> {
    ExponentQuery::new(0.0, tau)?;
    cfg.validate()?;
    let pr = Problem::new(p_x, p_y, c)?;
    Ok(solve(&pr, 0.0, tau, true, cfg, true))
}

/// Gap between the convex envelope of primal `varphi_X` samples and `r`.
#[derive(Debug, Clone, PartialEq)]
pub struct EquivalenceReport {
    /// `(τ, φ̆_X(τ), r(τ))` per grid point.
    pub rows: Vec<(f64, ExtReal<f64>, ExtReal<f64>)>,
    /// Largest `|φ̆_X − r|` where both are finite.
    pub gap: f64,
    pub argmax_tau: f64,
    /// Grid points where exactly one side is infinite.
    pub inf_mismatch: usize,
}

/// Compares `lce_1d(varphi_X samples)` with `r(τ)` on `tau_grid`.
pub fn check_equivalence(g: &MetricSpace, tau_grid: &[f64], cfg: &SearchConfig) -> Result<EquivalenceReport> {
    if tau_grid.is_empty() {
        return Err(Error::Domain("empty tau grid".into()));
    }
    let curve = varphi_x_curve(g.base(), g.dist(), tau_grid, cfg)?;
    compare(g, &curve.row_samples(0), cfg)
}

/// As [`check_equivalence`], but the grid is refined (by bisection, up to
/// `rounds` times) wherever adjacent samples switch between lying on the
/// hull and above it. Near the edge of its domain `varphi_X` can be
/// nonconvex and steep, and a chord between grid points then overshoots
/// `φ̆_X` by far more than the curvature error elsewhere; the tangent
/// points sit exactly at those switches.
pub fn check_equivalence_refined(
    g: &MetricSpace,
    tau_grid: &[f64],
    rounds: usize,
    cfg: &SearchConfig,
) -> Result<EquivalenceReport> {
    if tau_grid.is_empty() {
        return Err(Error::Domain("empty tau grid".into()));
    }
    cfg.validate()?;
    let pr = Problem::symmetric(g.base(), g.dist())?;
    let solve = |ts: &[f64]| -> Result<Vec<(f64, ExtReal<f64>)>> {
        ts.par_iter().map(|&t| Ok((t, pr.varphi(t, cfg)?.value))).collect()
    };
    let mut pts = solve(tau_grid)?;
    for _ in 0..rounds {
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        let env = lce_1d(&monotone(&pts));
        let off: Vec<bool> = pts
            .iter()
            .map(|&(t, v)| match (v, env.eval(t)) {
                (ExtReal::Finite(a), ExtReal::Finite(b)) => a > b + 1e-12 * (1.0 + b.abs()),
                (ExtReal::PosInf, ExtReal::Finite(_)) => true,
                _ => false,
            })
            .collect();
        let mids: Vec<f64> = pts
            .windows(2)
            .zip(off.windows(2))
            .filter(|(w, o)| o[0] != o[1] && w[1].0 - w[0].0 > 1e-12)
            .map(|(w, _)| 0.5 * (w[0].0 + w[1].0))
            .collect();
        if mids.is_empty() {
            break;
        }
        pts.extend(solve(&mids)?);
    }
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    compare(g, &monotone(&pts), cfg)
}

/// Running minimum from the right: `varphi_X` is nondecreasing in `τ`.
fn monotone(pts: &[(f64, ExtReal<f64>)]) -> Vec<(f64, ExtReal<f64>)> {
    let mut out = pts.to_vec();
    for k in (0..out.len().saturating_sub(1)).rev() {
        if out[k + 1].1 < out[k].1 {
            out[k].1 = out[k + 1].1;
        }
    }
    out
}

fn compare(g: &MetricSpace, samples: &[(f64, ExtReal<f64>)], cfg: &SearchConfig) -> Result<EquivalenceReport> {
    let env = lce_1d(samples);
    let lg = LogMgfMax::new(g, cfg.seed);
    let rs: Vec<ExtReal<f64>> = samples
        .par_iter()
        .map(|&(t, _)| lg.legendre(t).map(|r| r.value))
        .collect::<Result<_>>()?;
    let mut report = EquivalenceReport {
        rows: Vec::with_capacity(samples.len()),
        gap: 0.0,
        argmax_tau: samples[0].0,
        inf_mismatch: 0,
    };
    for (&(t, _), r) in samples.iter().zip(rs) {
        let e = env.eval(t);
        match (e, r) {
            (ExtReal::Finite(a), ExtReal::Finite(b)) => {
                if (a - b).abs() > report.gap {
                    report.gap = (a - b).abs();
                    report.argmax_tau = t;
                }
            }
            (a, b) if a.is_finite() != b.is_finite() => report.inf_mismatch += 1,
            _ => {}
        }
        report.rows.push((t, e, r));
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exponents::phi_geq;
    use crate::optim::rng;
    use rand::Rng;

    const D_075: f64 = 0.130_812_035_941_136_97;

    fn bern_half() -> (Distribution<f64>, CostMatrix<f64>) {
        (Distribution::bernoulli(0.5).unwrap(), CostMatrix::hamming(2))
    }

    #[test]
    fn varphi_dual_examples() {
        let (p, c) = bern_half();
        let cfg = SearchConfig::default();
        let d = dual_varphi_geq(0.0, &p, &p, &c, &cfg).unwrap();
        assert_eq!(d.value, ExtReal::Finite(0.0));
        let d = dual_varphi_geq(0.25, &p, &p, &c, &cfg).unwrap();
        assert!((d.value.to_float() - D_075).abs() < 1e-10, "{:?}", d.value);
        let cert = d.certificate.unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert!(cert.f[i] + cert.g[j] <= c.get(i, j) + 1e-12);
            }
        }
        assert!(dual_varphi_geq(1.0, &p, &p, &c, &cfg).unwrap().value.is_pos_inf());
    }

    #[test]
    fn phi_dual_alpha_zero_limit() {
        let (p, c) = bern_half();
        let cfg = SearchConfig::default();
        let d = dual_phi_geq(ExponentQuery::new(0.0, 0.25).unwrap(), &p, &p, &c, &cfg).unwrap();
        assert!((d.value.to_float() - D_075).abs() < 1e-10);
        assert!(d.exact);
    }

    #[test]
    fn sandwich_on_random_three_by_three() {
        let cfg = SearchConfig::default();
        let mut r = rng(7, 1);
        for _ in 0..10 {
            let px = Distribution::from_mass(crate::exponents::dirichlet(&mut r, 3)).unwrap();
            let py = Distribution::from_mass(crate::exponents::dirichlet(&mut r, 3)).unwrap();
            let c = CostMatrix::new((0..3).map(|_| (0..3).map(|_| r.random::<f64>()).collect()).collect()).unwrap();
            for (alpha, tau) in [(0.05, 0.3), (0.2, 0.5), (0.0, 0.4)] {
                let q = ExponentQuery::new(alpha, tau).unwrap();
                let primal = phi_geq(q, &px, &py, &c, &cfg).unwrap().value;
                let dual = dual_phi_geq(q, &px, &py, &c, &cfg).unwrap().value;
                match (primal, dual) {
                    (ExtReal::Finite(a), ExtReal::Finite(b)) => assert!((a - b).abs() < 5e-3, "{a} vs {b}"),
                    (a, b) => assert_eq!(a.is_finite(), b.is_finite(), "{a} vs {b}"),
                }
            }
        }
    }

    #[test]
    fn descent_route_is_an_upper_bound() {
        let p = Distribution::from_mass(vec![0.1, 0.15, 0.2, 0.25, 0.3]).unwrap();
        let c = CostMatrix::new((0..5).map(|i| (0..5).map(|j| (i as f64 - j as f64).abs().sqrt()).collect()).collect()).unwrap();
        let cfg = SearchConfig::default();
        let pr = Problem::symmetric(&p, &c).unwrap();
        let d = solve(&pr, 0.0, 0.5, true, &cfg, false);
        assert!(!d.exact);
        let primal = pr.varphi(0.5, &cfg).unwrap().value.to_float();
        assert!(d.value.to_float() >= primal - 1e-9);
        assert!(d.value.to_float() <= primal + 5e-3, "{} vs {primal}", d.value);
    }

    #[test]
    fn equivalence_two_point() {
        let g = MetricSpace::two_point(0.5, 1.0).unwrap();
        let grid: Vec<f64> = (0..=20).map(|k| 0.025 * k as f64).collect();
        let rep = check_equivalence(&g, &grid, &SearchConfig::default()).unwrap();
        assert!(rep.gap <= 1e-4, "{rep:?}");
        assert_eq!(rep.inf_mismatch, 0);
    }

    #[test]
    fn refinement_resolves_the_edge() {
        // Three points where varphi_X turns steep and nonconvex just
        // below the edge of its domain.
        let p = Distribution::from_mass(vec![0.466_294_317_304_357, 0.197_894_847_042_029_84, 0.335_810_835_653_613_25]).unwrap();
        let d = vec![
            vec![0.0, 0.674_153_760_943_733_4, 0.668_411_996_110_501_2],
            vec![0.674_153_760_943_733_4, 0.0, 0.165_612_394_583_999_65],
            vec![0.668_411_996_110_501_2, 0.165_612_394_583_999_65, 0.0],
        ];
        let g = MetricSpace::new(CostMatrix::new(d).unwrap(), p).unwrap();
        let top = (0..3).map(|j| (0..3).map(|i| g.base().mass()[i] * g.dist().get(i, j)).sum::<f64>()).fold(0.0, f64::max);
        let grid: Vec<f64> = (0..=40).map(|k| top * k as f64 / 40.0).collect();
        let cfg = SearchConfig::default();
        let plain = check_equivalence(&g, &grid, &cfg).unwrap();
        let refined = check_equivalence_refined(&g, &grid, 20, &cfg).unwrap();
        assert!(plain.gap > 0.05, "{}", plain.gap);
        assert!(refined.gap < 1e-4, "{}", refined.gap);
        assert_eq!(refined.inf_mismatch, 0);
    }
}
