//! The acceptance suite: twelve property checks with fixed seeds, plus a
//! smoke test of the shipped problem files.

use std::path::Path;
use std::time::Instant;

use blowup::bruteforce::{convergence_report, dimension_free_check, strassen_gt, talagrand_sweep, Sampling};
use blowup::duals::{abs_r, check_equivalence_refined, dual_psi, MetricSpace, PsiCandidate};
use blowup::envelope::{gen_inverse, lce_1d, lce_2d, uce_1d, ExponentCurve};
use blowup::exponents::{
    hamming_l, phi_geq_curve, varphi_x, varphi_x_curve, ExponentQuery, Method, Problem, SearchConfig,
};
use blowup::ext::ExtReal;
use blowup::optim::rng;
use blowup::ot::{ot_solve, CostMatrix};
use blowup::prob::{iproj_halfspace, log_mgf, tv, Distribution};
use rand::Rng;

use crate::error::CliResult;
use crate::problem::{parse_problem, sha256_hex};

/// `r(0.25)` of the two-point space `{0, 1}`, `P = Bern(1/2)`, `d = 1`,
/// i.e. `d(3/4 ‖ 1/2) = ¾ ln(3/2) + ¼ ln(1/2)`.
pub const R_025: f64 = 0.130_812_035_941_136_98;
/// `L(0.25) = min_p d(p ‖ p + 0.25)`.
pub const L_025: f64 = 0.126_796_653_506_387_25;

/// Outcome of one check.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub label: String,
    pub name: String,
    pub pass: bool,
    pub detail: String,
    pub seconds: f64,
}

impl CheckResult {
    pub fn line(&self) -> String {
        format!(
            "{} {:<4} {:<36} {} [{:.2} s]",
            if self.pass { "PASS" } else { "FAIL" },
            self.label,
            self.name,
            self.detail,
            self.seconds
        )
    }
}

type Outcome = blowup::Result<(bool, String)>;

/// One acceptance criterion.
pub struct Criterion {
    pub id: usize,
    pub name: &'static str,
    /// Wall-clock budget in seconds, where one is part of the criterion.
    pub limit: Option<f64>,
    pub check: fn() -> Outcome,
}

pub fn criteria() -> Vec<Criterion> {
    vec![
        Criterion { id: 1, name: "OT duality", limit: Some(2.0), check: ot_duality },
        Criterion { id: 2, name: "Hamming cost equals TV", limit: None, check: hamming_tv },
        Criterion { id: 3, name: "I-projection duality", limit: None, check: iproj_duality },
        Criterion { id: 4, name: "dimension-free sweep", limit: Some(60.0), check: dimension_free_sweep },
        Criterion { id: 5, name: "product-form sweep", limit: None, check: product_form_sweep },
        Criterion { id: 6, name: "envelope of varphi_X equals r", limit: Some(120.0), check: equivalence },
        Criterion { id: 7, name: "binary closed form", limit: None, check: binary_closed_form },
        Criterion { id: 8, name: "Hamming worst-case bound", limit: None, check: hamming_worst_case },
        Criterion { id: 9, name: "Strassen duality", limit: None, check: strassen },
        Criterion { id: 10, name: "convergence trend", limit: Some(10.0), check: convergence },
        Criterion { id: 11, name: "psi consistency", limit: None, check: psi_consistency },
        Criterion { id: 12, name: "envelope suite", limit: None, check: envelope_suite },
    ]
}

pub fn run_criterion(c: &Criterion) -> CheckResult {
    let t0 = Instant::now();
    let out = (c.check)();
    let seconds = t0.elapsed().as_secs_f64();
    let (mut pass, mut detail) = match out {
        Ok(v) => v,
        Err(e) => (false, format!("error: {e}")),
    };
    if let Some(limit) = c.limit {
        if seconds >= limit {
            pass = false;
            detail.push_str(&format!("; over the {limit} s budget"));
        }
    }
    CheckResult {
        label: format!("C{}", c.id),
        name: c.name.to_string(),
        pass,
        detail,
        seconds,
    }
}

/// Runs the selected criteria (all when `ids` is `None`) in order.
pub fn run_criteria(ids: Option<&[usize]>, mut on_done: impl FnMut(&CheckResult)) -> Vec<CheckResult> {
    criteria()
        .iter()
        .filter(|c| ids.is_none_or(|ids| ids.contains(&c.id)))
        .map(|c| {
            let r = run_criterion(c);
            on_done(&r);
            r
        })
        .collect()
}

/// `criterion,name,pass,detail`; timings stay out so reruns are identical.
pub fn report_csv(results: &[CheckResult]) -> CliResult<(Vec<u8>, usize)> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["criterion", "name", "pass", "detail"])?;
    for r in results {
        w.write_record([r.label.as_str(), &r.name, if r.pass { "true" } else { "false" }, &r.detail])?;
    }
    let bytes = w.into_inner().map_err(|e| crate::error::CliError::Input(e.to_string()))?;
    Ok((bytes, results.len()))
}

fn toml_files(dir: &Path) -> Vec<std::path::PathBuf> {
    let mut v: Vec<_> = std::fs::read_dir(dir)
        .map(|rd| {
            rd.filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "toml"))
                .collect()
        })
        .unwrap_or_default();
    v.sort();
    v
}

pub fn problem_hashes(dir: &Path) -> Vec<(String, String)> {
    toml_files(dir)
        .into_iter()
        .filter_map(|p| std::fs::read(&p).ok().map(|b| (p.display().to_string(), sha256_hex(&b))))
        .collect()
}

/// Parses every problem file in `dir` and runs a few invariants on it:
/// OT duality, monotonicity of `φ(τ)`, and `r(0) = 0` on metric files.
pub fn shipped_problems(dir: &Path) -> CheckResult {
    let t0 = Instant::now();
    let files = toml_files(dir);
    let mut failures = Vec::new();
    for path in &files {
        let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        let check = || -> CliResult<Option<String>> {
            let s = parse_problem(path)?;
            let sol = ot_solve(&s.p_x, &s.p_y, &s.cost)?;
            if (sol.value - sol.dual_value()).abs() > 1e-8 {
                return Ok(Some("OT duality gap".into()));
            }
            let pr = s.problem()?;
            let cfg = s.search.clone();
            let taus = [0.0, 0.1, 0.2, 0.3];
            let mut last = ExtReal::Finite(-1.0);
            for t in taus {
                let v = pr.varphi(t * s.cost.max_entry(), &cfg)?.value;
                if v < last {
                    return Ok(Some("varphi not monotone".into()));
                }
                last = v;
            }
            if s.metric && abs_r(0.0, &s.metric_space()?)?.value != ExtReal::Finite(0.0) {
                return Ok(Some("r(0) ≠ 0".into()));
            }
            Ok(None)
        };
        match check() {
            Ok(None) => {}
            Ok(Some(why)) => failures.push(format!("{name}: {why}")),
            Err(e) => failures.push(format!("{name}: {e}")),
        }
    }
    let pass = failures.is_empty() && !files.is_empty();
    let detail = if files.is_empty() {
        format!("no problem files in {}", dir.display())
    } else if pass {
        format!("{} files parsed and checked", files.len())
    } else {
        failures.join("; ")
    };
    CheckResult {
        label: "S".into(),
        name: "shipped problem files".into(),
        pass,
        detail,
        seconds: t0.elapsed().as_secs_f64(),
    }
}

// ---------------------------------------------------------------------------
// Instances

fn random_dist(r: &mut impl Rng, k: usize) -> Distribution<f64> {
    let w: Vec<f64> = (0..k).map(|_| r.random_range(0.05..1.0)).collect();
    let s: f64 = w.iter().sum();
    Distribution::from_mass(w.iter().map(|x| x / s).collect()).expect("normalized")
}

fn random_cost(r: &mut impl Rng, nx: usize, ny: usize) -> CostMatrix<f64> {
    CostMatrix::new((0..nx).map(|_| (0..ny).map(|_| r.random_range(0.0..1.0)).collect()).collect()).expect("finite")
}

/// Bern(1/2) twice, then 20 random `Bern(u)`, `Bern(v)` pairs.
pub fn binary_pairs() -> Vec<(Distribution<f64>, Distribution<f64>)> {
    let mut r = rng(2024, 0);
    let half = Distribution::bernoulli(0.5).expect("valid");
    let mut out = vec![(half.clone(), half)];
    for _ in 0..20 {
        let u = r.random_range(0.05..0.95);
        let v = r.random_range(0.05..0.95);
        out.push((Distribution::bernoulli(u).expect("valid"), Distribution::bernoulli(v).expect("valid")));
    }
    out
}

/// Up to four points in the unit square with Euclidean distances.
fn random_metric(r: &mut impl Rng) -> blowup::Result<MetricSpace> {
    let k = r.random_range(2..=4usize);
    let pts: Vec<(f64, f64)> = (0..k).map(|_| (r.random_range(0.0..1.0), r.random_range(0.0..1.0))).collect();
    let d: Vec<Vec<f64>> = pts
        .iter()
        .map(|a| pts.iter().map(|b| ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()).collect())
        .collect();
    let p = random_dist(r, k);
    MetricSpace::new(CostMatrix::new(d)?.into_metric()?, p)
}

/// Largest `C(P, Q)`: attained at a point mass since `C(P, ·)` is convex.
fn transport_reach(g: &MetricSpace) -> f64 {
    let k = g.len();
    (0..k)
        .map(|j| (0..k).map(|i| g.base().mass()[i] * g.dist().get(i, j)).sum::<f64>())
        .fold(0.0, f64::max)
}

fn merged(mut g: Vec<f64>) -> Vec<f64> {
    g.sort_by(f64::total_cmp);
    g.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    g
}

fn uniform(hi: f64, steps: usize) -> Vec<f64> {
    (0..=steps).map(|k| hi * k as f64 / steps as f64).collect()
}

fn alpha_cap(p: &Distribution<f64>) -> f64 {
    p.mass().iter().filter(|m| **m > 0.0).map(|m| -m.ln()).fold(0.0, f64::max)
}

fn kl_counts(counts: &[usize], res: usize, p: &[f64]) -> f64 {
    counts
        .iter()
        .zip(p)
        .filter(|(c, _)| **c > 0)
        .map(|(&c, &pi)| {
            let q = c as f64 / res as f64;
            q * (q / pi).ln()
        })
        .sum()
}

/// Minimum of `D(Q‖P)` over mesh points `Q = counts/res` with `Q(f) ≥ τ`.
fn mesh_primal(p: &[f64], f: &[f64], tau: f64, res: usize) -> Option<(f64, Vec<usize>)> {
    fn rec(p: &[f64], f: &[f64], tau: f64, res: usize, left: usize, cur: &mut Vec<usize>, best: &mut Option<(f64, Vec<usize>)>) {
        let k = p.len();
        if cur.len() == k - 1 {
            cur.push(left);
            let mean: f64 = cur.iter().zip(f).map(|(&c, &x)| c as f64 / res as f64 * x).sum();
            if mean >= tau - 1e-12 {
                let d = kl_counts(cur, res, p);
                if best.as_ref().is_none_or(|(b, _)| d < *b) {
                    *best = Some((d, cur.clone()));
                }
            }
            cur.pop();
            return;
        }
        for c in 0..=left {
            cur.push(c);
            rec(p, f, tau, res, left - c, cur, best);
            cur.pop();
        }
    }
    let mut best = None;
    rec(p, f, tau, res, res, &mut Vec::with_capacity(p.len()), &mut best);
    best
}

// ---------------------------------------------------------------------------
// Criteria

fn ot_duality() -> Outcome {
    let mut r = rng(1, 0);
    let (mut gap, mut res, mut slack) = (0.0_f64, 0.0_f64, 0.0_f64);
    for _ in 0..200 {
        let (nx, ny) = (r.random_range(1..=5), r.random_range(1..=5));
        let (p, q) = (random_dist(&mut r, nx), random_dist(&mut r, ny));
        let c = random_cost(&mut r, nx, ny);
        let s = ot_solve(&p, &q, &c)?;
        gap = gap.max((s.value - s.dual_value()).abs());
        res = res.max(s.coupling.marginal_residual());
        slack = slack.min(s.potentials.feasibility_slack(&c));
    }
    Ok((
        gap <= 1e-8 && res <= 1e-10 && slack >= -1e-11,
        format!("200 instances: gap {gap:.1e}, residual {res:.1e}, slack {slack:.1e}"),
    ))
}

fn hamming_tv() -> Outcome {
    let mut r = rng(2, 0);
    let mut worst = 0.0_f64;
    for _ in 0..100 {
        let k = r.random_range(2..=5);
        let (p, q) = (random_dist(&mut r, k), random_dist(&mut r, k));
        let c = ot_solve(&p, &q, &CostMatrix::hamming(k))?.value;
        worst = worst.max((c - tv(&p, &q)?).abs());
    }
    Ok((worst <= 1e-10, format!("100 instances: max |C − TV| {worst:.1e}")))
}

fn iproj_duality() -> Outcome {
    const RES: usize = 240;
    let mut r = rng(3, 0);
    let mut worst_excess = f64::NEG_INFINITY;
    let mut weak = 0.0_f64;
    let mut cert = 0.0_f64;
    for _ in 0..50 {
        let k = r.random_range(2..=4usize);
        let p = random_dist(&mut r, k);
        let f: Vec<f64> = (0..k).map(|_| r.random_range(0.0..1.0)).collect();
        let mean: f64 = p.mass().iter().zip(&f).map(|(a, b)| a * b).sum();
        let top = f.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let tau = mean + r.random_range(0.1..0.8) * (top - mean);
        let ip = iproj_halfspace(&p, &f, tau)?;
        let dual = ip.value.to_float();
        if let ExtReal::Finite(l) = ip.lambda {
            cert = cert.max((l * tau - log_mgf(p.mass(), &f, l) - dual).abs());
        }
        let Some((primal, at)) = mesh_primal(p.mass(), &f, tau, RES) else {
            return Ok((false, format!("no mesh point meets τ = {tau}")));
        };
        // Modulus: the largest change of D under one 1/RES mass move.
        let mut omega = 0.0_f64;
        for i in 0..k {
            for j in 0..k {
                if i == j || at[i] == 0 {
                    continue;
                }
                let mut m = at.clone();
                m[i] -= 1;
                m[j] += 1;
                omega = omega.max((kl_counts(&m, RES, p.mass()) - primal).abs());
            }
        }
        weak = weak.max(dual - primal);
        worst_excess = worst_excess.max(primal - dual - ((k - 1) as f64 * omega + 1e-6));
    }
    Ok((
        worst_excess <= 0.0 && weak <= 1e-9 && cert <= 1e-9,
        format!("50 instances: max (mesh − dual − tolerance) {worst_excess:.1e}, dual above mesh {weak:.1e}, certificate {cert:.1e}"),
    ))
}

fn dimension_free_sweep() -> Outcome {
    let h = CostMatrix::hamming(2);
    let cfg = SearchConfig::default();
    let sampling = Sampling::default();
    let (mut violations, mut checked) = (0, 0);
    let mut worst = f64::INFINITY;
    for (px, py) in binary_pairs() {
        let pr = Problem::new(&px, &py, &h)?;
        let cap = alpha_cap(&px);
        let alphas = merged(uniform(cap, 24));
        let mut taus = uniform(1.0, 24);
        for n in 1..=3 {
            taus.extend((0..=n).map(|t| t as f64 / n as f64));
        }
        let env = lce_2d(&phi_geq_curve(&pr, &alphas, &merged(taus), &cfg)?);
        for n in 1..=3usize {
            let t_grid: Vec<f64> = (0..=n).map(|t| t as f64).collect();
            let rep = dimension_free_check(n, &t_grid, &px, &py, &h, Some(&sampling), 1e-3, |a, tau| Ok(env.query(a.min(cap), tau)))?;
            violations += rep.violations;
            checked += rep.checked;
            worst = worst.min(rep.worst_slack);
        }
    }
    Ok((
        violations == 0,
        format!("21 pairs, n ≤ 3, {checked} rows: {violations} violations, worst slack {worst:.2e}"),
    ))
}

fn product_form_sweep() -> Outcome {
    let h = CostMatrix::hamming(2);
    let cfg = SearchConfig::default();
    let lambdas: Vec<f64> = (0..=20).map(|k| k as f64 * 0.05).collect();
    let mut taus = uniform(1.0, 48);
    taus.extend([1.0 / 3.0, 2.0 / 3.0]);
    let taus = merged(taus);
    let mut worst = f64::INFINITY;
    for (px, py) in binary_pairs() {
        let pr = Problem::new(&px, &py, &h)?;
        let envs = lambdas
            .iter()
            .map(|&l| {
                let s = taus
                    .iter()
                    .map(|&t| Ok((t, pr.phi_lambda_geq(t, l, &cfg)?.value)))
                    .collect::<blowup::Result<Vec<_>>>()?;
                Ok(lce_1d(&s))
            })
            .collect::<blowup::Result<Vec<_>>>()?;
        for n in 1..=3usize {
            let t_grid: Vec<f64> = (0..=n).map(|t| t as f64).collect();
            let rep = talagrand_sweep(n, &lambdas, &t_grid, &px, &py, &h, None, |l, tau| {
                let k = lambdas.iter().position(|x| *x == l).expect("grid λ");
                Ok(envs[k].eval(tau))
            })?;
            worst = worst.min(rep.worst_slack);
        }
    }
    Ok((worst >= -1e-6, format!("21 pairs, n ≤ 3, λ ∈ {{0, 0.05, …, 1}}: worst slack {worst:.2e}")))
}

fn equivalence() -> Outcome {
    let cfg = SearchConfig::default();
    let g = MetricSpace::two_point(0.5, 1.0)?;
    let grid: Vec<f64> = (0..=20).map(|k| 0.025 * k as f64).collect();
    let two = check_equivalence_refined(&g, &grid, 20, &cfg)?;
    let r = abs_r(0.25, &g)?.value.to_float();
    let env = two
        .rows
        .iter()
        .find(|row| (row.0 - 0.25).abs() < 1e-12)
        .map_or(f64::NAN, |row| row.1.to_float());
    let two_ok = two.gap <= 1e-4 && (r - R_025).abs() <= 1e-4 && (env - R_025).abs() <= 1e-4 && two.inf_mismatch == 0;
    let mut rr = rng(6, 0);
    let (mut worst, mut mismatches) = (0.0_f64, 0);
    for _ in 0..25 {
        let m = random_metric(&mut rr)?;
        let grid = uniform(transport_reach(&m), 40);
        let rep = check_equivalence_refined(&m, &grid, 20, &cfg)?;
        worst = worst.max(rep.gap);
        mismatches += rep.inf_mismatch;
    }
    Ok((
        two_ok && worst <= 5e-3 && mismatches == 0,
        format!(
            "two-point gap {:.1e}, r(0.25) = {r:.6}, envelope(0.25) = {env:.6}; 25 random spaces: max gap {worst:.1e}, {mismatches} ±∞ mismatches",
            two.gap
        ),
    ))
}

fn binary_closed_form() -> Outcome {
    let cfg = SearchConfig::default();
    let p = Distribution::bernoulli(0.5)?;
    let h = CostMatrix::hamming(2);
    let pr = Problem::symmetric(&p, &h)?;
    let mut worst = 0.0_f64;
    for k in 1..=9 {
        let t = 0.05 * k as f64;
        let x = 0.5 + t;
        let entropy = -(x * x.ln() + (1.0 - x) * (1.0 - x).ln());
        let v = pr.varphi(t, &cfg)?.value.to_float();
        worst = worst.max((v - (std::f64::consts::LN_2 - entropy)).abs());
    }
    let shift = 1e-9;
    let mut all_inf = true;
    for a in [0.0, 0.1, 0.5, 1.0, 2.0] {
        let e = pr.phi(ExponentQuery::new(a, 1.0)?, shift, &cfg)?;
        all_inf &= e.value.is_pos_inf();
    }
    Ok((
        worst <= 1e-4 && all_inf,
        format!("max |varphi − (ln 2 − H)| {worst:.1e}; φ(α, 1) = +inf for α ∈ {{0, 0.1, 0.5, 1, 2}}: {all_inf}"),
    ))
}

fn hamming_worst_case() -> Outcome {
    let cfg = SearchConfig::default();
    let l = hamming_l(0.25)?.to_float();
    let mut r = rng(8, 0);
    let mut worst = f64::INFINITY;
    for _ in 0..30 {
        let k = r.random_range(2..=6);
        let p = random_dist(&mut r, k);
        let v = varphi_x(0.25, &p, &CostMatrix::hamming(k), &cfg)?.value.to_float();
        worst = worst.min(v - L_025);
    }
    let mut sweep = Vec::new();
    for m in [2usize, 3, 4, 8, 16, 32, 64] {
        let v = varphi_x(0.25, &Distribution::uniform(m), &CostMatrix::hamming(m), &cfg)?.value.to_float();
        sweep.push((m, v - L_025));
    }
    let gap = |m: usize| sweep.iter().find(|s| s.0 == m).map_or(f64::NAN, |s| s.1);
    let report: Vec<String> = sweep.iter().map(|(m, g)| format!("{m}:{g:.2e}")).collect();
    Ok((
        (l - L_025).abs() <= 1e-9 && worst >= -1e-6 && gap(64) < gap(2),
        format!(
            "L(0.25) = {l:.6}; 30 random laws: min varphi_X − L {worst:.2e}; uniform gaps {}",
            report.join(" ")
        ),
    ))
}

fn strassen() -> Outcome {
    let h = CostMatrix::hamming(2);
    let mut worst = 0.0_f64;
    let mut count = 0;
    for (px, py) in binary_pairs().into_iter().skip(1) {
        for n in 1..=2usize {
            for t in 0..=n {
                worst = worst.max(strassen_gt(n, t as f64, &px, &py, &h)?.gap.abs());
                count += 1;
            }
        }
    }
    Ok((worst <= 1e-8, format!("{count} cases: max |LP − sets| {worst:.1e}")))
}

fn convergence() -> Outcome {
    let rows = convergence_report(&[64, 256, 1024], 0.25, 0.5, 0.5)?;
    let target = rows.first().map_or(f64::NAN, |r| r.target.to_float());
    let gaps: Vec<f64> = rows.iter().map(|r| r.gap).collect();
    let decreasing = gaps.windows(2).all(|w| w[1] < w[0]);
    let last = gaps.last().copied().unwrap_or(f64::NAN);
    let list: Vec<String> = rows.iter().map(|r| format!("n={}:{:.4}", r.n, r.e1.to_float())).collect();
    Ok((
        (target - R_025).abs() <= 1e-9 && decreasing && last <= 0.02,
        format!("E₁ {}; gaps {gaps:.4?} (target {target:.6})", list.join(" ")),
    ))
}

fn psi_consistency() -> Outcome {
    let cfg = SearchConfig::default();
    let h = CostMatrix::hamming(2);
    let mut zero = true;
    let half = Problem::symmetric(&Distribution::bernoulli(0.5)?, &h)?;
    for a in [0.1, 0.3] {
        for t in [1.0, 1.5] {
            zero &= half.psi(ExponentQuery::new(a, t)?, &cfg)?.value == ExtReal::Finite(0.0);
        }
    }
    let mut r = rng(11, 0);
    let mut worst = 0.0_f64;
    for _ in 0..10 {
        let px = Distribution::bernoulli(r.random_range(0.05..0.95))?;
        let py = Distribution::bernoulli(r.random_range(0.05..0.95))?;
        let pr = Problem::new(&px, &py, &h)?;
        for a in [0.1, 0.3] {
            for t in [0.1, 0.2, 0.3] {
                let q = ExponentQuery::new(a, t)?;
                let e = pr.psi(q, &cfg)?;
                let cands: Vec<PsiCandidate> = PsiCandidate::from_estimate(&e).into_iter().collect();
                let d = dual_psi(q, &px, &py, &h, &cands)?;
                let gap = match (e.value, d.value) {
                    (ExtReal::Finite(x), ExtReal::Finite(y)) => (x - y).abs(),
                    (x, y) if x == y => 0.0,
                    _ => f64::INFINITY,
                };
                worst = worst.max(gap);
            }
        }
    }
    Ok((
        zero && worst <= 5e-3,
        format!("ψ(α, τ ≥ c_max) = 0: {zero}; 60 queries: max |primal − dual| {worst:.1e}"),
    ))
}

/// Smallest mixture of at most three cloud points reproducing `(a, t)`.
pub fn three_point_min(pts: &[[f64; 3]], a: f64, t: f64) -> f64 {
    let mut best = f64::INFINITY;
    let n = pts.len();
    for (i, p) in pts.iter().enumerate() {
        if (p[0] - a).abs() < 1e-12 && (p[1] - t).abs() < 1e-12 {
            best = best.min(p[2]);
        }
        for j in i + 1..n {
            for k in j..n {
                let (q, r) = (&pts[j], &pts[k]);
                let m = [[p[0] - r[0], q[0] - r[0]], [p[1] - r[1], q[1] - r[1]]];
                let rhs = [a - r[0], t - r[1]];
                let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
                let ws = if det.abs() > 1e-12 {
                    vec![(
                        (rhs[0] * m[1][1] - m[0][1] * rhs[1]) / det,
                        (m[0][0] * rhs[1] - rhs[0] * m[1][0]) / det,
                    )]
                } else {
                    // Collinear: each pair on its own.
                    let mut v = Vec::new();
                    for (x, y, pick) in [(p, q, 0), (p, r, 1), (q, r, 2)] {
                        let d = [y[0] - x[0], y[1] - x[1]];
                        let len2 = d[0] * d[0] + d[1] * d[1];
                        if len2 < 1e-24 {
                            continue;
                        }
                        let s = ((a - x[0]) * d[0] + (t - x[1]) * d[1]) / len2;
                        if (x[0] + s * d[0] - a).abs() > 1e-12 || (x[1] + s * d[1] - t).abs() > 1e-12 {
                            continue;
                        }
                        v.push(match pick {
                            0 => (1.0 - s, s),
                            1 => (1.0 - s, 0.0),
                            _ => (0.0, 1.0 - s),
                        });
                    }
                    v
                };
                for (wp, wq) in ws {
                    let wr = 1.0 - wp - wq;
                    if wp >= -1e-12 && wq >= -1e-12 && wr >= -1e-12 {
                        best = best.min(wp * p[2] + wq * q[2] + wr * r[2]);
                    }
                }
            }
        }
    }
    best
}

fn envelope_suite() -> Outcome {
    let mut r = rng(12, 0);
    // 1D: domination, idempotence, midpoint convexity (and the concave mirror).
    let (mut dom, mut idem, mut mid) = (0.0_f64, 0.0_f64, 0.0_f64);
    for _ in 0..20 {
        let mut xs: Vec<f64> = (0..30).map(|_| r.random_range(0.0..1.0)).collect();
        xs.sort_by(f64::total_cmp);
        xs.dedup();
        let s: Vec<(f64, ExtReal<f64>)> = xs.iter().map(|&x| (x, ExtReal::Finite(r.random_range(-1.0..1.0)))).collect();
        let (lo, up) = (lce_1d(&s), uce_1d(&s));
        let again_lo = lce_1d(&xs.iter().map(|&x| (x, lo.eval(x))).collect::<Vec<_>>());
        let again_up = uce_1d(&xs.iter().map(|&x| (x, up.eval(x))).collect::<Vec<_>>());
        for &(x, v) in &s {
            let v = v.to_float();
            dom = dom.max(lo.eval(x).to_float() - v).max(v - up.eval(x).to_float());
            idem = idem
                .max((again_lo.eval(x).to_float() - lo.eval(x).to_float()).abs())
                .max((again_up.eval(x).to_float() - up.eval(x).to_float()).abs());
        }
        let (a0, a1) = (xs[0], xs[xs.len() - 1]);
        for _ in 0..50 {
            let (a, b) = (r.random_range(a0..=a1), r.random_range(a0..=a1));
            let m = 0.5 * (a + b);
            let f = |p: &blowup::envelope::Pwl, x: f64| p.eval(x).to_float();
            mid = mid
                .max(f(&lo, m) - 0.5 * (f(&lo, a) + f(&lo, b)))
                .max(0.5 * (f(&up, a) + f(&up, b)) - f(&up, m));
        }
    }
    // 2D: the hull query against all ≤ 3-point mixtures.
    let mut mix = 0.0_f64;
    for _ in 0..10 {
        let grid: Vec<f64> = (0..5).map(|k| k as f64 * 0.25).collect();
        let values: Vec<ExtReal<f64>> = (0..25).map(|_| ExtReal::Finite(r.random_range(0.0..2.0))).collect();
        let curve = ExponentCurve::new(grid.clone(), grid, values, vec![Method::Grid; 25])?;
        let env = lce_2d(&curve);
        let pts: Vec<[f64; 3]> = curve.cells().map(|(a, t, v, _)| [a, t, v.to_float()]).collect();
        for _ in 0..20 {
            let (a, t) = (r.random_range(0.0..1.0), r.random_range(0.0..1.0));
            mix = mix.max((env.query(a, t).to_float() - three_point_min(&pts, a, t)).abs());
        }
    }
    // gen_inverse of the varphi_X envelope against the concave envelope of κ_X.
    let cfg = SearchConfig::default();
    let c = CostMatrix::hamming(2);
    let mut chain = f64::NEG_INFINITY;
    for p in [0.5, 0.3] {
        let px = Distribution::bernoulli(p)?;
        let taus: Vec<f64> = (0..=100).map(|k| k as f64 * 0.01).collect();
        let phi = lce_1d(&varphi_x_curve(&px, &c, &taus, &cfg)?.row_samples(0));
        let pr = Problem::symmetric(&px, &c)?;
        let alphas: Vec<f64> = (1..=60).map(|k| k as f64 * 0.02).collect();
        let kap = alphas
            .iter()
            .map(|&a| Ok((a, pr.kappa(a, &cfg)?.value)))
            .collect::<blowup::Result<Vec<(f64, ExtReal<f64>)>>>()?;
        let uce = uce_1d(&kap);
        let modulus = kap
            .windows(2)
            .map(|w| (w[1].1.to_float() - w[0].1.to_float()).abs())
            .fold(0.01, f64::max);
        for &a in &alphas {
            let inv = gen_inverse(&phi, a).unwrap_or(f64::INFINITY);
            chain = chain.max((inv - uce.eval(a).to_float()).abs() - 2.0 * modulus);
        }
    }
    Ok((
        dom <= 1e-9 && idem <= 1e-9 && mid <= 1e-9 && mix <= 1e-8 && chain <= 0.0,
        format!(
            "domination {dom:.1e}, idempotence {idem:.1e}, midpoint {mid:.1e}; 2D vs mixtures {mix:.1e}; identity chain excess {chain:.1e}"
        ),
    ))
}
