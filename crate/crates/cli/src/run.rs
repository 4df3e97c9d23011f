use std::path::Path;
use std::time::Instant;

use blowup::bruteforce::{
    convergence_report, dimension_free_check, exponents_e, gamma_exchangeable, gamma_levels, strassen_gt, talagrand_sweep,
    Sampling,
};
use blowup::duals::{abs_r, check_equivalence_refined, dual_phi_geq, dual_psi, dual_varphi_geq, dual_varphi_x, PsiCandidate};
use blowup::envelope::{lce_1d, lce_2d, ExponentCurve};
use blowup::exponents::{phi_geq_curve, varphi_curve, varphi_x_curve, ExponentQuery, Estimate, Problem, SearchConfig};
use blowup::ext::ExtReal;
use blowup::ot::{ot_solve, CostMatrix};
use blowup::prob::{kl, renyi0, tv, Distribution};
use clap::Parser;
use rayon::prelude::*;

use crate::cli::{BruteCmd, Cli, Command, DualCmd, EnvelopeArgs, ExponentCmd};
use crate::error::{CliError, CliResult};
use crate::grid::{parse_counts, parse_grid};
use crate::output::{curve_csv, fmt_f64, points_csv, read_curve, results_csv, sweep_csv, OutDir, ResultRow, SweepRow};
use crate::problem::{parse_problem, ProblemSpec};
use crate::verify;

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run(args: Vec<String>) -> i32 {
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.threads.unwrap_or(0)).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    match pool.install(|| execute(&cli, &args)) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

struct Ctx {
    spec: Option<ProblemSpec>,
    cfg: SearchConfig,
    seed: u64,
    out: OutDir,
}

impl Ctx {
    fn spec(&self) -> CliResult<&ProblemSpec> {
        self.spec
            .as_ref()
            .ok_or_else(|| CliError::Usage("this command needs --problem <file>".into()))
    }

    fn problem(&self) -> CliResult<Problem> {
        self.spec()?.problem()
    }

    /// Writes one output file and echoes it to stdout.
    fn emit(&mut self, name: &str, (bytes, rows): (Vec<u8>, usize), since: Instant) -> CliResult<()> {
        self.out.write(name, &bytes, rows, since.elapsed().as_secs_f64())?;
        print!("{}", String::from_utf8_lossy(&bytes));
        Ok(())
    }
}

fn execute(cli: &Cli, args: &[String]) -> CliResult<i32> {
    let start = Instant::now();
    let spec = cli.problem.as_deref().map(parse_problem).transpose()?;
    let mut cfg = spec.as_ref().map(|s| s.search.clone()).unwrap_or_default();
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let mut out = OutDir::create(&cli.out_dir)?;
    if let (Some(path), Some(s)) = (&cli.problem, &spec) {
        out.input(&path.display().to_string(), &s.sha256);
    }
    let mut ctx = Ctx {
        spec,
        seed: cfg.seed,
        cfg,
        out,
    };
    let code = match &cli.command {
        Command::Divergence { q } => divergence(&mut ctx, q.as_deref()).map(|_| 0),
        Command::Ot => ot(&mut ctx).map(|_| 0),
        Command::Exponent(c) => exponent(&mut ctx, c).map(|_| 0),
        Command::Envelope(a) => envelope(&mut ctx, a).map(|_| 0),
        Command::Dual(c) => dual(&mut ctx, c).map(|_| 0),
        Command::Bruteforce(c) => brute(&mut ctx, c).map(|_| 0),
        Command::Verify(a) => verify_cmd(&mut ctx, a.only.as_deref(), &a.problems_dir),
    }?;
    let seed = ctx.seed;
    ctx.out.finish(&args.join(" "), seed, start.elapsed().as_secs_f64())?;
    Ok(code)
}

fn estimate_row(quantity: &str, e: &Estimate) -> ResultRow {
    let mut r = ResultRow::new(quantity, e.value, e.method.as_str());
    if e.coarse_grid {
        r = r.certificate("coarse-grid");
    }
    r
}

fn divergence(ctx: &mut Ctx, q: Option<&str>) -> CliResult<()> {
    let t0 = Instant::now();
    let s = ctx.spec()?;
    let q = match q {
        Some(list) => {
            let m = list
                .split(',')
                .map(|t| t.trim().parse::<f64>().map_err(|_| CliError::Usage(format!("{t:?} is not a mass"))))
                .collect::<CliResult<Vec<f64>>>()?;
            Distribution::with_labels(s.p_y.labels().to_vec(), m).map_err(|e| CliError::Input(format!("--q: {e}")))?
        }
        None => s.p_y.clone(),
    };
    let mut rows = vec![ResultRow::new("ot_cost", ExtReal::Finite(ot_solve(&s.p_x, &q, &s.cost)?.value), "simplex")];
    if q.len() == s.p_x.len() {
        rows.push(ResultRow::new("kl", kl(&q, &s.p_x)?, "exact").certificate("D(Q||P_X)"));
        rows.push(ResultRow::new("kl_reverse", kl(&s.p_x, &q)?, "exact").certificate("D(P_X||Q)"));
        rows.push(ResultRow::new("tv", ExtReal::Finite(tv(&q, &s.p_x)?), "exact"));
        rows.push(ResultRow::new("renyi0", renyi0(&q, &s.p_x)?, "exact").certificate("D_0(Q||P_X)"));
    }
    ctx.emit("divergence.csv", results_csv(&rows)?, t0)
}

fn ot(ctx: &mut Ctx) -> CliResult<()> {
    let t0 = Instant::now();
    let s = ctx.spec()?;
    let sol = ot_solve(&s.p_x, &s.p_y, &s.cost)?;
    let cert = format!(
        "dual={};marginal_residual={};feasibility_slack={}",
        fmt_f64(sol.dual_value()),
        fmt_f64(sol.coupling.marginal_residual()),
        fmt_f64(sol.potentials.feasibility_slack(&s.cost))
    );
    let rows = [ResultRow::new("ot_cost", ExtReal::Finite(sol.value), "simplex").certificate(cert)];
    let mut plan = Vec::new();
    let (nx, ny) = sol.coupling.shape();
    for i in 0..nx {
        for j in 0..ny {
            plan.push(
                ResultRow::new("plan", ExtReal::Finite(sol.coupling.get(i, j)), "simplex")
                    .certificate(format!("x={};y={}", s.p_x.labels()[i], s.p_y.labels()[j])),
            );
        }
    }
    for (side, labels, v) in [("f", s.p_x.labels(), &sol.potentials.f), ("g", s.p_y.labels(), &sol.potentials.g)] {
        for (l, x) in labels.iter().zip(v.iter()) {
            plan.push(ResultRow::new("potential", ExtReal::Finite(*x), "simplex").certificate(format!("{side}[{l}]")));
        }
    }
    let plan_csv = results_csv(&plan)?;
    ctx.emit("ot.csv", results_csv(&rows)?, t0)?;
    ctx.out.write("ot_plan.csv", &plan_csv.0, plan_csv.1, t0.elapsed().as_secs_f64())?;
    Ok(())
}

fn strict_shift(c: &CostMatrix<f64>) -> f64 {
    1e-9 * c.max_entry().max(1.0)
}

fn phi_curve(pr: &Problem, alphas: &[f64], taus: &[f64], cfg: &SearchConfig) -> CliResult<ExponentCurve> {
    let nt = taus.len();
    let shift = strict_shift(pr.cost());
    let cells: Vec<Estimate> = (0..alphas.len() * nt)
        .into_par_iter()
        .map(|k| pr.phi(ExponentQuery::new(alphas[k / nt], taus[k % nt])?, shift, cfg))
        .collect::<blowup::Result<_>>()?;
    Ok(ExponentCurve::new(
        alphas.to_vec(),
        taus.to_vec(),
        cells.iter().map(|e| e.value).collect(),
        cells.iter().map(|e| e.method).collect(),
    )?)
}

fn exponent(ctx: &mut Ctx, c: &ExponentCmd) -> CliResult<()> {
    let t0 = Instant::now();
    let cfg = ctx.cfg.clone();
    match c {
        ExponentCmd::Phi { grids, closed } => {
            let (a, t) = (parse_grid(&grids.alpha_grid)?, parse_grid(&grids.tau_grid)?);
            let pr = ctx.problem()?;
            let (curve, name) = if *closed {
                (phi_geq_curve(&pr, &a, &t, &cfg)?, "phi_geq.csv")
            } else {
                (phi_curve(&pr, &a, &t, &cfg)?, "phi.csv")
            };
            ctx.emit(name, curve_csv(&curve)?, t0)
        }
        ExponentCmd::Varphi(g) => {
            let t = parse_grid(&g.tau_grid)?;
            let curve = varphi_curve(&ctx.problem()?, &t, &cfg)?;
            ctx.emit("varphi.csv", curve_csv(&curve)?, t0)
        }
        ExponentCmd::VarphiX(g) => {
            let t = parse_grid(&g.tau_grid)?;
            let s = ctx.spec()?;
            let curve = varphi_x_curve(&s.p_x, &s.cost, &t, &cfg)?;
            ctx.emit("varphi_x.csv", curve_csv(&curve)?, t0)
        }
        ExponentCmd::Kappa { alpha_grid } => {
            let a = parse_grid(alpha_grid)?;
            let s = ctx.spec()?;
            let pr = Problem::symmetric(&s.p_x, &s.cost)?;
            let rows = a
                .par_iter()
                .map(|&x| Ok(estimate_row("kappa", &pr.kappa(x, &cfg)?).alpha(x)))
                .collect::<CliResult<Vec<_>>>()?;
            ctx.emit("kappa.csv", results_csv(&rows)?, t0)
        }
        ExponentCmd::PhiLambda { lambda_grid, tau } => {
            let (l, t) = (parse_grid(lambda_grid)?, parse_grid(&tau.tau_grid)?);
            let pr = ctx.problem()?;
            let cells: Vec<(f64, f64)> = l.iter().flat_map(|&x| t.iter().map(move |&y| (x, y))).collect();
            let rows = cells
                .par_iter()
                .map(|&(x, y)| Ok(estimate_row("phi_lambda_geq", &pr.phi_lambda_geq(y, x, &cfg)?).lambda(x).tau(y)))
                .collect::<CliResult<Vec<_>>>()?;
            ctx.emit("phi_lambda.csv", results_csv(&rows)?, t0)
        }
        ExponentCmd::Psi(g) => {
            let (a, t) = (parse_grid(&g.alpha_grid)?, parse_grid(&g.tau_grid)?);
            let pr = ctx.problem()?;
            let mut rows = Vec::new();
            for &x in &a {
                for &y in &t {
                    let e = pr.psi(ExponentQuery::new(x, y)?, &cfg)?;
                    let mut r = ResultRow::new("psi", e.value, e.method.as_str())
                        .alpha(x)
                        .tau(y)
                        .certificate(format!("lower-estimate;lambda={}", fmt_f64(e.lambda)));
                    if e.coarse_grid {
                        r.certificate.push_str(";coarse-grid");
                    }
                    rows.push(r);
                }
            }
            ctx.emit("psi.csv", results_csv(&rows)?, t0)
        }
    }
}

fn envelope(ctx: &mut Ctx, a: &EnvelopeArgs) -> CliResult<()> {
    let t0 = Instant::now();
    let curve = read_curve(&a.input)?;
    if let Ok(bytes) = std::fs::read(&a.input) {
        ctx.out.input(&a.input.display().to_string(), &crate::problem::sha256_hex(&bytes));
    }
    let alphas = match &a.alpha_grid {
        Some(g) => parse_grid(g)?,
        None => curve.alpha_grid().to_vec(),
    };
    let taus = match &a.tau_grid {
        Some(g) => parse_grid(g)?,
        None => curve.tau_grid().to_vec(),
    };
    let mut pts = Vec::new();
    if curve.alpha_grid().len() == 1 {
        let env = lce_1d(&curve.row_samples(0));
        for &al in &alphas {
            for &t in &taus {
                pts.push((al, t, env.eval(t), "lce1d"));
            }
        }
    } else {
        let env = lce_2d(&curve);
        for &al in &alphas {
            for &t in &taus {
                pts.push((al, t, env.query(al, t), "lce2d"));
            }
        }
    }
    ctx.emit("envelope.csv", points_csv(&pts)?, t0)
}

fn need_metric(s: &ProblemSpec) -> CliResult<blowup::duals::MetricSpace> {
    s.metric_space()
}

fn dual(ctx: &mut Ctx, c: &DualCmd) -> CliResult<()> {
    let t0 = Instant::now();
    let cfg = ctx.cfg.clone();
    match c {
        DualCmd::Phi(g) => {
            let (a, t) = (parse_grid(&g.alpha_grid)?, parse_grid(&g.tau_grid)?);
            let s = ctx.spec()?;
            let cells: Vec<(f64, f64)> = a.iter().flat_map(|&x| t.iter().map(move |&y| (x, y))).collect();
            let rows = cells
                .par_iter()
                .map(|&(x, y)| {
                    let d = dual_phi_geq(ExponentQuery::new(x, y)?, &s.p_x, &s.p_y, &s.cost, &cfg)?;
                    Ok(dual_row("dual_phi_geq", &d).alpha(x).tau(y))
                })
                .collect::<CliResult<Vec<_>>>()?;
            ctx.emit("dual_phi.csv", results_csv(&rows)?, t0)
        }
        DualCmd::Varphi(g) => {
            let t = parse_grid(&g.tau_grid)?;
            let s = ctx.spec()?;
            let rows = t
                .par_iter()
                .map(|&y| Ok(dual_row("dual_varphi", &dual_varphi_geq(y, &s.p_x, &s.p_y, &s.cost, &cfg)?).tau(y)))
                .collect::<CliResult<Vec<_>>>()?;
            ctx.emit("dual_varphi.csv", results_csv(&rows)?, t0)
        }
        DualCmd::VarphiX(g) => {
            let t = parse_grid(&g.tau_grid)?;
            let m = need_metric(ctx.spec()?)?;
            let rows = t
                .par_iter()
                .map(|&y| {
                    let (v, f) = dual_varphi_x(y, &m)?;
                    let cert = f.map(|f| format!("f={}", join(&f.f))).unwrap_or_default();
                    Ok(ResultRow::new("dual_varphi_x", v, "dual-vertex").tau(y).certificate(cert))
                })
                .collect::<CliResult<Vec<_>>>()?;
            ctx.emit("dual_varphi_x.csv", results_csv(&rows)?, t0)
        }
        DualCmd::AbsR(g) => {
            let t = parse_grid(&g.tau_grid)?;
            let m = need_metric(ctx.spec()?)?;
            let rows = t
                .par_iter()
                .map(|&y| {
                    let r = abs_r(y, &m)?;
                    Ok(ResultRow::new("abs_r", r.value, "legendre").tau(y).lambda(r.lambda))
                })
                .collect::<CliResult<Vec<_>>>()?;
            ctx.emit("abs_r.csv", results_csv(&rows)?, t0)
        }
        DualCmd::Psi(g) => {
            let (a, t) = (parse_grid(&g.alpha_grid)?, parse_grid(&g.tau_grid)?);
            let s = ctx.spec()?;
            let pr = s.problem()?;
            let mut rows = Vec::new();
            for &x in &a {
                for &y in &t {
                    let q = ExponentQuery::new(x, y)?;
                    let e = pr.psi(q, &cfg)?;
                    let cands: Vec<PsiCandidate> = PsiCandidate::from_estimate(&e).into_iter().collect();
                    let d = dual_psi(q, &s.p_x, &s.p_y, &s.cost, &cands)?;
                    rows.push(ResultRow::new("psi", e.value, e.method.as_str()).alpha(x).tau(y));
                    let cert = d
                        .certificate
                        .map(|c| format!("lambda={};eta={}", fmt_f64(c.lambda), fmt_f64(c.eta)))
                        .unwrap_or_default();
                    rows.push(ResultRow::new("dual_psi", d.value, "dual-candidates").alpha(x).tau(y).certificate(cert));
                }
            }
            ctx.emit("dual_psi.csv", results_csv(&rows)?, t0)
        }
        DualCmd::Equiv { tau, rounds } => {
            let t = parse_grid(&tau.tau_grid)?;
            let m = need_metric(ctx.spec()?)?;
            let rep = check_equivalence_refined(&m, &t, *rounds, &cfg)?;
            let mut rows: Vec<ResultRow> = rep
                .rows
                .iter()
                .map(|&(y, env, r)| ResultRow::new("lce_varphi_x", env, "lce1d").tau(y).certificate(format!("r={}", fmt_f64(r.to_float()))))
                .collect();
            rows.push(
                ResultRow::new("equiv_gap", ExtReal::Finite(rep.gap), "refined-grid")
                    .tau(rep.argmax_tau)
                    .certificate(format!("inf_mismatch={}", rep.inf_mismatch)),
            );
            ctx.emit("equiv.csv", results_csv(&rows)?, t0)
        }
    }
}

fn dual_row(quantity: &str, d: &blowup::duals::DualEstimate) -> ResultRow {
    let method = if d.exact { "dual-vertex" } else { "dual-descent" };
    let cert = d
        .certificate
        .as_ref()
        .map(|c| format!("lambda={};eta={};f={};g={}", fmt_f64(c.lambda), fmt_f64(c.eta), join(&c.f), join(&c.g)))
        .unwrap_or_default();
    ResultRow::new(quantity, d.value, method).certificate(cert)
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| fmt_f64(*x)).collect::<Vec<_>>().join(" ")
}

/// Every value the additive cost `c_n` takes on `n`-letter pairs; the
/// enlargement only changes at these `t`.
fn cost_levels(c: &CostMatrix<f64>, n: usize) -> Vec<f64> {
    let mut entries: Vec<f64> = c.entries().to_vec();
    entries.sort_by(f64::total_cmp);
    entries.dedup();
    let mut sums = vec![0.0];
    for _ in 0..n {
        let mut next: Vec<f64> = sums.iter().flat_map(|s| entries.iter().map(move |e| s + e)).collect();
        next.sort_by(f64::total_cmp);
        next.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs().max(1.0));
        sums = next;
    }
    sums
}

fn merged(mut g: Vec<f64>) -> Vec<f64> {
    g.sort_by(f64::total_cmp);
    g.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    g
}

fn uniform(hi: f64, steps: usize) -> Vec<f64> {
    (0..=steps).map(|k| hi * k as f64 / steps as f64).collect()
}

/// `τ` samples for the finite-`n` envelopes: a uniform grid over
/// `[0, c_max]` plus every `t/n` that occurs.
fn envelope_taus(c: &CostMatrix<f64>, n: usize) -> Vec<f64> {
    let mut t = uniform(c.max_entry(), 48);
    for m in 1..=n {
        t.extend(cost_levels(c, m).into_iter().map(|x| x / m as f64));
    }
    merged(t)
}

fn alpha_cap(p: &Distribution<f64>) -> f64 {
    p.mass().iter().filter(|m| **m > 0.0).map(|m| -m.ln()).fold(0.0, f64::max)
}

fn binary_hamming(s: &ProblemSpec) -> CliResult<f64> {
    let ok = s.p_x.len() == 2 && s.p_x.mass() == s.p_y.mass() && s.cost == CostMatrix::hamming(2);
    if !ok {
        return Err(CliError::Input(format!(
            "{}: needs a binary alphabet, P_X = P_Y and Hamming cost",
            s.name
        )));
    }
    Ok(s.p_x.mass()[1])
}

fn sampling(ctx: &Ctx, subsets: usize) -> Sampling {
    Sampling { subsets, seed: ctx.seed }
}

fn rate(n: usize, log_m: f64) -> ExtReal<f64> {
    if log_m == f64::NEG_INFINITY {
        ExtReal::PosInf
    } else {
        ExtReal::Finite((-log_m / n as f64).max(0.0))
    }
}

fn brute(ctx: &mut Ctx, c: &BruteCmd) -> CliResult<()> {
    let t0 = Instant::now();
    let cfg = ctx.cfg.clone();
    match c {
        BruteCmd::Gamma {
            n,
            alpha_grid,
            t_grid,
            exchangeable,
            sample,
        } => {
            let (a, t) = (parse_grid(alpha_grid)?, parse_grid(t_grid)?);
            let smp = sampling(ctx, sample.subsets);
            let s = ctx.spec()?;
            let mut rows = Vec::new();
            for &al in &a {
                for &tt in &t {
                    let tau = tt / *n as f64;
                    rows.push(if *exchangeable {
                        let g = gamma_exchangeable(*n, (-(*n as f64) * al).exp(), tt, &s.p_x, &s.p_y, &s.cost)?;
                        SweepRow {
                            n: *n,
                            alpha: al,
                            tau,
                            gamma: Some(g.value),
                            e0: Some(rate(*n, g.log_value)),
                            e1: Some(rate(*n, g.log_one_minus)),
                            bound: None,
                            slack: None,
                            witness: format!("{}:{}", g.family, g.witness.to_list()),
                        }
                    } else {
                        let e = exponents_e(*n, al, tau, &s.p_x, &s.p_y, &s.cost, Some(&smp))?;
                        SweepRow {
                            n: *n,
                            alpha: al,
                            tau,
                            gamma: Some(e.gamma.value),
                            e0: Some(e.e0),
                            e1: Some(e.e1),
                            bound: None,
                            slack: None,
                            witness: format!("{}{}", if e.gamma.sampled { "sampled:" } else { "" }, e.gamma.argmin.to_hex()),
                        }
                    });
                }
            }
            let name = if *exchangeable { "gamma_exchangeable.csv" } else { "gamma.csv" };
            ctx.emit(name, sweep_csv(&rows)?, t0)
        }
        BruteCmd::Talagrand { n, lambda_grid, sample } => {
            let lambdas = parse_grid(lambda_grid)?;
            let smp = sampling(ctx, sample.subsets);
            let s = ctx.spec()?;
            let pr = s.problem()?;
            let taus = envelope_taus(&s.cost, *n);
            let t_grid = cost_levels(&s.cost, *n);
            let mut rows = Vec::new();
            for &l in &lambdas {
                let samples: Vec<(f64, ExtReal<f64>)> = taus
                    .par_iter()
                    .map(|&t| Ok((t, pr.phi_lambda_geq(t, l, &cfg)?.value)))
                    .collect::<CliResult<_>>()?;
                let env = lce_1d(&samples);
                let rep = talagrand_sweep(*n, &[l], &t_grid, &s.p_x, &s.p_y, &s.cost, Some(&smp), |_, tau| Ok(env.eval(tau)))?;
                let cert = rep
                    .witness
                    .map(|w| format!("mask={};t={};lhs={};rhs={}", w.mask.to_hex(), fmt_f64(w.t), fmt_f64(w.lhs), fmt_f64(w.rhs)))
                    .unwrap_or_default();
                let method = if rep.sampled { "sampled" } else { "exhaustive" };
                rows.push(ResultRow::new("talagrand_slack", ExtReal::Finite(rep.worst_slack), method).lambda(l).n(*n).certificate(cert));
            }
            ctx.emit("talagrand.csv", results_csv(&rows)?, t0)
        }
        BruteCmd::DimensionFree { n, tol, sample } => {
            let smp = sampling(ctx, sample.subsets);
            let s = ctx.spec()?;
            let pr = s.problem()?;
            let cap = alpha_cap(&s.p_x);
            let alphas = merged(uniform(cap, 24));
            let env = lce_2d(&phi_geq_curve(&pr, &alphas, &envelope_taus(&s.cost, *n), &cfg)?);
            let mut rows = Vec::new();
            for t in cost_levels(&s.cost, *n) {
                let rep = dimension_free_check(*n, &[t], &s.p_x, &s.p_y, &s.cost, Some(&smp), *tol, |a, tau| {
                    Ok(env.query(a.min(cap), tau))
                })?;
                let w = rep.witness.as_ref();
                rows.push(SweepRow {
                    n: *n,
                    alpha: w.map_or(f64::NAN, |w| w.alpha),
                    tau: t / *n as f64,
                    gamma: None,
                    e0: None,
                    e1: w.map(|w| ExtReal::Finite(w.e1)),
                    bound: w.map(|w| w.bound),
                    slack: w.map(|_| rep.worst_slack),
                    witness: format!(
                        "violations={};vacuous={};skipped={};checked={}{}{}",
                        rep.violations,
                        rep.vacuous,
                        rep.skipped,
                        rep.checked,
                        if rep.sampled { ";sampled" } else { "" },
                        w.map(|w| format!(";mask={}", w.mask.to_hex())).unwrap_or_default()
                    ),
                });
            }
            ctx.emit("dimension_free.csv", sweep_csv(&rows)?, t0)
        }
        BruteCmd::Strassen { n, t_grid } => {
            let t = parse_grid(t_grid)?;
            let s = ctx.spec()?;
            let rows = t
                .iter()
                .map(|&tt| {
                    let r = strassen_gt(*n, tt, &s.p_x, &s.p_y, &s.cost)?;
                    Ok(ResultRow::new("strassen_gap", ExtReal::Finite(r.gap), "lp-vs-sets")
                        .tau(tt / *n as f64)
                        .n(*n)
                        .certificate(format!(
                            "t={};lp={};sets={};argmax={}",
                            fmt_f64(tt),
                            fmt_f64(r.lp),
                            fmt_f64(r.sets),
                            r.argmax.to_hex()
                        )))
                })
                .collect::<CliResult<Vec<_>>>()?;
            ctx.emit("strassen.csv", results_csv(&rows)?, t0)
        }
        BruteCmd::Levels { n, a, t_grid } => {
            let t = parse_grid(t_grid)?;
            let p = binary_hamming(ctx.spec()?)?;
            let rows = t
                .iter()
                .map(|&tt| {
                    let l = gamma_levels(*n, *a, tt, p)?;
                    Ok(SweepRow {
                        n: *n,
                        alpha: -a.ln() / *n as f64,
                        tau: tt / *n as f64,
                        gamma: Some(l.gamma),
                        e0: Some(rate(*n, l.log_gamma)),
                        e1: Some(rate(*n, l.log_one_minus)),
                        bound: None,
                        slack: None,
                        witness: l.band.map(|(x, y)| format!("band={x}..{y}")).unwrap_or_default(),
                    })
                })
                .collect::<CliResult<Vec<_>>>()?;
            ctx.emit("levels.csv", sweep_csv(&rows)?, t0)
        }
        BruteCmd::Convergence { n_list, tau, a } => {
            let ns = parse_counts(n_list)?;
            let p = binary_hamming(ctx.spec()?)?;
            let rows: Vec<SweepRow> = convergence_report(&ns, *tau, *a, p)?
                .into_iter()
                .map(|r| SweepRow {
                    n: r.n,
                    alpha: r.alpha,
                    tau: *tau,
                    gamma: Some(r.gamma),
                    e0: Some(r.e0),
                    e1: Some(r.e1),
                    bound: Some(r.target),
                    slack: Some(r.gap),
                    witness: r.method.to_string(),
                })
                .collect();
            ctx.emit("convergence.csv", sweep_csv(&rows)?, t0)
        }
    }
}

fn verify_cmd(ctx: &mut Ctx, only: Option<&str>, problems_dir: &Path) -> CliResult<i32> {
    let t0 = Instant::now();
    let ids = only.map(parse_counts).transpose()?;
    let mut results = verify::run_criteria(ids.as_deref(), |r| eprintln!("{}", r.line()));
    if ids.is_none() && problems_dir.is_dir() {
        let r = verify::shipped_problems(problems_dir);
        eprintln!("{}", r.line());
        for (path, sha) in verify::problem_hashes(problems_dir) {
            ctx.out.input(&path, &sha);
        }
        results.push(r);
    }
    let failed = results.iter().filter(|r| !r.pass).count();
    let (bytes, rows) = verify::report_csv(&results)?;
    ctx.out.write("verify.csv", &bytes, rows, t0.elapsed().as_secs_f64())?;
    print!("{}", String::from_utf8_lossy(&bytes));
    eprintln!("{} of {} checks passed", results.len() - failed, results.len());
    Ok(if failed == 0 { 0 } else { 4 })
}
