//! `ψ(α, τ) = sup_{Q_XW : D(Q_{X|W}‖P_X|Q_W) ≤ α} inf_{E c ≤ τ} D(Q_{Y|W}‖P_Y|Q_W)`
//! with `|W| = 2`.
//!
//! For fixed `(Q_W, Q_{X|W})` the inner problem is convex in `(Q_{Y|W=w})_w`.
//! Writing `C(r, Q) = max_{f+g≤c} r(f) + Q(g)`, it is solved by cutting
//! planes: each cut `Σ_w q_w (r_w(f_w) + Q_w(g_w)) ≤ τ` is a relaxation, and
//! the dual of the relaxed problem
//!
//! `max_{μ ≥ 0} −Σ_k μ_k b_k − Σ_w q_w ln P_Y(e^{−G_w})`, `G_w = Σ_k μ_k g_{k,w}`,
//!
//! is maximized by coordinate ascent (Hildreth). Any `μ ≥ 0` gives a lower
//! bound on the inner infimum, so the returned value is a certified lower
//! estimate of `ψ`. The outer supremum is screened on a simplex mesh with a
//! Lagrangian table and refined by pattern search.

use rayon::prelude::*;

use crate::error::Result;
use crate::ext::ExtReal;
use crate::optim::increasing_root;
use crate::ot::{ot_slices, CostMatrix, DualPotentials};
use crate::prob::{ball_value, dot, kl_slice, tilt_into, Distribution, Kernel, WeightedKernel};

use super::{ExponentQuery, Method, Problem, SearchConfig};

/// Denominator of the `Q_W(1)` grid.
const Q_STEPS: usize = 16;
const MAX_CUTS: usize = 200;
const MAX_SWEEPS: usize = 20_000;
const MU_CAP: f64 = 1e9;
/// Candidates kept after screening.
const TOP_K: usize = 4;

/// Lower estimate of `ψ` with the mixture that attains it.
#[derive(Debug, Clone, PartialEq)]
pub struct PsiEstimate {
    pub value: ExtReal<f64>,
    pub method: Method,
    /// `(Q_W, Q_{X|W})`.
    pub witness: Option<WeightedKernel<f64>>,
    /// Inner optimizer `Q_{Y|W}`.
    pub y_kernel: Option<Kernel<f64>>,
    /// Multiplier of the transport budget.
    pub lambda: f64,
    /// Aggregated Kantorovich potentials `(f_w, g_w)`, one pair per row.
    pub potentials: Vec<DualPotentials<f64>>,
    pub coarse_grid: bool,
}

/// Solution of the inner problem for one mixture.
#[derive(Debug, Clone)]
struct Inner {
    lower: f64,
    qy: Vec<Vec<f64>>,
    lambda: f64,
    f: Vec<Vec<f64>>,
    g: Vec<Vec<f64>>,
}

struct Cut {
    g: Vec<Vec<f64>>,
    f: Vec<Vec<f64>>,
    b: f64,
}

/// `Σ_i r_i min_j c_ij`, the cheapest transport out of `r`.
fn floor_cost(r: &[f64], c: &CostMatrix<f64>) -> f64 {
    r.iter()
        .enumerate()
        .map(|(i, ri)| ri * c.row(i).iter().copied().fold(f64::INFINITY, f64::min))
        .sum()
}

/// Inner infimum for weights `q` and rows `rows` (on the restricted
/// supports); `None` when no `Q_{Y|W}` meets the budget.
fn inner(pr: &Problem, q: &[f64], rows: &[Vec<f64>], tau: f64) -> Option<Inner> {
    let py = &pr.py;
    let n = py.len();
    let ws: Vec<usize> = (0..q.len()).filter(|&w| q[w] > 0.0).collect();
    let floor: f64 = ws.iter().map(|&w| q[w] * floor_cost(&rows[w], &pr.cs)).sum();
    let scale = tau.abs().max(1.0);
    if floor > tau + 1e-12 * scale {
        return None;
    }
    let mut qy = vec![py.clone(); q.len()];
    let mut big_g = vec![vec![0.0; n]; q.len()];
    let mut cuts: Vec<Cut> = Vec::new();
    let mut mu: Vec<f64> = Vec::new();
    let mut lower = 0.0_f64;
    let mut last: Option<(Vec<Vec<f64>>, Vec<Vec<f64>>)> = None;
    let mut tilted = vec![0.0; n];
    let mut out = vec![0.0; n];
    loop {
        // Separation at the current iterate.
        let mut cost = 0.0;
        let mut fs = vec![Vec::new(); q.len()];
        let mut gs = vec![Vec::new(); q.len()];
        for &w in &ws {
            let (v, f, g) = ot_slices(&rows[w], &qy[w], &pr.cs);
            cost += q[w] * v;
            fs[w] = f;
            gs[w] = g;
        }
        if last.is_none() {
            last = Some((fs.clone(), gs.clone()));
        }
        if cost <= tau + 1e-10 * scale || cuts.len() >= MAX_CUTS {
            break;
        }
        let b = tau - ws.iter().map(|&w| q[w] * dot(&rows[w], &fs[w])).sum::<f64>();
        let dup = cuts.iter().any(|c| {
            (c.b - b).abs() <= 1e-12 * scale
                && ws.iter().all(|&w| {
                    c.g[w].iter().zip(&gs[w]).all(|(a, b)| (a - b).abs() <= 1e-12 * scale)
                })
        });
        if dup {
            break;
        }
        cuts.push(Cut { g: gs, f: fs, b });
        mu.push(0.0);
        // Hildreth sweeps.
        for _ in 0..MAX_SWEEPS {
            let mut moved = 0.0_f64;
            for (k, cut) in cuts.iter().enumerate() {
                let old = mu[k];
                // Laws tilted by every other cut, one per row.
                let bases: Vec<Vec<f64>> = ws
                    .iter()
                    .map(|&w| {
                        let h: Vec<f64> = big_g[w].iter().zip(&cut.g[w]).map(|(gg, gk)| gg - old * gk).collect();
                        tilt_into(py, &h, -1.0, &mut tilted);
                        tilted.clone()
                    })
                    .collect();
                let mut mean_at = |m: f64| {
                    let (mut mean, mut var) = (0.0, 0.0);
                    for (base, &w) in bases.iter().zip(&ws) {
                        tilt_into(base, &cut.g[w], -m, &mut out);
                        let e = dot(&out, &cut.g[w]);
                        let v: f64 = out
                            .iter()
                            .zip(&cut.g[w])
                            .filter(|(o, _)| **o > 0.0)
                            .map(|(o, gk)| o * (gk - e) * (gk - e))
                            .sum();
                        mean += q[w] * e;
                        var += q[w] * v;
                    }
                    (-mean, var)
                };
                let new = if -mean_at(0.0).0 <= cut.b {
                    0.0
                } else {
                    increasing_root(&mut mean_at, -cut.b, 0.0, MU_CAP, 1e-14 * scale, 200).unwrap_or(MU_CAP)
                };
                if new != old {
                    for &w in &ws {
                        for (gg, gk) in big_g[w].iter_mut().zip(&cut.g[w]) {
                            *gg += (new - old) * gk;
                        }
                    }
                    mu[k] = new;
                    moved = moved.max((new - old).abs() / (1.0 + new));
                }
            }
            if moved < 1e-12 {
                break;
            }
        }
        // Dual value and primal iterate.
        let mut val = -mu.iter().zip(&cuts).map(|(m, c)| m * c.b).sum::<f64>();
        for &w in &ws {
            val -= q[w] * tilt_into(py, &big_g[w], -1.0, &mut qy[w]);
        }
        lower = lower.max(val);
    }
    let total: f64 = mu.iter().sum();
    let (mut fa, mut ga) = (vec![Vec::new(); q.len()], vec![Vec::new(); q.len()]);
    if total > 0.0 {
        for &w in &ws {
            let mut f = vec![0.0; rows[w].len()];
            let mut g = vec![0.0; n];
            for (m, c) in mu.iter().zip(&cuts) {
                for (a, b) in f.iter_mut().zip(&c.f[w]) {
                    *a += m / total * b;
                }
                for (a, b) in g.iter_mut().zip(&c.g[w]) {
                    *a += m / total * b;
                }
            }
            fa[w] = f;
            ga[w] = g;
        }
    } else if let Some((f, g)) = last {
        fa = f;
        ga = g;
    }
    Some(Inner {
        lower: lower.max(0.0),
        qy,
        lambda: total,
        f: fa,
        g: ga,
    })
}

#[derive(Debug, Clone)]
struct Mix {
    /// `Q_W(0)`; screened on the `1/Q_STEPS` grid, refined continuously.
    q: f64,
    rows: [Vec<f64>; 2],
}

impl Mix {
    fn weights(&self) -> [f64; 2] {
        [self.q, 1.0 - self.q]
    }

    fn budget(&self, px: &[f64]) -> f64 {
        let q = self.weights();
        (0..2)
            .filter(|&w| q[w] > 0.0)
            .map(|w| q[w] * kl_slice(&self.rows[w], px).to_float())
            .sum()
    }
}

struct Scored {
    mix: Mix,
    inner: Inner,
}

fn evaluate(pr: &Problem, mix: Mix, tau: f64) -> Option<Scored> {
    let inner = inner(pr, &mix.weights(), &mix.rows, tau)?;
    Some(Scored { mix, inner })
}

/// Screening on the joint mesh: `θ ≈ max_λ −λτ + Σ_w q_w h(r_w, λ)` with
/// `h(r, λ) = min_{Q in mesh} D(Q‖P_Y) + λ C(r, Q)`.
fn screen(pr: &Problem, alpha: f64, tau: f64, cfg: &SearchConfig) -> Vec<Mix> {
    let mut res = cfg.mesh();
    let table = loop {
        if res < 2 {
            return Vec::new();
        }
        if let Some(t) = pr.pair_table(res) {
            break t;
        }
        res /= 2;
    };
    let lams: Vec<f64> = std::iter::once(0.0)
        .chain((0..=60).map(|k| 10f64.powf(-3.0 + 0.1 * k as f64)))
        .collect();
    let ny = table.ys.len();
    let mut dx = vec![f64::INFINITY; table.xs.len()];
    let mut h = vec![vec![f64::INFINITY; lams.len()]; table.xs.len()];
    for cell in &table.cells {
        dx[cell.ix] = cell.dx;
        if !cell.dy.is_finite() {
            continue;
        }
        for (l, &lam) in lams.iter().enumerate() {
            let v = cell.dy + lam * cell.c;
            let slot = &mut h[cell.ix][l];
            if v < *slot {
                *slot = v;
            }
        }
    }
    debug_assert_eq!(table.cells.len(), table.xs.len() * ny);
    // Only the weighted budget binds: a row may exceed `α` on its own.
    let rows: Vec<usize> = (0..table.xs.len()).filter(|&i| dx[i].is_finite()).collect();
    let theta = |q: f64, a: usize, b: usize| {
        lams.iter()
            .enumerate()
            .map(|(l, &lam)| {
                let ha = if q > 0.0 { q * h[a][l] } else { 0.0 };
                -lam * tau + ha + (1.0 - q) * h[b][l]
            })
            .fold(f64::NEG_INFINITY, f64::max)
    };
    let mut scored: Vec<(f64, usize, usize, usize)> = (0..=Q_STEPS / 2)
        .into_par_iter()
        .flat_map_iter(|k| {
            let q = k as f64 / Q_STEPS as f64;
            let mut local = Vec::new();
            if k == 0 {
                for &b in rows.iter().filter(|&&b| dx[b] <= alpha) {
                    local.push((theta(0.0, b, b), k, b, b));
                }
            } else {
                for &a in rows.iter().filter(|&&a| q * dx[a] <= alpha) {
                    for &b in &rows {
                        if q * dx[a] + (1.0 - q) * dx[b] <= alpha {
                            local.push((theta(q, a, b), k, a, b));
                        }
                    }
                }
            }
            local
        })
        .collect();
    scored.sort_by(|x, y| y.0.partial_cmp(&x.0).unwrap().then((x.1, x.2, x.3).cmp(&(y.1, y.2, y.3))));
    // The overall leaders plus the leader of every weight level: a
    // two-atom split with small `Q_W` sits in a different basin from the
    // unsplit optimum and is easily outranked on the mesh.
    let mut picked: Vec<(f64, usize, usize, usize)> = scored.iter().take(TOP_K).copied().collect();
    for k in 0..=Q_STEPS / 2 {
        if let Some(s) = scored.iter().find(|s| s.1 == k) {
            if !picked.contains(s) {
                picked.push(*s);
            }
        }
    }
    picked
        .into_iter()
        .map(|(_, k, a, b)| Mix {
            q: k as f64 / Q_STEPS as f64,
            rows: [table.xs[a].clone(), table.xs[b].clone()],
        })
        .collect()
}

/// Pattern search over mass moves within each row and steps of `Q_W(1)`,
/// keeping the divergence budget; infeasible moves are shortened to the
/// budget boundary.
fn refine(pr: &Problem, start: Scored, alpha: f64, tau: f64) -> Scored {
    let px = &pr.px;
    let m = px.len();
    let feasible = |mix: &Mix| mix.budget(px) <= alpha + 1e-12 * alpha.max(1.0);
    let mut best = start;
    let mut eps = 1.0_f64 / 64.0;
    while eps >= 1e-5 {
        let mut improved = false;
        // Weight moves, shortened to the budget boundary when needed.
        for dir in [-1.0, 1.0] {
            let target = (best.mix.q + dir * 4.0 * eps).clamp(0.0, 1.0);
            let moved = |t: f64| Mix {
                q: best.mix.q + t * (target - best.mix.q),
                rows: best.mix.rows.clone(),
            };
            let mut mix = moved(1.0);
            if !feasible(&mix) {
                let (mut lo, mut hi) = (0.0, 1.0);
                for _ in 0..40 {
                    let mid = 0.5 * (lo + hi);
                    if feasible(&moved(mid)) {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                if lo * (target - best.mix.q).abs() < 1e-12 {
                    continue;
                }
                mix = moved(lo);
            }
            if mix.q == best.mix.q {
                continue;
            }
            // The weight move alone, then with one row pushed back out to
            // the budget boundary: at a binding budget the optimum moves
            // along the boundary, which single-coordinate steps cannot follow.
            let mut trials = vec![mix.clone()];
            for w in 0..2 {
                for a in 0..m {
                    for b in 0..m {
                        if a == b || mix.rows[w][a] <= 0.0 {
                            continue;
                        }
                        let full = mix.rows[w][a];
                        let pushed = |t: f64| {
                            let mut x = mix.clone();
                            x.rows[w][a] -= t * full;
                            x.rows[w][b] += t * full;
                            x
                        };
                        if feasible(&pushed(1.0)) {
                            continue;
                        }
                        let (mut lo, mut hi) = (0.0, 1.0);
                        for _ in 0..40 {
                            let mid = 0.5 * (lo + hi);
                            if feasible(&pushed(mid)) {
                                lo = mid;
                            } else {
                                hi = mid;
                            }
                        }
                        if lo * full > 1e-12 {
                            trials.push(pushed(lo));
                        }
                    }
                }
            }
            for mix in trials {
                if let Some(s) = evaluate(pr, mix, tau) {
                    if s.inner.lower > best.inner.lower + 1e-13 {
                        best = s;
                        improved = true;
                    }
                }
            }
        }
        let q = best.mix.weights();
        for w in 0..2 {
            if q[w] == 0.0 {
                continue;
            }
            for a in 0..m {
                for b in 0..m {
                    if a == b || best.mix.rows[w][a] <= 0.0 {
                        continue;
                    }
                    let step = eps.min(best.mix.rows[w][a]);
                    let moved = |t: f64| {
                        let mut mix = best.mix.clone();
                        mix.rows[w][a] -= t * step;
                        mix.rows[w][b] += t * step;
                        if mix.rows[w][a] < 0.0 {
                            mix.rows[w][a] = 0.0;
                        }
                        mix
                    };
                    let mut mix = moved(1.0);
                    if !feasible(&mix) {
                        let (mut lo, mut hi) = (0.0, 1.0);
                        for _ in 0..40 {
                            let mid = 0.5 * (lo + hi);
                            if feasible(&moved(mid)) {
                                lo = mid;
                            } else {
                                hi = mid;
                            }
                        }
                        if lo * step < 1e-12 {
                            continue;
                        }
                        mix = moved(lo);
                    }
                    if let Some(s) = evaluate(pr, mix, tau) {
                        if s.inner.lower > best.inner.lower + 1e-13 {
                            best = s;
                            improved = true;
                        }
                    }
                }
            }
        }
        if !improved {
            eps *= 0.5;
        }
    }
    best
}

impl Problem {
    pub fn psi(&self, q: ExponentQuery, cfg: &SearchConfig) -> Result<PsiEstimate> {
        q.validate()?;
        cfg.validate()?;
        let (alpha, tau) = (q.alpha, q.tau);
        let coarse = cfg.is_coarse();
        if tau >= self.c_max() {
            let mix = Mix {
                q: 0.0,
                rows: [self.px.clone(), self.px.clone()],
            };
            let inner = inner(self, &mix.weights(), &mix.rows, tau).expect("P_Y meets the budget");
            return Ok(self.psi_estimate(Scored { mix, inner }, Method::Trivial, coarse));
        }
        // Some admissible row has every coupling above budget: ψ = +∞.
        let mins: Vec<f64> = (0..self.px.len())
            .map(|i| self.cs.row(i).iter().copied().fold(f64::INFINITY, f64::min))
            .collect();
        if ball_value(&self.px, &mins, alpha) > tau + 1e-12 * tau.max(1.0) {
            return Ok(PsiEstimate {
                value: ExtReal::PosInf,
                method: Method::Empty,
                witness: None,
                y_kernel: None,
                lambda: f64::INFINITY,
                potentials: Vec::new(),
                coarse_grid: coarse,
            });
        }
        let mut starts = screen(self, alpha, tau, cfg);
        let method = if starts.is_empty() { Method::Heuristic } else { Method::Grid };
        starts.push(Mix {
            q: 0.0,
            rows: [self.px.clone(), self.px.clone()],
        });
        let best = starts
            .into_par_iter()
            .filter_map(|mix| evaluate(self, mix, tau))
            .map(|s| refine(self, s, alpha, tau))
            .collect::<Vec<_>>()
            .into_iter()
            .fold(None::<Scored>, |acc, s| match acc {
                Some(a) if a.inner.lower >= s.inner.lower => Some(a),
                _ => Some(s),
            })
            .expect("the P_X row is always admissible");
        Ok(self.psi_estimate(best, method, coarse))
    }

    fn psi_estimate(&self, s: Scored, method: Method, coarse: bool) -> PsiEstimate {
        let q = s.mix.weights();
        let weight = Distribution::from_mass(q.to_vec()).expect("weights sum to one");
        let rows: Vec<Distribution<f64>> = s.mix.rows.iter().map(|r| self.lift_x(r)).collect();
        let ys: Vec<Distribution<f64>> = (0..2)
            .map(|w| self.lift_y(if q[w] > 0.0 { &s.inner.qy[w] } else { &self.py }))
            .collect();
        let potentials = (0..2)
            .map(|w| {
                if s.inner.f[w].is_empty() {
                    DualPotentials {
                        f: vec![0.0; self.p_x().len()],
                        g: vec![0.0; self.p_y().len()],
                    }
                } else {
                    self.lift_potentials(&s.inner.f[w], &s.inner.g[w])
                }
            })
            .collect();
        PsiEstimate {
            value: ExtReal::Finite(s.inner.lower),
            method,
            witness: Some(WeightedKernel::new(weight, Kernel::new(rows).expect("same alphabet")).expect("two rows")),
            y_kernel: Some(Kernel::new(ys).expect("same alphabet")),
            lambda: s.inner.lambda,
            potentials,
            coarse_grid: coarse,
        }
    }
}

/// Lower estimate of `ψ(α, τ)` over two-row mixtures.
pub fn psi(
    q: ExponentQuery,
    p_x: &Distribution<f64>,
    p_y: &Distribution<f64>,
    c: &CostMatrix<f64>,
    cfg: &SearchConfig,
) -> Result<PsiEstimate> {
    Problem::new(p_x, p_y, c)?.psi(q, cfg)
}
