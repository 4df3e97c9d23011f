use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use rand::Rng;

use crate::error::{check_len, Error, Result};
use crate::optim::{increasing_root, rng, simplex_grid};
use crate::ot::{dual_vertices, ot_slices, CostMatrix, DualPotentials};
use crate::prob::{ball_into, dot, iproj_into, kl_slice, tilt_into, Distribution};

use super::SearchConfig;

/// Visit budget of the dual vertex enumeration.
const VERTEX_BUDGET: usize = 400_000;
/// Largest product of mesh sizes for which the joint `(Q_X, Q_Y)` table is
/// built.
const PAIR_TABLE_MAX: usize = 150_000;

/// A feasible `(Q_X, Q_Y)` on the restricted supports and its objective.
#[derive(Debug, Clone)]
pub(crate) struct Cand {
    pub value: f64,
    pub qx: Vec<f64>,
    pub qy: Vec<f64>,
}

fn lex(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.partial_cmp(y) {
            Some(std::cmp::Ordering::Equal) | None => continue,
            Some(o) => return o,
        }
    }
    std::cmp::Ordering::Equal
}

/// Keeps the smaller value; exact ties go to the lexicographically smaller
/// witness so merges are order independent.
pub(crate) fn keep_min(best: &mut Option<Cand>, c: Cand) {
    let replace = match best {
        None => true,
        Some(b) => {
            c.value < b.value
                || (c.value == b.value
                    && lex(&c.qx, &b.qx).then(lex(&c.qy, &b.qy)) == std::cmp::Ordering::Less)
        }
    };
    if replace {
        *best = Some(c);
    }
}

#[derive(Debug)]
pub(crate) struct MeshCell {
    pub d: f64,
    pub c: f64,
    pub q: Vec<f64>,
}

#[derive(Debug)]
pub(crate) struct PairCell {
    pub dx: f64,
    pub dy: f64,
    pub c: f64,
    pub ix: usize,
    pub iy: usize,
}

#[derive(Debug)]
pub(crate) struct PairTable {
    pub xs: Vec<Vec<f64>>,
    pub ys: Vec<Vec<f64>>,
    pub cells: Vec<PairCell>,
}

/// One fixed instance `(P_X, P_Y, c)` with its caches.
#[derive(Debug)]
pub struct Problem {
    p_x: Distribution<f64>,
    p_y: Distribution<f64>,
    c: CostMatrix<f64>,
    sx: Vec<usize>,
    sy: Vec<usize>,
    pub(crate) px: Vec<f64>,
    pub(crate) py: Vec<f64>,
    pub(crate) cs: CostMatrix<f64>,
    vertices: OnceLock<Option<Vec<DualPotentials<f64>>>>,
    pinned: Mutex<HashMap<usize, Arc<Vec<MeshCell>>>>,
    pairs: Mutex<HashMap<usize, Option<Arc<PairTable>>>>,
}

impl Clone for Problem {
    fn clone(&self) -> Self {
        Problem::new(&self.p_x, &self.p_y, &self.c).expect("already validated")
    }
}

impl Problem {
    pub fn new(p_x: &Distribution<f64>, p_y: &Distribution<f64>, c: &CostMatrix<f64>) -> Result<Self> {
        check_len("P_X vs cost rows", c.rows(), p_x.len())?;
        check_len("P_Y vs cost cols", c.cols(), p_y.len())?;
        let sx: Vec<usize> = p_x.support().collect();
        let sy: Vec<usize> = p_y.support().collect();
        let px = sx.iter().map(|&i| p_x.mass()[i]).collect();
        let py = sy.iter().map(|&j| p_y.mass()[j]).collect();
        let cs = CostMatrix::from_flat(
            sx.len(),
            sy.len(),
            sx.iter()
                .flat_map(|&i| sy.iter().map(move |&j| (i, j)))
                .map(|(i, j)| c.get(i, j))
                .collect(),
        );
        Ok(Problem {
            p_x: p_x.clone(),
            p_y: p_y.clone(),
            c: c.clone(),
            sx,
            sy,
            px,
            py,
            cs,
            vertices: OnceLock::new(),
            pinned: Mutex::new(HashMap::new()),
            pairs: Mutex::new(HashMap::new()),
        })
    }

    /// The one-space instance `(P_X, P_X, c)` for a square cost.
    pub fn symmetric(p_x: &Distribution<f64>, c: &CostMatrix<f64>) -> Result<Self> {
        if c.rows() != c.cols() {
            return Err(Error::Dimension {
                what: "square cost",
                expected: c.rows(),
                got: c.cols(),
            });
        }
        Problem::new(p_x, p_x, c)
    }

    pub fn p_x(&self) -> &Distribution<f64> {
        &self.p_x
    }

    pub fn p_y(&self) -> &Distribution<f64> {
        &self.p_y
    }

    pub fn cost(&self) -> &CostMatrix<f64> {
        &self.c
    }

    /// Dual vertices of the transport polytope restricted to the supports,
    /// when the enumeration fits its budget.
    pub(crate) fn vertices(&self) -> Option<&[DualPotentials<f64>]> {
        self.vertices
            .get_or_init(|| dual_vertices(&self.cs, VERTEX_BUDGET))
            .as_deref()
    }

    /// Whether the exact vertex route is available.
    pub fn has_vertices(&self) -> bool {
        self.vertices().is_some()
    }

    pub(crate) fn lift_x(&self, q: &[f64]) -> Distribution<f64> {
        let mut full = vec![0.0; self.p_x.len()];
        for (&i, &v) in self.sx.iter().zip(q) {
            full[i] = v;
        }
        self.p_x.sibling(full)
    }

    pub(crate) fn lift_y(&self, q: &[f64]) -> Distribution<f64> {
        let mut full = vec![0.0; self.p_y.len()];
        for (&j, &v) in self.sy.iter().zip(q) {
            full[j] = v;
        }
        self.p_y.sibling(full)
    }

    /// Lifts restricted potentials to the full alphabets by c-transforms,
    /// keeping `f + g ≤ c` everywhere.
    pub(crate) fn lift_potentials(&self, f: &[f64], g: &[f64]) -> DualPotentials<f64> {
        let (rx, ry) = (self.p_x.len(), self.p_y.len());
        let mut gf: Vec<Option<f64>> = vec![None; ry];
        for (&j, &v) in self.sy.iter().zip(g) {
            gf[j] = Some(v);
        }
        let mut ff: Vec<Option<f64>> = vec![None; rx];
        for (&i, &v) in self.sx.iter().zip(f) {
            ff[i] = Some(v);
        }
        let g_full: Vec<f64> = (0..ry)
            .map(|j| {
                gf[j].unwrap_or_else(|| {
                    self.sx
                        .iter()
                        .zip(f)
                        .map(|(&i, &fi)| self.c.get(i, j) - fi)
                        .fold(f64::INFINITY, f64::min)
                })
            })
            .collect();
        let f_full: Vec<f64> = (0..rx)
            .map(|i| {
                ff[i].unwrap_or_else(|| {
                    (0..ry)
                        .map(|j| self.c.get(i, j) - g_full[j])
                        .fold(f64::INFINITY, f64::min)
                })
            })
            .collect();
        DualPotentials { f: f_full, g: g_full }
    }

    /// Largest entry of the restricted cost.
    pub(crate) fn c_max(&self) -> f64 {
        self.cs.max_entry()
    }

    fn col(&self, j: usize) -> Vec<f64> {
        (0..self.cs.rows()).map(|i| self.cs.get(i, j)).collect()
    }

    /// `sup { C(Q_X, Q_Y) : D(Q_X‖P_X) ≤ α, Q_Y ≪ P_Y }`, attained at a
    /// point mass `Q_Y = δ_j` because `C` is convex in `Q_Y`. Returns the
    /// value and the best column.
    pub(crate) fn reach(&self, alpha: f64) -> (f64, usize) {
        let mut best = (f64::NEG_INFINITY, 0);
        let mut out = vec![0.0; self.px.len()];
        for j in 0..self.py.len() {
            let b = ball_into(&self.px, &self.col(j), alpha.max(0.0), &mut out);
            if b.value > best.0 {
                best = (b.value, j);
            }
        }
        best
    }

    fn point_y(&self, j: usize) -> Vec<f64> {
        let mut q = vec![0.0; self.py.len()];
        q[j] = 1.0;
        q
    }

    // ---------------------------------------------------------------
    // Closed problem  inf D(Q_Y‖P_Y)  s.t.  D(Q_X‖P_X) ≤ α, C ≥ τ.
    // ---------------------------------------------------------------

    /// Feasible point-mass candidates `(argmax-ball tilt of c_·j, δ_j)`.
    pub(crate) fn closed_reach_cands(&self, alpha: f64, tau: f64, pinned: bool) -> Option<Cand> {
        let mut best = None;
        let mut qx = vec![0.0; self.px.len()];
        for j in 0..self.py.len() {
            let col = self.col(j);
            if pinned {
                qx.copy_from_slice(&self.px);
            } else {
                ball_into(&self.px, &col, alpha, &mut qx);
            }
            if dot(&qx, &col) >= tau {
                keep_min(
                    &mut best,
                    Cand {
                        value: -self.py[j].ln(),
                        qx: qx.clone(),
                        qy: self.point_y(j),
                    },
                );
            }
        }
        best
    }

    /// Exact value through the dual vertices; `None` when they are not
    /// available, `Some(None)` when the constraint set is empty.
    pub(crate) fn closed_vertex(&self, alpha: f64, tau: f64, pinned: bool) -> Option<Option<Cand>> {
        let vs = self.vertices()?;
        let mut best = None;
        let mut qx = vec![0.0; self.px.len()];
        let mut qy = vec![0.0; self.py.len()];
        for v in vs {
            if pinned || alpha <= 0.0 {
                qx.copy_from_slice(&self.px);
            } else {
                ball_into(&self.px, &v.f, alpha, &mut qx);
            }
            let thr = tau - dot(&qx, &v.f);
            let r = iproj_into(&self.py, &v.g, thr, &mut qy);
            if r.feasible {
                keep_min(
                    &mut best,
                    Cand {
                        value: r.value.to_float(),
                        qx: qx.clone(),
                        qy: qy.clone(),
                    },
                );
            }
        }
        Some(best)
    }

    /// One convex–concave run: linearize `C` at the current pair through
    /// its Kantorovich potentials, then solve the convex subproblem
    /// (ball maximization for `Q_X`, I-projection for `Q_Y`). Every iterate
    /// is feasible and the objective never increases.
    pub(crate) fn closed_ccp(
        &self,
        alpha: f64,
        tau: f64,
        pinned: bool,
        start: (Vec<f64>, Vec<f64>),
        cfg: &SearchConfig,
    ) -> Option<Cand> {
        let (mut qx, mut qy) = start;
        let mut best: Option<Cand> = None;
        let mut nx = vec![0.0; qx.len()];
        let mut ny = vec![0.0; qy.len()];
        for _ in 0..cfg.ccp_iters {
            let (_, f, g) = ot_slices(&qx, &qy, &self.cs);
            if pinned || alpha <= 0.0 {
                nx.copy_from_slice(&self.px);
            } else {
                ball_into(&self.px, &f, alpha, &mut nx);
            }
            let thr = tau - dot(&nx, &f);
            let r = iproj_into(&self.py, &g, thr, &mut ny);
            if !r.feasible {
                break;
            }
            let val = r.value.to_float();
            if let Some(b) = &best {
                if val >= b.value - cfg.tol * b.value.abs().max(1.0) {
                    if val < b.value {
                        best = Some(Cand {
                            value: val,
                            qx: nx.clone(),
                            qy: ny.clone(),
                        });
                    }
                    break;
                }
            }
            best = Some(Cand {
                value: val,
                qx: nx.clone(),
                qy: ny.clone(),
            });
            qx.copy_from_slice(&nx);
            qy.copy_from_slice(&ny);
        }
        best
    }

    /// Deterministic starts — `(P_X, P_Y)`, the barycenter, the corners
    /// `δ_j`, prefix-set tilts of `P_Y` in both mass orders — followed by
    /// `cfg.multistarts` seeded Dirichlet draws.
    pub(crate) fn starts(&self, tau: f64, pinned: bool, cfg: &SearchConfig) -> Vec<(Vec<f64>, Vec<f64>)> {
        let (m, n) = (self.px.len(), self.py.len());
        let mut out = vec![
            (self.px.clone(), self.py.clone()),
            (
                if pinned { self.px.clone() } else { vec![1.0 / m as f64; m] },
                vec![1.0 / n as f64; n],
            ),
        ];
        for j in 0..n {
            out.push((self.px.clone(), self.point_y(j)));
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| self.py[b].partial_cmp(&self.py[a]).unwrap().then(a.cmp(&b)));
        let mut q = vec![0.0; n];
        for rev in [false, true] {
            let ord: Vec<usize> = if rev { order.iter().rev().copied().collect() } else { order.clone() };
            let mut ind = vec![0.0; n];
            let mut mass = 0.0;
            for &j in ord.iter().take(n.saturating_sub(1)) {
                ind[j] = 1.0;
                mass += self.py[j];
                if mass + tau < 1.0 {
                    let r = iproj_into(&self.py, &ind, mass + tau, &mut q);
                    if r.feasible {
                        out.push((self.px.clone(), q.clone()));
                    }
                }
            }
        }
        let mut r = rng(cfg.seed, 0x5eed_0001);
        for _ in 0..cfg.multistarts {
            let x = if pinned { self.px.clone() } else { dirichlet(&mut r, m) };
            let y = dirichlet(&mut r, n);
            out.push((x, y));
        }
        out
    }

    fn mesh_res(&self, cfg: &SearchConfig) -> Option<usize> {
        (self.px.len() <= 3 && self.py.len() <= 3).then(|| cfg.mesh())
    }

    /// `Q_Y` mesh with `D(Q_Y‖P_Y)` and `C(P_X, Q_Y)`.
    pub(crate) fn pinned_table(&self, res: usize) -> Arc<Vec<MeshCell>> {
        if let Some(t) = self.pinned.lock().unwrap().get(&res) {
            return t.clone();
        }
        let t: Vec<MeshCell> = simplex_grid(self.py.len(), res)
            .into_iter()
            .map(|counts| {
                let q: Vec<f64> = counts.iter().map(|&k| k as f64 / res as f64).collect();
                let d = kl_slice(&q, &self.py).to_float();
                let c = ot_slices(&self.px, &q, &self.cs).0;
                MeshCell { d, c, q }
            })
            .collect();
        let t = Arc::new(t);
        self.pinned.lock().unwrap().insert(res, t.clone());
        t
    }

    /// Joint mesh table, built only when small enough.
    pub(crate) fn pair_table(&self, res: usize) -> Option<Arc<PairTable>> {
        if let Some(t) = self.pairs.lock().unwrap().get(&res) {
            return t.clone();
        }
        let xs: Vec<Vec<f64>> = simplex_grid(self.px.len(), res)
            .into_iter()
            .map(|c| c.iter().map(|&k| k as f64 / res as f64).collect())
            .collect();
        let ys: Vec<Vec<f64>> = simplex_grid(self.py.len(), res)
            .into_iter()
            .map(|c| c.iter().map(|&k| k as f64 / res as f64).collect())
            .collect();
        let t = if xs.len() * ys.len() <= PAIR_TABLE_MAX {
            let dxs: Vec<f64> = xs.iter().map(|q| kl_slice(q, &self.px).to_float()).collect();
            let dys: Vec<f64> = ys.iter().map(|q| kl_slice(q, &self.py).to_float()).collect();
            let mut cells = Vec::with_capacity(xs.len() * ys.len());
            for (ix, qx) in xs.iter().enumerate() {
                for (iy, qy) in ys.iter().enumerate() {
                    cells.push(PairCell {
                        dx: dxs[ix],
                        dy: dys[iy],
                        c: ot_slices(qx, qy, &self.cs).0,
                        ix,
                        iy,
                    });
                }
            }
            Some(Arc::new(PairTable { xs, ys, cells }))
        } else {
            None
        };
        self.pairs.lock().unwrap().insert(res, t.clone());
        t
    }

    /// Mesh search; `None` when no mesh applies at this size.
    pub(crate) fn closed_grid(&self, alpha: f64, tau: f64, pinned: bool, cfg: &SearchConfig) -> Option<Option<Cand>> {
        let res = self.mesh_res(cfg)?;
        if pinned || alpha <= 0.0 {
            let t = self.pinned_table(res);
            let mut best = None;
            for cell in t.iter().filter(|c| c.c >= tau && c.d.is_finite()) {
                keep_min(
                    &mut best,
                    Cand {
                        value: cell.d,
                        qx: self.px.clone(),
                        qy: cell.q.clone(),
                    },
                );
            }
            return Some(best);
        }
        let t = self.pair_table(res)?;
        let mut best = None;
        for cell in t.cells.iter().filter(|c| c.c >= tau && c.dx <= alpha && c.dy.is_finite()) {
            keep_min(
                &mut best,
                Cand {
                    value: cell.dy,
                    qx: t.xs[cell.ix].clone(),
                    qy: t.ys[cell.iy].clone(),
                },
            );
        }
        Some(best)
    }

    // ---------------------------------------------------------------
    // Weighted problem  inf (1−λ)D(Q_Y‖P_Y) + λD(Q_X‖P_X)  s.t.  C ≥ τ.
    // ---------------------------------------------------------------

    /// Exact optimum of the linearized problem `Q_X(f) + Q_Y(g) ≥ τ`:
    /// the multiplier `μ` solves `Q_X^{μ/λ}(f) + Q_Y^{μ/(1−λ)}(g) = τ`.
    /// Writes the witness and returns its objective.
    pub(crate) fn lambda_pair(
        &self,
        f: &[f64],
        g: &[f64],
        lam: f64,
        tau: f64,
        qx: &mut [f64],
        qy: &mut [f64],
    ) -> Option<f64> {
        let sx = Side::new(&self.px, f, lam);
        let sy = Side::new(&self.py, g, 1.0 - lam);
        let scale = 1.0_f64.max(sx.max.abs()).max(sy.max.abs());
        let top = sx.max + sy.max;
        if tau > top + 1e-12 * scale {
            return None;
        }
        let objective = |qx: &[f64], qy: &[f64]| {
            let a = if lam > 0.0 { lam * kl_slice(qx, &self.px).to_float() } else { 0.0 };
            let b = if lam < 1.0 { (1.0 - lam) * kl_slice(qy, &self.py).to_float() } else { 0.0 };
            a + b
        };
        let base = sx.eval(0.0, qx).0 + sy.eval(0.0, qy).0;
        if tau <= base {
            return Some(objective(qx, qy));
        }
        if tau >= top - 1e-10 * scale {
            sx.point(qx);
            sy.point(qy);
            return Some(objective(qx, qy));
        }
        let mut bx = vec![0.0; qx.len()];
        let mut by = vec![0.0; qy.len()];
        let mu = increasing_root(
            |mu| {
                let (a, da) = sx.eval(mu, &mut bx);
                let (b, db) = sy.eval(mu, &mut by);
                (a + b, da + db)
            },
            tau,
            0.0,
            1e300,
            1e-13 * scale,
            200,
        );
        match mu {
            Some(mu) => {
                sx.eval(mu, qx);
                sy.eval(mu, qy);
            }
            None => {
                sx.point(qx);
                sy.point(qy);
            }
        }
        Some(objective(qx, qy))
    }

    pub(crate) fn lambda_vertex(&self, lam: f64, tau: f64) -> Option<Option<Cand>> {
        let vs = self.vertices()?;
        let mut best = None;
        let mut qx = vec![0.0; self.px.len()];
        let mut qy = vec![0.0; self.py.len()];
        for v in vs {
            if let Some(val) = self.lambda_pair(&v.f, &v.g, lam, tau, &mut qx, &mut qy) {
                keep_min(
                    &mut best,
                    Cand {
                        value: val,
                        qx: qx.clone(),
                        qy: qy.clone(),
                    },
                );
            }
        }
        Some(best)
    }

    pub(crate) fn lambda_ccp(
        &self,
        lam: f64,
        tau: f64,
        start: (Vec<f64>, Vec<f64>),
        cfg: &SearchConfig,
    ) -> Option<Cand> {
        let (mut qx, mut qy) = start;
        let mut best: Option<Cand> = None;
        let mut nx = vec![0.0; qx.len()];
        let mut ny = vec![0.0; qy.len()];
        for _ in 0..cfg.ccp_iters {
            let (_, f, g) = ot_slices(&qx, &qy, &self.cs);
            let Some(val) = self.lambda_pair(&f, &g, lam, tau, &mut nx, &mut ny) else {
                break;
            };
            if let Some(b) = &best {
                if val >= b.value - cfg.tol * b.value.abs().max(1.0) {
                    if val < b.value {
                        best = Some(Cand {
                            value: val,
                            qx: nx.clone(),
                            qy: ny.clone(),
                        });
                    }
                    break;
                }
            }
            best = Some(Cand {
                value: val,
                qx: nx.clone(),
                qy: ny.clone(),
            });
            qx.copy_from_slice(&nx);
            qy.copy_from_slice(&ny);
        }
        best
    }

    pub(crate) fn lambda_grid(&self, lam: f64, tau: f64, cfg: &SearchConfig) -> Option<Option<Cand>> {
        let res = self.mesh_res(cfg)?;
        let t = self.pair_table(res)?;
        let mut best = None;
        for cell in t.cells.iter().filter(|c| c.c >= tau) {
            let a = if lam > 0.0 { lam * cell.dx } else { 0.0 };
            let b = if lam < 1.0 { (1.0 - lam) * cell.dy } else { 0.0 };
            let v = a + b;
            if v.is_finite() {
                keep_min(
                    &mut best,
                    Cand {
                        value: v,
                        qx: t.xs[cell.ix].clone(),
                        qy: t.ys[cell.iy].clone(),
                    },
                );
            }
        }
        Some(best)
    }

    // ---------------------------------------------------------------
    // Ball maximum  sup { C(P_X, Q) : D(Q‖P_Y) ≤ r }  (symmetric use).
    // ---------------------------------------------------------------

    /// Exact through the vertices: `max_v P_X(f_v) + sup_{ball} Q(g_v)`.
    /// Returns the transport cost of the best witness.
    pub(crate) fn kappa_vertex(&self, radius: f64) -> Option<(f64, Vec<f64>)> {
        let vs = self.vertices()?;
        let mut q = vec![0.0; self.py.len()];
        let mut best: Option<(f64, Vec<f64>)> = None;
        for v in vs {
            let b = ball_into(&self.py, &v.g, radius, &mut q);
            let val = dot(&self.px, &v.f) + b.value;
            if best.as_ref().is_none_or(|(bv, _)| val > *bv) {
                best = Some((val, q.clone()));
            }
        }
        best.map(|(_, q)| (ot_slices(&self.px, &q, &self.cs).0, q))
    }

    /// Linearization ascent: `Q ← argmax_{ball} Q(g)` with `g` the potential
    /// of `C(P_X, Q)`; `C` is convex so every step is an ascent step.
    pub(crate) fn kappa_ascent(&self, radius: f64, start: Vec<f64>, cfg: &SearchConfig) -> (f64, Vec<f64>) {
        let mut q = start;
        let mut best = (f64::NEG_INFINITY, q.clone());
        let mut nq = vec![0.0; q.len()];
        for _ in 0..cfg.ccp_iters {
            let (_, _, g) = ot_slices(&self.px, &q, &self.cs);
            ball_into(&self.py, &g, radius, &mut nq);
            let val = ot_slices(&self.px, &nq, &self.cs).0;
            if val <= best.0 + cfg.tol * best.0.abs().max(1.0) {
                if val > best.0 {
                    best = (val, nq.clone());
                }
                break;
            }
            best = (val, nq.clone());
            q.copy_from_slice(&nq);
        }
        best
    }

    pub(crate) fn kappa_starts(&self, cfg: &SearchConfig) -> Vec<Vec<f64>> {
        let n = self.py.len();
        let mut out = vec![self.py.clone(), vec![1.0 / n as f64; n]];
        for j in 0..n {
            out.push(self.point_y(j));
            let mut q = vec![1.0 / (n.max(2) - 1) as f64; n];
            q[j] = 0.0;
            if n > 1 {
                out.push(q);
            }
        }
        let mut r = rng(cfg.seed, 0x5eed_0002);
        for _ in 0..cfg.multistarts {
            out.push(dirichlet(&mut r, n));
        }
        out
    }

    pub(crate) fn kappa_grid(&self, radius: f64, cfg: &SearchConfig) -> Option<Option<(f64, Vec<f64>)>> {
        let res = self.mesh_res(cfg)?;
        let t = self.pinned_table(res);
        let mut best: Option<(f64, Vec<f64>)> = None;
        for cell in t.iter().filter(|c| c.d <= radius) {
            if best.as_ref().is_none_or(|(v, _)| cell.c > *v) {
                best = Some((cell.c, cell.q.clone()));
            }
        }
        Some(best)
    }
}

/// One side of the weighted problem: `w · ln P(e^{(μ/w) h})`, degenerating
/// to `μ · max h` at `w = 0`.
struct Side<'a> {
    p: &'a [f64],
    h: &'a [f64],
    w: f64,
    max: f64,
}

impl<'a> Side<'a> {
    fn new(p: &'a [f64], h: &'a [f64], w: f64) -> Self {
        let max = p
            .iter()
            .zip(h)
            .filter(|(pi, _)| **pi > 0.0)
            .map(|(_, hi)| *hi)
            .fold(f64::NEG_INFINITY, f64::max);
        Side { p, h, w, max }
    }

    fn point(&self, out: &mut [f64]) {
        let slack = 1e-12 * self.max.abs().max(1.0);
        let mut mass = 0.0;
        for ((o, &pi), &hi) in out.iter_mut().zip(self.p).zip(self.h) {
            *o = if pi > 0.0 && hi >= self.max - slack { pi } else { 0.0 };
            mass += *o;
        }
        for o in out.iter_mut() {
            *o /= mass;
        }
    }

    /// Writes the tilted law and returns its mean of `h` and the derivative
    /// of that mean in `μ`.
    fn eval(&self, mu: f64, out: &mut [f64]) -> (f64, f64) {
        if self.w <= 0.0 {
            self.point(out);
            return (self.max, 0.0);
        }
        tilt_into(self.p, self.h, mu / self.w, out);
        let m = dot(out, self.h);
        let v: f64 = out
            .iter()
            .zip(self.h)
            .filter(|(q, _)| **q > 0.0)
            .map(|(q, hi)| q * (hi - m) * (hi - m))
            .sum();
        (m, v / self.w)
    }
}

/// Flat Dirichlet draw.
pub(crate) fn dirichlet(r: &mut impl Rng, k: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..k).map(|_| -(1.0 - r.random::<f64>()).ln()).collect();
    let s: f64 = v.iter().sum();
    for x in &mut v {
        *x /= s;
    }
    v
}
