use std::collections::HashSet;

use crate::error::{check_len, Error, Result};
use crate::ext::ExtReal;
use crate::exponents::dirichlet;
use crate::optim::rng;
use crate::ot::{ot_slices, CostMatrix};
use crate::prob::{dot, tilt_into, Distribution};

use super::legendre;

/// Largest space whose Lipschitz polytope is enumerated exactly.
pub const VERTEX_POINTS: usize = 8;

/// A finite metric probability space `(𝒳, d, P_X)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricSpace {
    dist: CostMatrix<f64>,
    base: Distribution<f64>,
}

impl MetricSpace {
    /// Validates `dist` as a metric (square, symmetric, zero diagonal,
    /// triangle inequality) matching the base law.
    pub fn new(dist: CostMatrix<f64>, base: Distribution<f64>) -> Result<Self> {
        check_len("metric size", base.len(), dist.rows())?;
        let dist = if dist.is_metric() { dist } else { dist.into_metric()? };
        Ok(Self { dist, base })
    }

    /// Two points at distance `d` with masses `(1 − p, p)`.
    pub fn two_point(p: f64, d: f64) -> Result<Self> {
        Self::new(
            CostMatrix::new(vec![vec![0.0, d], vec![d, 0.0]])?,
            Distribution::bernoulli(p)?,
        )
    }

    pub fn points(&self) -> &[String] {
        self.base.labels()
    }

    pub fn len(&self) -> usize {
        self.base.len()
    }

    pub fn is_empty(&self) -> bool {
        self.base.is_empty()
    }

    pub fn dist(&self) -> &CostMatrix<f64> {
        &self.dist
    }

    pub fn base(&self) -> &Distribution<f64> {
        &self.base
    }

    /// `P_X`-mean-zero shift of `f`.
    fn centered(&self, mut f: Vec<f64>) -> Vec<f64> {
        let m = dot(self.base.mass(), &f);
        for x in &mut f {
            *x -= m;
        }
        f
    }

    /// The 1-Lipschitz c-transform `i ↦ min_j d_ij − v_j`, centered.
    fn lipschitz_from(&self, v: &[f64]) -> Vec<f64> {
        let k = self.len();
        let f = (0..k)
            .map(|i| (0..k).map(|j| self.dist.get(i, j) - v[j]).fold(f64::INFINITY, f64::min))
            .collect();
        self.centered(f)
    }
}

/// A 1-Lipschitz, `P_X`-mean-zero function on a metric space.
#[derive(Debug, Clone, PartialEq)]
pub struct LipschitzVector {
    pub f: Vec<f64>,
}

impl LipschitzVector {
    pub fn new(f: Vec<f64>, g: &MetricSpace) -> Result<Self> {
        check_len("Lipschitz vector", g.len(), f.len())?;
        for i in 0..f.len() {
            for j in 0..f.len() {
                if f[i] - f[j] > g.dist.get(i, j) + 1e-11 {
                    return Err(Error::Domain(format!("|f[{i}] − f[{j}]| exceeds d({i},{j})")));
                }
            }
        }
        let m = dot(g.base.mass(), &f);
        if m.abs() > 1e-11 {
            return Err(Error::Domain(format!("P_X(f) = {m} is not zero")));
        }
        Ok(Self { f })
    }
}

/// Vertices of `{f : f_i − f_j ≤ d_ij, P_X(f) = 0}`.
///
/// A vertex has a spanning tree of tight constraints, so ordering the
/// points along it, every new point sits at one end of the interval its
/// placed predecessors allow. The search places points in every order,
/// taking either end, with memoized partial states.
pub fn lipschitz_vertices(g: &MetricSpace) -> Vec<LipschitzVector> {
    let k = g.len();
    let key = |x: f64| (x * 1e9).round() as i64;
    let mut seen_states: HashSet<(u32, Vec<i64>)> = HashSet::new();
    let mut out: HashSet<Vec<i64>> = HashSet::new();
    let mut verts = Vec::new();
    let mut stack: Vec<(u32, Vec<f64>)> = vec![(1, {
        let mut v = vec![0.0; k];
        v[0] = 0.0;
        v
    })];
    let full = if k == 32 { u32::MAX } else { (1u32 << k) - 1 };
    while let Some((mask, vals)) = stack.pop() {
        if mask == full {
            let f = g.centered(vals);
            if out.insert(f.iter().map(|&x| key(x)).collect()) {
                verts.push(LipschitzVector { f });
            }
            continue;
        }
        for v in (0..k).filter(|&v| mask & (1 << v) == 0) {
            let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
            for s in (0..k).filter(|&s| mask & (1 << s) != 0) {
                lo = lo.max(vals[s] - g.dist.get(s, v));
                hi = hi.min(vals[s] + g.dist.get(s, v));
            }
            for x in [lo, hi] {
                let mut next = vals.clone();
                next[v] = x;
                let m = mask | (1 << v);
                let sig = (
                    m,
                    (0..k).filter(|&i| m & (1 << i) != 0).map(|i| key(next[i])).collect::<Vec<_>>(),
                );
                if seen_states.insert(sig) {
                    stack.push((m, next));
                }
            }
        }
    }
    verts.sort_by(|a, b| a.f.partial_cmp(&b.f).unwrap());
    verts
}

/// `L_G(λ) = max { ln P_X(e^{λf}) : f 1-Lipschitz, P_X(f) = 0 }`.
///
/// Exact (vertex maximum of a convex function) up to
/// [`VERTEX_POINTS`] points; beyond that, a multistart ascent through
/// Kantorovich potentials, flagged `heuristic`.
#[derive(Debug, Clone)]
pub struct LogMgfMax {
    space: MetricSpace,
    vertices: Option<Vec<LipschitzVector>>,
    seed: u64,
}

/// `L_G(λ)` with its maximizer.
#[derive(Debug, Clone, PartialEq)]
pub struct LgValue {
    pub value: f64,
    pub argmax: LipschitzVector,
    pub heuristic: bool,
}

impl LogMgfMax {
    pub fn new(g: &MetricSpace, seed: u64) -> Self {
        let vertices = (g.len() <= VERTEX_POINTS).then(|| lipschitz_vertices(g));
        Self {
            space: g.clone(),
            vertices,
            seed,
        }
    }

    pub fn is_exact(&self) -> bool {
        self.vertices.is_some()
    }

    fn lmgf(&self, f: &[f64], lambda: f64) -> f64 {
        let mut out = vec![0.0; f.len()];
        tilt_into(self.space.base.mass(), f, lambda, &mut out)
    }

    pub fn eval(&self, lambda: f64) -> Result<LgValue> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::Domain(format!("lambda = {lambda} must be finite and ≥ 0")));
        }
        let k = self.space.len();
        if let Some(vs) = &self.vertices {
            let mut best: Option<(f64, &LipschitzVector)> = None;
            for v in vs {
                let val = if lambda == 0.0 { 0.0 } else { self.lmgf(&v.f, lambda) };
                if best.is_none_or(|(b, _)| val > b) {
                    best = Some((val, v));
                }
            }
            let (value, v) = best.expect("a nonempty polytope");
            return Ok(LgValue {
                value,
                argmax: v.clone(),
                heuristic: false,
            });
        }
        // Ascent: the gradient direction is the tilted law Q, and the best
        // Lipschitz response to Q − P_X is a Kantorovich potential.
        let base = self.space.base.mass();
        let mut r = rng(self.seed, 0x4c47);
        // Starts: ± distance functions and potentials of random laws.
        let mut starts: Vec<Vec<f64>> = Vec::new();
        for j in 0..k {
            let col: Vec<f64> = (0..k).map(|i| self.space.dist.get(i, j)).collect();
            starts.push(self.space.centered(col.clone()));
            starts.push(self.space.centered(col.iter().map(|x| -x).collect()));
        }
        for _ in 0..8 {
            let law = dirichlet(&mut r, k);
            let (_, _, v) = ot_slices(&law, base, &self.space.dist);
            starts.push(self.space.lipschitz_from(&v));
        }
        let mut best: Option<(f64, Vec<f64>)> = None;
        let mut q = vec![0.0; k];
        for mut f in starts {
            let mut val = self.lmgf(&f, lambda);
            for _ in 0..200 {
                tilt_into(base, &f, lambda, &mut q);
                let (_, _, v) = ot_slices(&q, base, &self.space.dist);
                let nf = self.space.lipschitz_from(&v);
                let nv = self.lmgf(&nf, lambda);
                if nv <= val + 1e-15 {
                    break;
                }
                f = nf;
                val = nv;
            }
            if best.as_ref().is_none_or(|(b, _)| val > *b) {
                best = Some((val, f));
            }
        }
        let (value, f) = best.expect("starts are nonempty");
        Ok(LgValue {
            value: if lambda == 0.0 { 0.0 } else { value },
            argmax: LipschitzVector { f },
            heuristic: true,
        })
    }

    /// Candidate functions: the vertices, or the ascent maximizers on a
    /// λ grid.
    pub(crate) fn candidates(&self) -> Vec<Vec<f64>> {
        match &self.vertices {
            Some(vs) => vs.iter().map(|v| v.f.clone()).collect(),
            None => {
                let mut out: Vec<Vec<f64>> = Vec::new();
                for k in -10..=20 {
                    if let Ok(v) = self.eval(2f64.powi(k)) {
                        if !out.contains(&v.argmax.f) {
                            out.push(v.argmax.f);
                        }
                    }
                }
                out
            }
        }
    }

    /// `r(τ) = sup_{λ ≥ 0} λτ − L_G(λ)`: `L_G` is a maximum of convex
    /// functions, so the objective is concave and the maximizer is found
    /// by bisection on the right derivative; the smallest maximizer is kept.
    pub fn legendre(&self, tau: f64) -> Result<AbsR> {
        if !(tau >= 0.0 && tau.is_finite()) {
            return Err(Error::Domain(format!("tau = {tau} must be finite and ≥ 0")));
        }
        if tau == 0.0 {
            return Ok(AbsR {
                value: ExtReal::Finite(0.0),
                lambda: 0.0,
            });
        }
        let cands = self.candidates();
        let base = self.space.base.mass();
        // Largest slope of L_G at infinity.
        let top = cands
            .iter()
            .map(|f| {
                f.iter()
                    .zip(base)
                    .filter(|(_, p)| **p > 0.0)
                    .map(|(x, _)| *x)
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .fold(f64::NEG_INFINITY, f64::max);
        if tau > top + 1e-12 {
            return Ok(AbsR {
                value: ExtReal::PosInf,
                lambda: f64::INFINITY,
            });
        }
        let mut out = vec![0.0; base.len()];
        // Right derivative of L_G: the largest slope among the active
        // candidates.
        let mut slope = |lambda: f64| {
            let mut best = (f64::NEG_INFINITY, f64::NEG_INFINITY);
            for f in &cands {
                let v = tilt_into(base, f, lambda, &mut out);
                let d = dot(&out, f);
                if v > best.0 + 1e-14 * best.0.abs().max(1.0) || (v >= best.0 - 1e-14 * best.0.abs().max(1.0) && d > best.1) {
                    best = (best.0.max(v), d);
                }
            }
            best
        };
        if tau >= top - 1e-12 {
            // Boundary: the supremum is the λ → ∞ limit −ln P(f = max f)
            // of the steepest candidate(s).
            let value = cands
                .iter()
                .filter_map(|f| {
                    let m = f.iter().zip(base).filter(|(_, p)| **p > 0.0).map(|(x, _)| *x).fold(f64::NEG_INFINITY, f64::max);
                    (m >= top - 1e-12).then(|| {
                        -f.iter().zip(base).filter(|(x, p)| **p > 0.0 && **x >= m - 1e-12).map(|(_, p)| p).sum::<f64>().ln()
                    })
                })
                .fold(f64::INFINITY, f64::min);
            return Ok(AbsR {
                value: ExtReal::Finite(value),
                lambda: f64::INFINITY,
            });
        }
        let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
        while slope(hi).1 < tau {
            lo = hi;
            hi *= 2.0;
            if hi > 1e12 {
                break;
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if slope(mid).1 >= tau {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let lg = self.eval(hi)?.value;
        Ok(AbsR {
            value: ExtReal::Finite((hi * tau - lg).max(0.0)),
            lambda: hi,
        })
    }
}

/// `r(τ)` with its maximizing `λ` (`+∞` on the boundary).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AbsR {
    pub value: ExtReal<f64>,
    pub lambda: f64,
}

/// `L_G(λ)`.
pub fn abs_lg(lambda: f64, g: &MetricSpace) -> Result<LgValue> {
    LogMgfMax::new(g, 0).eval(lambda)
}

/// `r(τ) = sup_{λ ≥ 0} λτ − L_G(λ)`.
pub fn abs_r(tau: f64, g: &MetricSpace) -> Result<AbsR> {
    LogMgfMax::new(g, 0).legendre(tau)
}

/// `inf_f sup_{λ ≥ 0} λτ − ln P_X(e^{λf})` over 1-Lipschitz mean-zero `f`.
///
/// For fixed `f` the inner supremum is the I-projection value, and
/// `{Q : C(P_X, Q) ≥ τ}` is the union over the polytope vertices of
/// `{Q(f) ≥ τ}`, so the infimum is a vertex minimum. Beyond
/// [`VERTEX_POINTS`] points the candidates come from the ascent.
pub fn dual_varphi_x(tau: f64, g: &MetricSpace) -> Result<(ExtReal<f64>, Option<LipschitzVector>)> {
    if !(tau >= 0.0 && tau.is_finite()) {
        return Err(Error::Domain(format!("tau = {tau} must be finite and ≥ 0")));
    }
    let lg = LogMgfMax::new(g, 0);
    let mut best: Option<(ExtReal<f64>, Vec<f64>)> = None;
    for f in lg.candidates() {
        let (v, _) = legendre(g.base.mass(), &f, tau);
        if best.as_ref().is_none_or(|(b, _)| v < *b) {
            best = Some((v, f));
        }
    }
    let (v, f) = best.expect("a nonempty polytope");
    Ok((v, Some(LipschitzVector { f })))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn log_cosh_half(l: f64) -> f64 {
        (l / 2.0).cosh().ln()
    }

    #[test]
    fn two_point_vertices_and_lg() {
        let g = MetricSpace::two_point(0.5, 1.0).unwrap();
        let vs = lipschitz_vertices(&g);
        assert_eq!(vs.len(), 2);
        for v in &vs {
            assert!((v.f[0] + v.f[1]).abs() < 1e-15 && (v.f[0].abs() - 0.5).abs() < 1e-15);
        }
        assert_eq!(abs_lg(0.0, &g).unwrap().value, 0.0);
        for l in [0.1, 1.0, 3.0, 20.0] {
            let v = abs_lg(l, &g).unwrap();
            assert!((v.value - log_cosh_half(l)).abs() < 1e-12);
            LipschitzVector::new(v.argmax.f.clone(), &g).unwrap();
        }
    }

    #[test]
    fn r_matches_legendre_pair() {
        let g = MetricSpace::two_point(0.5, 1.0).unwrap();
        let r = abs_r(0.25, &g).unwrap();
        let expected = crate::prob::binary_kl(0.75, 0.5).unwrap().to_float();
        assert!((r.value.to_float() - expected).abs() < 1e-10);
        assert!((r.lambda - 3f64.ln()).abs() < 1e-8);
        assert_eq!(abs_r(0.0, &g).unwrap().value, ExtReal::Finite(0.0));
        assert!(abs_r(0.6, &g).unwrap().value.is_pos_inf());
        // Boundary: Q = δ_1 costs ln 2.
        assert!((abs_r(0.5, &g).unwrap().value.to_float() - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn lg_convex_and_dual_above_r() {
        let d = CostMatrix::new(vec![
            vec![0.0, 1.0, 2.0],
            vec![1.0, 0.0, 1.5],
            vec![2.0, 1.5, 0.0],
        ])
        .unwrap();
        let g = MetricSpace::new(d, Distribution::from_mass(vec![0.2, 0.5, 0.3]).unwrap()).unwrap();
        let lg = LogMgfMax::new(&g, 0);
        for k in 0..40 {
            let (a, b) = (0.1 * k as f64, 0.1 * (k + 2) as f64);
            let mid = lg.eval(0.5 * (a + b)).unwrap().value;
            assert!(mid <= 0.5 * (lg.eval(a).unwrap().value + lg.eval(b).unwrap().value) + 1e-9);
        }
        for k in 1..12 {
            let tau = 0.1 * k as f64;
            let r = lg.legendre(tau).unwrap().value;
            let (d, _) = dual_varphi_x(tau, &g).unwrap();
            assert!(d >= ExtReal::Finite(r.to_float() - 1e-9) || r.is_pos_inf(), "{tau}: {d} < {r}");
        }
    }

    #[test]
    fn ascent_agrees_with_vertices_on_small_space() {
        let d = CostMatrix::new(vec![
            vec![0.0, 1.0, 1.0, 2.0],
            vec![1.0, 0.0, 2.0, 1.0],
            vec![1.0, 2.0, 0.0, 1.0],
            vec![2.0, 1.0, 1.0, 0.0],
        ])
        .unwrap();
        let g = MetricSpace::new(d, Distribution::from_mass(vec![0.1, 0.2, 0.3, 0.4]).unwrap()).unwrap();
        let exact = LogMgfMax::new(&g, 0);
        let heur = LogMgfMax {
            vertices: None,
            ..exact.clone()
        };
        for l in [0.3, 1.0, 4.0] {
            let e = exact.eval(l).unwrap().value;
            let h = heur.eval(l).unwrap();
            assert!(h.heuristic && h.value <= e + 1e-12 && h.value >= e - 1e-6, "{l}: {} vs {e}", h.value);
        }
    }
}
