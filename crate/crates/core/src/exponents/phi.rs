use rayon::prelude::*;

use crate::envelope::ExponentCurve;
use crate::error::{Error, Result};
use crate::ext::ExtReal;
use crate::ot::CostMatrix;
use crate::prob::Distribution;

use super::problem::{keep_min, Cand, Problem};
use super::{Estimate, ExponentQuery, Method, SearchConfig};

impl Problem {
    fn estimate(&self, c: Cand, method: Method, cfg: &SearchConfig) -> Estimate {
        Estimate {
            value: ExtReal::Finite(c.value),
            method,
            witness: Some((self.lift_x(&c.qx), self.lift_y(&c.qy))),
            coarse_grid: cfg.is_coarse(),
        }
    }

    fn trivial(&self, cfg: &SearchConfig) -> Estimate {
        Estimate {
            value: ExtReal::Finite(0.0),
            method: Method::Trivial,
            witness: Some((self.p_x().clone(), self.p_y().clone())),
            coarse_grid: cfg.is_coarse(),
        }
    }

    /// Best of the vertex route, the convex–concave runs and the mesh.
    fn closed_best(&self, alpha: f64, tau: f64, pinned: bool, cfg: &SearchConfig) -> Option<(Cand, Method)> {
        let mut tagged: Vec<(Cand, Method)> = Vec::new();
        let exact = self.closed_vertex(alpha, tau, pinned);
        if let Some(Some(c)) = &exact {
            tagged.push((c.clone(), Method::Vertex));
        }
        let mut ccp = self.closed_reach_cands(alpha, tau, pinned);
        for s in self.starts(tau, pinned, cfg) {
            if let Some(c) = self.closed_ccp(alpha, tau, pinned, s, cfg) {
                keep_min(&mut ccp, c);
            }
        }
        if let Some(c) = ccp {
            tagged.push((c, Method::Ccp));
        }
        if let Some(Some(c)) = self.closed_grid(alpha, tau, pinned, cfg) {
            tagged.push((c, Method::Grid));
        }
        pick(tagged)
    }

    /// `inf D(Q_Y‖P_Y)` over `D(Q_X‖P_X) ≤ α`, `C(Q_X, Q_Y) ≥ τ`.
    pub fn phi_geq(&self, q: ExponentQuery, cfg: &SearchConfig) -> Result<Estimate> {
        q.validate()?;
        cfg.validate()?;
        self.closed(q.alpha, q.tau, q.alpha <= 0.0, cfg)
    }

    fn closed(&self, alpha: f64, tau: f64, pinned: bool, cfg: &SearchConfig) -> Result<Estimate> {
        if tau <= 0.0 {
            return Ok(self.trivial(cfg));
        }
        let (reach, _) = self.reach(if pinned { 0.0 } else { alpha });
        if tau > reach + 1e-12 * reach.abs().max(1.0) {
            return Ok(Estimate::infinite(Method::Empty));
        }
        Ok(match self.closed_best(alpha, tau, pinned, cfg) {
            Some((c, m)) => self.estimate(c, m, cfg),
            None => Estimate::infinite(Method::Empty),
        })
    }

    /// `φ(τ) = φ_≥(0, τ)`: `Q_X` pinned to `P_X`.
    pub fn varphi(&self, tau: f64, cfg: &SearchConfig) -> Result<Estimate> {
        ExponentQuery::new(0.0, tau)?;
        cfg.validate()?;
        self.closed(0.0, tau, true, cfg)
    }

    /// The strict exponent `inf D(Q_Y‖P_Y)` over `D(Q_X‖P_X) ≤ α`,
    /// `C(Q_X, Q_Y) > τ`, through the closed one at `τ + shift`.
    ///
    /// At or past the largest achievable cost the strict set is empty and
    /// the value is `+∞`; otherwise the shifted point is kept strictly
    /// inside that range.
    pub fn phi(&self, q: ExponentQuery, shift: f64, cfg: &SearchConfig) -> Result<Estimate> {
        q.validate()?;
        cfg.validate()?;
        if !(shift >= 0.0 && shift.is_finite()) {
            return Err(Error::Domain(format!("shift {shift} must be finite and ≥ 0")));
        }
        let (reach, _) = self.reach(q.alpha);
        if q.tau >= reach - 1e-12 * reach.abs().max(1.0) {
            return Ok(Estimate::infinite(Method::Dom));
        }
        let t = (q.tau + shift).min(0.5 * (q.tau + reach));
        let mut e = self.closed(q.alpha, t, q.alpha <= 0.0, cfg)?;
        if e.value.is_finite() {
            e.method = Method::ClosedShift;
        }
        Ok(e)
    }

    /// `κ(α) = sup { C(P_X, Q) : D(Q‖P_X) < α }` for a symmetric problem,
    /// evaluated on the closed ball of radius `α − 1e-12·max(1, α)`.
    /// `α = 0` gives the `−∞` of an empty supremum.
    pub fn kappa(&self, alpha: f64, cfg: &SearchConfig) -> Result<Estimate> {
        ExponentQuery::new(alpha, 0.0)?;
        cfg.validate()?;
        if alpha <= 0.0 {
            return Ok(Estimate {
                value: ExtReal::NegInf,
                method: Method::Trivial,
                witness: None,
                coarse_grid: cfg.is_coarse(),
            });
        }
        let radius = alpha - 1e-12 * alpha.max(1.0);
        let mut tagged: Vec<(f64, Vec<f64>, Method)> = Vec::new();
        if let Some((v, q)) = self.kappa_vertex(radius) {
            tagged.push((v, q, Method::Vertex));
        }
        let mut best: Option<(f64, Vec<f64>)> = None;
        for s in self.kappa_starts(cfg) {
            let (v, q) = self.kappa_ascent(radius, s, cfg);
            if best.as_ref().is_none_or(|(b, _)| v > *b) {
                best = Some((v, q));
            }
        }
        if let Some((v, q)) = best {
            tagged.push((v, q, Method::Ccp));
        }
        if let Some(Some((v, q))) = self.kappa_grid(radius, cfg) {
            tagged.push((v, q, Method::Grid));
        }
        let (v, q, m) = tagged
            .into_iter()
            .reduce(|a, b| if b.0 > a.0 + 1e-12 { b } else { a })
            .expect("at least the ascent runs");
        Ok(Estimate {
            value: ExtReal::Finite(v.min(self.c_max())),
            method: m,
            witness: Some((self.p_x().clone(), self.lift_y(&q))),
            coarse_grid: cfg.is_coarse(),
        })
    }

    /// `inf (1−λ)D(Q_Y‖P_Y) + λD(Q_X‖P_X)` over `C(Q_X, Q_Y) ≥ τ`, for
    /// `λ ∈ [0, 1]`.
    pub fn phi_lambda_geq(&self, tau: f64, lambda: f64, cfg: &SearchConfig) -> Result<Estimate> {
        ExponentQuery::new(0.0, tau)?;
        cfg.validate()?;
        if !(0.0..=1.0).contains(&lambda) {
            return Err(Error::Domain(format!(
                "lambda = {lambda} outside [0, 1]; the weighted exponent is only solved there"
            )));
        }
        if tau <= 0.0 {
            return Ok(self.trivial(cfg));
        }
        if tau > self.c_max() + 1e-12 * self.c_max().max(1.0) {
            return Ok(Estimate::infinite(Method::Empty));
        }
        let mut tagged = Vec::new();
        if let Some(Some(c)) = self.lambda_vertex(lambda, tau) {
            tagged.push((c, Method::Vertex));
        }
        let mut ccp = None;
        for s in self.starts(tau, false, cfg) {
            if let Some(c) = self.lambda_ccp(lambda, tau, s, cfg) {
                keep_min(&mut ccp, c);
            }
        }
        if let Some(c) = ccp {
            tagged.push((c, Method::Ccp));
        }
        if let Some(Some(c)) = self.lambda_grid(lambda, tau, cfg) {
            tagged.push((c, Method::Grid));
        }
        Ok(match pick(tagged) {
            Some((c, m)) => self.estimate(c, m, cfg),
            None => Estimate::infinite(Method::Empty),
        })
    }
}

/// Smallest value; the earlier (more certified) method wins near-ties.
fn pick(tagged: Vec<(Cand, Method)>) -> Option<(Cand, Method)> {
    tagged.into_iter().reduce(|a, b| {
        if b.0.value < a.0.value - 1e-12 * a.0.value.abs().max(1.0) {
            b
        } else {
            a
        }
    })
}

/// `φ_≥(α, τ)` for one query; see [`Problem::phi_geq`].
pub fn phi_geq(
    q: ExponentQuery,
    p_x: &Distribution<f64>,
    p_y: &Distribution<f64>,
    c: &CostMatrix<f64>,
    cfg: &SearchConfig,
) -> Result<Estimate> {
    Problem::new(p_x, p_y, c)?.phi_geq(q, cfg)
}

/// Strict `φ(α, τ)` through the closed exponent at a `1e-9·c_max` shift.
pub fn phi(
    q: ExponentQuery,
    p_x: &Distribution<f64>,
    p_y: &Distribution<f64>,
    c: &CostMatrix<f64>,
    cfg: &SearchConfig,
) -> Result<Estimate> {
    let pr = Problem::new(p_x, p_y, c)?;
    let shift = 1e-9 * c.max_entry().max(1.0);
    pr.phi(q, shift, cfg)
}

pub fn varphi(
    tau: f64,
    p_x: &Distribution<f64>,
    p_y: &Distribution<f64>,
    c: &CostMatrix<f64>,
    cfg: &SearchConfig,
) -> Result<Estimate> {
    Problem::new(p_x, p_y, c)?.varphi(tau, cfg)
}

/// `inf { D(Q‖P_X) : C(P_X, Q) ≥ τ }` on a square cost.
pub fn varphi_x(tau: f64, p_x: &Distribution<f64>, c: &CostMatrix<f64>, cfg: &SearchConfig) -> Result<Estimate> {
    Problem::symmetric(p_x, c)?.varphi(tau, cfg)
}

pub fn kappa_x(alpha: f64, p_x: &Distribution<f64>, c: &CostMatrix<f64>, cfg: &SearchConfig) -> Result<Estimate> {
    Problem::symmetric(p_x, c)?.kappa(alpha, cfg)
}

pub fn phi_lambda_geq(
    tau: f64,
    lambda: f64,
    p_x: &Distribution<f64>,
    p_y: &Distribution<f64>,
    c: &CostMatrix<f64>,
    cfg: &SearchConfig,
) -> Result<Estimate> {
    Problem::new(p_x, p_y, c)?.phi_lambda_geq(tau, lambda, cfg)
}

fn check_grid(name: &str, g: &[f64]) -> Result<()> {
    if g.is_empty() || g.windows(2).any(|w| w[1] <= w[0]) || g.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
        return Err(Error::Domain(format!(
            "{name} grid must be nonempty, finite, nonnegative and strictly increasing"
        )));
    }
    Ok(())
}

/// `φ_≥` on a grid, cells solved in parallel.
///
/// A witness feasible at `(α, τ)` stays feasible at every `(α' ≥ α, τ' ≤ τ)`,
/// so values are propagated along both axes afterwards; the curve is then
/// exactly monotone whatever the individual solves returned.
pub fn phi_geq_curve(pr: &Problem, alpha_grid: &[f64], tau_grid: &[f64], cfg: &SearchConfig) -> Result<ExponentCurve> {
    check_grid("alpha", alpha_grid)?;
    check_grid("tau", tau_grid)?;
    cfg.validate()?;
    let nt = tau_grid.len();
    let cells: Vec<Estimate> = (0..alpha_grid.len() * nt)
        .into_par_iter()
        .map(|k| pr.phi_geq(ExponentQuery::new(alpha_grid[k / nt], tau_grid[k % nt])?, cfg))
        .collect::<Result<_>>()?;
    let mut values: Vec<ExtReal<f64>> = cells.iter().map(|e| e.value).collect();
    let mut methods: Vec<Method> = cells.iter().map(|e| e.method).collect();
    propagate(&mut values, &mut methods, alpha_grid.len(), nt);
    ExponentCurve::new(alpha_grid.to_vec(), tau_grid.to_vec(), values, methods)
}

/// Running minimum over larger `α` (down the rows) and smaller `τ`
/// (leftwards along a row).
fn propagate(values: &mut [ExtReal<f64>], methods: &mut [Method], na: usize, nt: usize) {
    for i in 0..na {
        for j in (0..nt).rev() {
            let k = i * nt + j;
            let mut cands = Vec::new();
            if i > 0 {
                cands.push((i - 1) * nt + j);
            }
            if j + 1 < nt {
                cands.push(k + 1);
            }
            for src in cands {
                if values[src] < values[k] {
                    values[k] = values[src];
                    methods[k] = methods[src];
                }
            }
        }
    }
}

fn pinned_curve(pr: &Problem, tau_grid: &[f64], cfg: &SearchConfig) -> Result<ExponentCurve> {
    check_grid("tau", tau_grid)?;
    cfg.validate()?;
    let cells: Vec<Estimate> = tau_grid
        .par_iter()
        .map(|&t| pr.varphi(t, cfg))
        .collect::<Result<_>>()?;
    let mut values: Vec<ExtReal<f64>> = cells.iter().map(|e| e.value).collect();
    let mut methods: Vec<Method> = cells.iter().map(|e| e.method).collect();
    propagate(&mut values, &mut methods, 1, tau_grid.len());
    ExponentCurve::tau_row(0.0, tau_grid.to_vec(), values, methods)
}

/// `φ(τ)` over a `τ` grid as a one-row curve at `α = 0`.
pub fn varphi_curve(pr: &Problem, tau_grid: &[f64], cfg: &SearchConfig) -> Result<ExponentCurve> {
    pinned_curve(pr, tau_grid, cfg)
}

/// `φ_X(τ)` over a `τ` grid.
pub fn varphi_x_curve(p_x: &Distribution<f64>, c: &CostMatrix<f64>, tau_grid: &[f64], cfg: &SearchConfig) -> Result<ExponentCurve> {
    pinned_curve(&Problem::symmetric(p_x, c)?, tau_grid, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prob::binary_kl;
    use proptest::prelude::*;

    const D_34_12: f64 = 0.130_812_035_941_136_97;
    /// `φ_{1/2}(0.25)` for Bern(1/2)/Hamming from an exhaustive δ = 1/512
    /// grid over `(q_x, q_y)`; the optimum `(3/8, 5/8)` lies on the grid.
    const PHI_HALF_025: f64 = 0.031_583_942_401_963_26;

    fn bern(p: f64) -> Distribution<f64> {
        Distribution::bernoulli(p).unwrap()
    }

    fn cfg() -> SearchConfig {
        SearchConfig::default()
    }

    #[test]
    fn half_grid_oracle_value() {
        // Oracle: scan the 1/512 mesh directly.
        let mut best = f64::INFINITY;
        for a in 0..=512 {
            for b in 0..=512 {
                let (qx, qy) = (a as f64 / 512.0, b as f64 / 512.0);
                if (qx - qy).abs() >= 0.25 {
                    let v = 0.5 * binary_kl(qx, 0.5).unwrap().to_float()
                        + 0.5 * binary_kl(qy, 0.5).unwrap().to_float();
                    best = best.min(v);
                }
            }
        }
        assert!((best - PHI_HALF_025).abs() < 1e-15);
    }

    #[test]
    fn closed_examples() {
        let h = CostMatrix::hamming(2);
        let (p, q) = (bern(0.5), bern(0.5));
        let e = phi_geq(ExponentQuery::new(0.3, 0.0).unwrap(), &p, &q, &h, &cfg()).unwrap();
        assert_eq!(e.value, ExtReal::Finite(0.0));
        assert_eq!(e.witness.unwrap().0, p);
        let e = phi_geq(ExponentQuery::new(0.0, 0.25).unwrap(), &p, &q, &h, &cfg()).unwrap();
        assert!((e.value.to_float() - D_34_12).abs() < 1e-9);
        let (_, qy) = e.witness.unwrap();
        assert!((qy.mass()[1] - 0.75).abs() < 1e-6 || (qy.mass()[0] - 0.75).abs() < 1e-6);
        let e = phi_geq(ExponentQuery::new(0.0, 1.0).unwrap(), &p, &q, &h, &cfg()).unwrap();
        assert_eq!(e.value, ExtReal::PosInf);
        assert_eq!(e.method, Method::Empty);
        let e = phi(ExponentQuery::new(5.0, 1.0).unwrap(), &p, &q, &h, &cfg()).unwrap();
        assert_eq!((e.value, e.method), (ExtReal::PosInf, Method::Dom));
        let h4 = CostMatrix::hamming(4);
        let u = Distribution::uniform(4);
        let e = phi(ExponentQuery::new(0.2, 1.0).unwrap(), &u, &u, &h4, &cfg()).unwrap();
        assert!(e.value.is_pos_inf());
    }

    #[test]
    fn varphi_examples() {
        let h = CostMatrix::hamming(2);
        let p = bern(0.5);
        assert_eq!(varphi(0.0, &p, &p, &h, &cfg()).unwrap().value, ExtReal::Finite(0.0));
        let v = varphi(0.25, &p, &p, &h, &cfg()).unwrap().value.to_float();
        assert!((v - D_34_12).abs() < 1e-9);
        assert!(varphi(1.0, &p, &p, &h, &cfg()).unwrap().value.is_pos_inf());
        let v = varphi_x(0.25, &p, &h, &cfg()).unwrap().value.to_float();
        assert!((v - D_34_12).abs() < 1e-9);
        let e = varphi_x(0.6, &p, &h, &cfg()).unwrap();
        assert_eq!((e.value, e.method), (ExtReal::PosInf, Method::Empty));
    }

    #[test]
    fn binary_closed_form() {
        let h = CostMatrix::hamming(2);
        let p = bern(0.5);
        for k in 1..=9 {
            let t = 0.05 * k as f64;
            let want = binary_kl(0.5 + t, 0.5).unwrap().to_float();
            let got = varphi(t, &p, &p, &h, &cfg()).unwrap().value.to_float();
            assert!((got - want).abs() < 1e-9, "τ={t}: {got} vs {want}");
        }
    }

    #[test]
    fn kappa_examples() {
        let h = CostMatrix::hamming(2);
        let p = bern(0.5);
        assert_eq!(kappa_x(0.0, &p, &h, &cfg()).unwrap().value, ExtReal::NegInf);
        let k = kappa_x(50.0, &p, &h, &cfg()).unwrap().value.to_float();
        assert!((k - 0.5).abs() < 1e-12);
        let k = kappa_x(D_34_12, &p, &h, &cfg()).unwrap().value.to_float();
        assert!(k < 0.25 && k > 0.25 - 1e-6, "{k}");
    }

    #[test]
    fn weighted_examples() {
        let h = CostMatrix::hamming(2);
        let p = bern(0.5);
        assert_eq!(phi_lambda_geq(0.0, 0.3, &p, &p, &h, &cfg()).unwrap().value, ExtReal::Finite(0.0));
        let v = phi_lambda_geq(0.4, 0.0, &p, &p, &h, &cfg()).unwrap().value.to_float();
        assert!(v.abs() < 1e-12, "{v}");
        let v = phi_lambda_geq(0.25, 0.5, &p, &p, &h, &cfg()).unwrap().value.to_float();
        assert!((v - PHI_HALF_025).abs() < 1e-9, "{v}");
        assert!(phi_lambda_geq(0.25, 1.5, &p, &p, &h, &cfg()).is_err());
    }

    #[test]
    fn ccp_agrees_with_vertices_on_three_atoms() {
        let c = CostMatrix::new(vec![
            vec![0.0, 1.0, 2.0],
            vec![1.0, 0.0, 1.0],
            vec![2.0, 1.0, 0.0],
        ])
        .unwrap();
        let px = Distribution::from_mass(vec![0.2, 0.5, 0.3]).unwrap();
        let py = Distribution::from_mass(vec![0.4, 0.4, 0.2]).unwrap();
        let pr = Problem::new(&px, &py, &c).unwrap();
        for (a, t) in [(0.0, 0.3), (0.05, 0.6), (0.2, 1.1)] {
            let exact = pr.closed_vertex(a, t, a == 0.0).unwrap().unwrap().value;
            let mut best = f64::INFINITY;
            for s in pr.starts(t, a == 0.0, &cfg()) {
                if let Some(c) = pr.closed_ccp(a, t, a == 0.0, s, &cfg()) {
                    best = best.min(c.value);
                }
            }
            assert!(best >= exact - 1e-9);
            assert!(best - exact < 5e-3, "({a},{t}): ccp {best} vs {exact}");
            if let Some(Some(g)) = pr.closed_grid(a, t, a == 0.0, &cfg()) {
                assert!(g.value >= exact - 1e-9);
            }
        }
    }

    #[test]
    fn curve_is_monotone() {
        let c = CostMatrix::new(vec![vec![0.0, 1.0, 3.0], vec![2.0, 0.0, 1.0]]).unwrap();
        let px = Distribution::from_mass(vec![0.3, 0.7]).unwrap();
        let py = Distribution::from_mass(vec![0.5, 0.25, 0.25]).unwrap();
        let pr = Problem::new(&px, &py, &c).unwrap();
        let alphas = [0.0, 0.05, 0.1, 0.3, 1.0];
        let taus: Vec<f64> = (0..=12).map(|k| k as f64 * 0.2).collect();
        let cur = phi_geq_curve(&pr, &alphas, &taus, &cfg()).unwrap();
        for i in 0..alphas.len() {
            for j in 0..taus.len() {
                if j > 0 {
                    assert!(cur.get(i, j) >= cur.get(i, j - 1));
                }
                if i > 0 {
                    assert!(cur.get(i, j) <= cur.get(i - 1, j));
                }
            }
        }
        let row0 = varphi_curve(&pr, &taus, &cfg()).unwrap();
        for j in 0..taus.len() {
            let (a, b) = (row0.get(0, j), cur.get(0, j));
            assert_eq!(a.is_finite(), b.is_finite());
            if a.is_finite() {
                assert!((a.to_float() - b.to_float()).abs() < 1e-6);
            }
        }
    }

    fn simplex(k: usize) -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(0.05..1.0_f64, k).prop_map(|v| {
            let s: f64 = v.iter().sum();
            v.iter().map(|x| x / s).collect()
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn weighted_below_linkage(
            (px, py) in (simplex(2), simplex(3)),
            lam in 0.0..1.0_f64,
            alpha in 0.0..0.5_f64,
            tau in 0.0..1.5_f64,
        ) {
            let c = CostMatrix::new(vec![vec![0.0, 1.0, 2.0], vec![1.0, 0.0, 1.0]]).unwrap();
            let pr = Problem::new(
                &Distribution::from_mass(px).unwrap(),
                &Distribution::from_mass(py).unwrap(),
                &c,
            ).unwrap();
            let w = pr.phi_lambda_geq(tau, lam, &cfg()).unwrap().value;
            let f = pr.phi_geq(ExponentQuery::new(alpha, tau).unwrap(), &cfg()).unwrap().value;
            if let Some(f) = f.finite() {
                prop_assert!(w.to_float() <= lam * alpha + (1.0 - lam) * f + 1e-6);
            }
        }
    }
}
