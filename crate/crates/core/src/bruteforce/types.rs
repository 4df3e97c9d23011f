use std::collections::HashSet;

use rayon::prelude::*;

use super::{digits, SubsetMask, ENLARGE_SLACK};
use crate::error::{check_len, Error, Result};
use crate::ot::{ot_slices, CostMatrix};
use crate::optim::{simplex_grid, simplex_grid_len};
use crate::prob::Distribution;
use crate::scalar::log_sum_exp_weighted;

/// Per-side cap on the number of `n`-types.
pub const MAX_TYPES: usize = 10_000;
/// Cap on the `n·C(Q, R)` table.
pub const MAX_TYPE_PAIRS: usize = 4_000_000;
/// Budget (type-pair visits) for the family search.
const FAMILY_BUDGET: usize = 200_000_000;

/// An exchangeable set: the union of the type classes of `types`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TypeSet {
    pub n: usize,
    pub k: usize,
    pub types: Vec<Vec<usize>>,
}

impl TypeSet {
    pub fn new(n: usize, k: usize, mut types: Vec<Vec<usize>>) -> Result<Self> {
        for t in &types {
            check_len("type length", k, t.len())?;
            if t.iter().sum::<usize>() != n {
                return Err(Error::Domain(format!("type {t:?} does not sum to {n}")));
            }
        }
        types.sort();
        types.dedup();
        Ok(Self { n, k, types })
    }

    /// All `n`-types over `k` letters, lexicographic.
    pub fn all(n: usize, k: usize) -> Result<Self> {
        let len = simplex_grid_len(k, n);
        if len > MAX_TYPES as u128 {
            return Err(Error::Guard(format!("{len} types of length {n} over {k} letters exceed {MAX_TYPES}")));
        }
        Ok(Self {
            n,
            k,
            types: simplex_grid(k, n),
        })
    }

    pub fn contains(&self, ty: &[usize]) -> bool {
        self.types.binary_search_by(|t| t.as_slice().cmp(ty)).is_ok()
    }

    /// The induced subset of `𝒳ⁿ`.
    pub fn to_mask(&self) -> Result<SubsetMask> {
        let mut m = SubsetMask::empty(self.n, self.k)?;
        let set: HashSet<&[usize]> = self.types.iter().map(|t| t.as_slice()).collect();
        for i in 0..m.space_len() {
            if set.contains(type_of(&digits(i, self.k, self.n), self.k).as_slice()) {
                m.insert(i);
            }
        }
        Ok(m)
    }

    /// `ln P^⊗n` of the set.
    pub fn log_mass(&self, p: &[f64]) -> Result<f64> {
        check_len("law vs type length", self.k, p.len())?;
        let lf = ln_factorials(self.n);
        let l: Vec<f64> = self.types.iter().map(|t| log_type_mass(t, p, &lf)).collect();
        Ok(log_sum_exp_weighted(&vec![1.0; l.len()], &l))
    }

    /// `(2,0);(1,1)` form.
    pub fn to_list(&self) -> String {
        self.types
            .iter()
            .map(|t| format!("({})", t.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(",")))
            .collect::<Vec<_>>()
            .join(";")
    }
}

pub(crate) fn type_of(seq: &[usize], k: usize) -> Vec<usize> {
    let mut t = vec![0; k];
    for &d in seq {
        t[d] += 1;
    }
    t
}

pub(crate) fn ln_factorials(n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n + 1];
    for i in 1..=n {
        out[i] = out[i - 1] + (i as f64).ln();
    }
    out
}

/// `ln` of the multinomial mass of a type class.
pub(crate) fn log_type_mass(t: &[usize], p: &[f64], lf: &[f64]) -> f64 {
    let n: usize = t.iter().sum();
    let mut acc = lf[n];
    for (&c, &pi) in t.iter().zip(p) {
        if c > 0 {
            if pi <= 0.0 {
                return f64::NEG_INFINITY;
            }
            acc += c as f64 * pi.ln() - lf[c];
        }
    }
    acc
}

/// `n·C(Q/n, R/n)` for all type pairs, row-major. The transport polytope
/// with integer marginals has integral vertices, so this is the least
/// `c_n(xⁿ, yⁿ)` over sequences of types `Q` and `R`.
fn type_distances(xs: &[Vec<usize>], ys: &[Vec<usize>], c: &CostMatrix<f64>) -> Result<Vec<f64>> {
    if xs.len().saturating_mul(ys.len()) > MAX_TYPE_PAIRS {
        return Err(Error::Guard(format!(
            "{}×{} type pairs exceed {MAX_TYPE_PAIRS}",
            xs.len(),
            ys.len()
        )));
    }
    Ok(xs
        .par_iter()
        .flat_map_iter(|q| {
            let qf: Vec<f64> = q.iter().map(|v| *v as f64).collect();
            ys.iter().map(move |r| {
                let rf: Vec<f64> = r.iter().map(|v| *v as f64).collect();
                ot_slices(&qf, &rf, c).0
            })
        })
        .collect())
}

/// The `t`-enlargement of an exchangeable set, as a set of `y`-types.
pub fn enlarge_types(a: &TypeSet, t: f64, c: &CostMatrix<f64>) -> Result<TypeSet> {
    check_len("type length vs cost rows", c.rows(), a.k)?;
    let ys = TypeSet::all(a.n, c.cols())?;
    if a.types.is_empty() {
        return TypeSet::new(a.n, c.cols(), Vec::new());
    }
    let d = type_distances(&a.types, &ys.types, c)?;
    let thr = t + ENLARGE_SLACK;
    let m = ys.types.len();
    let kept = (0..m)
        .filter(|&r| (0..a.types.len()).any(|q| d[q * m + r] <= thr))
        .map(|r| ys.types[r].clone())
        .collect();
    TypeSet::new(a.n, c.cols(), kept)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExchangeableGamma {
    /// Upper bound on `Γ⁽ⁿ⁾(a, t)`.
    pub value: f64,
    pub log_value: f64,
    /// `ln P_Y^⊗n((Aᵗ)^c)`.
    pub log_one_minus: f64,
    pub witness: TypeSet,
    pub family: String,
}

struct Search<'a> {
    lx: &'a [f64],
    ly: &'a [f64],
    d: &'a [f64],
    m: usize,
    thr: f64,
    log_a: f64,
}

impl Search<'_> {
    /// Shortest feasible prefix of `order`.
    fn prefix(&self, order: &[usize]) -> Option<Vec<usize>> {
        let mut acc = f64::NEG_INFINITY;
        for (i, &q) in order.iter().enumerate() {
            acc = log_add(acc, self.lx[q]);
            if acc >= self.log_a {
                return Some(order[..=i].to_vec());
            }
        }
        None
    }

    /// `(ln P_Y(Aᵗ), ln P_Y((Aᵗ)^c))`.
    fn eval(&self, set: &[usize]) -> (f64, f64) {
        let (mut inside, mut outside) = (Vec::new(), Vec::new());
        for r in 0..self.m {
            if set.iter().any(|&q| self.d[q * self.m + r] <= self.thr) {
                inside.push(self.ly[r]);
            } else {
                outside.push(self.ly[r]);
            }
        }
        (lse(&inside), lse(&outside))
    }

    /// Adds the type with the least new `y`-mass per unit of `x`-mass.
    fn greedy(&self) -> Option<Vec<usize>> {
        let px: Vec<f64> = self.lx.iter().map(|l| l.exp()).collect();
        let py: Vec<f64> = self.ly.iter().map(|l| l.exp()).collect();
        let mut covered = vec![false; self.m];
        let mut chosen = vec![false; px.len()];
        let mut set = Vec::new();
        let mut acc = f64::NEG_INFINITY;
        while acc < self.log_a {
            let mut best: Option<(f64, usize)> = None;
            for q in (0..px.len()).filter(|&q| !chosen[q] && px[q] > 0.0) {
                let dy: f64 = (0..self.m)
                    .filter(|&r| !covered[r] && self.d[q * self.m + r] <= self.thr)
                    .map(|r| py[r])
                    .sum();
                let ratio = dy / px[q];
                if best.is_none_or(|(b, _)| ratio < b) {
                    best = Some((ratio, q));
                }
            }
            let (_, q) = best?;
            chosen[q] = true;
            set.push(q);
            acc = log_add(acc, self.lx[q]);
            for r in 0..self.m {
                covered[r] |= self.d[q * self.m + r] <= self.thr;
            }
        }
        Some(set)
    }
}

fn log_add(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if lo == f64::NEG_INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

fn lse(v: &[f64]) -> f64 {
    log_sum_exp_weighted(&vec![1.0; v.len()], v)
}

fn kl_to(q: &[usize], n: usize, center: &[f64]) -> f64 {
    q.iter()
        .zip(center)
        .filter(|(c, _)| **c > 0)
        .map(|(c, m)| {
            let f = *c as f64 / n as f64;
            f * (f / m).ln()
        })
        .sum()
}

/// Upper bound on `Γ⁽ⁿ⁾(a, t)` over exchangeable sets: divergence balls
/// around smoothed types, cost balls around `y`-types, the most probable
/// types first, and a greedy mass/enlargement trade.
pub fn gamma_exchangeable(
    n: usize,
    a: f64,
    t: f64,
    p_x: &Distribution<f64>,
    p_y: &Distribution<f64>,
    c: &CostMatrix<f64>,
) -> Result<ExchangeableGamma> {
    check_len("P_X vs cost rows", c.rows(), p_x.len())?;
    check_len("P_Y vs cost cols", c.cols(), p_y.len())?;
    if !(0.0..=1.0).contains(&a) || t.is_nan() || n == 0 {
        return Err(Error::Domain(format!("(n, a, t) = ({n}, {a}, {t}) out of range")));
    }
    let xs = TypeSet::all(n, p_x.len())?;
    let ys = TypeSet::all(n, p_y.len())?;
    if a == 0.0 {
        return Ok(ExchangeableGamma {
            value: 0.0,
            log_value: f64::NEG_INFINITY,
            log_one_minus: 0.0,
            witness: TypeSet::new(n, p_x.len(), Vec::new())?,
            family: "empty".into(),
        });
    }
    let lf = ln_factorials(n);
    let lx: Vec<f64> = xs.types.iter().map(|q| log_type_mass(q, p_x.mass(), &lf)).collect();
    let ly: Vec<f64> = ys.types.iter().map(|r| log_type_mass(r, p_y.mass(), &lf)).collect();
    let d = type_distances(&xs.types, &ys.types, c)?;
    let (tx, ty) = (xs.types.len(), ys.types.len());
    let s = Search {
        lx: &lx,
        ly: &ly,
        d: &d,
        m: ty,
        thr: t + ENLARGE_SLACK,
        log_a: a.ln() - 1e-12,
    };
    let by_mass = |u: &usize, v: &usize| lx[*v].total_cmp(&lx[*u]).then(u.cmp(v));

    let mut orders: Vec<(String, Vec<usize>)> = Vec::new();
    let mut mass: Vec<usize> = (0..tx).collect();
    mass.sort_by(by_mass);
    orders.push(("mass".into(), mass));
    let centers = (FAMILY_BUDGET / (tx * ty).max(1)).clamp(1, tx.max(ty));
    let stride_x = tx.div_ceil(centers).max(1);
    let stride_y = ty.div_ceil(centers).max(1);
    let kx = p_x.len() as f64;
    for q0 in xs.types.iter().step_by(stride_x) {
        let center: Vec<f64> = q0.iter().map(|v| (*v as f64 + 0.5) / (n as f64 + 0.5 * kx)).collect();
        let key: Vec<f64> = xs.types.iter().map(|q| kl_to(q, n, &center)).collect();
        let mut o: Vec<usize> = (0..tx).collect();
        o.sort_by(|u, v| key[*u].total_cmp(&key[*v]).then(by_mass(u, v)));
        orders.push((format!("divergence-ball{q0:?}"), o));
    }
    for (r0, r) in ys.types.iter().enumerate().step_by(stride_y) {
        let mut o: Vec<usize> = (0..tx).collect();
        o.sort_by(|u, v| d[*u * ty + r0].total_cmp(&d[*v * ty + r0]).then(by_mass(u, v)));
        orders.push((format!("cost-ball{r:?}"), o));
    }

    let mut cands: Vec<(String, Vec<usize>)> = orders
        .par_iter()
        .filter_map(|(name, o)| s.prefix(o).map(|p| (name.clone(), p)))
        .collect();
    if tx.saturating_mul(tx).saturating_mul(ty) <= FAMILY_BUDGET {
        if let Some(g) = s.greedy() {
            cands.push(("greedy".into(), g));
        }
    }
    let evals: Vec<(f64, f64)> = cands.par_iter().map(|(_, set)| s.eval(set)).collect();
    let best = (0..cands.len())
        .min_by(|&i, &j| {
            evals[j].1.total_cmp(&evals[i].1).then(evals[i].0.total_cmp(&evals[j].0)).then(i.cmp(&j))
        })
        .ok_or_else(|| Error::Domain(format!("no exchangeable set reaches mass {a}")))?;
    let (log_value, log_one_minus) = evals[best];
    let types = cands[best].1.iter().map(|&q| xs.types[q].clone()).collect();
    Ok(ExchangeableGamma {
        value: log_value.exp().min(1.0),
        log_value,
        log_one_minus,
        witness: TypeSet::new(n, p_x.len(), types)?,
        family: cands[best].0.clone(),
    })
}
