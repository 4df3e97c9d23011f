use crate::error::{check_len, Error, Result};
use crate::ot::{transport_simplex, CostMatrix};
use crate::prob::{Distribution, Kernel};
use crate::scalar::Real;

/// A transport plan with its two marginals.
#[derive(Debug, Clone, PartialEq)]
pub struct Coupling<T> {
    rows: usize,
    cols: usize,
    plan: Vec<T>,
    pub row_marginal: Distribution<T>,
    pub col_marginal: Distribution<T>,
}

impl<T: Real> Coupling<T> {
    pub fn get(&self, i: usize, j: usize) -> T {
        self.plan[i * self.cols + j]
    }

    /// Row-major entries.
    pub fn plan(&self) -> &[T] {
        &self.plan
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    /// Largest deviation of the plan's row and column sums from the stored
    /// marginals.
    pub fn marginal_residual(&self) -> T {
        let mut worst = T::zero();
        for i in 0..self.rows {
            let s: T = (0..self.cols).map(|j| self.get(i, j)).sum();
            worst = worst.max((s - self.row_marginal.mass()[i]).abs());
        }
        for j in 0..self.cols {
            let s: T = (0..self.rows).map(|i| self.get(i, j)).sum();
            worst = worst.max((s - self.col_marginal.mass()[j]).abs());
        }
        worst
    }
}

/// Kantorovich potentials with `f_i + g_j ≤ c_ij`.
#[derive(Debug, Clone, PartialEq)]
pub struct DualPotentials<T> {
    pub f: Vec<T>,
    pub g: Vec<T>,
}

impl<T: Real> DualPotentials<T> {
    /// `min_ij c_ij − f_i − g_j`; nonnegative for a feasible pair.
    pub fn feasibility_slack(&self, c: &CostMatrix<T>) -> T {
        let mut worst = T::infinity();
        for (i, fi) in self.f.iter().enumerate() {
            for (j, gj) in self.g.iter().enumerate() {
                worst = worst.min(c.get(i, j) - *fi - *gj);
            }
        }
        worst
    }
}

/// Everything one transportation solve produces.
#[derive(Debug, Clone, PartialEq)]
pub struct OtSolution<T> {
    pub value: T,
    pub coupling: Coupling<T>,
    pub potentials: DualPotentials<T>,
}

impl<T: Real> OtSolution<T> {
    /// `q_x(f) + q_y(g)`.
    pub fn dual_value(&self) -> T {
        let fx: T = self
            .coupling
            .row_marginal
            .mass()
            .iter()
            .zip(&self.potentials.f)
            .map(|(a, b)| *a * *b)
            .sum();
        let gy: T = self
            .coupling
            .col_marginal
            .mass()
            .iter()
            .zip(&self.potentials.g)
            .map(|(a, b)| *a * *b)
            .sum();
        fx + gy
    }
}

fn check_dims<T: Real>(q_x: &Distribution<T>, q_y: &Distribution<T>, c: &CostMatrix<T>) -> Result<()> {
    check_len("row marginal vs cost rows", c.rows(), q_x.len())?;
    check_len("column marginal vs cost cols", c.cols(), q_y.len())
}

/// Primal plan, value and potentials in one solve.
pub fn ot_solve<T: Real>(
    q_x: &Distribution<T>,
    q_y: &Distribution<T>,
    c: &CostMatrix<T>,
) -> Result<OtSolution<T>> {
    check_dims(q_x, q_y, c)?;
    let s = transport_simplex(q_x.mass(), q_y.mass(), c)?;
    Ok(OtSolution {
        value: s.value,
        coupling: Coupling {
            rows: c.rows(),
            cols: c.cols(),
            plan: s.plan,
            row_marginal: q_x.clone(),
            col_marginal: q_y.clone(),
        },
        potentials: DualPotentials { f: s.u, g: s.v },
    })
}

/// `C(q_x, q_y) = min_{π ∈ Π(q_x, q_y)} ⟨π, c⟩` with an optimal vertex plan.
pub fn ot_cost<T: Real>(
    q_x: &Distribution<T>,
    q_y: &Distribution<T>,
    c: &CostMatrix<T>,
) -> Result<(T, Coupling<T>)> {
    let s = ot_solve(q_x, q_y, c)?;
    Ok((s.value, s.coupling))
}

/// Kantorovich dual value `q_x(f) + q_y(g)` and the optimal potentials,
/// normalized so that `f` vanishes at the first atom of `q_x`.
pub fn ot_dual<T: Real>(
    q_x: &Distribution<T>,
    q_y: &Distribution<T>,
    c: &CostMatrix<T>,
) -> Result<(T, DualPotentials<T>)> {
    let s = ot_solve(q_x, q_y, c)?;
    Ok((s.dual_value(), s.potentials))
}

/// `Σ_w w(w) · C(q_x[w], q_y[w])`.
pub fn conditional_ot<T: Real>(
    q_x: &Kernel<T>,
    q_y: &Kernel<T>,
    w: &Distribution<T>,
    c: &CostMatrix<T>,
) -> Result<T> {
    check_len("x-kernel rows", w.len(), q_x.len())?;
    check_len("y-kernel rows", w.len(), q_y.len())?;
    let mut acc = T::zero();
    for (k, &wk) in w.mass().iter().enumerate() {
        if wk > T::zero() {
            acc = acc + wk * ot_cost(q_x.row(k), q_y.row(k), c)?.0;
        }
    }
    Ok(acc)
}

/// `Σ_i c(x_i, y_i)` for symbol-index sequences.
pub fn additive_cost<T: Real>(c: &CostMatrix<T>, x_seq: &[usize], y_seq: &[usize]) -> Result<T> {
    check_len("sequence lengths", x_seq.len(), y_seq.len())?;
    let mut acc = T::zero();
    for (&x, &y) in x_seq.iter().zip(y_seq) {
        if x >= c.rows() || y >= c.cols() {
            return Err(Error::Domain(format!("symbol pair ({x},{y}) outside the cost table")));
        }
        acc = acc + c.get(x, y);
    }
    Ok(acc)
}

/// Value and potentials on raw probability slices; the workhorse of the
/// exponent solvers.
pub(crate) fn ot_slices(p: &[f64], q: &[f64], c: &CostMatrix<f64>) -> (f64, Vec<f64>, Vec<f64>) {
    let s = transport_simplex(p, q, c).expect("validated inputs");
    (s.value, s.u, s.v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prob::tv;
    use proptest::prelude::*;

    fn bern(p: f64) -> Distribution<f64> {
        Distribution::bernoulli(p).unwrap()
    }

    #[test]
    fn examples() {
        let h = CostMatrix::hamming(2);
        let (v, pi) = ot_cost(&bern(0.5), &bern(0.75), &h).unwrap();
        assert!((v - 0.25).abs() < 1e-15);
        assert!(pi.marginal_residual() < 1e-15);
        let (d, pot) = ot_dual(&bern(0.5), &bern(0.75), &h).unwrap();
        assert!((d - 0.25).abs() < 1e-15);
        assert!(pot.feasibility_slack(&h) >= 0.0);
        assert_eq!(pot.f[0], 0.0);

        let (v, pi) = ot_cost(&bern(0.3), &bern(0.3), &h).unwrap();
        assert_eq!(v, 0.0);
        assert_eq!(pi.get(0, 1) + pi.get(1, 0), 0.0);

        let c = CostMatrix::new(vec![vec![0.0, 3.0], vec![2.0, 0.0]]).unwrap();
        assert_eq!(ot_cost(&bern(0.0), &bern(1.0), &c).unwrap().0, 3.0);
    }

    #[test]
    fn conditional_and_additive() {
        let h = CostMatrix::hamming(2);
        let kx = Kernel::new(vec![bern(0.5), bern(0.5)]).unwrap();
        let ky = Kernel::new(vec![bern(0.75), bern(0.0)]).unwrap();
        let w = Distribution::uniform(2);
        let v = conditional_ot(&kx, &ky, &w, &h).unwrap();
        assert!((v - (0.25 + 0.5) / 2.0).abs() < 1e-15);
        assert_eq!(additive_cost(&h, &[0, 0], &[1, 1]).unwrap(), 2.0);
        assert_eq!(additive_cost::<f64>(&h, &[], &[]).unwrap(), 0.0);
        assert!(additive_cost(&h, &[0], &[]).is_err());
    }

    fn simplex(k: usize) -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(0.0..1.0_f64, k).prop_filter_map("positive", |v| {
            let s: f64 = v.iter().sum();
            (s > 1e-3).then(|| v.iter().map(|x| x / s).collect())
        })
    }

    proptest! {
        #[test]
        fn duality_and_feasibility(
            (p, q, c) in (1usize..=5, 1usize..=5).prop_flat_map(|(m, n)| (
                simplex(m), simplex(n),
                proptest::collection::vec(proptest::collection::vec(0.0..5.0_f64, n), m)))
        ) {
            let px = Distribution::from_mass(p).unwrap();
            let qy = Distribution::from_mass(q).unwrap();
            let c = CostMatrix::new(c).unwrap();
            let s = ot_solve(&px, &qy, &c).unwrap();
            prop_assert!((s.value - s.dual_value()).abs() <= 1e-8);
            prop_assert!(s.coupling.marginal_residual() <= 1e-10);
            prop_assert!(s.potentials.feasibility_slack(&c) >= -1e-11);
            let s2 = ot_solve(&px, &qy, &c.scaled(2.5).unwrap()).unwrap();
            prop_assert!((s2.value - 2.5 * s.value).abs() <= 1e-10);
        }

        #[test]
        fn hamming_is_tv((p, q) in (1usize..=6).prop_flat_map(|k| (simplex(k), simplex(k)))) {
            let px = Distribution::from_mass(p).unwrap();
            let qy = Distribution::from_mass(q).unwrap();
            let h = CostMatrix::hamming(px.len());
            let v = ot_cost(&px, &qy, &h).unwrap().0;
            prop_assert!((v - tv(&px, &qy).unwrap()).abs() <= 1e-10);
        }
    }
}
