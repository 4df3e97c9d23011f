use crate::error::{Error, Result};
use crate::exponents::Method;
use crate::ext::ExtReal;

/// Exponent values on an `α × τ` grid, row-major in `α`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExponentCurve {
    alpha_grid: Vec<f64>,
    tau_grid: Vec<f64>,
    values: Vec<ExtReal<f64>>,
    methods: Vec<Method>,
}

fn strictly_increasing(name: &str, g: &[f64]) -> Result<()> {
    if g.is_empty() {
        return Err(Error::Domain(format!("{name} grid is empty")));
    }
    if g.iter().any(|x| !x.is_finite()) {
        return Err(Error::Domain(format!("{name} grid has a non-finite entry")));
    }
    if g.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Domain(format!("{name} grid is not strictly increasing")));
    }
    Ok(())
}

impl ExponentCurve {
    pub fn new(
        alpha_grid: Vec<f64>,
        tau_grid: Vec<f64>,
        values: Vec<ExtReal<f64>>,
        methods: Vec<Method>,
    ) -> Result<Self> {
        strictly_increasing("alpha", &alpha_grid)?;
        strictly_increasing("tau", &tau_grid)?;
        let cells = alpha_grid.len() * tau_grid.len();
        if values.len() != cells || methods.len() != cells {
            return Err(Error::Dimension {
                what: "curve cells",
                expected: cells,
                got: values.len().min(methods.len()),
            });
        }
        for (v, m) in values.iter().zip(&methods) {
            let empty = matches!(m, Method::Empty | Method::Dom);
            if empty && v.is_finite() {
                return Err(Error::Domain(format!("finite value {v} tagged {m}")));
            }
        }
        Ok(Self {
            alpha_grid,
            tau_grid,
            values,
            methods,
        })
    }

    /// A one-row curve over `τ` at a single `α`.
    pub fn tau_row(alpha: f64, tau_grid: Vec<f64>, values: Vec<ExtReal<f64>>, methods: Vec<Method>) -> Result<Self> {
        Self::new(vec![alpha], tau_grid, values, methods)
    }

    pub fn alpha_grid(&self) -> &[f64] {
        &self.alpha_grid
    }

    pub fn tau_grid(&self) -> &[f64] {
        &self.tau_grid
    }

    pub fn values(&self) -> &[ExtReal<f64>] {
        &self.values
    }

    pub fn methods(&self) -> &[Method] {
        &self.methods
    }

    pub fn get(&self, i: usize, j: usize) -> ExtReal<f64> {
        self.values[i * self.tau_grid.len() + j]
    }

    pub fn method(&self, i: usize, j: usize) -> Method {
        self.methods[i * self.tau_grid.len() + j]
    }

    /// `(α, τ, value, method)` in grid order.
    pub fn cells(&self) -> impl Iterator<Item = (f64, f64, ExtReal<f64>, Method)> + '_ {
        let nt = self.tau_grid.len();
        self.values.iter().zip(&self.methods).enumerate().map(move |(k, (v, m))| {
            (self.alpha_grid[k / nt], self.tau_grid[k % nt], *v, *m)
        })
    }

    /// The `(τ, value)` samples of row `i`.
    pub fn row_samples(&self, i: usize) -> Vec<(f64, ExtReal<f64>)> {
        self.tau_grid
            .iter()
            .enumerate()
            .map(|(j, &t)| (t, self.get(i, j)))
            .collect()
    }
}
