use crate::error::{Error, Result};
use crate::scalar::Field;

/// A nonnegative `|X| × |Y|` cost table, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix<T> {
    rows: usize,
    cols: usize,
    entries: Vec<T>,
    metric: bool,
}

impl<T: Field> CostMatrix<T> {
    pub fn new(rows: Vec<Vec<T>>) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        if r == 0 || c == 0 {
            return Err(Error::InvalidCost("cost matrix is empty".into()));
        }
        let mut entries = Vec::with_capacity(r * c);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != c {
                return Err(Error::InvalidCost(format!(
                    "row {i} has {} entries, expected {c}",
                    row.len()
                )));
            }
            for (j, v) in row.into_iter().enumerate() {
                if !v.is_finite_value() || v < T::zero() {
                    return Err(Error::InvalidCost(format!(
                        "entry ({i},{j}) = {v:?} is not a nonnegative finite number"
                    )));
                }
                entries.push(v);
            }
        }
        Ok(CostMatrix {
            rows: r,
            cols: c,
            entries,
            metric: false,
        })
    }

    /// `c(x, y) = 1{x ≠ y}` on `k` symbols.
    pub fn hamming(k: usize) -> Self {
        let entries = (0..k * k)
            .map(|n| if n / k == n % k { T::zero() } else { T::one() })
            .collect();
        CostMatrix {
            rows: k,
            cols: k,
            entries,
            metric: true,
        }
    }

    /// Validates and records the metric property: square, zero diagonal,
    /// symmetric and satisfying the triangle inequality (to `1e-12` for
    /// floats, exactly for rationals).
    pub fn into_metric(mut self) -> Result<Self> {
        let k = self.rows;
        if self.cols != k {
            return Err(Error::InvalidCost(format!(
                "metric cost must be square, got {}×{}",
                self.rows, self.cols
            )));
        }
        let slack = T::metric_tol();
        for i in 0..k {
            if self.get(i, i) > slack {
                return Err(Error::InvalidCost(format!("metric diagonal ({i},{i}) is nonzero")));
            }
            for j in 0..k {
                if (self.get(i, j) - self.get(j, i)).abs() > slack {
                    return Err(Error::InvalidCost(format!(
                        "metric cost is not symmetric at ({i},{j})"
                    )));
                }
                for m in 0..k {
                    if self.get(i, j) > self.get(i, m) + self.get(m, j) + slack {
                        return Err(Error::InvalidCost(format!(
                            "triangle inequality fails for ({i},{m},{j})"
                        )));
                    }
                }
            }
        }
        self.metric = true;
        Ok(self)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_metric(&self) -> bool {
        self.metric
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.entries[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.entries[i * self.cols..(i + 1) * self.cols]
    }

    pub fn entries(&self) -> &[T] {
        &self.entries
    }

    pub fn max_entry(&self) -> T {
        self.entries.iter().fold(T::zero(), |a, &b| a.max_of(b))
    }

    /// Entrywise `s · c` for `s ≥ 0`.
    pub fn scaled(&self, s: T) -> Result<Self> {
        if s < T::zero() {
            return Err(Error::InvalidCost("negative scale".into()));
        }
        Ok(CostMatrix {
            entries: self.entries.iter().map(|&v| v * s).collect(),
            ..self.clone()
        })
    }

    pub fn transpose(&self) -> Self {
        let mut entries = Vec::with_capacity(self.entries.len());
        for j in 0..self.cols {
            for i in 0..self.rows {
                entries.push(self.get(i, j));
            }
        }
        CostMatrix {
            rows: self.cols,
            cols: self.rows,
            entries,
            metric: self.metric,
        }
    }

    pub(crate) fn from_flat(rows: usize, cols: usize, entries: Vec<T>) -> Self {
        debug_assert_eq!(entries.len(), rows * cols);
        CostMatrix {
            rows,
            cols,
            entries,
            metric: false,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::Ratio;

    #[test]
    fn rejects_negative_and_ragged() {
        assert!(CostMatrix::new(vec![vec![0.0, -1.0]]).is_err());
        assert!(CostMatrix::new(vec![vec![0.0, 1.0], vec![1.0]]).is_err());
        assert!(CostMatrix::new(vec![vec![f64::INFINITY]]).is_err());
    }

    #[test]
    fn metric_validation() {
        let ok = CostMatrix::new(vec![vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert!(ok.into_metric().unwrap().is_metric());
        let asym = CostMatrix::new(vec![vec![0.0, 1.0], vec![2.0, 0.0]]).unwrap();
        assert!(asym.into_metric().is_err());
        let tri = CostMatrix::new(vec![
            vec![0.0, 1.0, 3.0],
            vec![1.0, 0.0, 1.0],
            vec![3.0, 1.0, 0.0],
        ])
        .unwrap();
        assert!(tri.into_metric().is_err());
        let r = CostMatrix::<Ratio<i64>>::hamming(3).into_metric().unwrap();
        assert_eq!(r.max_entry(), Ratio::from_integer(1));
    }
}
