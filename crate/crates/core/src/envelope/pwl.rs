use crate::error::{Error, Result};
use crate::ext::ExtReal;

/// Piecewise-linear function through sorted breakpoints, infinite outside
/// `[xs[0], xs[last]]` (`+∞` for lower envelopes, `−∞` for upper ones).
///
/// Repeated abscissae encode jumps.
#[derive(Debug, Clone, PartialEq)]
pub struct Pwl {
    xs: Vec<f64>,
    ys: Vec<f64>,
    outside: ExtReal<f64>,
    /// Fewer than two finite samples went in.
    pub degenerate: bool,
}

impl Pwl {
    /// Linear interpolation through `(x, y)` samples sorted by `x`; points
    /// with equal `x` are kept in order, giving vertical jumps.
    pub fn from_points(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
            return Err(Error::Domain("breakpoints must be finite".into()));
        }
        if points.windows(2).any(|w| w[1].0 < w[0].0) {
            return Err(Error::Domain("breakpoints must be sorted".into()));
        }
        Ok(Pwl {
            degenerate: points.len() < 2,
            xs: points.iter().map(|p| p.0).collect(),
            ys: points.iter().map(|p| p.1).collect(),
            outside: ExtReal::PosInf,
        })
    }

    pub fn breakpoints(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.xs.iter().copied().zip(self.ys.iter().copied())
    }

    /// `[lo, hi]` where the function is finite, if any.
    pub fn domain(&self) -> Option<(f64, f64)> {
        Some((*self.xs.first()?, *self.xs.last()?))
    }

    pub fn eval(&self, x: f64) -> ExtReal<f64> {
        let Some((lo, hi)) = self.domain() else {
            return self.outside;
        };
        if x.is_nan() || x < lo || x > hi {
            return self.outside;
        }
        // First breakpoint ≥ x.
        let k = self.xs.partition_point(|&b| b < x);
        if self.xs[k] == x {
            return ExtReal::Finite(self.ys[k]);
        }
        let (x0, x1, y0, y1) = (self.xs[k - 1], self.xs[k], self.ys[k - 1], self.ys[k]);
        ExtReal::Finite(y0 + (y1 - y0) * (x - x0) / (x1 - x0))
    }
}

fn finite_sorted(samples: &[(f64, ExtReal<f64>)]) -> Vec<(f64, f64)> {
    let mut pts: Vec<(f64, f64)> = samples
        .iter()
        .filter_map(|&(x, y)| y.finite().filter(|_| x.is_finite()).map(|y| (x, y)))
        .collect();
    pts.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.partial_cmp(&b.1).unwrap()));
    // Keep the lowest value per abscissa.
    pts.dedup_by(|b, a| a.0 == b.0);
    pts
}

fn cross(o: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

fn lower_chain(pts: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut hull: Vec<(f64, f64)> = Vec::with_capacity(pts.len());
    for &p in pts {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    hull
}

/// Lower convex envelope of the finite samples. `+∞` samples are dropped
/// and only bound the domain.
pub fn lce_1d(samples: &[(f64, ExtReal<f64>)]) -> Pwl {
    let pts = finite_sorted(samples);
    Pwl {
        degenerate: pts.len() < 2,
        xs: Vec::new(),
        ys: Vec::new(),
        outside: ExtReal::PosInf,
    }
    .with_chain(lower_chain(&pts))
}

/// Upper concave envelope; `−∞` outside the finite samples.
pub fn uce_1d(samples: &[(f64, ExtReal<f64>)]) -> Pwl {
    let neg: Vec<(f64, ExtReal<f64>)> = samples
        .iter()
        .map(|&(x, y)| (x, y.finite().map_or(ExtReal::PosInf, |v| ExtReal::Finite(-v))))
        .collect();
    let pts = finite_sorted(&neg);
    let chain: Vec<(f64, f64)> = lower_chain(&pts).into_iter().map(|(x, y)| (x, -y)).collect();
    Pwl {
        degenerate: pts.len() < 2,
        xs: Vec::new(),
        ys: Vec::new(),
        outside: ExtReal::NegInf,
    }
    .with_chain(chain)
}

impl Pwl {
    fn with_chain(mut self, chain: Vec<(f64, f64)>) -> Self {
        self.xs = chain.iter().map(|p| p.0).collect();
        self.ys = chain.iter().map(|p| p.1).collect();
        self
    }
}

/// `inf { x ≥ 0 in the domain : f(x) ≥ level }` for nondecreasing `f`.
///
/// Past the right end of the domain a lower envelope is `+∞`, so a level
/// that is never reached inside maps to that end. Returns `None` for an
/// empty domain.
pub fn gen_inverse(f: &Pwl, level: f64) -> Option<f64> {
    let (lo, hi) = f.domain()?;
    let lo = lo.max(0.0);
    if f.eval(lo).finite().is_some_and(|v| v >= level) {
        return Some(lo);
    }
    let pts: Vec<(f64, f64)> = f.breakpoints().collect();
    for w in pts.windows(2) {
        let ((x0, y0), (x1, y1)) = (w[0], w[1]);
        if x1 < lo {
            continue;
        }
        if y1 >= level {
            if y0 >= level {
                return Some(x0.max(lo));
            }
            if x1 == x0 {
                return Some(x0.max(lo));
            }
            let x = x0 + (level - y0) * (x1 - x0) / (y1 - y0);
            return Some(x.clamp(x0, x1).max(lo));
        }
    }
    Some(hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fin(xs: &[(f64, f64)]) -> Vec<(f64, ExtReal<f64>)> {
        xs.iter().map(|&(x, y)| (x, ExtReal::Finite(y))).collect()
    }

    /// Pairwise-chord oracle for the lower envelope at a sample abscissa.
    fn chord_min(pts: &[(f64, f64)], x: f64) -> f64 {
        let mut best = f64::INFINITY;
        for a in pts {
            if a.0 == x {
                best = best.min(a.1);
            }
            for b in pts {
                if a.0 < x && x < b.0 {
                    let t = (x - a.0) / (b.0 - a.0);
                    best = best.min(a.1 + t * (b.1 - a.1));
                }
            }
        }
        best
    }

    #[test]
    fn convex_input_is_fixed() {
        let s: Vec<(f64, f64)> = (0..=20)
            .map(|k| {
                let t = 0.02 * k as f64;
                (t, crate::prob::binary_kl(0.5 + t, 0.5).unwrap().to_float())
            })
            .collect();
        let e = lce_1d(&fin(&s));
        for (x, y) in &s {
            assert!((e.eval(*x).to_float() - y).abs() <= 1e-9);
        }
    }

    #[test]
    fn chord_and_zigzag() {
        let e = lce_1d(&fin(&[(0.0, 1.0), (2.0, 3.0)]));
        assert_eq!(e.eval(1.0), ExtReal::Finite(2.0));
        assert_eq!(e.eval(2.5), ExtReal::PosInf);
        let zig = [(0.0, 0.0), (1.0, 2.0), (2.0, 0.5), (3.0, 3.0), (4.0, 1.0)];
        let e = lce_1d(&fin(&zig));
        for (x, _) in zig {
            assert!((e.eval(x).to_float() - chord_min(&zig, x)).abs() < 1e-12);
        }
        let u = uce_1d(&fin(&zig));
        let neg: Vec<(f64, f64)> = zig.iter().map(|&(x, y)| (x, -y)).collect();
        for (x, _) in zig {
            assert!((u.eval(x).to_float() + chord_min(&neg, x)).abs() < 1e-12);
        }
        assert_eq!(u.eval(-1.0), ExtReal::NegInf);
    }

    #[test]
    fn infinite_samples_bound_domain() {
        let s = vec![
            (0.0, ExtReal::Finite(0.0)),
            (0.5, ExtReal::Finite(1.0)),
            (1.0, ExtReal::PosInf),
        ];
        let e = lce_1d(&s);
        assert_eq!(e.domain(), Some((0.0, 0.5)));
        assert!(e.eval(0.75).is_pos_inf());
        assert!(lce_1d(&s[..1]).degenerate);
    }

    #[test]
    fn inverse_examples() {
        let id = Pwl::from_points(vec![(0.0, 0.0), (1.0, 1.0)]).unwrap();
        assert_eq!(gen_inverse(&id, 0.3), Some(0.3));
        let step = Pwl::from_points(vec![(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (2.0, 1.0)]).unwrap();
        assert_eq!(gen_inverse(&step, 0.5), Some(1.0));
        assert_eq!(gen_inverse(&step, 0.0), Some(0.0));
    }

    proptest! {
        #[test]
        fn envelope_laws(ys in proptest::collection::vec(-5.0..5.0_f64, 2..30)) {
            let s: Vec<(f64, f64)> = ys.iter().enumerate().map(|(k, &y)| (k as f64 * 0.1, y)).collect();
            let e = lce_1d(&fin(&s));
            for &(x, y) in &s {
                let v = e.eval(x).to_float();
                prop_assert!(v <= y + 1e-12);
                prop_assert!((v - chord_min(&s, x)).abs() <= 1e-9);
            }
            let again = lce_1d(&s.iter().map(|&(x, _)| (x, e.eval(x))).collect::<Vec<_>>());
            for &(x, _) in &s {
                prop_assert!((again.eval(x).to_float() - e.eval(x).to_float()).abs() <= 1e-10);
            }
            for i in 0..s.len() {
                for j in i + 1..s.len() {
                    let (a, b) = (s[i].0, s[j].0);
                    let mid = e.eval(0.5 * (a + b)).to_float();
                    prop_assert!(mid <= 0.5 * (e.eval(a).to_float() + e.eval(b).to_float()) + 1e-9);
                }
            }
        }
    }
}
