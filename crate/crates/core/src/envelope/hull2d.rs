use crate::envelope::ExponentCurve;
use crate::ext::ExtReal;

/// Queryable lower convex envelope of the finite cells of a curve.
#[derive(Debug, Clone, PartialEq)]
pub struct Envelope2d {
    pts: Vec<[f64; 3]>,
}

/// Lower convex envelope over `(α, τ)`; `+∞` cells only shape the domain.
pub fn lce_2d(curve: &ExponentCurve) -> Envelope2d {
    Envelope2d::from_points(
        curve
            .cells()
            .filter_map(|(a, t, v, _)| v.finite().map(|v| [a, t, v]))
            .collect(),
    )
}

type Mat3 = [[f64; 3]; 3];

fn inverse(m: &Mat3) -> Option<Mat3> {
    let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    if det.abs() < 1e-300 {
        return None;
    }
    let mut inv = [[0.0; 3]; 3];
    for (i, row) in inv.iter_mut().enumerate() {
        for (j, x) in row.iter_mut().enumerate() {
            // Cofactor of m[j][i].
            let r: Vec<usize> = (0..3).filter(|&k| k != j).collect();
            let c: Vec<usize> = (0..3).filter(|&k| k != i).collect();
            let minor = m[r[0]][c[0]] * m[r[1]][c[1]] - m[r[0]][c[1]] * m[r[1]][c[0]];
            let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
            *x = sign * minor / det;
        }
    }
    Some(inv)
}

fn mul(m: &Mat3, v: &[f64; 3]) -> [f64; 3] {
    [
        m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
        m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
        m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
    ]
}

impl Envelope2d {
    pub fn from_points(pts: Vec<[f64; 3]>) -> Self {
        Envelope2d { pts }
    }

    pub fn is_empty(&self) -> bool {
        self.pts.is_empty()
    }

    pub fn points(&self) -> &[[f64; 3]] {
        &self.pts
    }

    /// Envelope value; `+∞` outside the convex hull of the finite cells.
    pub fn query(&self, alpha: f64, tau: f64) -> ExtReal<f64> {
        match self.mixture(alpha, tau) {
            Some((v, _)) => ExtReal::Finite(v),
            None => ExtReal::PosInf,
        }
    }

    /// Optimal mixture `(value, [(cell, weight)])`, at most three cells.
    pub fn mixture(&self, alpha: f64, tau: f64) -> Option<(f64, Vec<(usize, f64)>)> {
        let k = self.pts.len();
        if k == 0 || !alpha.is_finite() || !tau.is_finite() {
            return None;
        }
        let b0 = [alpha, tau, 1.0];
        let sign: [f64; 3] = b0.map(|x| if x < 0.0 { -1.0 } else { 1.0 });
        let b = [b0[0] * sign[0], b0[1] * sign[1], b0[2] * sign[2]];
        let col = |j: usize| -> [f64; 3] {
            if j < k {
                let p = self.pts[j];
                [p[0] * sign[0], p[1] * sign[1], sign[2]]
            } else {
                let mut e = [0.0; 3];
                e[j - k] = 1.0;
                e
            }
        };
        let scale = self
            .pts
            .iter()
            .fold(1.0_f64, |s, p| s.max(p[0].abs()).max(p[1].abs()).max(p[2].abs()));
        let tol = 1e-12 * scale;

        let mut basis = [k, k + 1, k + 2];
        let mut is_basic = vec![false; k + 3];
        for &j in &basis {
            is_basic[j] = true;
        }

        let run = |phase: usize, basis: &mut [usize; 3], is_basic: &mut Vec<bool>| -> Option<()> {
            let cost = |j: usize| -> f64 {
                match (phase, j < k) {
                    (1, true) => 0.0,
                    (1, false) => 1.0,
                    (_, true) => self.pts[j][2],
                    (_, false) => 0.0,
                }
            };
            for iter in 0..(50 * (k + 3) + 1000) {
                let bm: Mat3 = {
                    let c = [col(basis[0]), col(basis[1]), col(basis[2])];
                    [
                        [c[0][0], c[1][0], c[2][0]],
                        [c[0][1], c[1][1], c[2][1]],
                        [c[0][2], c[1][2], c[2][2]],
                    ]
                };
                let inv = inverse(&bm)?;
                let xb = mul(&inv, &b);
                let cb = [cost(basis[0]), cost(basis[1]), cost(basis[2])];
                // y^T = c_B^T B^{-1}
                let y = [
                    cb[0] * inv[0][0] + cb[1] * inv[1][0] + cb[2] * inv[2][0],
                    cb[0] * inv[0][1] + cb[1] * inv[1][1] + cb[2] * inv[2][1],
                    cb[0] * inv[0][2] + cb[1] * inv[1][2] + cb[2] * inv[2][2],
                ];
                let bland = iter > 100;
                let mut entering: Option<(usize, f64)> = None;
                let limit = if phase == 1 { k + 3 } else { k };
                for j in 0..limit {
                    if is_basic[j] {
                        continue;
                    }
                    let a = col(j);
                    let rc = cost(j) - (y[0] * a[0] + y[1] * a[1] + y[2] * a[2]);
                    if rc < -tol {
                        if bland {
                            entering = Some((j, rc));
                            break;
                        }
                        if entering.is_none_or(|(_, best)| rc < best) {
                            entering = Some((j, rc));
                        }
                    }
                }
                let Some((q, _)) = entering else {
                    return Some(());
                };
                let d = mul(&inv, &col(q));
                let mut leave: Option<(usize, f64)> = None;
                for r in 0..3 {
                    if d[r] > 1e-13 {
                        let ratio = xb[r].max(0.0) / d[r];
                        let better = match leave {
                            None => true,
                            Some((lr, lv)) => {
                                ratio < lv - 1e-15 || (ratio <= lv + 1e-15 && basis[r] < basis[lr])
                            }
                        };
                        if better {
                            leave = Some((r, ratio));
                        }
                    }
                }
                // Unbounded cannot happen: the weights live in a simplex.
                let (r, _) = leave?;
                is_basic[basis[r]] = false;
                is_basic[q] = true;
                basis[r] = q;
            }
            None
        };

        run(1, &mut basis, &mut is_basic)?;
        let bm = |basis: &[usize; 3]| -> Mat3 {
            let c = [col(basis[0]), col(basis[1]), col(basis[2])];
            [
                [c[0][0], c[1][0], c[2][0]],
                [c[0][1], c[1][1], c[2][1]],
                [c[0][2], c[1][2], c[2][2]],
            ]
        };
        let xb = mul(&inverse(&bm(&basis))?, &b);
        let infeas: f64 = (0..3).filter(|&r| basis[r] >= k).map(|r| xb[r].max(0.0)).sum();
        if infeas > 1e-9 * scale {
            return None;
        }
        // Pivot zero-level artificials out where possible.
        for r in 0..3 {
            if basis[r] < k {
                continue;
            }
            let inv = inverse(&bm(&basis))?;
            if let Some(j) = (0..k).find(|&j| !is_basic[j] && mul(&inv, &col(j))[r].abs() > 1e-9) {
                is_basic[basis[r]] = false;
                is_basic[j] = true;
                basis[r] = j;
            }
        }
        run(2, &mut basis, &mut is_basic)?;
        let xb = mul(&inverse(&bm(&basis))?, &b);
        let mut value = 0.0;
        let mut mix = Vec::new();
        for r in 0..3 {
            if basis[r] < k && xb[r] > 0.0 {
                value += xb[r] * self.pts[basis[r]][2];
                mix.push((basis[r], xb[r]));
            }
        }
        mix.sort_by_key(|m| m.0);
        Some((value, mix))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exponents::Method;
    use rand::{Rng, SeedableRng};

    /// Brute-force minimum over all mixtures of at most three cells.
    fn mixture_oracle(pts: &[[f64; 3]], a: f64, t: f64) -> f64 {
        let mut best = f64::INFINITY;
        let n = pts.len();
        for i in 0..n {
            if (pts[i][0] - a).abs() < 1e-12 && (pts[i][1] - t).abs() < 1e-12 {
                best = best.min(pts[i][2]);
            }
            for j in i + 1..n {
                // Segment i–j.
                let (dx, dy) = (pts[j][0] - pts[i][0], pts[j][1] - pts[i][1]);
                let len2 = dx * dx + dy * dy;
                if len2 > 0.0 {
                    let s = ((a - pts[i][0]) * dx + (t - pts[i][1]) * dy) / len2;
                    let (px, py) = (pts[i][0] + s * dx, pts[i][1] + s * dy);
                    if (-1e-12..=1.0 + 1e-12).contains(&s) && (px - a).hypot(py - t) < 1e-12 {
                        best = best.min(pts[i][2] + s * (pts[j][2] - pts[i][2]));
                    }
                }
                for l in j + 1..n {
                    let m = [
                        [pts[i][0], pts[j][0], pts[l][0]],
                        [pts[i][1], pts[j][1], pts[l][1]],
                        [1.0, 1.0, 1.0],
                    ];
                    if let Some(inv) = inverse(&m) {
                        let w = mul(&inv, &[a, t, 1.0]);
                        if w.iter().all(|&x| x >= -1e-12) {
                            best = best.min(w[0] * pts[i][2] + w[1] * pts[j][2] + w[2] * pts[l][2]);
                        }
                    }
                }
            }
        }
        best
    }

    fn curve(vals: Vec<ExtReal<f64>>, na: usize, nt: usize) -> ExponentCurve {
        let methods = vals
            .iter()
            .map(|v| if v.is_finite() { Method::Grid } else { Method::Empty })
            .collect();
        ExponentCurve::new(
            (0..na).map(|i| i as f64 * 0.25).collect(),
            (0..nt).map(|j| j as f64 * 0.2).collect(),
            vals,
            methods,
        )
        .unwrap()
    }

    #[test]
    fn plane_is_fixed() {
        let vals = (0..25)
            .map(|k| ExtReal::Finite(1.0 + 2.0 * (k / 5) as f64 * 0.25 - 0.5 * (k % 5) as f64 * 0.2))
            .collect();
        let e = lce_2d(&curve(vals, 5, 5));
        for (i, j) in [(0, 0), (2, 3), (4, 4), (1, 2)] {
            let (a, t) = (i as f64 * 0.25, j as f64 * 0.2);
            let v = e.query(a, t).to_float();
            assert!((v - (1.0 + 2.0 * a - 0.5 * t)).abs() < 1e-12);
        }
        let v = e.query(0.3, 0.33).to_float();
        assert!((v - (1.0 + 0.6 - 0.165)).abs() < 1e-12);
        assert!(e.query(1.5, 0.0).is_pos_inf());
    }

    #[test]
    fn single_row_matches_1d() {
        let mut vals = vec![ExtReal::PosInf; 15];
        let row = [0.5, 0.1, 0.4, 0.0, 0.9];
        for (j, v) in row.iter().enumerate() {
            vals[5 + j] = ExtReal::Finite(*v);
        }
        let c = curve(vals, 3, 5);
        let e = lce_2d(&c);
        let e1 = crate::envelope::lce_1d(&c.row_samples(1));
        for j in 0..=16 {
            let t = j as f64 * 0.05;
            let (a, b) = (e.query(0.25, t), e1.eval(t));
            assert_eq!(a.is_finite(), b.is_finite());
            if a.is_finite() {
                assert!((a.to_float() - b.to_float()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn random_grids_match_mixture_oracle() {
        let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..5 {
            let vals: Vec<ExtReal<f64>> = (0..25).map(|_| ExtReal::Finite(r.random::<f64>())).collect();
            let c = curve(vals, 5, 5);
            let e = lce_2d(&c);
            for _ in 0..20 {
                let (a, t) = (r.random::<f64>(), r.random::<f64>() * 0.8);
                let want = mixture_oracle(e.points(), a, t);
                let got = e.query(a, t).to_float();
                assert!((got - want).abs() < 1e-8, "{got} vs {want}");
            }
        }
    }
}
