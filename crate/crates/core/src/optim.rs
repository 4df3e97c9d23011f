//! Small one-dimensional search routines shared by the solvers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::scalar::Real;

/// Golden-section minimization of a unimodal function on `[lo, hi]`.
/// Returns the best abscissa seen and its value.
pub fn golden_min<T: Real>(
    mut f: impl FnMut(T) -> T,
    mut lo: T,
    mut hi: T,
    xtol: T,
    max_iter: usize,
) -> (T, T) {
    let inv_phi = T::lit(0.618_033_988_749_894_9);
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..max_iter {
        if (hi - lo).abs() <= xtol {
            break;
        }
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Golden-section minimization preceded by a coarse scan of `grid` points,
/// which makes it robust to mild non-unimodality and to minima near the
/// ends of a wide bracket.
pub fn scan_golden_min<T: Real>(
    mut f: impl FnMut(T) -> T,
    lo: T,
    hi: T,
    grid: usize,
    xtol: T,
    max_iter: usize,
) -> (T, T) {
    let grid = grid.max(2);
    let step = (hi - lo) / T::lit((grid - 1) as f64);
    let mut best = (lo, f(lo));
    let mut best_k = 0;
    for k in 1..grid {
        let x = lo + step * T::lit(k as f64);
        let v = f(x);
        if v < best.1 {
            best = (x, v);
            best_k = k;
        }
    }
    let a = lo + step * T::lit(best_k.saturating_sub(1) as f64);
    let b = (lo + step * T::lit((best_k + 1).min(grid - 1) as f64)).min(hi);
    let refined = golden_min(&mut f, a, b, xtol, max_iter);
    if refined.1 < best.1 {
        refined
    } else {
        best
    }
}

/// Finds `x ≥ lo` with `g(x) ≈ target` for nondecreasing `g`, returning a
/// point on the upper side (`g(x) ≥ target`).
///
/// `g` returns its value and derivative; Newton steps are taken when they
/// stay inside the bracket, bisection otherwise. The bracket is grown from
/// `[lo, lo + 1]` by doubling up to `max_hi`. Returns `None` if even
/// `max_hi` does not reach the target.
pub fn increasing_root<T: Real>(
    mut g: impl FnMut(T) -> (T, T),
    target: T,
    lo: T,
    max_hi: T,
    ftol: T,
    max_iter: usize,
) -> Option<T> {
    let mut a = lo;
    let mut b = lo + T::one();
    let mut gb = g(b);
    while gb.0 < target {
        a = b;
        if b >= max_hi {
            return None;
        }
        b = (b * T::lit(2.0)).min(max_hi);
        gb = g(b);
    }
    if gb.0 - target <= ftol {
        return Some(b);
    }
    let mut x = b;
    let mut gx = gb;
    for _ in 0..max_iter {
        let newton = if gx.1 > T::zero() {
            x - (gx.0 - target) / gx.1
        } else {
            T::nan()
        };
        let next = if newton > a && newton < b {
            newton
        } else {
            a + (b - a) * T::lit(0.5)
        };
        let gn = g(next);
        if gn.0 >= target {
            b = next;
            gb = gn;
            if gb.0 - target <= ftol {
                break;
            }
        } else {
            a = next;
        }
        x = next;
        gx = gn;
        if b - a <= T::epsilon() * b.abs().max(T::one()) {
            break;
        }
    }
    Some(b)
}

/// All points of the simplex mesh `{v/res : v ∈ ℕ^k, Σv = res}` as integer
/// count vectors, in lexicographic order.
pub fn simplex_grid(k: usize, res: usize) -> Vec<Vec<usize>> {
    fn rec(k: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() + 1 == k {
            cur.push(left);
            out.push(cur.clone());
            cur.pop();
            return;
        }
        for v in 0..=left {
            cur.push(v);
            rec(k, left - v, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if k == 0 {
        return out;
    }
    rec(k, res, &mut Vec::with_capacity(k), &mut out);
    out
}

/// Number of points of [`simplex_grid`], `C(res + k − 1, k − 1)`, saturating.
pub fn simplex_grid_len(k: usize, res: usize) -> u128 {
    if k == 0 {
        return 0;
    }
    let mut acc: u128 = 1;
    for i in 1..k as u128 {
        acc = acc.saturating_mul(res as u128 + i) / i;
    }
    acc
}

/// The deterministic RNG used for every multistart and sampled sweep.
pub fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_finds_parabola_min() {
        let (x, v) = golden_min(|x: f64| (x - 0.3).powi(2) + 1.0, -2.0, 5.0, 1e-12, 200);
        assert!((x - 0.3).abs() < 1e-6);
        assert!((v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn root_of_monotone_function() {
        let r = increasing_root(|x: f64| (x.powi(3), 3.0 * x * x), 27.0, 0.0, 1e6, 1e-13, 200)
            .unwrap();
        assert!((r - 3.0).abs() < 1e-12);
        assert!(r.powi(3) >= 27.0);
        assert!(increasing_root(|x: f64| (x.tanh(), 0.0), 2.0, 0.0, 1e3, 1e-12, 100).is_none());
    }

    #[test]
    fn simplex_grid_counts() {
        let g = simplex_grid(3, 4);
        assert_eq!(g.len() as u128, simplex_grid_len(3, 4));
        assert_eq!(g.len(), 15);
        assert_eq!(g[0], vec![0, 0, 4]);
        assert!(g.iter().all(|v| v.iter().sum::<usize>() == 4));
        assert_eq!(simplex_grid_len(2, 64), 65);
    }
}
