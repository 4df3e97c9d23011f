//! Vertex enumeration for the Kantorovich dual polytope.
//!
//! Modulo the shift `(f + s, g − s)`, a vertex of `{f_i + g_j ≤ c_ij}` has a
//! connected tight graph. Growing that graph one node at a time forces each
//! new potential to the c-transform of the nodes already placed, so a DFS
//! over insertion orders (with memoized partial states) reaches every
//! vertex exactly.

use std::collections::HashSet;

use crate::ot::{CostMatrix, DualPotentials};

fn key(x: f64) -> i64 {
    (x * 1e9).round() as i64
}

/// All dual vertices normalized by `f_0 = 0`, or `None` if more than
/// `budget` partial states would have to be visited.
pub fn dual_vertices(c: &CostMatrix<f64>, budget: usize) -> Option<Vec<DualPotentials<f64>>> {
    let (m, n) = (c.rows(), c.cols());
    let k = m + n;
    if k > 64 {
        return None;
    }
    let mut vals = vec![0.0; k];
    let mut seen_states: HashSet<(u64, Vec<i64>)> = HashSet::new();
    let mut found: HashSet<Vec<i64>> = HashSet::new();
    let mut out = Vec::new();
    let mut visits = 0usize;

    #[allow(clippy::too_many_arguments)]
    fn rec(
        c: &CostMatrix<f64>,
        m: usize,
        k: usize,
        mask: u64,
        vals: &mut [f64],
        seen_states: &mut HashSet<(u64, Vec<i64>)>,
        found: &mut HashSet<Vec<i64>>,
        out: &mut Vec<DualPotentials<f64>>,
        visits: &mut usize,
        budget: usize,
    ) -> bool {
        *visits += 1;
        if *visits > budget {
            return false;
        }
        let full = if k == 64 { u64::MAX } else { (1u64 << k) - 1 };
        if mask == full {
            let sig: Vec<i64> = vals.iter().map(|&x| key(x)).collect();
            if found.insert(sig) {
                out.push(DualPotentials {
                    f: vals[..m].to_vec(),
                    g: vals[m..].to_vec(),
                });
            }
            return true;
        }
        let sig: Vec<i64> = (0..k)
            .filter(|&i| mask >> i & 1 == 1)
            .map(|i| key(vals[i]))
            .collect();
        if !seen_states.insert((mask, sig)) {
            return true;
        }
        for node in 0..k {
            if mask >> node & 1 == 1 {
                continue;
            }
            // Forced value: c-transform against the placed opposite side.
            let mut best = f64::INFINITY;
            if node < m {
                for j in 0..k - m {
                    if mask >> (m + j) & 1 == 1 {
                        best = best.min(c.get(node, j) - vals[m + j]);
                    }
                }
            } else {
                for i in 0..m {
                    if mask >> i & 1 == 1 {
                        best = best.min(c.get(i, node - m) - vals[i]);
                    }
                }
            }
            if !best.is_finite() {
                continue;
            }
            vals[node] = best;
            if !rec(c, m, k, mask | 1 << node, vals, seen_states, found, out, visits, budget) {
                return false;
            }
        }
        true
    }

    let ok = rec(
        c,
        m,
        k,
        1,
        &mut vals,
        &mut seen_states,
        &mut found,
        &mut out,
        &mut visits,
        budget,
    );
    ok.then_some(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hamming_2x2_vertices() {
        let v = dual_vertices(&CostMatrix::hamming(2), 10_000).unwrap();
        // f = (0, f1), g = (g0, g1) with tight spanning trees.
        for p in &v {
            for i in 0..2 {
                for j in 0..2 {
                    assert!(p.f[i] + p.g[j] <= CostMatrix::<f64>::hamming(2).get(i, j) + 1e-12);
                }
            }
        }
        let mut sigs: Vec<_> = v.iter().map(|p| (p.f[1], p.g[0], p.g[1])).collect();
        sigs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        // (0, 0, 0) has a disconnected tight graph, so it is not a vertex.
        assert_eq!(sigs, vec![(-1.0, 0.0, 1.0), (1.0, 0.0, -1.0)]);
    }

    #[test]
    fn vertices_attain_ot_values() {
        use crate::ot::transport_simplex;
        let c = CostMatrix::new(vec![
            vec![0.0, 2.0, 1.0],
            vec![1.5, 0.0, 3.0],
            vec![0.5, 1.0, 0.0],
        ])
        .unwrap();
        let v = dual_vertices(&c, 1_000_000).unwrap();
        let p = [0.2, 0.5, 0.3];
        let q = [0.6, 0.1, 0.3];
        let best = v
            .iter()
            .map(|d| {
                d.f.iter().zip(&p).map(|(a, b)| a * b).sum::<f64>()
                    + d.g.iter().zip(&q).map(|(a, b)| a * b).sum::<f64>()
            })
            .fold(f64::MIN, f64::max);
        let s = transport_simplex(&p, &q, &c).unwrap();
        assert!((best - s.value).abs() < 1e-12);
    }

    #[test]
    fn budget_exhaustion() {
        assert!(dual_vertices(&CostMatrix::hamming(6), 100).is_none());
    }
}
