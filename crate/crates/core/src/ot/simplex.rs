//! Transportation simplex with Bland's rule.
//!
//! The basis is kept as a spanning tree of the bipartite row/column graph.
//! Each pivot recomputes the MODI potentials `u_i + v_j = c_ij` on the
//! tree, enters the first row-major cell with negative reduced cost and
//! leaves the lowest-index cell among the ties of the ratio test, which
//! rules out cycling on the heavily degenerate instances that integer type
//! marginals produce.

use std::collections::VecDeque;

use crate::error::{check_len, Error, Result};
use crate::ot::CostMatrix;
use crate::scalar::Field;

/// Optimal plan and potentials of one transportation problem.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportSolution<T> {
    /// Row-major `rows × cols` plan.
    pub plan: Vec<T>,
    pub u: Vec<T>,
    pub v: Vec<T>,
    pub value: T,
    pub pivots: usize,
}

/// Solves `min ⟨π, c⟩` over nonnegative `π` with row sums `supply` and
/// column sums `demand`.
///
/// Totals need only agree up to [`Field::balance_tol`]; they need not be
/// one, so integer count vectors can be passed directly. Returned
/// potentials satisfy `u_i + v_j ≤ c_ij` with `u` vanishing at the first
/// positive supply.
pub fn transport_simplex<T: Field>(
    supply: &[T],
    demand: &[T],
    cost: &CostMatrix<T>,
) -> Result<TransportSolution<T>> {
    check_len("supply vs cost rows", cost.rows(), supply.len())?;
    check_len("demand vs cost cols", cost.cols(), demand.len())?;
    let sa = sum_checked(supply, "supply")?;
    let sb = sum_checked(demand, "demand")?;
    let scale = sa.max_of(T::one());
    if (sa - sb).abs() > T::balance_tol() * scale {
        return Err(Error::InvalidDistribution(format!(
            "supply total {:?} differs from demand total {:?}",
            sa, sb
        )));
    }
    if sa <= T::zero() {
        return Err(Error::InvalidDistribution("zero total mass".into()));
    }

    let rows: Vec<usize> = (0..supply.len()).filter(|&i| supply[i] > T::zero()).collect();
    let cols: Vec<usize> = (0..demand.len()).filter(|&j| demand[j] > T::zero()).collect();
    let a: Vec<T> = rows.iter().map(|&i| supply[i]).collect();
    let b: Vec<T> = cols.iter().map(|&j| demand[j]).collect();
    let n = cols.len();
    let c: Vec<T> = rows
        .iter()
        .flat_map(|&i| cols.iter().map(move |&j| (i, j)))
        .map(|(i, j)| cost.get(i, j))
        .collect();

    let reduced = solve_reduced(&a, &b, &c)?;

    // Reinsert zero rows and columns.
    let (rr, cc) = (cost.rows(), cost.cols());
    let mut plan = vec![T::zero(); rr * cc];
    for (ri, &i) in rows.iter().enumerate() {
        for (cj, &j) in cols.iter().enumerate() {
            plan[i * cc + j] = reduced.x[ri * n + cj];
        }
    }
    let mut u: Vec<Option<T>> = vec![None; rr];
    let mut v: Vec<Option<T>> = vec![None; cc];
    for (ri, &i) in rows.iter().enumerate() {
        u[i] = Some(reduced.u[ri]);
    }
    for (cj, &j) in cols.iter().enumerate() {
        v[j] = Some(reduced.v[cj]);
    }
    for j in 0..cc {
        if v[j].is_none() {
            v[j] = rows
                .iter()
                .map(|&i| cost.get(i, j) - u[i].unwrap())
                .reduce(T::min_of);
        }
    }
    let v_full: Vec<T> = v.into_iter().map(|x| x.unwrap()).collect();
    let mut u_full: Vec<T> = Vec::with_capacity(rr);
    for (i, ui) in u.into_iter().enumerate() {
        u_full.push(match ui {
            Some(x) => x,
            None => (0..cc)
                .map(|j| cost.get(i, j) - v_full[j])
                .reduce(T::min_of)
                .unwrap(),
        });
    }
    let mut v_full = v_full;
    let shift = u_full[rows[0]];
    for x in &mut u_full {
        *x = *x - shift;
    }
    for x in &mut v_full {
        *x = *x + shift;
    }
    // Rounding polish: make every constraint hold as computed.
    for j in 0..cc {
        let cap = (0..rr)
            .map(|i| cost.get(i, j) - u_full[i])
            .reduce(T::min_of)
            .unwrap();
        v_full[j] = v_full[j].min_of(cap);
    }

    let value = plan
        .iter()
        .zip(cost.entries())
        .filter(|(x, _)| **x > T::zero())
        .fold(T::zero(), |acc, (x, c)| acc + *x * *c);
    Ok(TransportSolution {
        plan,
        u: u_full,
        v: v_full,
        value,
        pivots: reduced.pivots,
    })
}

fn sum_checked<T: Field>(xs: &[T], what: &str) -> Result<T> {
    let mut s = T::zero();
    for (i, &x) in xs.iter().enumerate() {
        if !x.is_finite_value() || x < T::zero() {
            return Err(Error::InvalidDistribution(format!(
                "{what}[{i}] = {x:?} is not a nonnegative finite number"
            )));
        }
        s = s + x;
    }
    Ok(s)
}

struct Reduced<T> {
    x: Vec<T>,
    u: Vec<T>,
    v: Vec<T>,
    pivots: usize,
}

fn solve_reduced<T: Field>(a: &[T], b: &[T], c: &[T]) -> Result<Reduced<T>> {
    let (m, n) = (a.len(), b.len());
    let cmax = c.iter().fold(T::zero(), |acc, &v| acc.max_of(v));
    let tol = T::pivot_tol() * cmax.max_of(T::one());

    // North-west corner start: exactly m + n − 1 basic cells.
    let mut x = vec![T::zero(); m * n];
    let mut basis: Vec<(usize, usize)> = Vec::with_capacity(m + n - 1);
    let (mut ra, mut rb) = (a.to_vec(), b.to_vec());
    let (mut i, mut j) = (0, 0);
    loop {
        let q = ra[i].min_of(rb[j]);
        let q = if q < T::zero() { T::zero() } else { q };
        x[i * n + j] = q;
        basis.push((i, j));
        ra[i] = ra[i] - q;
        rb[j] = rb[j] - q;
        if i == m - 1 && j == n - 1 {
            break;
        }
        if (ra[i] <= rb[j] && i < m - 1) || j == n - 1 {
            i += 1;
        } else {
            j += 1;
        }
    }
    debug_assert_eq!(basis.len(), m + n - 1);

    let nodes = m + n;
    let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); nodes];
    let mut u = vec![T::zero(); m];
    let mut v = vec![T::zero(); n];
    let mut seen = vec![false; nodes];
    let mut parent: Vec<(usize, usize)> = vec![(usize::MAX, usize::MAX); nodes];
    let mut queue = VecDeque::with_capacity(nodes);
    let max_pivots = 200_000 + 50 * m * n;
    let mut pivots = 0;

    loop {
        for l in adj.iter_mut() {
            l.clear();
        }
        for (k, &(bi, bj)) in basis.iter().enumerate() {
            adj[bi].push((m + bj, k));
            adj[m + bj].push((bi, k));
        }

        // Potentials on the tree, rooted at row 0.
        seen.iter_mut().for_each(|s| *s = false);
        queue.clear();
        queue.push_back(0);
        seen[0] = true;
        u[0] = T::zero();
        while let Some(node) = queue.pop_front() {
            for &(nb, k) in &adj[node] {
                if seen[nb] {
                    continue;
                }
                seen[nb] = true;
                let (bi, bj) = basis[k];
                if nb >= m {
                    v[bj] = c[bi * n + bj] - u[bi];
                } else {
                    u[bi] = c[bi * n + bj] - v[bj];
                }
                queue.push_back(nb);
            }
        }

        // Bland: first improving cell in row-major order.
        let mut entering = None;
        'scan: for ei in 0..m {
            for ej in 0..n {
                let rc = c[ei * n + ej] - u[ei] - v[ej];
                if rc < -tol {
                    entering = Some((ei, ej));
                    break 'scan;
                }
            }
        }
        let Some((ei, ej)) = entering else {
            return Ok(Reduced { x, u, v, pivots });
        };
        pivots += 1;
        if pivots > max_pivots {
            return Err(Error::Guard(format!(
                "transportation simplex exceeded {max_pivots} pivots"
            )));
        }

        // Tree path from row ei to column ej.
        seen.iter_mut().for_each(|s| *s = false);
        queue.clear();
        queue.push_back(ei);
        seen[ei] = true;
        let target = m + ej;
        while let Some(node) = queue.pop_front() {
            if node == target {
                break;
            }
            for &(nb, k) in &adj[node] {
                if !seen[nb] {
                    seen[nb] = true;
                    parent[nb] = (node, k);
                    queue.push_back(nb);
                }
            }
        }
        // Walk back from the column: signs alternate −, +, −, …
        let mut cycle: Vec<(usize, bool)> = Vec::new();
        let mut node = target;
        let mut minus = true;
        while node != ei {
            let (prev, k) = parent[node];
            cycle.push((k, minus));
            minus = !minus;
            node = prev;
        }

        let mut theta: Option<T> = None;
        for &(k, is_minus) in &cycle {
            if is_minus {
                let (bi, bj) = basis[k];
                let val = x[bi * n + bj];
                theta = Some(theta.map_or(val, |t: T| t.min_of(val)));
            }
        }
        let theta = theta.expect("cycle has a minus cell");
        let leaving = cycle
            .iter()
            .filter(|(k, is_minus)| {
                let (bi, bj) = basis[*k];
                *is_minus && x[bi * n + bj] == theta
            })
            .map(|(k, _)| *k)
            .min_by_key(|&k| basis[k].0 * n + basis[k].1)
            .expect("ratio test has a winner");

        for &(k, is_minus) in &cycle {
            let (bi, bj) = basis[k];
            let cell = &mut x[bi * n + bj];
            *cell = if is_minus { *cell - theta } else { *cell + theta };
        }
        x[ei * n + ej] = theta;
        let (li, lj) = basis[leaving];
        x[li * n + lj] = T::zero();
        basis[leaving] = (ei, ej);
    }
}
