//! Finite-n sweeps against the envelopes of the single-letter exponents.

use std::time::Instant;

use blowup::bruteforce::{dimension_free_check, strassen_gt, talagrand_sweep};
use blowup::envelope::{lce_1d, lce_2d};
use blowup::exponents::{phi_geq_curve, Problem, SearchConfig};
use blowup::ext::ExtReal;
use blowup::optim::rng;
use blowup::ot::CostMatrix;
use blowup::prob::Distribution;
use rand::Rng;

fn pairs() -> Vec<(Distribution<f64>, Distribution<f64>)> {
    let mut r = rng(2024, 0);
    let mut out = vec![(Distribution::bernoulli(0.5).unwrap(), Distribution::bernoulli(0.5).unwrap())];
    for _ in 0..20 {
        let u = r.random_range(0.05..0.95);
        let v = r.random_range(0.05..0.95);
        out.push((Distribution::bernoulli(u).unwrap(), Distribution::bernoulli(v).unwrap()));
    }
    out
}

fn merged(mut g: Vec<f64>) -> Vec<f64> {
    g.sort_by(f64::total_cmp);
    g.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    g
}

fn uniform(hi: f64, steps: usize) -> Vec<f64> {
    (0..=steps).map(|k| hi * k as f64 / steps as f64).collect()
}

/// Largest `α` that still restricts `Q_X`; beyond it `φ` is constant.
fn alpha_cap(p: &Distribution<f64>) -> f64 {
    p.mass().iter().filter(|m| **m > 0.0).map(|m| -m.ln()).fold(0.0, f64::max)
}

#[test]
fn dimension_free_sweep_binary() {
    let start = Instant::now();
    let h = CostMatrix::hamming(2);
    let cfg = SearchConfig::default();
    let mut violations = 0;
    for (px, py) in pairs() {
        let pr = Problem::new(&px, &py, &h).unwrap();
        let cap = alpha_cap(&px);
        let alphas = merged(uniform(cap, 24));
        let mut taus = uniform(1.0, 24);
        for n in 1..=3 {
            taus.extend((0..=n).map(|t| t as f64 / n as f64));
        }
        let taus = merged(taus);
        let env = lce_2d(&phi_geq_curve(&pr, &alphas, &taus, &cfg).unwrap());
        for n in 1..=3usize {
            let t_grid: Vec<f64> = (0..=n).map(|t| t as f64).collect();
            let rep = dimension_free_check(n, &t_grid, &px, &py, &h, None, 1e-3, |a, tau| Ok(env.query(a.min(cap), tau))).unwrap();
            assert!(!rep.sampled);
            if rep.violations > 0 {
                eprintln!("n={n} {:?}", rep.witness);
            }
            violations += rep.violations;
        }
    }
    assert_eq!(violations, 0);
    eprintln!("dimension-free sweep: {:?}", start.elapsed());
}

#[test]
fn product_form_sweep_binary() {
    let h = CostMatrix::hamming(2);
    let cfg = SearchConfig::default();
    let lambdas: Vec<f64> = (0..=20).map(|k| k as f64 * 0.05).collect();
    let mut worst = f64::INFINITY;
    for (px, py) in pairs() {
        let pr = Problem::new(&px, &py, &h).unwrap();
        let mut taus = uniform(1.0, 48);
        taus.push(1.0 / 3.0);
        taus.push(2.0 / 3.0);
        let taus = merged(taus);
        let envs: Vec<_> = lambdas
            .iter()
            .map(|&l| {
                let s: Vec<(f64, ExtReal<f64>)> = taus.iter().map(|&t| (t, pr.phi_lambda_geq(t, l, &cfg).unwrap().value)).collect();
                lce_1d(&s)
            })
            .collect();
        for n in 1..=3usize {
            let t_grid: Vec<f64> = (0..=n).map(|t| t as f64).collect();
            let rep = talagrand_sweep(n, &lambdas, &t_grid, &px, &py, &h, None, |l, tau| {
                let k = lambdas.iter().position(|x| *x == l).unwrap();
                Ok(envs[k].eval(tau))
            })
            .unwrap();
            if rep.worst_slack < worst {
                worst = rep.worst_slack;
            }
            assert!(rep.worst_slack >= -1e-6, "n={n}: {rep:?}");
        }
    }
    eprintln!("product-form worst slack {worst:e}");
}

#[test]
fn strassen_binary() {
    let h = CostMatrix::hamming(2);
    for (px, py) in pairs() {
        for n in 1..=2 {
            for t in 0..=n {
                let s = strassen_gt(n, t as f64, &px, &py, &h).unwrap();
                assert!(s.gap <= 1e-8, "{s:?}");
            }
        }
    }
}
