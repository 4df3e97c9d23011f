//! The twelve acceptance criteria at their stated tolerances, one line each.
//!
//! Reference numbers used by the criteria are first rebuilt here from
//! independent closed forms.

use std::io::Write;

use blowup::bruteforce::convergence_report;
use blowup_cli::verify::{criteria, run_criterion, L_025, R_025};

/// Maximizes a concave function on `[lo, hi]` by golden-section search.
fn golden_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..200 {
        let (a, b) = (hi - g * (hi - lo), lo + g * (hi - lo));
        if f(a) < f(b) {
            lo = a;
        } else {
            hi = b;
        }
    }
    f(0.5 * (lo + hi))
}

fn binary_kl(p: f64, q: f64) -> f64 {
    let term = |a: f64, b: f64| if a == 0.0 { 0.0 } else { a * (a / b).ln() };
    term(p, q) + term(1.0 - p, 1.0 - q)
}

/// `ln P(Bin(n, 1/2) > k)`, summed in log space from the top.
fn binomial_upper_tail(n: usize, k: usize) -> f64 {
    let mut log_c = 0.0; // ln C(n, n)
    let mut terms = Vec::new();
    for w in (k + 1..=n).rev() {
        terms.push(log_c - n as f64 * std::f64::consts::LN_2);
        // C(n, w − 1) = C(n, w) · w / (n − w + 1)
        log_c += (w as f64 / (n - w + 1) as f64).ln();
    }
    let m = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + terms.iter().map(|t| (t - m).exp()).sum::<f64>().ln()
}

#[test]
fn reference_constants() {
    // r(τ) on {0, 1} with d = 1 and Bern(1/2): sup_λ λτ − ln cosh(λ/2).
    let r = golden_max(|l| l * 0.25 - (l / 2.0).cosh().ln(), 0.0, 20.0);
    assert!((r - R_025).abs() < 1e-12, "{r} vs {R_025}");
    // L(0.25) = min_p d(p ‖ p + 0.25).
    let l = -golden_max(|p| -binary_kl(p, p + 0.25), 0.0, 0.75);
    assert!((l - L_025).abs() < 1e-12, "{l} vs {L_025}");
    assert!(l < r);
    // E₁ at n = 1024 is the rate of a binomial tail beyond n/2 + nτ.
    let e1 = -binomial_upper_tail(1024, 768) / 1024.0;
    let row = &convergence_report(&[1024], 0.25, 0.5, 0.5).unwrap()[0];
    assert!((row.e1.to_float() - e1).abs() < 1e-9, "{:?} vs {e1}", row.e1);
    assert!((row.target.to_float() - R_025).abs() < 1e-9);
}

#[test]
fn acceptance() {
    let mut failed = Vec::new();
    for c in criteria() {
        let r = run_criterion(&c);
        // Straight to the process stderr so the lines survive output capture.
        let _ = writeln!(std::io::stderr(), "acceptance: {}", r.line());
        if !r.pass {
            failed.push(r.label.clone());
        }
    }
    assert!(failed.is_empty(), "failed: {failed:?}");
}
