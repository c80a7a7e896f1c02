//! Fixtures shared by the benchmarks.

use cbflow::cb::{build_cb_profile, solve_junctions};
use cbflow::{CbGridSpec, CbParams, RadialProfile};

/// CB parameters and initial profile at the default grid spacing.
pub fn cb_fixture(r_c: f64) -> (CbParams, RadialProfile) {
    let p = solve_junctions(r_c, 1.0 / (8.0 * r_c)).expect("junctions");
    let profile = build_cb_profile(&p, &CbGridSpec::default()).expect("profile");
    (p, profile)
}

/// Diagonally dominant tridiagonal system of size `n`.
pub fn tridiagonal(n: usize) -> (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>) {
    let lower = (0..n).map(|i| if i == 0 { 0.0 } else { -1.0 }).collect();
    let upper = (0..n).map(|i| if i + 1 == n { 0.0 } else { -1.0 }).collect();
    let diag = (0..n).map(|i| 2.5 + (i % 7) as f64 * 0.1).collect();
    let rhs = (0..n).map(|i| (i as f64 * 0.01).sin()).collect();
    (lower, diag, upper, rhs)
}
