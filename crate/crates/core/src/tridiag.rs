//! Thomas algorithm for tridiagonal systems.

/// Solves `lower[i] x[i-1] + diag[i] x[i] + upper[i] x[i+1] = rhs[i]` in place,
/// leaving the solution in `rhs`. `lower[0]` and `upper[n-1]` are ignored.
///
/// No pivoting: intended for diagonally dominant matrices. `scratch` must
/// have the same length as `diag`.
pub fn solve_in_place(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &mut [f64], scratch: &mut [f64]) {
    let n = diag.len();
    debug_assert!(lower.len() == n && upper.len() == n && rhs.len() == n && scratch.len() == n);
    let mut denom = diag[0];
    scratch[0] = upper[0] / denom;
    rhs[0] /= denom;
    for i in 1..n {
        denom = diag[i] - lower[i] * scratch[i - 1];
        scratch[i] = upper[i] / denom;
        rhs[i] = (rhs[i] - lower[i] * rhs[i - 1]) / denom;
    }
    for i in (0..n - 1).rev() {
        rhs[i] -= scratch[i] * rhs[i + 1];
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn solves_dominant_systems(
            n in 2usize..40,
            seed in proptest::collection::vec(-1.0f64..1.0, 160),
        ) {
            let lower: Vec<f64> = (0..n).map(|i| seed[i]).collect();
            let upper: Vec<f64> = (0..n).map(|i| seed[40 + i]).collect();
            let diag: Vec<f64> = (0..n).map(|i| 2.5 + seed[80 + i]).collect();
            let x: Vec<f64> = (0..n).map(|i| seed[120 + i] * 10.0).collect();
            let mut rhs: Vec<f64> = (0..n)
                .map(|i| {
                    let mut v = diag[i] * x[i];
                    if i > 0 { v += lower[i] * x[i - 1]; }
                    if i + 1 < n { v += upper[i] * x[i + 1]; }
                    v
                })
                .collect();
            let mut scratch = vec![0.0; n];
            solve_in_place(&lower, &diag, &upper, &mut rhs, &mut scratch);
            for i in 0..n {
                prop_assert!((rhs[i] - x[i]).abs() < 1e-10);
            }
        }
    }
}
