//! Piecewise-uniform grids with prescribed breakpoints.

use std::sync::Arc;

use crate::error::{Error, Result};

/// Nodes covering `[breaks[0], breaks[last]]`, uniform within each segment
/// with spacing at most `h`. Every breakpoint is a node.
pub fn piecewise_uniform(breaks: &[f64], h: f64) -> Result<Arc<[f64]>> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidParameter(format!("grid spacing must be positive, got {h}")));
    }
    if breaks.len() < 2 {
        return Err(Error::InvalidParameter("need at least two breakpoints".into()));
    }
    let mut nodes = vec![breaks[0]];
    for (k, w) in breaks.windows(2).enumerate() {
        let (a, b) = (w[0], w[1]);
        if !(b > a) {
            return Err(Error::NonMonotoneGrid(k + 1));
        }
        let n = ((b - a) / h).ceil().max(1.0) as usize;
        let step = (b - a) / n as f64;
        nodes.extend((1..n).map(|j| a + step * j as f64));
        nodes.push(b);
    }
    if nodes.len() < 3 {
        nodes.insert(1, 0.5 * (breaks[0] + breaks[1]));
    }
    Ok(nodes.into())
}

/// Largest ratio of neighbouring cell widths.
pub fn max_spacing_ratio(s: &[f64]) -> f64 {
    s.windows(3)
        .map(|w| {
            let (a, b) = (w[1] - w[0], w[2] - w[1]);
            a.max(b) / a.min(b)
        })
        .fold(1.0, f64::max)
}

/// Index of the node equal to `x` up to `tol`, if any.
pub fn find_node(s: &[f64], x: f64, tol: f64) -> Option<usize> {
    let j = s.partition_point(|&v| v < x);
    [j.checked_sub(1), Some(j)].into_iter().flatten().filter(|&i| i < s.len()).find(|&i| (s[i] - x).abs() <= tol)
}
