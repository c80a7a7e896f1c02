//! Rotationally symmetric conformal metrics `e^{2u(s)}(ds² + dθ²)` sampled on
//! a nonuniform grid, plus the geometric quantities derived from them.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::Barrier;

/// Relative noise level above which a discrete curvature value is not trusted.
const RESOLUTION_TOL: f64 = 1e-5;
/// Headroom factor on machine epsilon in the curvature noise estimate.
const NOISE_FACTOR: f64 = 64.0;

const CAP_VALUE_TOL: f64 = 1e-8;
const CAP_SLOPE_TOL: f64 = 1e-2;

/// Analytic model of the surface beyond the last grid node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TipCap {
    pub model: Barrier,
    /// Time at which `model` is evaluated.
    pub t: f64,
}

impl TipCap {
    pub fn eval(&self, s: f64) -> Result<f64> {
        self.model.eval(self.t, s)
    }

    pub fn slope(&self, s: f64) -> Result<f64> {
        self.model.ds(self.t, s)
    }

    pub fn tail_area(&self, s: f64) -> Result<f64> {
        self.model.tail_area(self.t, s)
    }

    /// Flat disc cap `u = u_max - (s - s_max)` continuing the grid at `s_max`.
    pub fn flat(s_max: f64, u_max: f64) -> Self {
        TipCap { model: Barrier::Plane { s_e: s_max + u_max, multiplier: 1.0 }, t: 0.0 }
    }
}

/// Conformal factor on a strictly increasing grid, optionally capped.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialProfile {
    s: Arc<[f64]>,
    u: Vec<f64>,
    cap: Option<TipCap>,
}

pub(crate) fn validate_grid(s: &[f64]) -> Result<()> {
    if s.len() < 3 {
        return Err(Error::GridTooSmall(s.len()));
    }
    for i in 1..s.len() {
        if !(s[i] > s[i - 1]) || !s[i].is_finite() {
            return Err(Error::NonMonotoneGrid(i));
        }
    }
    Ok(())
}

impl RadialProfile {
    pub fn new(s: impl Into<Arc<[f64]>>, u: Vec<f64>, cap: Option<TipCap>) -> Result<Self> {
        let s = s.into();
        validate_grid(&s)?;
        if s.len() != u.len() {
            return Err(Error::LengthMismatch { s: s.len(), u: u.len() });
        }
        if let Some(i) = u.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        let p = RadialProfile { s, u, cap };
        if let Some(cap) = &p.cap {
            p.check_cap(cap)?;
        }
        Ok(p)
    }

    /// Samples `f` at the nodes.
    pub fn from_fn(s: impl Into<Arc<[f64]>>, cap: Option<TipCap>, f: impl Fn(f64) -> f64) -> Result<Self> {
        let s = s.into();
        let u = s.iter().map(|&x| f(x)).collect();
        Self::new(s, u, cap)
    }

    fn check_cap(&self, cap: &TipCap) -> Result<()> {
        let n = self.len();
        let s_max = self.s[n - 1];
        let u_cap = cap.eval(s_max)?;
        let u_max = self.u[n - 1];
        if (u_cap - u_max).abs() > CAP_VALUE_TOL * u_max.abs().max(1.0) {
            return Err(Error::CapMismatch(format!("value {u_cap} vs grid {u_max}")));
        }
        let slope_cap = cap.slope(s_max)?;
        let slope_grid = end_slope(&self.s, &self.u);
        if (slope_cap - slope_grid).abs() > CAP_SLOPE_TOL {
            return Err(Error::CapMismatch(format!("slope {slope_cap} vs grid {slope_grid}")));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }

    pub fn s(&self) -> &[f64] {
        &self.s
    }

    pub fn grid(&self) -> &Arc<[f64]> {
        &self.s
    }

    pub fn u(&self) -> &[f64] {
        &self.u
    }

    pub fn cap(&self) -> Option<&TipCap> {
        self.cap.as_ref()
    }

    pub fn s_left(&self) -> f64 {
        self.s[0]
    }

    pub fn s_max(&self) -> f64 {
        self.s[self.len() - 1]
    }

    pub fn into_parts(self) -> (Arc<[f64]>, Vec<f64>, Option<TipCap>) {
        (self.s, self.u, self.cap)
    }

    /// Upper end of the represented domain.
    pub fn domain_end(&self) -> f64 {
        if self.cap.is_some() {
            f64::INFINITY
        } else {
            self.s_max()
        }
    }

    fn out_of_domain(&self, s: f64) -> Error {
        Error::OutOfDomain { s, lo: self.s_left(), hi: self.domain_end() }
    }

    /// `u(s)` by linear interpolation, or the cap beyond `s_max`.
    pub fn u_at(&self, s: f64) -> Result<f64> {
        if s > self.s_max() {
            return match &self.cap {
                Some(cap) if s.is_finite() => cap.eval(s),
                _ => Err(self.out_of_domain(s)),
            };
        }
        interp_linear(&self.s, &self.u, s).ok_or_else(|| self.out_of_domain(s))
    }

    /// `u_s(s)` from the second-order nodal derivative, linearly interpolated.
    pub fn slope_at(&self, s: f64) -> Result<f64> {
        if s > self.s_max() {
            return match &self.cap {
                Some(cap) if s.is_finite() => cap.slope(s),
                _ => Err(self.out_of_domain(s)),
            };
        }
        interp_slope(&self.s, &self.u, s).ok_or_else(|| self.out_of_domain(s))
    }

    /// Index of the largest node with the maximal value of `u` on `s ≥ from`.
    pub fn argmax_from(&self, from: f64) -> Option<usize> {
        let start = self.s.partition_point(|&x| x < from);
        (start..self.len()).fold(None, |best: Option<usize>, i| match best {
            Some(b) if self.u[b] >= self.u[i] => Some(b),
            _ => Some(i),
        })
    }
}

pub(crate) fn locate(s: &[f64], x: f64) -> Option<usize> {
    let n = s.len();
    if !(x >= s[0] && x <= s[n - 1]) {
        return None;
    }
    let j = s.partition_point(|&v| v <= x);
    Some(j.clamp(1, n - 1) - 1)
}

pub(crate) fn interp_linear(s: &[f64], u: &[f64], x: f64) -> Option<f64> {
    let i = locate(s, x)?;
    let theta = (x - s[i]) / (s[i + 1] - s[i]);
    Some(u[i] + theta * (u[i + 1] - u[i]))
}

pub(crate) fn nodal_slope(s: &[f64], u: &[f64], i: usize) -> f64 {
    let n = s.len();
    if i == 0 {
        let (h0, h1) = (s[1] - s[0], s[2] - s[1]);
        // one-sided second-order
        -(2.0 * h0 + h1) / (h0 * (h0 + h1)) * u[0] + (h0 + h1) / (h0 * h1) * u[1] - h0 / (h1 * (h0 + h1)) * u[2]
    } else if i == n - 1 {
        end_slope(s, u)
    } else {
        let (hm, hp) = (s[i] - s[i - 1], s[i + 1] - s[i]);
        (hm * hm * (u[i + 1] - u[i]) + hp * hp * (u[i] - u[i - 1])) / (hm * hp * (hm + hp))
    }
}

fn end_slope(s: &[f64], u: &[f64]) -> f64 {
    let n = s.len();
    let (h1, h0) = (s[n - 2] - s[n - 3], s[n - 1] - s[n - 2]);
    (2.0 * h0 + h1) / (h0 * (h0 + h1)) * u[n - 1] - (h0 + h1) / (h0 * h1) * u[n - 2] + h0 / (h1 * (h0 + h1)) * u[n - 3]
}

pub(crate) fn interp_slope(s: &[f64], u: &[f64], x: f64) -> Option<f64> {
    let i = locate(s, x)?;
    let theta = (x - s[i]) / (s[i + 1] - s[i]);
    let (a, b) = (nodal_slope(s, u, i), nodal_slope(s, u, i + 1));
    Some(a + theta * (b - a))
}

/// `∫_0^h e^{2(u0 + (u1-u0)x/h)} dx`, exact for `u` linear on the cell.
pub(crate) fn cell_integral(u0: f64, u1: f64, h: f64) -> f64 {
    let d = 2.0 * (u1 - u0);
    let phi = if d.abs() < 1e-8 { 1.0 + 0.5 * d } else { d.exp_m1() / d };
    h * (2.0 * u0).exp() * phi
}

/// Second difference on a nonuniform three-point stencil.
pub(crate) fn second_difference(s: &[f64], u: &[f64], i: usize) -> f64 {
    let (hm, hp) = (s[i] - s[i - 1], s[i + 1] - s[i]);
    2.0 * ((u[i + 1] - u[i]) / hp - (u[i] - u[i - 1]) / hm) / (hm + hp)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NodeQuality {
    /// Central stencil, curvature above floating-point noise.
    Interior,
    /// Endpoint: one-sided stencil, first order.
    OneSided,
    /// Floating-point noise in `e^{-2u} u_ss` exceeds the tolerance; the
    /// node lies in the region represented by the tip cap for curvature.
    Unresolved,
}

/// Curvature per grid node.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureField {
    pub k: Vec<f64>,
    pub quality: Vec<NodeQuality>,
}

impl CurvatureField {
    /// Values at interior, resolved nodes within `[lo, hi]`.
    pub fn trusted<'a>(&'a self, s: &'a [f64], lo: f64, hi: f64) -> impl Iterator<Item = (usize, f64)> + 'a {
        self.k
            .iter()
            .zip(&self.quality)
            .enumerate()
            .filter(move |(i, (_, q))| **q == NodeQuality::Interior && s[*i] >= lo && s[*i] <= hi)
            .map(|(i, (k, _))| (i, *k))
    }

    pub fn sup(&self, s: &[f64]) -> Option<(usize, f64)> {
        self.trusted(s, f64::NEG_INFINITY, f64::INFINITY).fold(None, |acc, (i, k)| match acc {
            Some((_, m)) if m >= k => acc,
            _ => Some((i, k)),
        })
    }

    pub fn inf(&self, s: &[f64]) -> Option<(usize, f64)> {
        self.trusted(s, f64::NEG_INFINITY, f64::INFINITY).fold(None, |acc, (i, k)| match acc {
            Some((_, m)) if m <= k => acc,
            _ => Some((i, k)),
        })
    }

    pub fn sup_on(&self, s: &[f64], lo: f64, hi: f64) -> Option<f64> {
        self.trusted(s, lo, hi).map(|(_, k)| k).reduce(f64::max)
    }

    pub fn resolved_end(&self) -> usize {
        self.quality.iter().rposition(|q| *q == NodeQuality::Interior).map_or(0, |i| i + 1)
    }
}

/// Gauss curvature `K = -e^{-2u} u_ss` at every node.
pub fn curvature(profile: &RadialProfile) -> CurvatureField {
    let (s, u) = (profile.s(), profile.u());
    let n = s.len();
    let mut k = vec![0.0; n];
    let mut quality = vec![NodeQuality::Interior; n];
    for i in 1..n - 1 {
        let d2 = second_difference(s, u, i);
        let ki = -(-2.0 * u[i]).exp() * d2;
        let (hm, hp) = (s[i] - s[i - 1], s[i + 1] - s[i]);
        let mag = u[i - 1].abs() / hm + u[i].abs() * (1.0 / hm + 1.0 / hp) + u[i + 1].abs() / hp;
        let noise = (-2.0 * u[i]).exp() * NOISE_FACTOR * f64::EPSILON * 2.0 * mag / (hm + hp);
        k[i] = ki;
        if !(noise <= RESOLUTION_TOL * ki.abs().max(1.0)) || !ki.is_finite() {
            quality[i] = NodeQuality::Unresolved;
        }
    }
    k[0] = k[1];
    quality[0] = NodeQuality::OneSided;
    k[n - 1] = k[n - 2];
    quality[n - 1] = NodeQuality::OneSided;
    CurvatureField { k, quality }
}

/// Area `2π ∫_a^b e^{2u} ds`; `b` may be `+∞` when a cap is present.
pub fn volume(profile: &RadialProfile, a: f64, b: f64) -> Result<f64> {
    if !(a < b) {
        return Err(Error::EmptyRange(a, b));
    }
    let (s, u) = (profile.s(), profile.u());
    if a < profile.s_left() || a.is_nan() {
        return Err(profile.out_of_domain(a));
    }
    if b > profile.domain_end() {
        return Err(profile.out_of_domain(b));
    }
    let s_max = profile.s_max();
    let cap_part = |from: f64| -> Result<f64> {
        let cap = profile.cap().ok_or_else(|| profile.out_of_domain(b))?;
        let tail_to = if b.is_finite() { cap.tail_area(b)? } else { 0.0 };
        Ok(cap.tail_area(from)? - tail_to)
    };
    if a >= s_max {
        return cap_part(a);
    }
    let hi = b.min(s_max);
    let mut total = 2.0 * PI * grid_integral(s, u, a, hi);
    if b > s_max {
        total += cap_part(s_max)?;
    }
    Ok(total)
}

fn grid_integral(s: &[f64], u: &[f64], a: f64, b: f64) -> f64 {
    let ia = locate(s, a).expect("a inside grid");
    let ib = locate(s, b).expect("b inside grid");
    let ua = interp_linear(s, u, a).unwrap();
    let ub = interp_linear(s, u, b).unwrap();
    if ia == ib {
        return cell_integral(ua, ub, b - a);
    }
    let mut acc = cell_integral(ua, u[ia + 1], s[ia + 1] - a);
    for j in ia + 1..ib {
        acc += cell_integral(u[j], u[j + 1], s[j + 1] - s[j]);
    }
    acc + cell_integral(u[ib], ub, b - s[ib])
}

/// Length `2π e^{u(s)}` of the coordinate circle at `s`.
pub fn circle_length(profile: &RadialProfile, s: f64) -> Result<f64> {
    Ok(2.0 * PI * profile.u_at(s)?.exp())
}

/// Largest circle length over grid nodes in `[lo, hi]`.
pub fn width(profile: &RadialProfile, lo: f64, hi: f64) -> Result<f64> {
    let s = profile.s();
    let start = s.partition_point(|&x| x < lo);
    let end = s.partition_point(|&x| x <= hi);
    if start >= end {
        return Err(Error::EmptyRange(lo, hi));
    }
    let umax = profile.u()[start..end].iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(2.0 * PI * umax.exp())
}

/// Coordinate ball `{s > coordinate_radius}` around the tip.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeodesicBall {
    pub coordinate_radius: f64,
    pub area: f64,
    pub boundary_length: f64,
}

/// Cumulative areas of `[s_i, ∞)` for every node.
#[derive(Debug, Clone)]
pub struct TailAreas {
    cum: Vec<f64>,
}

impl TailAreas {
    pub fn new(profile: &RadialProfile) -> Result<Self> {
        let (s, u) = (profile.s(), profile.u());
        let n = s.len();
        let mut cum = vec![0.0; n];
        cum[n - 1] = match profile.cap() {
            Some(cap) => cap.tail_area(profile.s_max())?,
            None => 0.0,
        };
        for i in (0..n - 1).rev() {
            cum[i] = cum[i + 1] + 2.0 * PI * cell_integral(u[i], u[i + 1], s[i + 1] - s[i]);
        }
        Ok(TailAreas { cum })
    }

    pub fn at_node(&self, i: usize) -> f64 {
        self.cum[i]
    }

    pub fn total(&self) -> f64 {
        self.cum[0]
    }

    /// Area of `[x, ∞)` for `x` inside the grid.
    pub fn at(&self, s: &[f64], u: &[f64], x: f64) -> Option<f64> {
        let i = locate(s, x)?;
        let ux = interp_linear(s, u, x)?;
        Some(self.cum[i + 1] + 2.0 * PI * cell_integral(ux, u[i + 1], s[i + 1] - x))
    }
}

/// The coordinate ball `{s > radius}`.
pub fn ball_at(profile: &RadialProfile, radius: f64) -> Result<GeodesicBall> {
    let area = volume(profile, radius, profile.domain_end())?;
    Ok(GeodesicBall { coordinate_radius: radius, area, boundary_length: circle_length(profile, radius)? })
}

/// Largest tip-centred coordinate ball with area at most `target`.
pub fn ball_of_area(profile: &RadialProfile, target: f64) -> Result<GeodesicBall> {
    if !(target > 0.0) {
        return Err(Error::InvalidParameter(format!("target area must be positive, got {target}")));
    }
    let tails = TailAreas::new(profile)?;
    if target >= tails.total() {
        return Err(Error::TargetExceedsArea { target, available: tails.total() });
    }
    let (s, u) = (profile.s(), profile.u());
    let n = s.len();
    let radius = if target <= tails.at_node(n - 1) {
        let cap = profile.cap().expect("positive cap area implies a cap");
        let mut lo = profile.s_max();
        let mut step = 1.0;
        while cap.tail_area(lo + step)? > target {
            step *= 2.0;
        }
        let mut hi = lo + step;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if cap.tail_area(mid)? > target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hi
    } else {
        // cum is decreasing; find cell with cum[i] > target >= cum[i+1]
        let i = tails.cum.partition_point(|&c| c > target) - 1;
        let (mut lo, mut hi) = (s[i], s[i + 1]);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if tails.at(s, u, mid).unwrap() > target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hi
    };
    let area = volume(profile, radius, profile.domain_end())?;
    Ok(GeodesicBall { coordinate_radius: radius, area, boundary_length: circle_length(profile, radius)? })
}
