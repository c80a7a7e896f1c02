//! Cylinder-with-bulb surfaces: a flat plane end, a hyperbolic neck, a round
//! cylinder of radius `r_c`, a second hyperbolic neck and a unit bulb cap.

use std::f64::consts::{FRAC_PI_2, LN_2, PI};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{log_cosh, Barrier};
use crate::grid::{find_node, max_spacing_ratio, piecewise_uniform};
use crate::metric::{curvature, volume, NodeQuality, RadialProfile, TipCap};

const JUNCTION_TOL: f64 = 1e-12;
/// Allowed deviation of nodal curvature from its piece constant.
pub const PIECE_TOL: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CbParams {
    pub r_c: f64,
    pub l_c: f64,
    pub s0: f64,
    pub se: f64,
    pub s2: f64,
    pub sb: f64,
}

/// Analytic pieces of the profile, ordered from the plane end to the tip.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Piece {
    Plane,
    Neck,
    Cylinder,
    BulbNeck,
    Sphere,
}

impl Piece {
    pub fn curvature(self) -> f64 {
        match self {
            Piece::Plane | Piece::Cylinder => 0.0,
            Piece::Neck | Piece::BulbNeck => -1.0,
            Piece::Sphere => 0.5,
        }
    }
}

impl CbParams {
    /// Left end of the cylinder.
    pub fn neck(&self) -> f64 {
        -self.l_c / self.r_c
    }

    /// Junction coordinates in increasing order.
    pub fn junctions(&self) -> [f64; 4] {
        [self.s0, self.neck(), 0.0, self.s2]
    }

    /// The unit bulb sphere `u = -log cosh(s - s_b) + ½ log 2`.
    pub fn sphere(&self) -> Barrier {
        Barrier::unit_bulb(self.sb)
    }

    pub fn piece_at(&self, s: f64) -> Piece {
        if s <= self.s0 {
            Piece::Plane
        } else if s < self.neck() {
            Piece::Neck
        } else if s <= 0.0 {
            Piece::Cylinder
        } else if s <= self.s2 {
            Piece::BulbNeck
        } else {
            Piece::Sphere
        }
    }

    pub fn eval_piece(&self, piece: Piece, s: f64) -> f64 {
        let r = self.r_c;
        match piece {
            Piece::Plane => -s + self.se,
            Piece::Neck => r.ln() - (r * s + self.l_c).cos().ln(),
            Piece::Cylinder => r.ln(),
            Piece::BulbNeck => r.ln() - (r * s).cos().ln(),
            Piece::Sphere => -log_cosh(s - self.sb) + 0.5 * LN_2,
        }
    }

    pub fn slope_piece(&self, piece: Piece, s: f64) -> f64 {
        let r = self.r_c;
        match piece {
            Piece::Plane => -1.0,
            Piece::Neck => r * (r * s + self.l_c).tan(),
            Piece::Cylinder => 0.0,
            Piece::BulbNeck => r * (r * s).tan(),
            Piece::Sphere => -(s - self.sb).tanh(),
        }
    }

    /// The conformal factor of the CB surface.
    pub fn u(&self, s: f64) -> f64 {
        self.eval_piece(self.piece_at(s), s)
    }

    pub fn slope(&self, s: f64) -> f64 {
        self.slope_piece(self.piece_at(s), s)
    }

    /// Mismatch in value and slope between the bulb neck and the sphere at `s2`.
    pub fn matching_residuals(&self) -> (f64, f64) {
        let (a, b) = (Piece::BulbNeck, Piece::Sphere);
        (
            self.eval_piece(a, self.s2) - self.eval_piece(b, self.s2),
            self.slope_piece(a, self.s2) - self.slope_piece(b, self.s2),
        )
    }

    /// `r_c tan(r_c s2)`, the slope of the bulb neck at the sphere junction.
    pub fn bulb_slope(&self) -> f64 {
        self.r_c * (self.r_c * self.s2).tan()
    }

    /// Closed-form area of the bulb region `s > 0`.
    pub fn bulb_volume(&self) -> f64 {
        4.0 * PI + 6.0 * PI * self.bulb_slope()
    }

    /// Radius of the flat disc `s ≥ s0` in the plane chart `|z| = e^{-s+s_e}`.
    pub fn disc_radius(&self) -> f64 {
        (-self.s0 + self.se).exp()
    }
}

fn validate_inputs(r_c: f64, l_c: f64) -> Result<()> {
    if !(r_c > 0.0 && r_c < 1.0) {
        return Err(Error::InvalidParameter(format!("r_c must lie in (0, 1), got {r_c}")));
    }
    if !(l_c > 0.0 && l_c.is_finite()) {
        return Err(Error::InvalidParameter(format!("l_c must be positive, got {l_c}")));
    }
    Ok(())
}

/// Junction coordinates making the piecewise profile C¹.
pub fn solve_junctions(r_c: f64, l_c: f64) -> Result<CbParams> {
    validate_inputs(r_c, l_c)?;
    let s0 = -(l_c + (1.0 / r_c).atan()) / r_c;
    let se = s0 + 0.5 * r_c.mul_add(r_c, 1.0).ln();

    // value mismatch at s2 once s_b is chosen to match slopes
    let g = |s2: f64| {
        let a = r_c * (r_c * s2).tan();
        r_c.ln() - (r_c * s2).cos().ln() - 0.5 * (1.0 - a * a).ln() - 0.5 * LN_2
    };
    let upper = (1.0 / r_c).atan() / r_c;
    let (mut lo, mut hi) = (0.0, upper);
    if !(g(lo) < 0.0) {
        return Err(Error::RootFinder(format!("no bracket for s2 at r_c = {r_c}")));
    }
    // g → +∞ at the upper end; step inward until it is finite and positive
    let mut shrink = 1e-12;
    while !(g(hi) > 0.0 && g(hi).is_finite()) {
        hi = upper * (1.0 - shrink);
        shrink *= 2.0;
        if shrink > 0.5 {
            return Err(Error::RootFinder(format!("no bracket for s2 at r_c = {r_c}")));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let s2 = if g(lo).abs() <= g(hi).abs() { lo } else { hi };
    let sb = s2 + (r_c * (r_c * s2).tan()).atanh();
    let p = CbParams { r_c, l_c, s0, se, s2, sb };

    let (dv, ds) = p.matching_residuals();
    if dv.abs() > JUNCTION_TOL || ds.abs() > JUNCTION_TOL {
        return Err(Error::RootFinder(format!("matching residual ({dv:e}, {ds:e}) above tolerance")));
    }
    if !(s2 < upper && s2 > 0.0) {
        return Err(Error::Hypotheses(format!("s2 = {s2} outside (0, {upper})")));
    }
    if !(sb <= 1.75 / r_c) {
        return Err(Error::Hypotheses(format!("s_b = {sb} exceeds 7/(4 r_c)")));
    }
    Ok(p)
}

/// Grid layout for sampling a CB profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CbGridSpec {
    /// Maximum spacing.
    pub h: f64,
    /// Distance of the left end below the plane offset `s_e`.
    pub left_margin: f64,
    /// Distance of the right end beyond the sphere centre `s_b`.
    pub right_margin: f64,
}

impl Default for CbGridSpec {
    fn default() -> Self {
        CbGridSpec { h: 0.04, left_margin: 10.0, right_margin: 12.0 }
    }
}

/// Piecewise-uniform grid with every junction as a node.
pub fn cb_grid(p: &CbParams, spec: &CbGridSpec) -> Result<Arc<[f64]>> {
    if !(spec.left_margin > 0.0 && spec.right_margin > 0.0) {
        return Err(Error::InvalidParameter("grid margins must be positive".into()));
    }
    let s_left = (p.se - spec.left_margin).min(p.s0 - spec.h);
    let s_max = p.sb + spec.right_margin;
    let [a, b, c, d] = p.junctions();
    piecewise_uniform(&[s_left, a, b, c, d, s_max], spec.h)
}

pub fn build_cb_profile(p: &CbParams, spec: &CbGridSpec) -> Result<RadialProfile> {
    build_cb_profile_on(p, cb_grid(p, spec)?)
}

/// Samples the CB profile on a caller-supplied grid containing the junctions.
pub fn build_cb_profile_on(p: &CbParams, grid: Arc<[f64]>) -> Result<RadialProfile> {
    crate::metric::validate_grid(&grid)?;
    for x in p.junctions() {
        let tol = JUNCTION_TOL * x.abs().max(1.0);
        if find_node(&grid, x, tol).is_none() {
            return Err(Error::NotCovered(format!("junction s = {x} is not a grid node")));
        }
    }
    if !(grid[0] < p.s0 && grid[grid.len() - 1] > p.s2) {
        return Err(Error::NotCovered(format!(
            "grid [{}, {}] does not reach past the outer junctions",
            grid[0],
            grid[grid.len() - 1]
        )));
    }
    // evaluate each junction from its left piece so the nodes carry exact values
    let u = grid
        .iter()
        .map(|&x| match p.junctions().iter().position(|&j| (x - j).abs() <= JUNCTION_TOL * j.abs().max(1.0)) {
            Some(0) => p.eval_piece(Piece::Plane, x),
            Some(1) | Some(2) => p.r_c.ln(),
            Some(_) => p.eval_piece(Piece::BulbNeck, x),
            None => p.u(x),
        })
        .collect();
    RadialProfile::new(grid, u, Some(TipCap { model: p.sphere(), t: 0.0 }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CbReport {
    pub k_min: f64,
    pub k_max: f64,
    /// Allowed discretisation slack on the curvature range.
    pub k_slack: f64,
    pub curvature_ok: bool,
    /// Largest deviation of nodal curvature from the constant of its piece.
    pub piece_error: f64,
    pub piece_ok: bool,
    pub bulb_volume: f64,
    pub bulb_volume_closed_form: f64,
    pub bulb_volume_ok: bool,
    pub sb_scaled: f64,
    pub sb_ok: bool,
    pub disc_radius: f64,
    pub disc_ok: bool,
    pub max_value_jump: f64,
    pub max_slope_jump: f64,
    pub c1_ok: bool,
    pub spacing_ratio: f64,
    pub spacing_ok: bool,
    pub pass: bool,
}

/// Checks curvature bounds, bulb area, the `s_b` bound and the disc identity.
pub fn cb_property_report(profile: &RadialProfile, p: &CbParams) -> Result<CbReport> {
    let s = profile.s();
    let h_max = s.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    let k_slack = 4.0 * h_max * h_max;
    let field = curvature(profile);
    let is_junction = |x: f64| p.junctions().iter().any(|&j| (x - j).abs() <= JUNCTION_TOL * j.abs().max(1.0));
    let (mut k_min, mut k_max, mut piece_error) = (f64::INFINITY, f64::NEG_INFINITY, 0.0f64);
    for (i, &k) in field.k.iter().enumerate() {
        if field.quality[i] != NodeQuality::Interior || is_junction(s[i]) {
            continue;
        }
        k_min = k_min.min(k);
        k_max = k_max.max(k);
        piece_error = piece_error.max((k - p.piece_at(s[i]).curvature()).abs());
    }
    let curvature_ok = k_min >= -1.0 - k_slack && k_max <= 0.5 + k_slack;

    let bulb_volume = volume(profile, 0.0, f64::INFINITY)?;
    let closed = p.bulb_volume();
    let bulb_volume_ok = bulb_volume > 2.0 * PI && bulb_volume < 10.0 * PI;

    let sb_scaled = p.sb * p.r_c;
    let sb_ok = sb_scaled <= 1.75;

    let disc_radius = p.disc_radius();
    let disc_ok = (disc_radius - p.r_c.hypot(1.0)).abs() <= 1e-12;

    let (mut jump_v, mut jump_s) = (0.0f64, 0.0f64);
    let pieces = [Piece::Plane, Piece::Neck, Piece::Cylinder, Piece::BulbNeck, Piece::Sphere];
    for (k, &x) in p.junctions().iter().enumerate() {
        let (l, r) = (pieces[k], pieces[k + 1]);
        jump_v = jump_v.max((p.eval_piece(l, x) - p.eval_piece(r, x)).abs());
        jump_s = jump_s.max((p.slope_piece(l, x) - p.slope_piece(r, x)).abs());
    }
    let c1_ok = jump_v <= 1e-10 && jump_s <= 1e-10;
    let piece_ok = piece_error <= PIECE_TOL;
    let spacing_ratio = max_spacing_ratio(s);
    let spacing_ok = spacing_ratio <= 1.2;

    Ok(CbReport {
        k_min,
        k_max,
        k_slack,
        curvature_ok,
        piece_error,
        piece_ok,
        bulb_volume,
        bulb_volume_closed_form: closed,
        bulb_volume_ok,
        sb_scaled,
        sb_ok,
        disc_radius,
        disc_ok,
        max_value_jump: jump_v,
        max_slope_jump: jump_s,
        c1_ok,
        spacing_ratio,
        spacing_ok,
        pass: curvature_ok && piece_ok && bulb_volume_ok && sb_ok && disc_ok && c1_ok && spacing_ok,
    })
}

/// Open interval that must contain `s0`.
pub fn s0_bounds(r_c: f64, l_c: f64) -> (f64, f64) {
    (-(l_c + FRAC_PI_2) / r_c, -l_c / r_c)
}
