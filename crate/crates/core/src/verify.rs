//! Pointwise checks of comparison barriers and a priori inequalities on
//! recorded flows.

use std::f64::consts::{LN_2, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cb::CbParams;
use crate::error::{Error, Result};
use crate::exact::Barrier;
use crate::metric::{ball_at, curvature, GeodesicBall, NodeQuality, RadialProfile};
use crate::report::CheckReport;
use crate::solver::FlowSeries;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// `u ≤ barrier`.
    Upper,
    /// `u ≥ barrier`.
    Lower,
}

/// Closed rectangle in `(t, s)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub t_lo: f64,
    pub t_hi: f64,
    pub s_lo: f64,
    pub s_hi: f64,
}

impl Window {
    pub fn new(t_lo: f64, t_hi: f64, s_lo: f64, s_hi: f64) -> Self {
        Window { t_lo, t_hi, s_lo, s_hi }
    }

    fn contains_t(&self, t: f64) -> bool {
        t >= self.t_lo && t <= self.t_hi
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BarrierCheck {
    pub name: String,
    pub barrier: Barrier,
    pub direction: Direction,
    pub domain: Vec<Window>,
    /// Allowed violation in `u`.
    pub tolerance: f64,
    /// Additional per-node allowance `allowance · h² · |u_ss|`.
    #[serde(default)]
    pub allowance: f64,
    /// Frames before this time are skipped.
    #[serde(default)]
    pub activation: Option<f64>,
}

impl BarrierCheck {
    pub fn new(
        name: impl Into<String>,
        barrier: Barrier,
        direction: Direction,
        domain: Window,
        tolerance: f64,
    ) -> Self {
        BarrierCheck {
            name: name.into(),
            barrier,
            direction,
            domain: vec![domain],
            tolerance,
            allowance: 0.0,
            activation: None,
        }
    }
}

fn local_h2_uss(s: &[f64], u: &[f64], i: usize) -> f64 {
    let n = s.len();
    if i == 0 || i == n - 1 {
        return 0.0;
    }
    let (hm, hp) = (s[i] - s[i - 1], s[i + 1] - s[i]);
    hm.max(hp).powi(2) * crate::metric::second_difference(s, u, i).abs()
}

/// Evaluates the barrier at every recorded frame and node inside the domain.
///
/// Barrier evaluation failures (outside a model's domain of definition) skip
/// the sample.
pub fn check_barrier(series: &FlowSeries, check: &BarrierCheck) -> Result<CheckReport> {
    let grid = series.grid();
    for w in &check.domain {
        let lo = check.activation.map_or(w.t_lo, |a| a.max(w.t_lo));
        series.require_covers(lo, w.t_hi)?;
        if w.s_hi < grid[0] || w.s_lo > grid[grid.len() - 1] {
            return Err(Error::NotCovered(format!("s-range [{}, {}]", w.s_lo, w.s_hi)));
        }
    }
    let mut report = CheckReport::new(check.name.clone(), check.tolerance);
    for f in series.frames() {
        if check.activation.is_some_and(|a| f.t < a) {
            continue;
        }
        for w in check.domain.iter().filter(|w| w.contains_t(f.t)) {
            let start = grid.partition_point(|&x| x < w.s_lo);
            let end = grid.partition_point(|&x| x <= w.s_hi);
            for i in start..end {
                let Ok(b) = check.barrier.eval(f.t, grid[i]) else { continue };
                let gap = match check.direction {
                    Direction::Upper => f.u[i] - b,
                    Direction::Lower => b - f.u[i],
                };
                let slack = check.allowance * local_h2_uss(grid, &f.u, i);
                report.observe(gap - slack, f.t, grid[i]);
            }
        }
    }
    Ok(report.require_samples())
}

/// Time at which the bulb has collapsed to the cylinder scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct T1Detection {
    pub t1: f64,
    pub frame: usize,
    /// Node of the largest `u` on `s ≥ s_from` at `t1`.
    pub s1: f64,
    pub node: usize,
    pub u_max: f64,
}

impl T1Detection {
    pub fn in_expected_range(&self) -> bool {
        self.t1 > 0.75 && self.t1 < 2.5
    }
}

/// First frame with `max_{s ≥ s_from} u ≤ log r_c + ½ log 8`, searched on `(0, 5/2]`.
pub fn detect_t1(series: &FlowSeries, r_c: f64, s_from: f64) -> Result<T1Detection> {
    let level = r_c.ln() + 1.5 * LN_2;
    let grid = series.grid();
    let start = grid.partition_point(|&x| x < s_from);
    if start >= grid.len() {
        return Err(Error::NotCovered(format!("s ≥ {s_from}")));
    }
    for (k, f) in series.frames().iter().enumerate() {
        if f.t <= 0.0 {
            continue;
        }
        if f.t > 2.5 + 1e-12 {
            break;
        }
        let (node, u_max) =
            (start..grid.len())
                .map(|i| (i, f.u[i]))
                .fold((start, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
        if u_max <= level {
            return Ok(T1Detection { t1: f.t, frame: k, s1: grid[node], node, u_max });
        }
    }
    Err(Error::ConditionNeverMet(format!("max u on s ≥ {s_from} never dropped to log r_c + ½ log 8 within (0, 5/2]")))
}

/// Two-piece floor at `t1`: `u ≥ log r_c` up to `s1`, `u ≥ s1 - s + log r_c` beyond.
pub fn check_claim_floor(series: &FlowSeries, t1: &T1Detection, r_c: f64, tolerance: f64) -> CheckReport {
    let f = &series.frames()[t1.frame];
    let mut report = CheckReport::new("claim-floor", tolerance);
    for (i, &s) in series.grid().iter().enumerate() {
        let floor = if s <= t1.s1 { r_c.ln() } else { t1.s1 - s + r_c.ln() };
        report.observe(floor - f.u[i], f.t, s);
    }
    report.require_samples()
}

/// `u(t_eval, s) ≤ -log(s - s_e) + log c_cusp` for `s > s_e`.
pub fn check_cusp_domination(
    series: &FlowSeries,
    s_e: f64,
    t_eval: f64,
    c_cusp: f64,
    tolerance: f64,
) -> Result<CheckReport> {
    let k = series
        .frame_near(t_eval, 1e-9 * t_eval.abs().max(1.0))
        .ok_or_else(|| Error::NotCovered(format!("no frame at t = {t_eval}")))?;
    let f = &series.frames()[k];
    let cusp = Barrier::Cusp { s_e, multiplier: c_cusp };
    let mut report = CheckReport::new(format!("cusp-domination(C={c_cusp})"), tolerance);
    for (i, &s) in series.grid().iter().enumerate() {
        if let Ok(b) = cusp.eval(f.t, s) {
            report.observe(f.u[i] - b, f.t, s);
        }
    }
    Ok(report.require_samples())
}

/// Supremum of trusted curvature over `s ≥ from`, including the cap model.
pub fn sup_curvature_from(profile: &RadialProfile, k: &crate::metric::CurvatureField, from: f64) -> Option<f64> {
    let grid = k.sup_on(profile.s(), from, f64::INFINITY);
    let cap = profile.cap().and_then(|c| c.model.sup_curvature_from(c.t, from.max(profile.s_max())).ok());
    match (grid, cap) {
        (Some(a), Some(b)) => Some(a.max(b)),
        (a, b) => a.or(b),
    }
}

/// Bol's inequality `L² ≥ 4πA - A² sup K` on each ball, with the violation
/// normalised by `4πA`.
pub fn check_bol(profile: &RadialProfile, balls: &[GeodesicBall], t: f64, tolerance: f64) -> CheckReport {
    let field = curvature(profile);
    let mut report = CheckReport::new("bol", tolerance);
    for ball in balls {
        let Some(sup) = sup_curvature_from(profile, &field, ball.coordinate_radius) else { continue };
        let (a, l) = (ball.area, ball.boundary_length);
        let gap = 4.0 * PI * a - a * a * sup - l * l;
        report.observe(gap / (4.0 * PI * a), t, ball.coordinate_radius);
    }
    report.require_samples()
}

/// Bol's inequality on `count` balls `{s > σ}` drawn from a seeded generator,
/// with `σ` at resolved nodes of random frames.
pub fn check_bol_sampled(
    series: &FlowSeries,
    count: usize,
    seed: u64,
    s_from: f64,
    tolerance: f64,
) -> Result<CheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = series.grid();
    let start = grid.partition_point(|&x| x < s_from);
    let mut report = CheckReport::new("bol-sampled", tolerance);
    if series.is_empty() || start + 2 >= grid.len() {
        return Ok(report.require_samples());
    }
    let mut attempts = 0;
    while report.samples < count && attempts < 100 * count {
        attempts += 1;
        let k = rng.gen_range(0..series.len());
        let profile = series.profile(k)?;
        let field = curvature(&profile);
        let i = rng.gen_range(start.max(1)..grid.len() - 1);
        if field.quality[i] != NodeQuality::Interior {
            continue;
        }
        let ball = ball_at(&profile, grid[i])?;
        let one = check_bol(&profile, &[ball], series.frames()[k].t, tolerance);
        if let Some(w) = one.worst {
            report.observe(w.value, w.t, w.s);
        }
    }
    Ok(report.require_samples())
}

/// `inf K ≥ -1/(2t + 1) - tol` on every frame.
pub fn check_chen_inf_k(series: &FlowSeries, tolerance: f64) -> Result<CheckReport> {
    let mut report = CheckReport::new("chen-inf-k", tolerance);
    for k in 0..series.len() {
        let p = series.profile(k)?;
        let t = series.frames()[k].t;
        let field = curvature(&p);
        if let Some((i, kmin)) = field.inf(p.s()) {
            report.observe(-1.0 / (2.0 * t + 1.0) - kmin, t, p.s()[i]);
        }
    }
    Ok(report.require_samples())
}

/// Nodewise growth bound `u(t2) ≤ u(t1) + ½ log((2t2+1)/(2t1+1))` for every
/// recorded pair `t1 < t2`.
pub fn check_chen_growth(series: &FlowSeries, tolerance: f64) -> CheckReport {
    let mut report = CheckReport::new("chen-growth", tolerance);
    let grid = series.grid();
    // φ = u - ½ log(2t+1) must stay below its running minimum
    let mut min_phi: Vec<f64> = Vec::new();
    for f in series.frames() {
        let shift = 0.5 * (2.0 * f.t + 1.0).ln();
        if min_phi.is_empty() {
            min_phi = f.u.iter().map(|u| u - shift).collect();
            continue;
        }
        for (i, (&u, m)) in f.u.iter().zip(min_phi.iter_mut()).enumerate() {
            let phi = u - shift;
            report.observe(phi - *m, f.t, grid[i]);
            *m = m.min(phi);
        }
    }
    report.require_samples()
}

/// `u(t, s) ≥ -s + s_e` at every frame and node.
pub fn check_plane_floor(series: &FlowSeries, s_e: f64, tolerance: f64) -> CheckReport {
    let mut report = CheckReport::new("plane-floor", tolerance);
    let grid = series.grid();
    for f in series.frames() {
        for (i, &s) in grid.iter().enumerate() {
            report.observe(-s + s_e - f.u[i], f.t, s);
        }
    }
    report.require_samples()
}

/// Width bound `u(t, s) ≤ log r_c + ½ log(2t + 1)` for `s ≥ s_from` on one profile.
pub fn check_width_bound(profile: &RadialProfile, t: f64, r_c: f64, s_from: f64, tolerance: f64) -> CheckReport {
    let bound = r_c.ln() + 0.5 * (2.0 * t + 1.0).ln();
    let mut report = CheckReport::new("width-bound", tolerance);
    for (&s, &u) in profile.s().iter().zip(profile.u()) {
        if s >= s_from {
            report.observe(u - bound, t, s);
        }
    }
    report.require_samples()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudolocalityReport {
    pub hypotheses_met: bool,
    pub k0_max: f64,
    pub region_area: f64,
    /// Last recorded time up to which `|K| ≤ 2 r0⁻²` holds on the half region.
    pub t_star: f64,
    /// True when the bound held on every frame.
    pub holds_to_end: bool,
    /// `r0² / t*`.
    pub b_emp: f64,
}

/// Distance from `p` along `s` in the initial metric, per node.
fn initial_distance(profile: &RadialProfile, p: f64) -> Vec<f64> {
    let (s, u) = (profile.s(), profile.u());
    let n = s.len();
    let mut cum = vec![0.0; n];
    for i in 1..n {
        let (a, b) = (u[i - 1], u[i]);
        let d = b - a;
        let phi = if d.abs() < 1e-8 { 1.0 + 0.5 * d } else { d.exp_m1() / d };
        cum[i] = cum[i - 1] + (s[i] - s[i - 1]) * a.exp() * phi;
    }
    let at_p = crate::metric::interp_linear(s, &cum, p).unwrap_or(f64::NAN);
    cum.iter().map(|c| (c - at_p).abs()).collect()
}

/// Largest time for which curvature stays below `2 r0⁻²` on the annulus of
/// initial distance `r0/2` around the circle `s = p`.
pub fn check_pseudolocality(series: &FlowSeries, p: f64, r0: f64, v0: f64) -> Result<PseudolocalityReport> {
    if series.is_empty() {
        return Err(Error::NotCovered("empty series".into()));
    }
    let p0 = series.profile(0)?;
    let dist = initial_distance(&p0, p);
    if dist.iter().any(|d| d.is_nan()) {
        return Err(Error::OutOfDomain { s: p, lo: p0.s_left(), hi: p0.s_max() });
    }
    let grid = series.grid();
    let full: Vec<usize> = (0..grid.len()).filter(|&i| dist[i] <= r0).collect();
    let half: Vec<usize> = (0..grid.len()).filter(|&i| dist[i] <= 0.5 * r0).collect();
    let k0 = curvature(&p0);
    let k0_max =
        full.iter().filter(|&&i| k0.quality[i] != NodeQuality::Unresolved).map(|&i| k0.k[i].abs()).fold(0.0, f64::max);
    let (lo, hi) = match (full.first(), full.last()) {
        (Some(&a), Some(&b)) if b > a => (grid[a], grid[b]),
        _ => return Err(Error::Hypotheses("region contains fewer than two nodes".into())),
    };
    let region_area = crate::metric::volume(&p0, lo, hi)?;
    let hypotheses_met = k0_max <= r0.powi(-2) && region_area >= v0 * r0 * r0;
    if !hypotheses_met {
        return Err(Error::Hypotheses(format!(
            "|K(0)| ≤ {k0_max:.3e} vs r0⁻² = {:.3e}, area {region_area:.3e} vs v0 r0² = {:.3e}",
            r0.powi(-2),
            v0 * r0 * r0
        )));
    }
    let limit = 2.0 / (r0 * r0);
    let mut t_star = series.t_start();
    let mut holds_to_end = true;
    for k in 0..series.len() {
        let prof = series.profile(k)?;
        let field = curvature(&prof);
        let bad = half.iter().any(|&i| field.quality[i] != NodeQuality::Unresolved && field.k[i].abs() > limit);
        if bad {
            holds_to_end = false;
            break;
        }
        t_star = series.frames()[k].t;
    }
    let b_emp = if t_star > 0.0 { r0 * r0 / t_star } else { f64::INFINITY };
    Ok(PseudolocalityReport { hypotheses_met, k0_max, region_area, t_star, holds_to_end, b_emp })
}

/// The standard barrier checks for a CB run with detected `t1`.
pub fn cb_barrier_checks(p: &CbParams, t1: Option<f64>, horizon: f64, tolerance: f64) -> Vec<BarrierCheck> {
    let r = p.r_c;
    let inf = f64::INFINITY;
    let mut checks = vec![
        BarrierCheck::new(
            "sphere-lower",
            Barrier::unit_bulb(p.sb),
            Direction::Lower,
            Window::new(0.0, 1.0 - 1e-9, -inf, inf),
            tolerance,
        ),
        BarrierCheck::new(
            "coarse-upper-cigar",
            Barrier::cigar(0.125, p.sb, 0.0),
            Direction::Upper,
            Window::new(0.0, horizon.min(1.0 / r), p.neck(), inf),
            tolerance,
        ),
    ];
    if let Some(t1) = t1 {
        checks.push(BarrierCheck::new(
            "refined-upper-cigar",
            Barrier::cigar((4.0 * r).powi(-2), 2.0 / r, t1),
            Direction::Upper,
            Window::new(t1, (t1 + 1.0).min(horizon), p.neck(), inf),
            tolerance,
        ));
        checks.push(BarrierCheck::new(
            "refined-lower-cigar",
            Barrier::cigar(r.powi(-2), 0.0, t1),
            Direction::Lower,
            Window::new(t1, horizon, -inf, inf),
            tolerance,
        ));
    }
    checks
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::FlowSeries;
    use approx::assert_abs_diff_eq;
    use std::sync::Arc;

    fn uniform(a: f64, b: f64, h: f64) -> Arc<[f64]> {
        let n = ((b - a) / h).round() as usize;
        (0..=n).map(|i| a + (b - a) * i as f64 / n as f64).collect()
    }

    fn sphere_series() -> FlowSeries {
        let b = Barrier::unit_bulb(0.0);
        let times: Vec<f64> = (0..10).map(|k| 0.1 * k as f64).collect();
        FlowSeries::from_fn(uniform(-10.0, 10.0, 0.05), &times, |t, s| b.eval(t, s).unwrap()).unwrap()
    }

    #[test]
    fn sphere_barrier_on_exact_flow_is_equality() {
        let series = sphere_series();
        let check = BarrierCheck::new(
            "sphere",
            Barrier::unit_bulb(0.0),
            Direction::Lower,
            Window::new(0.0, 0.9, -10.0, 10.0),
            1e-10,
        );
        let r = check_barrier(&series, &check).unwrap();
        assert!(r.pass);
        assert_eq!(r.worst.unwrap().value, 0.0);
        assert_eq!(r.samples, 10 * 401);
    }

    #[test]
    fn barrier_self_test_locates_injected_violation() {
        let mut series = sphere_series();
        let i = 250;
        series.frames_mut()[4].u[i] -= 0.01;
        let check = BarrierCheck::new(
            "sphere",
            Barrier::unit_bulb(0.0),
            Direction::Lower,
            Window::new(0.0, 0.9, -10.0, 10.0),
            1e-6,
        );
        let r = check_barrier(&series, &check).unwrap();
        assert!(!r.pass);
        let w = r.worst.unwrap();
        assert_abs_diff_eq!(w.value, 0.01, epsilon = 1e-12);
        assert_abs_diff_eq!(w.t, 0.4, epsilon = 1e-12);
        assert_abs_diff_eq!(w.s, series.grid()[i]);
    }

    #[test]
    fn barrier_domain_must_be_covered() {
        let series = sphere_series();
        let check =
            BarrierCheck::new("x", Barrier::unit_bulb(0.0), Direction::Lower, Window::new(0.0, 2.0, -1.0, 1.0), 0.0);
        assert!(matches!(check_barrier(&series, &check), Err(Error::NotCovered(_))));
    }

    #[test]
    fn t1_needs_a_bulb() {
        let times: Vec<f64> = (0..=30).map(|k| 0.1 * k as f64).collect();
        let plane = FlowSeries::from_fn(uniform(-5.0, 5.0, 0.1), &times, |_, s| -s).unwrap();
        assert!(matches!(detect_t1(&plane, 0.05, -1.0), Err(Error::ConditionNeverMet(_))));
    }

    #[test]
    fn claim_floor_self_tests() {
        let rc: f64 = 0.1;
        let times = [0.0, 1.0];
        let cyl = FlowSeries::from_fn(uniform(-5.0, 5.0, 0.1), &times, |_, _| rc.ln()).unwrap();
        let t1 = T1Detection { t1: 1.0, frame: 1, s1: 5.0, node: 100, u_max: rc.ln() };
        let r = check_claim_floor(&cyl, &t1, rc, 0.0);
        assert!(r.pass && r.worst.unwrap().value == 0.0);
        let mut bad = cyl.clone();
        bad.frames_mut()[1].u[30] -= 0.2;
        let r = check_claim_floor(&bad, &t1, rc, 1e-9);
        assert!(!r.pass);
        assert_abs_diff_eq!(r.worst.unwrap().s, bad.grid()[30]);
    }

    #[test]
    fn cusp_equality() {
        let se = -3.0;
        let times = [0.0, 1.0];
        let grid = uniform(-2.9, 5.0, 0.1);
        let series = FlowSeries::from_fn(grid, &times, |_, s| -(s - se).ln()).unwrap();
        let r = check_cusp_domination(&series, se, 1.0, 1.0, 1e-12).unwrap();
        assert!(r.pass && r.worst.unwrap().value.abs() < 1e-12);
        let r15 = check_cusp_domination(&series, se, 1.0, 15.0, 0.0).unwrap();
        assert_abs_diff_eq!(r15.worst.unwrap().value, -(15f64).ln(), epsilon = 1e-12);
        assert!(check_cusp_domination(&series, se, 0.5, 15.0, 0.0).is_err());
    }

    #[test]
    fn bol_flat_disc_equality() {
        // plane u = -s: disc of radius e^{-σ}
        let grid = uniform(-3.0, 3.0, 0.01);
        let p = RadialProfile::from_fn(grid, Some(crate::metric::TipCap::flat(3.0, -3.0)), |s| -s).unwrap();
        let balls: Vec<_> = [-2.0, 0.0, 1.5, 4.0].iter().map(|&x| ball_at(&p, x).unwrap()).collect();
        let r = check_bol(&p, &balls, 0.0, 1e-4);
        assert!(r.pass);
        assert!(r.worst.unwrap().value.abs() < 1e-4, "{:?}", r.worst);
    }

    #[test]
    fn bol_spherical_cap_closed_form() {
        // ball entirely inside the analytic sphere cap
        let b = Barrier::Sphere { radius: 1.5, s_center: 0.0, t_shift: 0.0 };
        let grid = uniform(-3.0, 0.5, 0.1);
        let cap = crate::metric::TipCap { model: b, t: 0.0 };
        let p = RadialProfile::from_fn(grid, Some(cap), |s| b.eval(0.0, s).unwrap()).unwrap();
        let balls: Vec<_> = [0.6, 1.0, 2.5].iter().map(|&x| ball_at(&p, x).unwrap()).collect();
        let r = check_bol(&p, &balls, 0.0, 1e-6);
        assert!(r.pass);
        assert!(r.worst.unwrap().value.abs() < 1e-6, "{:?}", r.worst);
        for ball in &balls {
            let (a, l) = (ball.area, ball.boundary_length);
            assert_abs_diff_eq!(l * l, 4.0 * PI * a - a * a / 2.25, epsilon = 1e-9);
        }
    }

    #[test]
    fn bol_sampled_is_reproducible() {
        let series = sphere_series();
        let a = check_bol_sampled(&series, 50, 7, -10.0, 1e-3).unwrap();
        let b = check_bol_sampled(&series, 50, 7, -10.0, 1e-3).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.samples, 50);
        assert!(a.pass, "{:?}", a.worst);
    }

    #[test]
    fn chen_checks_on_hyperbolic_flow() {
        // u = -log(s) + ½ log(2t+1): complete hyperbolic cusp flow, K = -1/(2t+1)
        let grid = uniform(1.0, 8.0, 0.01);
        let times: Vec<f64> = (0..=10).map(|k| 0.2 * k as f64).collect();
        let series = FlowSeries::from_fn(grid, &times, |t, s| -s.ln() + 0.5 * (2.0 * t + 1.0).ln()).unwrap();
        let inf = check_chen_inf_k(&series, 1e-3).unwrap();
        assert!(inf.pass, "{:?}", inf.worst);
        assert!(inf.worst.unwrap().value.abs() < 1e-3);
        let growth = check_chen_growth(&series, 1e-12);
        assert!(growth.pass);
        let mut bad = series.clone();
        bad.frames_mut()[7].u[55] += 1e-3;
        let g = check_chen_growth(&bad, 1e-4);
        assert!(!g.pass);
        assert_abs_diff_eq!(g.worst.unwrap().t, bad.frames()[7].t);
        assert_abs_diff_eq!(g.worst.unwrap().s, bad.grid()[55]);
    }

    #[test]
    fn width_bound_on_expanding_cylinder() {
        let rc: f64 = 0.1;
        let t: f64 = 0.5;
        let grid = uniform(-3.0, 3.0, 0.1);
        let p = RadialProfile::from_fn(grid, None, |_| rc.ln() + 0.5 * (2.0 * t + 1.0).ln()).unwrap();
        let r = check_width_bound(&p, t, rc, -1.0, 1e-12);
        assert!(r.pass);
        assert_eq!(r.samples, 41);
        assert!(!check_width_bound(&p, 0.4, rc, -1.0, 1e-3).pass);
    }

    #[test]
    fn plane_floor() {
        let times = [0.0, 1.0];
        let series = FlowSeries::from_fn(uniform(-3.0, 3.0, 0.1), &times, |_, s| -s + 1.0).unwrap();
        assert!(check_plane_floor(&series, 1.0, 0.0).pass);
        assert!(!check_plane_floor(&series, 1.1, 1e-3).pass);
    }

    #[test]
    fn pseudolocality_on_plane_and_spike() {
        let times: Vec<f64> = (0..=10).map(|k| 0.1 * k as f64).collect();
        let plane = FlowSeries::from_fn(uniform(-3.0, 3.0, 0.05), &times, |_, s| -s).unwrap();
        let r = check_pseudolocality(&plane, 0.0, 1.0, 0.1).unwrap();
        assert!(r.holds_to_end);
        assert_abs_diff_eq!(r.t_star, 1.0, epsilon = 1e-12);
        let mut spiked = plane.clone();
        spiked.frames_mut()[1].u[60] += 0.05;
        let r = check_pseudolocality(&spiked, 0.0, 1.0, 0.1).unwrap();
        assert!(!r.holds_to_end);
        assert_eq!(r.t_star, 0.0);
        assert!(r.b_emp.is_infinite());
        assert!(matches!(check_pseudolocality(&plane, 0.0, 1.0, 1e6), Err(Error::Hypotheses(_))));
    }
}
