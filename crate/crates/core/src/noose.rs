//! A rotationally symmetric loop moving by twice its geodesic curvature on the
//! evolving surface, enclosing the tip side `s > ρ`.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::{interp_linear, interp_slope, locate, second_difference, volume, RadialProfile};
use crate::report::CheckReport;
use crate::solver::{run, Diagnostics, FlowSeries, NooseSample, Observer, SolverConfig, StepView};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NooseConfig {
    pub start: f64,
    /// Bound on `dt · |∂v/∂ρ|` per substep.
    pub stability: f64,
    /// Bound on the loop displacement per substep, in cells.
    pub max_cells: f64,
    /// Extinction once the enclosed area drops below this many local cell areas.
    pub area_cells: f64,
    /// Extinction once the loop is this many cells from the grid end.
    pub end_cells: usize,
}

impl Default for NooseConfig {
    fn default() -> Self {
        NooseConfig { start: 0.0, stability: 0.2, max_cells: 0.5, area_cells: 10.0, end_cells: 2 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NooseState {
    pub t: f64,
    pub rho: f64,
    pub length: f64,
    pub enclosed_area: f64,
    pub alive: bool,
}

/// Extinction event, with the profile interpolated to the detection time.
#[derive(Debug, Clone, PartialEq)]
pub struct Extinction {
    pub t: f64,
    pub rho: f64,
    pub profile: RadialProfile,
}

/// `dρ/dt = -2 e^{-2u(ρ)} u_s(ρ)`, positive toward the tip.
pub fn noose_velocity(profile: &RadialProfile, rho: f64) -> Result<f64> {
    let s = profile.s();
    if !(rho > s[0] && rho < profile.s_max()) {
        return Err(Error::Noose(format!("ρ = {rho} is not interior to the grid")));
    }
    let u = profile.u_at(rho)?;
    let us = profile.slope_at(rho)?;
    Ok(-2.0 * (-2.0 * u).exp() * us)
}

struct Local {
    u: f64,
    us: f64,
    uss: f64,
    h: f64,
}

fn local(s: &[f64], u0: &[f64], u1: &[f64], theta: f64, rho: f64) -> Option<Local> {
    let i = locate(s, rho)?;
    let n = s.len();
    let blend = |a: f64, b: f64| a + theta * (b - a);
    let uu = blend(interp_linear(s, u0, rho)?, interp_linear(s, u1, rho)?);
    let us = blend(interp_slope(s, u0, rho)?, interp_slope(s, u1, rho)?);
    let curv = |u: &[f64]| {
        let a = second_difference(s, u, i.clamp(1, n - 2)).abs();
        let b = second_difference(s, u, (i + 1).clamp(1, n - 2)).abs();
        a.max(b)
    };
    let uss = blend(curv(u0), curv(u1));
    Some(Local { u: uu, us, uss, h: s[i + 1] - s[i] })
}

fn velocity(l: &Local) -> f64 {
    -2.0 * (-2.0 * l.u).exp() * l.us
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NooseRecord {
    pub t: f64,
    pub rho: f64,
    pub length: f64,
    pub area: f64,
}

/// Observer integrating the loop alongside the flow.
pub struct NooseObserver {
    grid: Arc<[f64]>,
    config: NooseConfig,
    state: NooseState,
    track: Vec<NooseRecord>,
    extinction: Option<Extinction>,
    substeps: usize,
}

impl NooseObserver {
    pub fn new(initial: &RadialProfile, config: NooseConfig) -> Result<Self> {
        let s = initial.s();
        let rho = config.start;
        if !(rho > s[1] && rho < s[s.len().saturating_sub(1 + config.end_cells)]) {
            return Err(Error::Noose(format!("start ρ = {rho} is not strictly inside the grid")));
        }
        let area = volume(initial, rho, initial.domain_end())?;
        let length = 2.0 * PI * initial.u_at(rho)?.exp();
        let state = NooseState { t: 0.0, rho, length, enclosed_area: area, alive: true };
        Ok(NooseObserver {
            grid: initial.grid().clone(),
            config,
            state,
            track: vec![NooseRecord { t: 0.0, rho, length, area }],
            extinction: None,
            substeps: 0,
        })
    }

    pub fn state(&self) -> &NooseState {
        &self.state
    }

    pub fn track(&self) -> &[NooseRecord] {
        &self.track
    }

    pub fn substeps(&self) -> usize {
        self.substeps
    }

    pub fn into_parts(self) -> (Vec<NooseRecord>, Option<Extinction>) {
        (self.track, self.extinction)
    }

    fn extinguish(&mut self, t: f64, step: &StepView<'_>, theta: f64) -> Result<()> {
        let u: Vec<f64> = step.u0.iter().zip(step.u1).map(|(a, b)| a + theta * (b - a)).collect();
        let n = u.len();
        let cap = crate::metric::TipCap::flat(self.grid[n - 1], u[n - 1]);
        let profile = RadialProfile::new(self.grid.clone(), u, Some(cap))?;
        self.state.alive = false;
        self.state.t = t;
        self.extinction = Some(Extinction { t, rho: self.state.rho, profile });
        Ok(())
    }
}

impl Observer for NooseObserver {
    fn accepted(&mut self, step: &StepView<'_>) -> Result<()> {
        if !self.state.alive {
            return Ok(());
        }
        let s = step.grid;
        let n = s.len();
        let right_stop = s[n - 1 - self.config.end_cells];
        let span = step.t1 - step.t0;
        let mut tau = step.t0;
        let mut rho = self.state.rho;
        let at = |tau: f64, rho: f64| {
            let theta = ((tau - step.t0) / span).clamp(0.0, 1.0);
            local(s, step.u0, step.u1, theta, rho)
                .ok_or_else(|| Error::Noose(format!("ρ = {rho} left the grid at t = {tau}")))
        };
        while tau < step.t1 {
            let l = at(tau, rho)?;
            let v = velocity(&l);
            let rate = 2.0 * (-2.0 * l.u).exp() * (l.uss + 2.0 * l.us * l.us);
            let mut dt = step.t1 - tau;
            if rate > 0.0 {
                dt = dt.min(self.config.stability / rate);
            }
            if v != 0.0 {
                dt = dt.min(self.config.max_cells * l.h / v.abs());
            }
            let mid = rho + 0.5 * dt * v;
            if mid >= s[n - 1] {
                rho = s[n - 1];
            } else {
                rho += dt * velocity(&at(tau + 0.5 * dt, mid)?);
            }
            tau = if dt >= step.t1 - tau { step.t1 } else { tau + dt };
            self.substeps += 1;
            if !rho.is_finite() {
                return Err(Error::Noose(format!("non-finite position at t = {tau}")));
            }
            if rho <= s[1] {
                return Err(Error::Noose(format!("loop reached the left boundary at t = {tau}")));
            }
            if rho >= right_stop {
                self.state.rho = rho.min(right_stop);
                return self.extinguish(tau, step, (tau - step.t0) / span);
            }
        }
        self.state.rho = rho;
        let u = step.u1;
        let ur = interp_linear(s, u, rho).expect("inside grid");
        let cap = crate::metric::TipCap::flat(s[n - 1], u[n - 1]);
        let profile = RadialProfile::new(self.grid.clone(), u.to_vec(), Some(cap))?;
        let area = volume(&profile, rho, f64::INFINITY)?;
        let i = locate(s, rho).expect("inside grid");
        let cell = 2.0 * PI * (2.0 * ur).exp() * (s[i + 1] - s[i]);
        let length = 2.0 * PI * ur.exp();
        self.state = NooseState { t: step.t1, rho, length, enclosed_area: area, alive: true };
        self.track.push(NooseRecord { t: step.t1, rho, length, area });
        if area < self.config.area_cells * cell {
            self.extinguish(step.t1, step, 1.0)?;
        }
        Ok(())
    }

    fn annotate(&mut self, _u: &[f64], diag: &mut Diagnostics) {
        if let Some(r) = self.track.last() {
            let tol = 1e-12 * diag.t.abs().max(1.0);
            if self.state.alive && (r.t - diag.t).abs() <= tol {
                diag.noose = Some(NooseSample { rho: r.rho, length: r.length, area: r.area });
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct CoupledRun {
    pub series: FlowSeries,
    pub track: Vec<NooseRecord>,
    pub extinction: Option<Extinction>,
    pub initial_area: f64,
}

impl CoupledRun {
    /// Extinction time predicted by a constant area loss of `4π`.
    pub fn predicted_extinction(&self) -> f64 {
        self.initial_area / (4.0 * PI)
    }
}

/// Runs the flow with a loop started at `noose.start`, plus extra observers.
pub fn run_coupled(
    initial: &RadialProfile,
    t_end: f64,
    solver: &SolverConfig,
    noose: &NooseConfig,
    extra: &mut [&mut dyn Observer],
) -> Result<CoupledRun> {
    let mut obs = NooseObserver::new(initial, noose.clone())?;
    let initial_area = obs.state().enclosed_area;
    let series = {
        let mut all: Vec<&mut dyn Observer> = Vec::with_capacity(extra.len() + 1);
        all.push(&mut obs);
        for o in extra.iter_mut() {
            all.push(&mut **o);
        }
        run(initial, t_end, solver, &mut all)?
    };
    let (track, extinction) = obs.into_parts();
    Ok(CoupledRun { series, track, extinction, initial_area })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AreaLawReport {
    pub initial_area: f64,
    pub predicted_extinction: f64,
    pub extinction: Option<f64>,
    /// `|T_emp - T_pred| / T_emp`.
    pub extinction_error: Option<f64>,
    pub extinction_tolerance: f64,
    pub extinction_ok: bool,
    /// Largest `|rate / (-4π) - 1|` between consecutive recorded frames.
    pub rate: CheckReport,
    /// Largest `|A(t) - (A(0) - 4πt)| / A(0)` over the track.
    pub deviation: CheckReport,
}

/// `dA/dt = -4π` between consecutive recorded frames that carry a loop sample.
pub fn area_rate_check(series: &FlowSeries, tol: f64) -> CheckReport {
    let mut rate = CheckReport::new("area-rate", tol);
    let mut prev: Option<(f64, f64)> = None;
    for f in series.frames() {
        match f.diag.noose {
            Some(n) => {
                if let Some((t0, a)) = prev {
                    let r = (n.area - a) / (f.t - t0);
                    rate.observe((r / (-4.0 * PI) - 1.0).abs(), f.t, n.rho);
                }
                prev = Some((f.t, n.area));
            }
            None if f.t > 0.0 => break,
            None => {}
        }
    }
    rate.require_samples()
}

/// Enclosed-area law `dA/dt = -4π` against the recorded frames.
pub fn area_law_report(run: &CoupledRun, rate_tol: f64, extinction_tol: f64) -> AreaLawReport {
    let a0 = run.initial_area;
    let rate = area_rate_check(&run.series, rate_tol);
    let mut deviation = CheckReport::new("area-deviation", rate_tol);
    for r in &run.track {
        deviation.observe((r.area - (a0 - 4.0 * PI * r.t)).abs() / a0, r.t, r.rho);
    }
    let t_pred = run.predicted_extinction();
    let t_emp = run.extinction.as_ref().map(|e| e.t);
    let err = t_emp.map(|t| (t - t_pred).abs() / t);
    AreaLawReport {
        initial_area: a0,
        predicted_extinction: t_pred,
        extinction: t_emp,
        extinction_error: err,
        extinction_tolerance: extinction_tol,
        extinction_ok: err.is_some_and(|e| e <= extinction_tol),
        rate,
        deviation: deviation.require_samples(),
    }
}

/// Fixed circles `s ∈ [s_lo, s_hi]`: `L(t2, s) ≤ √((2t2+1)/(2t1+1)) L(t1, s) + tol`.
pub fn tracked_circle_growth(
    series: &FlowSeries,
    s_lo: f64,
    s_hi: f64,
    t1: f64,
    t2: f64,
    tol: f64,
) -> Result<CheckReport> {
    if t2 < t1 {
        return Err(Error::EmptyRange(t1, t2));
    }
    let k1 = series.frame_near(t1, 1e-9).ok_or_else(|| Error::NotCovered(format!("t = {t1}")))?;
    let k2 = series.frame_near(t2, 1e-9).ok_or_else(|| Error::NotCovered(format!("t = {t2}")))?;
    let (f1, f2) = (&series.frames()[k1], &series.frames()[k2]);
    let factor = ((2.0 * f2.t + 1.0) / (2.0 * f1.t + 1.0)).sqrt();
    let mut report = CheckReport::new("tracked-circle-growth", tol);
    for (i, &s) in series.grid().iter().enumerate() {
        if s < s_lo || s > s_hi {
            continue;
        }
        let (l1, l2) = (2.0 * PI * f1.u[i].exp(), 2.0 * PI * f2.u[i].exp());
        report.observe(l2 - factor * l1, f2.t, s);
    }
    Ok(report.require_samples())
}

/// Moving loop: `L(t2, γ(t2)) ≤ √((2t2+1)/(2t1+1)) L(t1, γ(t1)) + tol` for all
/// recorded `t1 < t2`.
pub fn moving_loop_check(track: &[NooseRecord], tol: f64) -> CheckReport {
    let mut report = CheckReport::new("moving-loop-length", tol);
    // ψ = L/√(2t+1) must not exceed its running minimum; the violation of a
    // pair scales back by √(2t2+1)
    let mut min_psi = f64::INFINITY;
    for r in track {
        let g = (2.0 * r.t + 1.0).sqrt();
        let psi = r.length / g;
        if min_psi.is_finite() {
            report.observe(g * (psi - min_psi), r.t, r.rho);
        }
        min_psi = min_psi.min(psi);
    }
    report.require_samples()
}
