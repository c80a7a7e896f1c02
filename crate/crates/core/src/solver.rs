//! Implicit finite-volume integrator for `u_t = e^{-2u} u_ss`.
//!
//! The equation is advanced in conservative form `(e^{2u})_t = 2 u_ss` on the
//! dual cells of the grid, so the lumped area `Σ w_i e^{2u_i}` changes only
//! through the boundary fluxes. Each implicit step is solved by Newton's
//! method with a tridiagonal Jacobian.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::{curvature, volume, width, RadialProfile, TipCap};
use crate::tridiag;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TimeStepper {
    BackwardEuler,
    /// Variable-step two-step backward differentiation, started with one
    /// backward Euler step.
    Bdf2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub stepper: TimeStepper,
    pub dt_init: f64,
    pub dt_max: f64,
    pub dt_min: f64,
    /// Largest accepted nodal change of `u` per step.
    pub max_du: f64,
    pub growth: f64,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    /// Imposed `u_s` at the left end.
    pub left_slope: f64,
    /// Imposed `u_s` at the right end.
    pub right_slope: f64,
    /// Spacing of recorded frames in `t`.
    pub cadence: f64,
    /// Lower end of the region reported as `vol_bulb`.
    pub bulb_from: Option<f64>,
    /// Lower end of the region reported as `width`; defaults to the grid start.
    pub width_from: Option<f64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            stepper: TimeStepper::Bdf2,
            dt_init: 1e-4,
            dt_max: 0.01,
            dt_min: 1e-12,
            max_du: 0.05,
            growth: 1.2,
            newton_tol: 1e-10,
            newton_max_iter: 30,
            left_slope: -1.0,
            right_slope: -1.0,
            cadence: 0.01,
            bulb_from: None,
            width_from: None,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("dt_init", self.dt_init),
            ("dt_max", self.dt_max),
            ("dt_min", self.dt_min),
            ("max_du", self.max_du),
            ("newton_tol", self.newton_tol),
            ("cadence", self.cadence),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        if self.dt_min > self.dt_max || self.dt_init > self.dt_max {
            return Err(Error::InvalidParameter("need dt_min ≤ dt_init ≤ dt_max".into()));
        }
        if !(self.growth >= 1.0 && self.growth <= 1.5) {
            return Err(Error::InvalidParameter(format!("growth must lie in [1, 1.5], got {}", self.growth)));
        }
        if self.newton_max_iter == 0 {
            return Err(Error::InvalidParameter("newton_max_iter must be at least 1".into()));
        }
        if !(self.left_slope.is_finite() && self.right_slope.is_finite()) {
            return Err(Error::InvalidParameter("boundary slopes must be finite".into()));
        }
        Ok(())
    }
}

/// Largest step ratio admitted by the variable-step two-step scheme, inside
/// its zero-stability limit 1 + √2. Equal splitting of a frame interval needs
/// ratios up to 2.
const MAX_RATIO: f64 = 2.0;

struct Workspace {
    lower: Vec<f64>,
    diag: Vec<f64>,
    upper: Vec<f64>,
    rhs: Vec<f64>,
    scratch: Vec<f64>,
    b: Vec<f64>,
}

/// Reusable implicit stepper on a fixed grid.
pub struct Solver {
    s: Arc<[f64]>,
    h: Vec<f64>,
    w: Vec<f64>,
    config: SolverConfig,
    ws: Workspace,
    newton_iterations: usize,
}

impl Solver {
    pub fn new(grid: Arc<[f64]>, config: SolverConfig) -> Result<Self> {
        config.validate()?;
        crate::metric::validate_grid(&grid)?;
        let n = grid.len();
        let h: Vec<f64> = grid.windows(2).map(|p| p[1] - p[0]).collect();
        let w: Vec<f64> = (0..n)
            .map(|i| {
                let left = if i > 0 { h[i - 1] } else { 0.0 };
                let right = if i < n - 1 { h[i] } else { 0.0 };
                0.5 * (left + right)
            })
            .collect();
        let z = vec![0.0; n];
        Ok(Solver {
            s: grid,
            h,
            w,
            config,
            ws: Workspace {
                lower: z.clone(),
                diag: z.clone(),
                upper: z.clone(),
                rhs: z.clone(),
                scratch: z.clone(),
                b: z,
            },
            newton_iterations: 0,
        })
    }

    pub fn grid(&self) -> &Arc<[f64]> {
        &self.s
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    /// Dual cell widths.
    pub fn cell_widths(&self) -> &[f64] {
        &self.w
    }

    /// Lumped area `Σ w_i e^{2u_i}` (without the factor 2π).
    pub fn lumped_mass(&self, u: &[f64]) -> f64 {
        self.w.iter().zip(u).map(|(w, u)| w * (2.0 * u).exp()).sum()
    }

    /// Solves `w_i (c0 e^{2u_i} + b_i) = 2 [flux]_i` for `u`, starting from `u`.
    fn newton(&mut self, u: &mut [f64], c0: f64) -> std::result::Result<(), f64> {
        let n = u.len();
        let (sl, sr) = (self.config.left_slope, self.config.right_slope);
        let mut polished = false;
        let mut last = f64::INFINITY;
        for _ in 0..self.config.newton_max_iter {
            self.newton_iterations += 1;
            let ws = &mut self.ws;
            for i in 0..n {
                let e = (2.0 * u[i]).exp();
                let (fl, dl) =
                    if i == 0 { (sl, 0.0) } else { ((u[i] - u[i - 1]) / self.h[i - 1], 2.0 / self.h[i - 1]) };
                let (fr, dr) = if i == n - 1 { (sr, 0.0) } else { ((u[i + 1] - u[i]) / self.h[i], 2.0 / self.h[i]) };
                ws.rhs[i] = -(self.w[i] * (c0 * e + ws.b[i]) - 2.0 * (fr - fl));
                ws.diag[i] = 2.0 * self.w[i] * c0 * e + dl + dr;
                ws.lower[i] = -dl;
                ws.upper[i] = -dr;
            }
            tridiag::solve_in_place(&ws.lower, &ws.diag, &ws.upper, &mut ws.rhs, &mut ws.scratch);
            let size = ws.rhs.iter().fold(0.0f64, |m, d| m.max(d.abs()));
            if !size.is_finite() {
                return Err(size);
            }
            let damp = if size > 1.0 { 1.0 / size } else { 1.0 };
            for (ui, d) in u.iter_mut().zip(&ws.rhs) {
                *ui += damp * d;
            }
            last = size;
            if polished {
                return Ok(());
            }
            if size <= self.config.newton_tol {
                polished = true;
            }
        }
        if polished {
            Ok(())
        } else {
            Err(last)
        }
    }

    fn finish(&self, t: f64, dt: f64, u: &[f64], res: std::result::Result<(), f64>) -> Result<()> {
        match res {
            Ok(()) if u.iter().all(|x| x.is_finite()) => Ok(()),
            Ok(()) => Err(Error::Overflow(t + dt)),
            Err(step) => Err(Error::NewtonDivergence { t, dt, step }),
        }
    }

    /// One backward Euler step from `u` at time `t`.
    pub fn step_euler(&mut self, t: f64, u: &[f64], dt: f64) -> Result<Vec<f64>> {
        for (b, x) in self.ws.b.iter_mut().zip(u) {
            *b = -(2.0 * x).exp() / dt;
        }
        let mut next = u.to_vec();
        let res = self.newton(&mut next, 1.0 / dt);
        self.finish(t, dt, &next, res)?;
        Ok(next)
    }

    /// One variable-step BDF2 step from `(u_prev, u)` separated by `dt_prev`.
    pub fn step_bdf2(&mut self, t: f64, u_prev: &[f64], u: &[f64], dt_prev: f64, dt: f64) -> Result<Vec<f64>> {
        let omega = dt / dt_prev;
        let a0 = (1.0 + 2.0 * omega) / (1.0 + omega);
        let a1 = -(1.0 + omega);
        let a2 = omega * omega / (1.0 + omega);
        for i in 0..u.len() {
            self.ws.b[i] = (a1 * (2.0 * u[i]).exp() + a2 * (2.0 * u_prev[i]).exp()) / dt;
        }
        let mut next: Vec<f64> = u.iter().zip(u_prev).map(|(a, b)| a + omega * (a - b)).collect();
        let res = self.newton(&mut next, a0 / dt);
        if res.is_err() {
            // the extrapolated guess can overshoot at steep fronts
            next.copy_from_slice(u);
            let retry = self.newton(&mut next, a0 / dt);
            self.finish(t, dt, &next, retry)?;
        } else {
            self.finish(t, dt, &next, res)?;
        }
        Ok(next)
    }

    fn output_cap(&self, u: &[f64]) -> Option<TipCap> {
        let n = u.len();
        ((self.config.right_slope + 1.0).abs() < 1e-12).then(|| TipCap::flat(self.s[n - 1], u[n - 1]))
    }

    pub fn profile(&self, u: Vec<f64>) -> Result<RadialProfile> {
        let cap = self.output_cap(&u);
        RadialProfile::new(self.s.clone(), u, cap)
    }
}

/// One backward Euler step of the configured boundary problem.
///
/// The two-step scheme has no history on a single step and starts the same
/// way, so this is also the first step of a BDF2 run.
pub fn step(profile: &RadialProfile, dt: f64, config: &SolverConfig) -> Result<RadialProfile> {
    if !(dt > 0.0 && dt <= config.dt_max) {
        return Err(Error::InvalidParameter(format!("dt = {dt} outside (0, dt_max]")));
    }
    let mut solver = Solver::new(profile.grid().clone(), config.clone())?;
    let next = solver.step_euler(0.0, profile.u(), dt)?;
    solver.profile(next)
}

/// Loop state on the moving curve at a recorded time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NooseSample {
    pub rho: f64,
    pub length: f64,
    pub area: f64,
}

/// Per-frame scalar diagnostics. Absent values were not computable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub t: f64,
    pub sup_k: Option<f64>,
    pub sup_k_s: Option<f64>,
    pub inf_k: Option<f64>,
    pub vol_total: Option<f64>,
    pub vol_bulb: Option<f64>,
    pub width: Option<f64>,
    pub noose: Option<NooseSample>,
}

impl Diagnostics {
    pub fn compute(t: f64, profile: &RadialProfile, config: &SolverConfig) -> Self {
        let s = profile.s();
        let field = curvature(profile);
        let sup = field.sup(s);
        let inf = field.inf(s);
        let end = profile.domain_end();
        let vol_total = volume(profile, profile.s_left(), end).ok();
        let vol_bulb = config.bulb_from.and_then(|a| volume(profile, a.max(profile.s_left()), end).ok());
        let lo = config.width_from.unwrap_or(profile.s_left());
        Diagnostics {
            t,
            sup_k: sup.map(|(_, k)| k),
            sup_k_s: sup.map(|(i, _)| s[i]),
            inf_k: inf.map(|(_, k)| k),
            vol_total,
            vol_bulb,
            width: width(profile, lo, profile.s_max()).ok(),
            noose: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub t: f64,
    pub u: Vec<f64>,
    pub cap: Option<TipCap>,
    pub diag: Diagnostics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RunStatus {
    Complete,
    Aborted { t: f64, reason: String },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    pub steps: usize,
    pub rejected: usize,
    pub newton_iterations: usize,
    pub dt_min_used: f64,
    pub dt_max_used: f64,
}

/// Recorded snapshots of a flow on a fixed grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowSeries {
    grid: Arc<[f64]>,
    frames: Vec<Frame>,
    pub status: RunStatus,
    pub stats: RunStats,
}

impl FlowSeries {
    pub fn new(grid: Arc<[f64]>, frames: Vec<Frame>, status: RunStatus) -> Result<Self> {
        crate::metric::validate_grid(&grid)?;
        for (k, f) in frames.iter().enumerate() {
            if f.u.len() != grid.len() {
                return Err(Error::LengthMismatch { s: grid.len(), u: f.u.len() });
            }
            if k > 0 && !(f.t > frames[k - 1].t) {
                return Err(Error::InvalidParameter(format!("frame times not increasing at frame {k}")));
            }
        }
        Ok(FlowSeries { grid, frames, status, stats: RunStats::default() })
    }

    /// Series sampled from a closed-form flow.
    pub fn from_fn(grid: Arc<[f64]>, times: &[f64], f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let config = SolverConfig::default();
        let mut frames = Vec::with_capacity(times.len());
        for &t in times {
            let u: Vec<f64> = grid.iter().map(|&s| f(t, s)).collect();
            let p = RadialProfile::new(grid.clone(), u, None)?;
            let diag = Diagnostics::compute(t, &p, &config);
            frames.push(Frame { t, u: p.into_parts().1, cap: None, diag });
        }
        Self::new(grid, frames, RunStatus::Complete)
    }

    pub fn grid(&self) -> &Arc<[f64]> {
        &self.grid
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn frames_mut(&mut self) -> &mut [Frame] {
        &mut self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn is_complete(&self) -> bool {
        self.status == RunStatus::Complete
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        self.frames.iter().map(|f| f.t)
    }

    pub fn t_start(&self) -> f64 {
        self.frames.first().map_or(f64::NAN, |f| f.t)
    }

    pub fn t_end(&self) -> f64 {
        self.frames.last().map_or(f64::NAN, |f| f.t)
    }

    pub fn profile(&self, k: usize) -> Result<RadialProfile> {
        let f = &self.frames[k];
        RadialProfile::new(self.grid.clone(), f.u.clone(), f.cap)
    }

    /// Index of the first frame with `t ≥ time` (within rounding).
    pub fn frame_at_or_after(&self, time: f64) -> Option<usize> {
        let tol = 1e-9 * time.abs().max(1.0);
        let k = self.frames.partition_point(|f| f.t < time - tol);
        (k < self.frames.len()).then_some(k)
    }

    /// Index of the frame nearest to `time`, if it lies within half a cadence.
    pub fn frame_near(&self, time: f64, slack: f64) -> Option<usize> {
        let k = self.frames.partition_point(|f| f.t < time);
        [k.checked_sub(1), Some(k)]
            .into_iter()
            .flatten()
            .filter(|&j| j < self.frames.len())
            .min_by(|&a, &b| (self.frames[a].t - time).abs().total_cmp(&(self.frames[b].t - time).abs()))
            .filter(|&j| (self.frames[j].t - time).abs() <= slack)
    }

    pub fn require_covers(&self, lo: f64, hi: f64) -> Result<()> {
        let tol = 1e-9 * hi.abs().max(1.0);
        if self.frames.is_empty() || self.t_start() > lo + tol || self.t_end() < hi - tol {
            return Err(Error::NotCovered(format!(
                "[{lo}, {hi}] (series spans [{}, {}])",
                self.t_start(),
                self.t_end()
            )));
        }
        Ok(())
    }
}

/// An accepted step handed to observers.
pub struct StepView<'a> {
    pub grid: &'a [f64],
    pub t0: f64,
    pub u0: &'a [f64],
    pub t1: f64,
    pub u1: &'a [f64],
}

/// Callback invoked on every accepted step and every recorded frame.
pub trait Observer {
    fn accepted(&mut self, step: &StepView<'_>) -> Result<()>;

    /// Adds observer data to a frame about to be recorded at `diag.t`.
    fn annotate(&mut self, _u: &[f64], _diag: &mut Diagnostics) {}
}

/// Integrates from `initial` at `t = 0` to `t_end`, recording a frame at every
/// multiple of the cadence. A failure mid-run returns the partial series with
/// `RunStatus::Aborted`.
pub fn run(
    initial: &RadialProfile,
    t_end: f64,
    config: &SolverConfig,
    observers: &mut [&mut dyn Observer],
) -> Result<FlowSeries> {
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(Error::InvalidParameter(format!("t_end must be positive, got {t_end}")));
    }
    let mut solver = Solver::new(initial.grid().clone(), config.clone())?;
    let mut frames = Vec::new();
    let record = |frames: &mut Vec<Frame>,
                  t: f64,
                  u: &[f64],
                  cap: Option<TipCap>,
                  obs: &mut [&mut dyn Observer]|
     -> Result<()> {
        let p = RadialProfile::new(initial.grid().clone(), u.to_vec(), cap)?;
        let mut diag = Diagnostics::compute(t, &p, config);
        for o in obs.iter_mut() {
            o.annotate(u, &mut diag);
        }
        frames.push(Frame { t, u: u.to_vec(), cap, diag });
        Ok(())
    };
    record(&mut frames, 0.0, initial.u(), initial.cap().copied(), observers)?;

    let n_frames = (t_end / config.cadence - 1e-9).ceil().max(1.0) as usize;
    let frame_time = |k: usize| if k >= n_frames { t_end } else { k as f64 * config.cadence };

    let mut stats = RunStats { dt_min_used: f64::INFINITY, ..Default::default() };
    let mut t = 0.0;
    let mut u = initial.u().to_vec();
    let mut prev: Option<(Vec<f64>, f64)> = None;
    let mut dt = config.dt_init;
    let mut next_frame = 1;
    let mut just_rejected = false;
    let mut status = RunStatus::Complete;

    'outer: while next_frame <= n_frames {
        let target = frame_time(next_frame);
        let remaining = target - t;
        let mut dt_cap = dt;
        if let (TimeStepper::Bdf2, Some((_, dt_prev))) = (config.stepper, &prev) {
            dt_cap = dt_cap.min(MAX_RATIO * dt_prev);
        }
        let pieces = (remaining / dt_cap * (1.0 - 1e-9)).ceil().max(1.0);
        let dt_try = remaining / pieces;
        let hits = pieces == 1.0;
        let attempt = match (&prev, config.stepper) {
            (Some((u_prev, dt_prev)), TimeStepper::Bdf2) => solver.step_bdf2(t, u_prev, &u, *dt_prev, dt_try),
            _ => solver.step_euler(t, &u, dt_try),
        };
        // None marks a step rejected for changing u too much
        let next = match attempt {
            Ok(next) => {
                let du = next.iter().zip(&u).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
                if du > config.max_du {
                    Err(None)
                } else {
                    Ok(next)
                }
            }
            Err(e) => Err(Some(e)),
        };
        let next = match next {
            Ok(next) => next,
            Err(e) => {
                stats.rejected += 1;
                dt = 0.5 * dt_try;
                just_rejected = true;
                if dt < config.dt_min {
                    let reason = e.unwrap_or(Error::StepUnderflow { t, dt }).to_string();
                    status = RunStatus::Aborted { t, reason };
                    break 'outer;
                }
                continue;
            }
        };
        let t_new = if hits { target } else { t + dt_try };
        let view = StepView { grid: initial.s(), t0: t, u0: &u, t1: t_new, u1: &next };
        for o in observers.iter_mut() {
            if let Err(e) = o.accepted(&view) {
                status = RunStatus::Aborted { t, reason: e.to_string() };
                break 'outer;
            }
        }
        stats.steps += 1;
        stats.dt_min_used = stats.dt_min_used.min(dt_try);
        stats.dt_max_used = stats.dt_max_used.max(dt_try);
        let old = std::mem::replace(&mut u, next);
        prev = Some((old, dt_try));
        t = t_new;
        // grow the nominal step; dt_try may have been shortened to land on a frame
        if !just_rejected {
            dt = (dt * config.growth).min(config.dt_max);
        }
        just_rejected = false;
        if hits {
            let cap = solver.output_cap(&u);
            record(&mut frames, t, &u, cap, observers)?;
            next_frame += 1;
        }
    }
    stats.newton_iterations = solver.newton_iterations;
    if stats.steps == 0 {
        stats.dt_min_used = 0.0;
    }
    let mut series = FlowSeries::new(initial.grid().clone(), frames, status)?;
    series.stats = stats;
    Ok(series)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvelopePoint {
    pub t: f64,
    pub sup_k: Option<f64>,
    /// `1/(2(1-t))`, present for `t < 1`.
    pub bound: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvatureEnvelope {
    pub points: Vec<EnvelopePoint>,
    pub tolerance: f64,
    /// Largest `sup K - bound` over frames with a bound.
    pub worst_excess: f64,
    pub worst_t: f64,
    pub pass: bool,
}

/// Recorded sup K against the sphere-comparison ceiling `1/(2(1-t))`.
pub fn curvature_upper_envelope(series: &FlowSeries, t_max: f64, tolerance: f64) -> CurvatureEnvelope {
    let mut worst = (f64::NEG_INFINITY, f64::NAN);
    let points = series
        .frames()
        .iter()
        .map(|f| {
            let bound = (f.t < 1.0).then(|| 0.5 / (1.0 - f.t));
            if let (Some(k), Some(b)) = (f.diag.sup_k, bound) {
                if f.t <= t_max && k - b > worst.0 {
                    worst = (k - b, f.t);
                }
            }
            EnvelopePoint { t: f.t, sup_k: f.diag.sup_k, bound }
        })
        .collect();
    CurvatureEnvelope { points, tolerance, worst_excess: worst.0, worst_t: worst.1, pass: worst.0 <= tolerance }
}
