//! End-to-end CB scenario: construction, coupled flow, checks and phase
//! detection, plus sweeps over the cylinder radius.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cb::{build_cb_profile, cb_property_report, solve_junctions, CbGridSpec, CbParams, CbReport};
use crate::error::{Error, Result};
use crate::noose::{area_law_report, moving_loop_check, run_coupled, AreaLawReport, CoupledRun, NooseConfig};
use crate::report::CheckReport;
use crate::solver::{curvature_upper_envelope, CurvatureEnvelope, FlowSeries, SolverConfig};
use crate::verify::{
    cb_barrier_checks, check_barrier, check_bol_sampled, check_chen_growth, check_chen_inf_k, check_claim_floor,
    check_cusp_domination, check_plane_floor, check_pseudolocality, check_width_bound, detect_t1, PseudolocalityReport,
    T1Detection,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    /// Burst level; `None` means `1/r_c`.
    pub burst: Option<f64>,
    pub recovery: f64,
    /// Start of the window in which recovery is required.
    pub recovery_from: f64,
    /// Allowed distance of the burst from `[t1, t1 + 1]`.
    pub t1_margin: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds { burst: None, recovery: 10.0, recovery_from: 4.0, t1_margin: 0.5 }
    }
}

impl Thresholds {
    pub fn burst_level(&self, r_c: f64) -> f64 {
        self.burst.unwrap_or(1.0 / r_c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Bounded,
    Burst,
    Recovered,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseSegment {
    pub phase: Phase,
    pub t_start: f64,
    pub t_end: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseDecomposition {
    pub segments: Vec<PhaseSegment>,
    /// Longest run of frames with `sup K ≥` the burst level.
    pub burst_interval: Option<(f64, f64)>,
    /// Number of separate burst runs; more than one is reported as ambiguous.
    pub burst_runs: usize,
    pub ambiguous: bool,
    pub peak_sup_k: f64,
    pub peak_t: f64,
    /// First time after the burst with `sup K ≤` the recovery level.
    pub recovery_time: Option<f64>,
}

impl PhaseDecomposition {
    pub fn phase_order(&self) -> Vec<Phase> {
        let mut out: Vec<Phase> = Vec::new();
        for seg in &self.segments {
            if out.last() != Some(&seg.phase) {
                out.push(seg.phase);
            }
        }
        out
    }
}

/// Splits the recorded times by thresholding `sup K`.
pub fn detect_phases(series: &FlowSeries, burst_level: f64, recovery_level: f64) -> Result<PhaseDecomposition> {
    if series.is_empty() {
        return Err(Error::NotCovered("empty series".into()));
    }
    let frames = series.frames();
    let sup: Vec<f64> = frames.iter().map(|f| f.diag.sup_k.unwrap_or(f64::NAN)).collect();
    let burst: Vec<bool> = sup.iter().map(|&k| k >= burst_level).collect();

    let mut runs: Vec<(usize, usize)> = Vec::new();
    let mut i = 0;
    while i < burst.len() {
        if burst[i] {
            let j = (i..burst.len()).take_while(|&j| burst[j]).last().unwrap_or(i);
            runs.push((i, j));
            i = j + 1;
        } else {
            i += 1;
        }
    }
    let longest =
        runs.iter().copied().max_by(|a, b| (frames[a.1].t - frames[a.0].t).total_cmp(&(frames[b.1].t - frames[b.0].t)));

    let first_burst = runs.first().map(|r| r.0);
    let last_burst = runs.last().map(|r| r.1);
    let mut segments: Vec<PhaseSegment> = Vec::new();
    for (k, f) in frames.iter().enumerate() {
        let phase = if burst[k] {
            Phase::Burst
        } else if first_burst.is_some_and(|b| k > b) {
            Phase::Recovered
        } else {
            Phase::Bounded
        };
        match segments.last_mut() {
            Some(seg) if seg.phase == phase => seg.t_end = f.t,
            _ => segments.push(PhaseSegment { phase, t_start: f.t, t_end: f.t }),
        }
    }

    let (peak_idx, peak) = sup
        .iter()
        .copied()
        .enumerate()
        .filter(|(_, k)| k.is_finite())
        .fold((0, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
    let recovery_time =
        last_burst.and_then(|b| (b + 1..frames.len()).find(|&k| sup[k] <= recovery_level).map(|k| frames[k].t));
    Ok(PhaseDecomposition {
        segments,
        burst_interval: longest.map(|(a, b)| (frames[a].t, frames[b].t)),
        burst_runs: runs.len(),
        ambiguous: runs.len() > 1,
        peak_sup_k: peak,
        peak_t: frames[peak_idx].t,
        recovery_time,
    })
}

/// Length of `[a, b] ∩ [lo, hi]`.
fn overlap(interval: (f64, f64), lo: f64, hi: f64) -> f64 {
    (interval.1.min(hi) - interval.0.max(lo)).max(0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub r_c: f64,
    /// Cylinder length; `None` means `1/(8 r_c)`.
    pub l_c: Option<f64>,
    pub horizon: f64,
    pub grid: CbGridSpec,
    pub solver: SolverConfig,
    pub noose: NooseConfig,
    pub thresholds: Thresholds,
    /// Allowed violation in `u` for barrier and floor checks.
    pub barrier_tolerance: f64,
    pub chen_k_tolerance: f64,
    pub chen_u_tolerance: f64,
    pub width_tolerance: f64,
    pub area_rate_tolerance: f64,
    pub extinction_tolerance: f64,
    pub early_tolerance: f64,
    pub bol_samples: usize,
    pub bol_tolerance: f64,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            r_c: 0.05,
            l_c: None,
            horizon: 4.5,
            grid: CbGridSpec::default(),
            solver: SolverConfig { cadence: 0.005, dt_max: 0.005, ..SolverConfig::default() },
            noose: NooseConfig::default(),
            thresholds: Thresholds::default(),
            barrier_tolerance: 1e-3,
            chen_k_tolerance: 1e-3,
            chen_u_tolerance: 1e-4,
            width_tolerance: 1e-3,
            area_rate_tolerance: 0.01,
            extinction_tolerance: 0.05,
            early_tolerance: 1e-2,
            bol_samples: 100,
            bol_tolerance: 0.0,
            seed: 20_240_601,
        }
    }
}

impl ScenarioConfig {
    pub fn for_rc(r_c: f64) -> Self {
        ScenarioConfig { r_c, ..Default::default() }
    }

    pub fn l_c(&self) -> f64 {
        self.l_c.unwrap_or(1.0 / (8.0 * self.r_c))
    }

    pub fn validate(&self) -> Result<()> {
        let (r, l) = (self.r_c, self.l_c());
        if !(r > 0.0 && r <= 0.1) {
            return Err(Error::InvalidParameter(format!("r_c = {r} outside (0, 1/10]")));
        }
        if !(l >= 1.0 / (8.0 * r) * (1.0 - 1e-12)) {
            return Err(Error::InvalidParameter(format!("l_c = {l} below 1/(8 r_c)")));
        }
        if !(self.horizon >= 4.0) {
            return Err(Error::InvalidParameter(format!("horizon {} < 4", self.horizon)));
        }
        if self.solver.cadence > 0.01 {
            return Err(Error::InvalidParameter(format!("cadence {} > 0.01", self.solver.cadence)));
        }
        self.solver.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BurstReport {
    pub r_c: f64,
    pub l_c: f64,
    pub params: CbParams,
    pub construction: CbReport,
    pub nodes: usize,
    pub t1: Option<T1Detection>,
    pub phases: PhaseDecomposition,
    pub burst_level: f64,
    /// Overlap of the burst interval with `(3/4, 8/3 + 1/100)`.
    pub burst_overlap: f64,
    pub burst_window_ok: bool,
    pub burst_near_t1: Option<bool>,
    pub early_envelope: CheckReport,
    pub recovery: CheckReport,
    /// `sup K` non-increasing on frames after the recovery time.
    pub monotone_recovery: Option<bool>,
    /// Largest `u + s - s_e` over frames with `t ≥` the recovery start.
    pub plane_ceiling: Option<f64>,
    pub area_law: AreaLawReport,
    pub extinction_before_limit: bool,
    pub width: Option<CheckReport>,
    pub checks: Vec<CheckReport>,
    pub pseudolocality: Option<PseudolocalityReport>,
    pub notes: Vec<String>,
    pub pass: bool,
}

impl BurstReport {
    pub fn failed_checks(&self) -> impl Iterator<Item = &CheckReport> {
        self.all_checks().filter(|c| !c.pass)
    }

    pub fn all_checks(&self) -> impl Iterator<Item = &CheckReport> {
        self.checks.iter().chain([&self.early_envelope, &self.recovery, &self.area_law.rate]).chain(self.width.as_ref())
    }
}

/// Scenario output: the report and the data it was computed from.
pub struct Scenario {
    pub report: BurstReport,
    pub run: CoupledRun,
}

fn envelope_check(env: &CurvatureEnvelope, t_max: f64) -> CheckReport {
    let mut r = CheckReport::new("early-sup-k", env.tolerance);
    for p in env.points.iter().filter(|p| p.t <= t_max) {
        if let (Some(k), Some(b)) = (p.sup_k, p.bound) {
            r.observe(k - b, p.t, f64::NAN);
        }
    }
    r.require_samples()
}

/// Checks used once the coupled run is available.
pub fn cb_checks(
    series: &FlowSeries,
    p: &CbParams,
    t1: Option<&T1Detection>,
    config: &ScenarioConfig,
) -> Result<Vec<CheckReport>> {
    let horizon = series.t_end();
    let tol = config.barrier_tolerance;
    let barriers = cb_barrier_checks(p, t1.map(|d| d.t1), horizon, tol);
    let mut checks: Vec<CheckReport> = barriers.par_iter().map(|c| check_barrier(series, c)).collect::<Result<_>>()?;
    if let Some(t1) = t1 {
        checks.push(check_claim_floor(series, t1, p.r_c, tol));
        if t1.t1 + 1.0 <= horizon {
            checks.push(check_cusp_domination(series, p.se, t1.t1 + 1.0, 15.0, tol)?);
        }
    }
    if horizon >= 3.5 {
        checks.push(check_cusp_domination(series, p.se, 3.5, 16.0, tol)?);
    }
    checks.push(check_chen_inf_k(series, config.chen_k_tolerance)?);
    checks.push(check_chen_growth(series, config.chen_u_tolerance));
    checks.push(check_plane_floor(series, p.se, tol));
    checks.push(check_bol_sampled(series, config.bol_samples, config.seed, p.neck(), config.bol_tolerance)?);
    Ok(checks)
}

/// Builds the CB surface, runs the coupled flow to the horizon and evaluates
/// every check.
pub fn run_cb_scenario(config: &ScenarioConfig) -> Result<Scenario> {
    config.validate()?;
    let (r_c, l_c) = (config.r_c, config.l_c());
    let params = solve_junctions(r_c, l_c)?;
    let initial = build_cb_profile(&params, &config.grid)?;
    let construction = cb_property_report(&initial, &params)?;
    if !construction.pass {
        return Err(Error::Hypotheses(format!(
            "construction checks failed: {}",
            serde_json::to_string(&construction).unwrap_or_default()
        )));
    }
    let mut solver = config.solver.clone();
    solver.bulb_from.get_or_insert(params.s0);
    solver.width_from.get_or_insert(params.neck());
    let run = run_coupled(&initial, config.horizon, &solver, &config.noose, &mut [])?;
    let report = evaluate(config, params, construction, &run)?;
    Ok(Scenario { report, run })
}

fn evaluate(
    config: &ScenarioConfig,
    params: CbParams,
    construction: CbReport,
    run: &CoupledRun,
) -> Result<BurstReport> {
    let series = &run.series;
    let r_c = params.r_c;
    let mut notes = Vec::new();
    if !series.is_complete() {
        notes.push(format!("run stopped early: {:?}", series.status));
    }
    let t1 = match detect_t1(series, r_c, params.neck()) {
        Ok(d) => Some(d),
        Err(e) => {
            notes.push(e.to_string());
            None
        }
    };
    let level = config.thresholds.burst_level(r_c);
    let phases = detect_phases(series, level, config.thresholds.recovery)?;
    if phases.ambiguous {
        notes.push(format!("{} separate burst runs above {level}", phases.burst_runs));
    }
    let window_hi = 8.0 / 3.0 + 0.01;
    let burst_overlap = phases.burst_interval.map_or(0.0, |b| overlap(b, 0.75, window_hi));
    let burst_near_t1 = match (phases.burst_interval, &t1) {
        (Some((a, b)), Some(d)) => {
            let m = config.thresholds.t1_margin;
            Some(a > d.t1 - m && b < d.t1 + 1.0 + m)
        }
        _ => None,
    };

    let early_envelope = envelope_check(&curvature_upper_envelope(series, 0.9, config.early_tolerance), 0.9);
    let from = config.thresholds.recovery_from;
    let mut recovery = CheckReport::new("recovered-sup-k", 0.0);
    let mut plane_ceiling: Option<f64> = None;
    for f in series.frames().iter().filter(|f| f.t >= from - 1e-12) {
        match (f.diag.sup_k, f.diag.sup_k_s) {
            (Some(k), Some(s)) => recovery.observe(k - config.thresholds.recovery, f.t, s),
            _ => recovery.observe(f64::NAN, f.t, f64::NAN),
        }
        let c = series.grid().iter().zip(&f.u).map(|(s, u)| u + s - params.se).fold(f64::NEG_INFINITY, f64::max);
        plane_ceiling = Some(plane_ceiling.map_or(c, |p| p.max(c)));
    }
    let recovery = recovery.require_samples();
    let monotone_recovery = phases.recovery_time.map(|tr| {
        let ks: Vec<f64> = series.frames().iter().filter(|f| f.t >= tr).filter_map(|f| f.diag.sup_k).collect();
        ks.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-6))
    });

    let area_law = area_law_report(run, config.area_rate_tolerance, config.extinction_tolerance);
    let extinction_before_limit = run.extinction.as_ref().is_some_and(|e| e.t < 2.5);
    let width =
        run.extinction.as_ref().map(|e| check_width_bound(&e.profile, e.t, r_c, params.neck(), config.width_tolerance));

    let mut checks = cb_checks(series, &params, t1.as_ref(), config)?;
    checks.push(moving_loop_check(&run.track, config.barrier_tolerance));

    let mid = -0.5 * params.l_c / r_c;
    let pseudolocality = match check_pseudolocality(series, mid, 0.25 * params.l_c, 0.1) {
        Ok(r) => Some(r),
        Err(e) => {
            notes.push(format!("pseudolocality: {e}"));
            None
        }
    };

    let mut report = BurstReport {
        r_c,
        l_c: params.l_c,
        params,
        construction,
        nodes: series.grid().len(),
        t1,
        phases,
        burst_level: level,
        burst_overlap,
        burst_window_ok: burst_overlap >= 0.01,
        burst_near_t1,
        early_envelope,
        recovery,
        monotone_recovery,
        plane_ceiling,
        area_law,
        extinction_before_limit,
        width,
        checks,
        pseudolocality,
        notes,
        pass: false,
    };
    report.pass = series.is_complete()
        && report.t1.is_some_and(|d| d.in_expected_range())
        && report.burst_window_ok
        && report.area_law.extinction_ok
        && report.extinction_before_limit
        && report.width.is_some()
        && report.all_checks().all(|c| c.pass);
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub r_c: f64,
    pub t1: Option<f64>,
    pub burst_start: Option<f64>,
    pub burst_end: Option<f64>,
    pub peak_k: Option<f64>,
    pub recovery_time: Option<f64>,
    pub pass: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    /// Cylinder length shared by every run.
    pub l_c: Option<f64>,
    pub rows: Vec<SweepRow>,
    /// Least-squares slope of `log peak` against `log(1/r_c)`.
    pub exponent: Option<f64>,
    /// Peaks strictly increase with `1/r_c`.
    pub increasing: bool,
    /// Every peak is at least `1/r_c`.
    pub floors_ok: bool,
}

impl SweepReport {
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["r_c", "t1", "burst_start", "burst_end", "peakK", "recovery_time"])?;
        let cell = |x: Option<f64>| x.map_or_else(String::new, |v| format!("{v:.10e}"));
        for r in &self.rows {
            w.write_record([
                format!("{:.10e}", r.r_c),
                cell(r.t1),
                cell(r.burst_start),
                cell(r.burst_end),
                cell(r.peak_k),
                cell(r.recovery_time),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error().to_string()))?;
        Ok(String::from_utf8(bytes).expect("ascii"))
    }
}

impl From<&BurstReport> for SweepRow {
    fn from(r: &BurstReport) -> Self {
        SweepRow {
            r_c: r.r_c,
            t1: r.t1.map(|d| d.t1),
            burst_start: r.phases.burst_interval.map(|b| b.0),
            burst_end: r.phases.burst_interval.map(|b| b.1),
            peak_k: Some(r.phases.peak_sup_k),
            recovery_time: r.phases.recovery_time,
            pass: r.pass,
            error: None,
        }
    }
}

/// Least-squares slope of `y` against `x`.
pub fn fit_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Summarises per-run outcomes; failed runs are kept as rows with an error.
pub fn summarise_sweep(rows: Vec<SweepRow>, l_c: Option<f64>) -> SweepReport {
    let mut ok: Vec<(f64, f64)> =
        rows.iter().filter_map(|r| r.peak_k.filter(|_| r.error.is_none()).map(|k| (r.r_c, k))).collect();
    ok.sort_by(|a, b| b.0.total_cmp(&a.0));
    let increasing = ok.len() == rows.len() && ok.windows(2).all(|w| w[1].1 > w[0].1);
    let floors_ok = ok.len() == rows.len() && ok.iter().all(|&(r, k)| k >= 1.0 / r);
    let logs: Vec<(f64, f64)> = ok.iter().filter(|p| p.1 > 0.0).map(|&(r, k)| ((1.0 / r).ln(), k.ln())).collect();
    SweepReport { l_c, rows, exponent: fit_slope(&logs), increasing, floors_ok }
}

/// Cylinder length used by a sweep: the base value, or else the smallest
/// length admissible for every radius, so that only `r_c` varies.
pub fn sweep_length(radii: &[f64], base: &ScenarioConfig) -> Option<f64> {
    base.l_c.or_else(|| {
        let r_min = radii.iter().copied().filter(|r| *r > 0.0).reduce(f64::min)?;
        Some(1.0 / (8.0 * r_min))
    })
}

/// Runs one scenario per radius on at most `jobs` threads. Rows keep the
/// input order.
pub fn sweep_rc(radii: &[f64], base: &ScenarioConfig, jobs: usize) -> Result<(SweepReport, Vec<Option<BurstReport>>)> {
    let l_c = sweep_length(radii, base);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    let results: Vec<Result<BurstReport>> = pool.install(|| {
        radii
            .par_iter()
            .map(|&r_c| {
                let cfg = ScenarioConfig { r_c, l_c, ..base.clone() };
                run_cb_scenario(&cfg).map(|s| s.report)
            })
            .collect()
    });
    let mut rows = Vec::with_capacity(radii.len());
    let mut reports = Vec::with_capacity(radii.len());
    for (&r_c, res) in radii.iter().zip(results) {
        match res {
            Ok(rep) => {
                rows.push(SweepRow::from(&rep));
                reports.push(Some(rep));
            }
            Err(e) => {
                rows.push(SweepRow {
                    r_c,
                    t1: None,
                    burst_start: None,
                    burst_end: None,
                    peak_k: None,
                    recovery_time: None,
                    pass: false,
                    error: Some(e.to_string()),
                });
                reports.push(None);
            }
        }
    }
    Ok((summarise_sweep(rows, l_c), reports))
}
