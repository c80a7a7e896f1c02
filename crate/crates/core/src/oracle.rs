//! Solver runs against closed-form flows, and grid refinement studies.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::Barrier;
use crate::metric::RadialProfile;
use crate::noose::{run_coupled, CoupledRun, NooseConfig};
use crate::solver::{run, SolverConfig};

/// Spacing at which the base time controls apply unchanged.
pub const REFERENCE_H: f64 = 0.04;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Oracle {
    /// Steady soliton `C(s + 2t)`.
    Cigar,
    /// Round sphere of radius 2, extinct at `t = 2`.
    Sphere,
}

impl std::str::FromStr for Oracle {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cigar" => Ok(Oracle::Cigar),
            "sphere" => Ok(Oracle::Sphere),
            _ => Err(Error::InvalidParameter(format!("unknown oracle {s:?} (expected cigar or sphere)"))),
        }
    }
}

impl Oracle {
    pub fn barrier(self) -> Barrier {
        match self {
            Oracle::Cigar => Barrier::cigar(1.0, 0.0, 0.0),
            Oracle::Sphere => Barrier::Sphere { radius: 2.0, s_center: 0.0, t_shift: 0.0 },
        }
    }

    pub fn domain(self) -> (f64, f64) {
        (-12.0, 12.0)
    }

    /// Boundary slopes `(left, right)` of the closed form far from the tip.
    pub fn slopes(self) -> (f64, f64) {
        match self {
            Oracle::Cigar => (0.0, -1.0),
            Oracle::Sphere => (1.0, -1.0),
        }
    }

    /// Initial profile on a uniform grid of spacing `h`, and the solver
    /// configuration with matching boundary slopes and scaled time controls.
    pub fn setup(self, h: f64, base: &SolverConfig) -> Result<(RadialProfile, SolverConfig)> {
        let b = self.barrier();
        let (lo, hi) = self.domain();
        let (left, right) = self.slopes();
        let grid = uniform(lo, hi, h)?;
        let p = RadialProfile::from_fn(grid, None, |s| b.eval(0.0, s).unwrap_or(f64::NAN))?;
        Ok((p, SolverConfig { left_slope: left, right_slope: right, ..scaled_time_controls(base, h) }))
    }
}

fn uniform(lo: f64, hi: f64, h: f64) -> Result<Arc<[f64]>> {
    if !(h > 0.0) || !(hi > lo) {
        return Err(Error::InvalidParameter(format!("grid [{lo}, {hi}] with h = {h}")));
    }
    let n = ((hi - lo) / h).round() as usize;
    Ok((0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect())
}

/// Scales `dt_max` and `max_du` with `h / REFERENCE_H`, so that time and space
/// errors shrink together under refinement.
pub fn scaled_time_controls(base: &SolverConfig, h: f64) -> SolverConfig {
    let f = h / REFERENCE_H;
    SolverConfig {
        dt_max: base.dt_max * f,
        dt_init: base.dt_init.min(base.dt_max * f),
        max_du: base.max_du * f,
        ..base.clone()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleRun {
    pub h: f64,
    pub nodes: usize,
    /// Max-norm error over every recorded frame and node.
    pub max_error: f64,
    pub worst_t: f64,
    pub worst_s: f64,
    pub steps: usize,
}

/// Loop start used by [`sphere_loop_run`] when the configured start is the
/// equator, where the loop would vanish together with the sphere.
pub const SPHERE_LOOP_START: f64 = 1.0;

/// Coupled flow on the sphere oracle, stopped at 95% of its extinction time.
pub fn sphere_loop_run(h: f64, t_end: f64, base: &SolverConfig, noose: &NooseConfig) -> Result<CoupledRun> {
    let (p, config) = Oracle::Sphere.setup(h, base)?;
    let mut noose = noose.clone();
    if noose.start == 0.0 {
        noose.start = SPHERE_LOOP_START;
    }
    let Barrier::Sphere { radius, .. } = Oracle::Sphere.barrier() else { unreachable!() };
    run_coupled(&p, t_end.min(0.95 * radius * radius / 2.0), &config, &noose, &mut [])
}

/// Evolves the closed form's initial data to `t_end` and records the error.
pub fn run_oracle(oracle: Oracle, h: f64, t_end: f64, base: &SolverConfig) -> Result<OracleRun> {
    let b = oracle.barrier();
    let (p, config) = oracle.setup(h, base)?;
    let grid = p.grid().clone();
    let series = run(&p, t_end, &config, &mut [])?;
    if !series.is_complete() {
        return Err(Error::InvalidParameter(format!("oracle run stopped: {:?}", series.status)));
    }
    let mut worst = (0.0, 0.0, 0.0);
    for f in series.frames() {
        for (&s, &u) in grid.iter().zip(&f.u) {
            let e = (u - b.eval(f.t, s)?).abs();
            if e > worst.0 || e.is_nan() {
                worst = (e, f.t, s);
            }
        }
    }
    Ok(OracleRun {
        h,
        nodes: grid.len(),
        max_error: worst.0,
        worst_t: worst.1,
        worst_s: worst.2,
        steps: series.stats.steps,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTable {
    pub oracle: Oracle,
    pub t_end: f64,
    pub rows: Vec<OracleRun>,
    /// `log2(e_k / e_{k+1})` between consecutive levels.
    pub orders: Vec<f64>,
}

impl ConvergenceTable {
    pub fn min_order(&self) -> Option<f64> {
        self.orders.iter().copied().reduce(f64::min)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["h", "nodes", "max_error", "worst_t", "worst_s", "steps", "order"])?;
        for (k, r) in self.rows.iter().enumerate() {
            let order = k.checked_sub(1).map_or_else(String::new, |j| format!("{:e}", self.orders[j]));
            w.write_record([
                format!("{:e}", r.h),
                r.nodes.to_string(),
                format!("{:e}", r.max_error),
                format!("{:e}", r.worst_t),
                format!("{:e}", r.worst_s),
                r.steps.to_string(),
                order,
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error().to_string()))?;
        Ok(String::from_utf8(bytes).expect("ascii"))
    }
}

/// Runs at `h0, h0/2, …` (`refinements` halvings) and reports observed orders.
pub fn convergence_study(
    oracle: Oracle,
    h0: f64,
    refinements: usize,
    t_end: f64,
    base: &SolverConfig,
) -> Result<ConvergenceTable> {
    let rows = (0..=refinements)
        .map(|k| run_oracle(oracle, h0 / f64::powi(2.0, k as i32), t_end, base))
        .collect::<Result<Vec<_>>>()?;
    let orders = rows.windows(2).map(|w| (w[0].max_error / w[1].max_error).log2()).collect();
    Ok(ConvergenceTable { oracle, t_end, rows, orders })
}
