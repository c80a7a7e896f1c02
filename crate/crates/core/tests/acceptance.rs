//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

use std::f64::consts::PI;
use std::process::ExitCode;

use cbflow::burst::{run_cb_scenario, summarise_sweep, sweep_rc, SweepRow};
use cbflow::cb::{build_cb_profile, cb_property_report, s0_bounds, solve_junctions};
use cbflow::exact::Barrier;
use cbflow::io::{write_diagnostics_csv, write_json, write_track_csv};
use cbflow::metric::{ball_at, TipCap};
use cbflow::noose::area_law_report;
use cbflow::oracle::{convergence_study, sphere_loop_run, Oracle, REFERENCE_H};
use cbflow::{BurstReport, CbGridSpec, CheckReport, NooseConfig, RadialProfile, ScenarioConfig, SolverConfig};

const CONSTRUCTION_RADII: [f64; 4] = [0.1, 0.05, 0.025, 0.0125];
const SWEEP_RADII: [f64; 3] = [0.1, 0.05, 0.025];

const PIECE_TOL: f64 = 1e-3;
const S0_TOL: f64 = 1e-10;
const ORACLE_MAX_ERROR: f64 = 1e-3;
const ORACLE_MIN_ORDER: f64 = 1.8;
const CHEN_K_TOL: f64 = 1e-3;
const CHEN_U_TOL: f64 = 1e-4;
const AREA_RATE_TOL: f64 = 0.01;
const EXTINCTION_TOL: f64 = 0.05;
const WIDTH_TOL: f64 = 1e-3;
const BARRIER_TOL: f64 = 1e-3;
const EARLY_TOL: f64 = 1e-2;
const BURST_RC: f64 = 0.05;
const HORIZON: f64 = 4.5;
const BOL_SAMPLES: usize = 100;
const BOL_CAP_TOL: f64 = 1e-6;

struct Verdict {
    pass: bool,
    lines: Vec<String>,
}

impl Verdict {
    fn new() -> Self {
        Verdict { pass: true, lines: Vec::new() }
    }

    fn require(&mut self, ok: bool, what: impl Into<String>) {
        let what = what.into();
        if !ok {
            self.pass = false;
            self.lines.push(format!("failed: {what}"));
        }
    }

    fn info(&mut self, what: impl Into<String>) {
        self.lines.push(what.into());
    }

    /// Passes when `check` passed at a tolerance no looser than `tol`.
    fn check(&mut self, label: &str, check: Option<&CheckReport>, tol: f64) {
        match check {
            Some(c) => {
                let worst = c.worst.map(|w| format!("{:.3e} at t = {:.4}", w.value, w.t)).unwrap_or_else(|| "-".into());
                self.info(format!("{label} {}: worst {worst}, {} samples", c.name, c.samples));
                self.require(
                    c.tolerance <= tol,
                    format!("{label} {} tolerance {} looser than {tol}", c.name, c.tolerance),
                );
                self.require(c.pass && c.samples > 0, format!("{label} {}", c.name));
            }
            None => self.require(false, format!("{label}: check missing")),
        }
    }
}

fn find<'a>(r: &'a BurstReport, name: &str) -> Option<&'a CheckReport> {
    r.all_checks().find(|c| c.name == name)
}

fn label(r: &BurstReport) -> String {
    format!("r_c={} l_c={}", r.r_c, r.l_c)
}

fn s0_by_bisection(r: f64, l: f64) -> f64 {
    // the hyperbolic interpolation has slope -1 at s0
    let f = |s: f64| r * (r * s + l).tan() + 1.0;
    let (mut a, mut b) = s0_bounds(r, l);
    a += 1e-12 * a.abs();
    b -= 1e-12 * b.abs();
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        if f(a) * f(m) <= 0.0 {
            b = m;
        } else {
            a = m;
        }
    }
    0.5 * (a + b)
}

fn construction() -> Verdict {
    let mut v = Verdict::new();
    for r in CONSTRUCTION_RADII {
        let l = 1.0 / (8.0 * r);
        let p = match solve_junctions(r, l) {
            Ok(p) => p,
            Err(e) => {
                v.require(false, format!("r_c = {r}: {e}"));
                continue;
            }
        };
        let profile = build_cb_profile(&p, &CbGridSpec::default()).expect("profile");
        let rep = cb_property_report(&profile, &p).expect("construction report");
        let closed = -(l + (1.0 / r).atan()) / r;
        let root = s0_by_bisection(r, l);
        let ds0 = (p.s0 - closed).abs().max((p.s0 - root).abs());
        let vol = p.bulb_volume();
        v.info(format!(
            "r_c={r}: piece error {:.3e}, |s0 - closed form| {:.1e}, s_b r_c {:.4}, Vol(U_b)/π {:.4}, {} nodes",
            rep.piece_error,
            ds0,
            p.sb * r,
            vol / PI,
            profile.len()
        ));
        v.require(rep.piece_error <= PIECE_TOL, format!("r_c = {r}: piece error {}", rep.piece_error));
        v.require(ds0 <= S0_TOL, format!("r_c = {r}: s0 off by {ds0:e}"));
        v.require(p.sb <= 1.75 / r, format!("r_c = {r}: s_b = {}", p.sb));
        v.require(2.0 * PI < vol && vol < 10.0 * PI, format!("r_c = {r}: Vol(U_b) = {vol}"));
        v.require(
            (rep.bulb_volume - vol).abs() <= 1e-3 * vol,
            format!("r_c = {r}: quadrature volume {}", rep.bulb_volume),
        );
    }
    v
}

fn oracles() -> Verdict {
    let mut v = Verdict::new();
    for o in [Oracle::Cigar, Oracle::Sphere] {
        match convergence_study(o, REFERENCE_H, 1, 1.0, &SolverConfig::default()) {
            Ok(t) => {
                let e0 = t.rows[0].max_error;
                let order = t.min_order().unwrap_or(f64::NAN);
                v.info(format!(
                    "{o:?}: error {e0:.3e} at h = {}, {:.3e} at h = {}, order {order:.3}",
                    t.rows[0].h, t.rows[1].max_error, t.rows[1].h
                ));
                v.require(e0 <= ORACLE_MAX_ERROR, format!("{o:?} error {e0:e}"));
                v.require(order >= ORACLE_MIN_ORDER, format!("{o:?} order {order}"));
            }
            Err(e) => v.require(false, format!("{o:?}: {e}")),
        }
    }
    v
}

fn chen(runs: &[&BurstReport], frames: usize) -> Verdict {
    let mut v = Verdict::new();
    for r in runs {
        v.check(&label(r), find(r, "chen-inf-k"), CHEN_K_TOL);
        v.check(&label(r), find(r, "chen-growth"), CHEN_U_TOL);
    }
    let inf_k = find(runs[0], "chen-inf-k").map_or(0, |c| c.samples);
    v.require(inf_k == frames, format!("inf K checked on {inf_k} of {frames} frames"));
    v
}

fn area_law(main: &BurstReport) -> Verdict {
    let mut v = Verdict::new();
    match sphere_loop_run(REFERENCE_H, 2.0, &SolverConfig::default(), &NooseConfig::default()) {
        Ok(run) => {
            let law = area_law_report(&run, AREA_RATE_TOL, EXTINCTION_TOL);
            v.check("sphere", Some(&law.rate), AREA_RATE_TOL);
            v.info(format!(
                "sphere: extinction {:?}, predicted {:.6}, relative error {:?}",
                law.extinction, law.predicted_extinction, law.extinction_error
            ));
            v.require(law.extinction_ok, "sphere extinction time");
        }
        Err(e) => v.require(false, format!("sphere loop run: {e}")),
    }
    let law = &main.area_law;
    v.check(&label(main), Some(&law.rate), AREA_RATE_TOL);
    v.info(format!(
        "{}: T_emp {:?}, Vol(U_b)/4π {:.6}, relative error {:?}",
        label(main),
        law.extinction,
        main.params.bulb_volume() / (4.0 * PI),
        law.extinction_error
    ));
    v.require(law.extinction_tolerance <= EXTINCTION_TOL, "extinction tolerance loosened");
    v.require(law.extinction_ok, "CB extinction time");
    v.require(
        (law.predicted_extinction - main.params.bulb_volume() / (4.0 * PI)).abs()
            <= EXTINCTION_TOL * law.predicted_extinction,
        "predicted extinction differs from Vol(U_b)/4π",
    );
    v
}

fn width(runs: &[&BurstReport]) -> Verdict {
    let mut v = Verdict::new();
    for r in runs {
        v.require((r.l_c - 1.0 / (8.0 * r.r_c)).abs() < 1e-12, format!("{} not at l_c = 1/(8 r_c)", label(r)));
        v.check(&label(r), r.width.as_ref(), WIDTH_TOL);
    }
    v
}

fn barriers(main: &BurstReport) -> Verdict {
    let mut v = Verdict::new();
    match &main.t1 {
        Some(d) => {
            v.info(format!("t1 = {}", d.t1));
            v.require(d.t1 > 0.75 && d.t1 < 2.5, format!("t1 = {} outside (0.75, 2.5)", d.t1));
        }
        None => v.require(false, "t1 not detected"),
    }
    v.require(main.r_c == BURST_RC, "barrier run radius");
    for name in
        ["sphere-lower", "coarse-upper-cigar", "refined-upper-cigar", "refined-lower-cigar", "cusp-domination(C=15)"]
    {
        v.check("", find(main, name), BARRIER_TOL);
    }
    v
}

fn burst(main: &BurstReport, t_end: f64) -> Verdict {
    let mut v = Verdict::new();
    v.require(t_end >= HORIZON - 1e-9, format!("run ends at {t_end}"));
    v.check("(a)", Some(&main.early_envelope), EARLY_TOL);
    let ph = &main.phases;
    v.info(format!(
        "(b) level {}: burst {:?}, overlap with (0.75, 2.68) {:.4}, peak {:.2} at t = {}",
        main.burst_level, ph.burst_interval, main.burst_overlap, ph.peak_sup_k, ph.peak_t
    ));
    v.require(main.burst_level >= 1.0 / main.r_c, "burst level below 1/r_c");
    v.require(main.burst_window_ok && main.burst_overlap >= 0.01, "(b) burst window");
    v.check("(c)", Some(&main.recovery), 0.0);
    v.check("(c)", find(main, "plane-floor"), BARRIER_TOL);
    v
}

fn sweep_trend(sweep: &cbflow::SweepReport, scaled: &[&BurstReport]) -> Verdict {
    let mut v = Verdict::new();
    for row in &sweep.rows {
        v.info(format!("r_c={}: peak {:?}, burst [{:?}, {:?}]", row.r_c, row.peak_k, row.burst_start, row.burst_end));
    }
    v.info(format!("l_c = {:?}, fitted exponent {:?}", sweep.l_c, sweep.exponent));
    v.require(sweep.increasing, "peaks not strictly increasing");
    v.require(sweep.floors_ok, "peak below 1/r_c");
    v.require(sweep.exponent.is_some_and(|x| (1.0..=2.5).contains(&x)), "exponent outside [1, 2.5]");
    let rows: Vec<SweepRow> = scaled.iter().map(|r| SweepRow::from(*r)).collect();
    let info = summarise_sweep(rows, None);
    let peaks: Vec<String> = info.rows.iter().map(|r| format!("{:.1}", r.peak_k.unwrap_or(f64::NAN))).collect();
    v.info(format!("informational, l_c = 1/(8 r_c): peaks {}, exponent {:?}", peaks.join(", "), info.exponent));
    v
}

fn bol(runs: &[&BurstReport]) -> Verdict {
    let mut v = Verdict::new();
    for r in runs {
        let c = find(r, "bol-sampled");
        v.check(&label(r), c, 0.0);
        v.require(c.is_some_and(|c| c.samples == BOL_SAMPLES), format!("{} sample count", label(r)));
    }
    let b = Barrier::Sphere { radius: 1.5, s_center: 0.0, t_shift: 0.0 };
    // balls left of 0.5 use the grid quadrature, the rest the analytic cap
    let n = 1750;
    let grid: Vec<f64> = (0..=n).map(|i| -3.0 + 3.5 * i as f64 / n as f64).collect();
    let p = RadialProfile::from_fn(grid, Some(TipCap { model: b, t: 0.0 }), |s| b.eval(0.0, s).unwrap()).unwrap();
    let k = 1.0 / 2.25;
    let mut worst: f64 = 0.0;
    for x in [-2.0, -1.0, -0.3, 0.0, 0.5, 1.0, 2.5] {
        let ball = ball_at(&p, x).unwrap();
        let (a, l) = (ball.area, ball.boundary_length);
        let gap = ((4.0 * PI * a - a * a * k - l * l) / (4.0 * PI * a)).abs();
        worst = worst.max(gap);
    }
    v.info(format!("spherical caps, h = 0.002: |relative equality gap| {worst:.2e}"));
    v.require(worst <= BOL_CAP_TOL, "spherical cap equality");
    v
}

fn diagnostics_bytes(config: &ScenarioConfig) -> (Vec<u8>, Vec<u8>, Vec<u8>) {
    let s = run_cb_scenario(config).expect("scenario");
    let (mut d, mut t, mut j) = (Vec::new(), Vec::new(), Vec::new());
    write_diagnostics_csv(&mut d, &s.run.series).unwrap();
    write_track_csv(&mut t, &s.run.track).unwrap();
    write_json(&mut j, &s.report).unwrap();
    (d, t, j)
}

fn main() -> ExitCode {
    let main_cfg = ScenarioConfig { horizon: HORIZON, ..ScenarioConfig::for_rc(BURST_RC) };
    let main_run = run_cb_scenario(&main_cfg).expect("r_c = 1/20 scenario");
    let frames = main_run.run.series.len();
    let t_end = main_run.run.series.t_end();
    let main = &main_run.report;
    let scaled_10 = run_cb_scenario(&ScenarioConfig::for_rc(0.1)).expect("r_c = 1/10 scenario").report;
    let base = ScenarioConfig { horizon: HORIZON, ..Default::default() };
    let (sweep, sweep_reports) = sweep_rc(&SWEEP_RADII, &base, 1).expect("sweep");
    let sweep_reports: Vec<&BurstReport> = sweep_reports.iter().flatten().collect();
    let run_40 = sweep_reports.iter().copied().find(|r| r.r_c == 0.025);

    let mut all_runs = vec![main, &scaled_10];
    all_runs.extend(sweep_reports.iter().copied());

    let mut width_runs = vec![main];
    width_runs.extend(run_40);
    let mut scaled = vec![&scaled_10, main];
    scaled.extend(run_40);

    let determinism = {
        let mut v = Verdict::new();
        let a = diagnostics_bytes(&main_cfg);
        let b = diagnostics_bytes(&main_cfg);
        v.info(format!("diagnostics {} bytes, track {} bytes, report {} bytes", a.0.len(), a.1.len(), a.2.len()));
        v.require(a.0 == b.0, "diagnostics.csv differs");
        v.require(a.1 == b.1, "track.csv differs");
        v.require(a.2 == b.2, "report.json differs");
        v
    };

    let mut sweep_verdict = sweep_trend(&sweep, &scaled);
    sweep_verdict.require(sweep_reports.len() == SWEEP_RADII.len(), "a sweep run failed");

    let results = [
        ("construction fidelity", construction()),
        ("solver oracle equivalence", oracles()),
        ("Chen curvature and growth bounds", chen(&all_runs, frames)),
        ("CSF area law", area_law(main)),
        ("width estimate", width(&width_runs)),
        ("barrier suite", barriers(main)),
        ("burst phenomenon", burst(main, t_end)),
        ("sweep trend", sweep_verdict),
        ("Bol suite", bol(&all_runs)),
        ("determinism", determinism),
    ];
    let mut ok = true;
    for (i, (name, v)) in results.iter().enumerate() {
        println!("{} criterion {}: {name}", if v.pass { "PASS" } else { "FAIL" }, i + 1);
        for line in &v.lines {
            println!("      {line}");
        }
        ok &= v.pass;
    }
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
