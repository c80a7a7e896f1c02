use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use cbflow::burst::{run_cb_scenario, sweep_rc};
use cbflow::cb::{build_cb_profile, cb_property_report, solve_junctions};
use cbflow::io;
use cbflow::noose::{area_law_report, area_rate_check, moving_loop_check, run_coupled};
use cbflow::oracle::{convergence_study, sphere_loop_run, Oracle};
use cbflow::solver::{run, FlowSeries, RunStatus};
use cbflow::verify::{
    cb_barrier_checks, check_barrier, check_bol_sampled, check_chen_growth, check_chen_inf_k, check_claim_floor,
    check_cusp_domination, check_plane_floor, check_width_bound, detect_t1,
};
use cbflow::{CbParams, CheckReport};
use serde::Serialize;

use crate::config::{output_dir, RunConfig};
use crate::{CbArgs, Common, Outcome, UsageError};

fn load(common: &Common, cb: &CbArgs) -> anyhow::Result<RunConfig> {
    let mut cfg = RunConfig::load(common.config.as_deref())?;
    let e = &mut cfg.experiment;
    if let Some(r) = cb.rc {
        e.r_c = r;
    }
    if cb.lc.is_some() {
        e.l_c = cb.lc;
    }
    if let Some(h) = cb.h {
        e.grid.h = h;
    }
    if let Some(c) = cb.cadence {
        e.solver.cadence = c;
        e.solver.dt_max = e.solver.dt_max.min(c);
    }
    if let Some(s) = cb.seed {
        e.seed = s;
    }
    if common.out.is_some() {
        cfg.out = common.out.clone();
    }
    Ok(cfg)
}

fn usage(e: cbflow::Error) -> anyhow::Error {
    match e {
        cbflow::Error::InvalidParameter(_) => UsageError(e.to_string()).into(),
        e => e.into(),
    }
}

fn create(dir: &Path, name: &str) -> anyhow::Result<BufWriter<File>> {
    let path = dir.join(name);
    let f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> anyhow::Result<()> {
    let mut w = create(dir, name)?;
    io::write_json(&mut w, value)?;
    w.flush()?;
    Ok(())
}

fn write_text(dir: &Path, name: &str, text: &str) -> anyhow::Result<()> {
    let mut w = create(dir, name)?;
    w.write_all(text.as_bytes())?;
    w.flush()?;
    Ok(())
}

fn write_series(dir: &Path, series: &FlowSeries, checkpoint: bool) -> anyhow::Result<()> {
    let w = create(dir, "diagnostics.csv")?;
    io::write_diagnostics_csv(w, series)?;
    if checkpoint {
        let mut w = create(dir, "run.chk")?;
        io::write_checkpoint(&mut w, series)?;
        w.flush()?;
    }
    Ok(())
}

fn describe(c: &CheckReport) -> String {
    match c.worst {
        Some(w) => format!(
            "{}: worst {:.3e} at t = {}, s = {} (tolerance {:.1e}, {} samples)",
            c.name, w.value, w.t, w.s, c.tolerance, c.samples
        ),
        None => format!("{}: {}", c.name, c.note.as_deref().unwrap_or("no samples")),
    }
}

/// Prints one line per check and returns whether all passed.
fn print_checks<'a>(checks: impl IntoIterator<Item = &'a CheckReport>) -> bool {
    let mut ok = true;
    for c in checks {
        if c.pass {
            println!("  ok   {}", describe(c));
        } else {
            ok = false;
            eprintln!("  FAIL {}", describe(c));
        }
    }
    ok
}

fn solver_status(series: &FlowSeries) -> Outcome {
    match &series.status {
        RunStatus::Complete => Outcome::Pass,
        RunStatus::Aborted { t, reason } => {
            eprintln!("solver stopped at t = {t}: {reason}");
            Outcome::SolverFailed
        }
    }
}

fn out_dir(cfg: &RunConfig, default_name: &str) -> anyhow::Result<PathBuf> {
    let name = if cfg.scenario == RunConfig::default().scenario { default_name } else { &cfg.scenario };
    output_dir(cfg.out.as_deref(), name)
}

pub fn build(common: &Common, cb: &CbArgs) -> anyhow::Result<Outcome> {
    let cfg = load(common, cb)?;
    let e = &cfg.experiment;
    let params = solve_junctions(e.r_c, e.l_c()).map_err(usage)?;
    let profile = build_cb_profile(&params, &e.grid).map_err(usage)?;
    let report = cb_property_report(&profile, &params)?;
    let dir = out_dir(&cfg, "build")?;
    write_json(&dir, "params.json", &params)?;
    write_json(&dir, "construction.json", &report)?;
    let mut w = create(&dir, "profile.txt")?;
    io::write_profile(&mut w, &profile)?;
    w.flush()?;
    println!("r_c = {}, l_c = {}, {} nodes -> {}", params.r_c, params.l_c, profile.len(), dir.display());
    println!(
        "  s_b r_c = {:.6}, Vol(U_b) = {:.6}, piece error = {:.3e}",
        report.sb_scaled, report.bulb_volume, report.piece_error
    );
    let flags = [
        ("curvature range", report.curvature_ok),
        ("piece curvature", report.piece_ok),
        ("bulb volume", report.bulb_volume_ok),
        ("s_b bound", report.sb_ok),
        ("disc radius", report.disc_ok),
        ("C1 junctions", report.c1_ok),
        ("spacing ratio", report.spacing_ok),
    ];
    for (name, ok) in flags {
        if !ok {
            eprintln!("  FAIL {name}");
        }
    }
    Ok(if report.pass { Outcome::Pass } else { Outcome::CheckFailed })
}

pub fn oracle_study(
    common: &Common,
    cb: &CbArgs,
    oracle: Oracle,
    t_end: f64,
    refine: usize,
    min_order: f64,
    max_error: f64,
) -> anyhow::Result<Outcome> {
    let cfg = load(common, cb)?;
    if refine == 0 {
        bail!(UsageError("--refine must be at least 1".into()));
    }
    let table =
        convergence_study(oracle, cfg.experiment.grid.h, refine, t_end, &cfg.experiment.solver).map_err(usage)?;
    let dir = out_dir(&cfg, &format!("flow-{}", serde_json::to_value(oracle)?.as_str().unwrap_or("oracle")))?;
    let csv = table.to_csv()?;
    write_text(&dir, "convergence.csv", &csv)?;
    write_json(&dir, "convergence.json", &table)?;
    print!("{csv}");
    let coarse = table.rows[0].max_error;
    let order = table.min_order().unwrap_or(f64::NAN);
    let mut ok = true;
    if !(coarse <= max_error) {
        eprintln!("  FAIL max-error: {coarse:.3e} > {max_error:.1e} at h = {}", table.rows[0].h);
        ok = false;
    }
    if !(order >= min_order) {
        eprintln!("  FAIL order: {order:.3} < {min_order}");
        ok = false;
    }
    Ok(if ok { Outcome::Pass } else { Outcome::CheckFailed })
}

pub fn flow(common: &Common, cb: &CbArgs, t_end: f64, profile: Option<&Path>) -> anyhow::Result<Outcome> {
    let cfg = load(common, cb)?;
    let e = &cfg.experiment;
    let mut solver = e.solver.clone();
    let initial = match profile {
        Some(path) => {
            let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
            io::read_profile(BufReader::new(f)).map_err(|err| UsageError(format!("{}: {err}", path.display())))?
        }
        None => {
            let params = solve_junctions(e.r_c, e.l_c()).map_err(usage)?;
            solver.bulb_from.get_or_insert(params.s0);
            solver.width_from.get_or_insert(params.neck());
            build_cb_profile(&params, &e.grid).map_err(usage)?
        }
    };
    let series = run(&initial, t_end, &solver, &mut []).map_err(usage)?;
    let dir = out_dir(&cfg, "flow")?;
    write_series(&dir, &series, true)?;
    println!("{} frames to t = {} ({} steps) -> {}", series.len(), series.t_end(), series.stats.steps, dir.display());
    Ok(solver_status(&series))
}

pub fn csf(common: &Common, cb: &CbArgs, sphere: bool, t_end: f64) -> anyhow::Result<Outcome> {
    let cfg = load(common, cb)?;
    let e = &cfg.experiment;
    let (coupled, params) = if sphere {
        (sphere_loop_run(e.grid.h, t_end, &e.solver, &e.noose).map_err(usage)?, None)
    } else {
        let params = solve_junctions(e.r_c, e.l_c()).map_err(usage)?;
        let mut solver = e.solver.clone();
        solver.bulb_from.get_or_insert(params.s0);
        solver.width_from.get_or_insert(params.neck());
        let initial = build_cb_profile(&params, &e.grid).map_err(usage)?;
        (run_coupled(&initial, t_end, &solver, &e.noose, &mut []).map_err(usage)?, Some(params))
    };
    let law = area_law_report(&coupled, e.area_rate_tolerance, e.extinction_tolerance);
    let mut checks = vec![law.rate.clone(), moving_loop_check(&coupled.track, e.barrier_tolerance)];
    if let (Some(p), Some(ext)) = (&params, &coupled.extinction) {
        checks.push(check_width_bound(&ext.profile, ext.t, p.r_c, p.neck(), e.width_tolerance));
    }
    let dir = out_dir(&cfg, if sphere { "csf-sphere" } else { "csf" })?;
    write_series(&dir, &coupled.series, true)?;
    io::write_track_csv(create(&dir, "track.csv")?, &coupled.track)?;
    write_json(&dir, "area_law.json", &law)?;
    write_json(&dir, "checks.json", &checks)?;
    println!("A(0) = {:.6}, predicted extinction {:.6}", law.initial_area, law.predicted_extinction);
    match law.extinction {
        Some(t) => {
            println!("  extinction at t = {t:.6} (relative error {:.2e})", law.extinction_error.unwrap_or(f64::NAN))
        }
        None => println!("  loop alive at t = {}", coupled.series.t_end()),
    }
    let mut ok = print_checks(&checks);
    // extinction is only required where the run reaches past the prediction
    if coupled.series.t_end() > law.predicted_extinction * (1.0 + e.extinction_tolerance) && !law.extinction_ok {
        eprintln!("  FAIL extinction time outside {:.0}% of the prediction", 100.0 * e.extinction_tolerance);
        ok = false;
    }
    let status = solver_status(&coupled.series);
    Ok(if status != Outcome::Pass {
        status
    } else if ok {
        Outcome::Pass
    } else {
        Outcome::CheckFailed
    })
}

#[derive(Serialize)]
struct VerifyReport<'a> {
    series: String,
    t_start: f64,
    t_end: f64,
    params: CbParams,
    t1: Option<f64>,
    checks: &'a [CheckReport],
    pass: bool,
}

fn failed(name: &str, err: impl std::fmt::Display) -> CheckReport {
    let mut r = CheckReport::new(name, 0.0).with_note(err.to_string());
    r.pass = false;
    r
}

/// Frame just after the last frame carrying a loop sample.
fn extinction_frame(series: &FlowSeries) -> Option<usize> {
    let last = series.frames().iter().rposition(|f| f.diag.noose.is_some())?;
    (last + 1 < series.len()).then_some(last + 1)
}

pub fn verify(common: &Common, cb: &CbArgs, path: &Path, checks: Option<Vec<String>>) -> anyhow::Result<Outcome> {
    let mut cfg = load(common, cb)?;
    if let Some(list) = checks {
        cfg.checks = list.into_iter().map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect();
    }
    cfg.validate_checks()?;
    let e = &cfg.experiment;
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let series =
        io::read_checkpoint(BufReader::new(f)).map_err(|err| UsageError(format!("{}: {err}", path.display())))?;
    let p = solve_junctions(e.r_c, e.l_c()).map_err(usage)?;
    if series.grid()[0] > p.se || *series.grid().last().unwrap() < p.sb {
        bail!(UsageError(format!("series grid does not match r_c = {}, l_c = {}", p.r_c, p.l_c)));
    }
    let t1 = detect_t1(&series, p.r_c, p.neck()).ok();
    let want = |name: &str| cfg.checks.iter().any(|c| c == name);
    let tol = e.barrier_tolerance;
    let mut out: Vec<CheckReport> = Vec::new();
    if want("barriers") {
        for c in cb_barrier_checks(&p, t1.map(|d| d.t1), series.t_end(), tol) {
            out.push(check_barrier(&series, &c).unwrap_or_else(|err| failed(&c.name, err)));
        }
    }
    if want("claim") {
        match &t1 {
            Some(d) => out.push(check_claim_floor(&series, d, p.r_c, tol)),
            None => out.push(failed("claim-floor", "t1 not detected")),
        }
    }
    if want("cusp") {
        let mut points = vec![(3.5, 16.0)];
        if let Some(d) = &t1 {
            points.insert(0, (d.t1 + 1.0, 15.0));
        }
        for (t, c) in points {
            let name = format!("cusp-domination(C={c})");
            out.push(check_cusp_domination(&series, p.se, t, c, tol).unwrap_or_else(|err| failed(&name, err)));
        }
    }
    if want("chen") {
        out.push(check_chen_inf_k(&series, e.chen_k_tolerance).unwrap_or_else(|err| failed("chen-inf-k", err)));
        out.push(check_chen_growth(&series, e.chen_u_tolerance));
    }
    if want("plane") {
        out.push(check_plane_floor(&series, p.se, tol));
    }
    if want("bol") {
        out.push(
            check_bol_sampled(&series, e.bol_samples, e.seed, p.neck(), e.bol_tolerance)
                .unwrap_or_else(|err| failed("bol-sampled", err)),
        );
    }
    if want("width") {
        let r = extinction_frame(&series)
            .ok_or_else(|| cbflow::Error::NotCovered("no loop extinction in the series".into()))
            .and_then(|k| {
                let prof = series.profile(k)?;
                Ok(check_width_bound(&prof, series.frames()[k].t, p.r_c, p.neck(), e.width_tolerance))
            });
        out.push(r.unwrap_or_else(|err| failed("width-bound", err)));
    }
    if want("area") {
        out.push(area_rate_check(&series, e.area_rate_tolerance));
    }
    let pass = out.iter().all(|c| c.pass);
    let report = VerifyReport {
        series: path.display().to_string(),
        t_start: series.t_start(),
        t_end: series.t_end(),
        params: p,
        t1: t1.map(|d| d.t1),
        checks: &out,
        pass,
    };
    let dir = out_dir(&cfg, "verify")?;
    write_json(&dir, "verify.json", &report)?;
    println!("{} checks on {} frames -> {}", out.len(), series.len(), dir.display());
    print_checks(&out);
    Ok(if pass { Outcome::Pass } else { Outcome::CheckFailed })
}

pub fn sweep(
    common: &Common,
    radii: &[f64],
    lc: Option<f64>,
    h: Option<f64>,
    horizon: Option<f64>,
    jobs: usize,
) -> anyhow::Result<Outcome> {
    let mut cfg = load(common, &CbArgs { lc, h, ..Default::default() })?;
    if let Some(t) = horizon {
        cfg.experiment.horizon = t;
    }
    let (sweep, reports) = sweep_rc(radii, &cfg.experiment, jobs).map_err(usage)?;
    let dir = out_dir(&cfg, "sweep")?;
    let csv = sweep.to_csv()?;
    write_text(&dir, "sweep.csv", &csv)?;
    write_json(&dir, "sweep.json", &sweep)?;
    for rep in reports.iter().flatten() {
        write_json(&dir, &format!("report-rc{}.json", rep.r_c), rep)?;
    }
    print!("{csv}");
    let mut ok = true;
    for row in &sweep.rows {
        if let Some(err) = &row.error {
            eprintln!("  FAIL r_c = {}: {err}", row.r_c);
            ok = false;
        }
    }
    for rep in reports.iter().flatten() {
        for c in rep.failed_checks() {
            eprintln!("  FAIL r_c = {}: {}", rep.r_c, describe(c));
            ok = false;
        }
    }
    println!(
        "l_c = {:?}, exponent = {:?}, increasing = {}, floors = {}",
        sweep.l_c, sweep.exponent, sweep.increasing, sweep.floors_ok
    );
    let exponent_ok = sweep.exponent.is_some_and(|x| (1.0..=2.5).contains(&x)) || radii.len() < 2;
    if !sweep.increasing {
        eprintln!("  FAIL peak sup K not increasing in 1/r_c");
    }
    if !sweep.floors_ok {
        eprintln!("  FAIL some peak below 1/r_c");
    }
    if !exponent_ok {
        eprintln!("  FAIL fitted exponent outside [1, 2.5]");
    }
    ok &= sweep.increasing && sweep.floors_ok && exponent_ok;
    Ok(if ok { Outcome::Pass } else { Outcome::CheckFailed })
}

pub fn report(common: &Common, cb: &CbArgs, horizon: Option<f64>, checkpoint: bool) -> anyhow::Result<Outcome> {
    let mut cfg = load(common, cb)?;
    if let Some(t) = horizon {
        cfg.experiment.horizon = t;
    }
    let scenario = run_cb_scenario(&cfg.experiment).map_err(usage)?;
    let (rep, coupled) = (&scenario.report, &scenario.run);
    let dir = out_dir(&cfg, "report")?;
    write_json(&dir, "report.json", rep)?;
    write_series(&dir, &coupled.series, checkpoint)?;
    io::write_track_csv(create(&dir, "track.csv")?, &coupled.track)?;
    println!("r_c = {}, l_c = {}, {} nodes -> {}", rep.r_c, rep.l_c, rep.nodes, dir.display());
    if let Some(d) = &rep.t1 {
        println!("  t1 = {}", d.t1);
    }
    if let Some((a, b)) = rep.phases.burst_interval {
        println!("  burst [{a}, {b}], peak sup K = {:.4} at t = {}", rep.phases.peak_sup_k, rep.phases.peak_t);
    }
    for note in &rep.notes {
        println!("  note: {note}");
    }
    let checks_ok = print_checks(rep.all_checks());
    if !rep.burst_window_ok {
        eprintln!("  FAIL burst window: overlap {} < 0.01", rep.burst_overlap);
    }
    if !rep.area_law.extinction_ok {
        eprintln!("  FAIL extinction time: {:?} vs {}", rep.area_law.extinction, rep.area_law.predicted_extinction);
    }
    let status = solver_status(&coupled.series);
    Ok(if status != Outcome::Pass {
        status
    } else if rep.pass && checks_ok {
        Outcome::Pass
    } else {
        Outcome::CheckFailed
    })
}
