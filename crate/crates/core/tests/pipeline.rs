use std::io::BufReader;

use cbflow::burst::{cb_checks, run_cb_scenario};
use cbflow::io::{read_checkpoint, read_profile, write_checkpoint, write_diagnostics_csv, write_profile};
use cbflow::verify::detect_t1;
use cbflow::ScenarioConfig;

#[test]
fn scenario_survives_a_checkpoint_round_trip() {
    let config = ScenarioConfig::for_rc(0.1);
    let scenario = run_cb_scenario(&config).unwrap();
    let report = &scenario.report;
    assert!(report.pass, "{:?}", report.failed_checks().map(|c| &c.name).collect::<Vec<_>>());
    let series = &scenario.run.series;

    let mut buf = Vec::new();
    write_checkpoint(&mut buf, series).unwrap();
    let back = read_checkpoint(BufReader::new(&buf[..])).unwrap();
    assert_eq!(&back, series);

    let mut a = Vec::new();
    let mut b = Vec::new();
    write_diagnostics_csv(&mut a, series).unwrap();
    write_diagnostics_csv(&mut b, &back).unwrap();
    assert_eq!(a, b);

    // checks recomputed from the reloaded series agree with the scenario's
    let p = &report.params;
    let t1 = detect_t1(&back, p.r_c, p.neck()).unwrap();
    assert_eq!(Some(&t1), report.t1.as_ref());
    let again = cb_checks(&back, p, Some(&t1), &config).unwrap();
    let series_checks: Vec<_> = report.checks.iter().filter(|c| c.name != "moving-loop-length").cloned().collect();
    assert_eq!(again, series_checks);
}

#[test]
fn initial_profile_round_trips() {
    let scenario_cfg = ScenarioConfig::for_rc(0.1);
    let p = cbflow::cb::solve_junctions(scenario_cfg.r_c, scenario_cfg.l_c()).unwrap();
    let profile = cbflow::cb::build_cb_profile(&p, &scenario_cfg.grid).unwrap();
    let mut buf = Vec::new();
    write_profile(&mut buf, &profile).unwrap();
    let back = read_profile(BufReader::new(&buf[..])).unwrap();
    assert_eq!(back, profile);
}

#[test]
fn invalid_scenarios_are_rejected() {
    for cfg in [
        ScenarioConfig::for_rc(0.2),
        ScenarioConfig { l_c: Some(0.5), ..ScenarioConfig::for_rc(0.05) },
        ScenarioConfig { horizon: 3.0, ..ScenarioConfig::for_rc(0.1) },
    ] {
        assert!(run_cb_scenario(&cfg).is_err(), "{cfg:?}");
    }
}
