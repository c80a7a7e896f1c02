use std::sync::Arc;

use cbflow::exact::{cigar, Barrier};
use cbflow::solver::run;
use cbflow::verify::{check_barrier, BarrierCheck, Direction, Window};
use cbflow::{FlowSeries, RadialProfile, SolverConfig, TimeStepper};
use proptest::prelude::*;

fn grid(lo: f64, hi: f64, n: usize) -> Arc<[f64]> {
    (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect()
}

/// Fixed-step backward Euler: the discrete scheme is monotone.
fn fixed_euler(dt: f64) -> SolverConfig {
    SolverConfig {
        stepper: TimeStepper::BackwardEuler,
        dt_init: dt,
        dt_max: dt,
        dt_min: dt,
        max_du: 1e6,
        left_slope: 0.0,
        right_slope: -1.0,
        cadence: 0.05,
        ..SolverConfig::default()
    }
}

fn bump(a: f64, m: f64, w: f64) -> impl Fn(f64) -> f64 {
    move |s: f64| a * (-((s - m) / w).powi(2)).exp()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn ordered_data_stay_ordered(a in 0.01f64..0.5, m in -4.0f64..4.0, w in 0.3f64..1.5) {
        let g = grid(-12.0, 12.0, 300);
        let config = fixed_euler(0.01);
        let lower = RadialProfile::from_fn(g.clone(), None, cigar).unwrap();
        let f = bump(a, m, w);
        let upper = RadialProfile::from_fn(g.clone(), None, |s| cigar(s) + f(s)).unwrap();
        let lo = run(&lower, 0.5, &config, &mut []).unwrap();
        let hi = run(&upper, 0.5, &config, &mut []).unwrap();
        prop_assert_eq!(lo.len(), hi.len());
        for (fl, fh) in lo.frames().iter().zip(hi.frames()) {
            prop_assert_eq!(fl.t, fh.t);
            for (x, y) in fl.u.iter().zip(&fh.u) {
                prop_assert!(y - x >= -1e-10, "t = {}: {} < {}", fl.t, y, x);
            }
        }
    }

    #[test]
    fn time_rescaling_of_a_constant_shift(c in -0.5f64..0.5) {
        // u + c solves the flow with time slowed by e^{2c}
        let g = grid(-12.0, 12.0, 300);
        let base = SolverConfig { left_slope: 0.0, right_slope: -1.0, cadence: 0.05, dt_max: 0.01, ..SolverConfig::default() };
        let p = RadialProfile::from_fn(g.clone(), None, |s| cigar(s) + c).unwrap();
        let series = run(&p, 0.5, &base, &mut []).unwrap();
        let b = Barrier::cigar(1.0, 0.0, 0.0);
        let scale = (-2.0 * c).exp();
        for f in series.frames() {
            for (&s, &u) in g.iter().zip(&f.u) {
                let exact = b.eval(scale * f.t, s).unwrap() + c;
                prop_assert!((u - exact).abs() < 5e-4, "t = {}, s = {}: {} vs {}", f.t, s, u, exact);
            }
        }
    }

    #[test]
    fn barrier_check_detects_a_lifted_flow(lambda in 0.5f64..2.0, lift in 2e-3f64..0.1) {
        let g = grid(-10.0, 10.0, 200);
        let times: Vec<f64> = (0..=10).map(|k| 0.1 * k as f64).collect();
        let b = Barrier::cigar(lambda, 0.0, 0.0);
        let exact = FlowSeries::from_fn(g.clone(), &times, |t, s| b.eval(t, s).unwrap()).unwrap();
        let lifted = FlowSeries::from_fn(g.clone(), &times, |t, s| b.eval(t, s).unwrap() + lift).unwrap();
        let window = Window { t_lo: 0.0, t_hi: 1.0, s_lo: -10.0, s_hi: 10.0 };
        let upper = BarrierCheck::new("upper", b, Direction::Upper, window, 1e-3);
        let lower = BarrierCheck::new("lower", b, Direction::Lower, window, 1e-3);
        prop_assert!(check_barrier(&exact, &upper).unwrap().pass);
        prop_assert!(check_barrier(&exact, &lower).unwrap().pass);
        let r = check_barrier(&lifted, &upper).unwrap();
        prop_assert!(!r.pass);
        prop_assert!((r.worst.unwrap().value - lift).abs() < 1e-9);
        prop_assert!(check_barrier(&lifted, &lower).unwrap().pass);
    }
}
