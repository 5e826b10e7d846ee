use containment::frac::FracOrder;
use containment::graph::AgentId;
use containment::report::build_report;
use containment::scenario::{preset_karate, preset_karate_inside, Scenario};
use containment::sim::{run_fractional, run_integer_discrete, Termination};

fn short(mut s: Scenario, alpha: f64, horizon: f64, step: f64) -> Scenario {
    s.config.order = FracOrder::new(alpha).unwrap();
    s.config.horizon = horizon;
    s.config.step = step;
    s
}

#[test]
fn runs_are_deterministic() {
    let s = short(preset_karate(3), 0.7, 2.0, 1e-3);
    let a = run_fractional(&s.config).unwrap();
    let b = run_fractional(&s.config).unwrap();
    assert_eq!(a, b);
}

#[test]
fn leaders_never_move() {
    for alpha in [0.5, 1.0] {
        let s = short(preset_karate(1), alpha, 3.0, 1e-3);
        let rec = run_fractional(&s.config).unwrap();
        for state in &rec.states {
            for l in s.config.topology.leaders() {
                assert_eq!(state.get(l), s.config.initial_states.get(l));
            }
        }
    }
}

#[test]
fn discrete_and_fractional_agree_at_order_one() {
    for seed in 0..5 {
        let s = short(preset_karate(seed), 1.0, 5.0, 1e-3);
        let a = run_fractional(&s.config).unwrap();
        let b = run_integer_discrete(&s.config).unwrap();
        let diff = a
            .final_states()
            .unwrap()
            .as_flat()
            .iter()
            .zip(b.final_states().unwrap().as_flat())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        assert!(diff <= 10.0 * s.config.step, "seed {seed}: {diff:e}");
        let c = b.coefficients.unwrap();
        assert!(c.min_coefficient >= 0.0 && c.max_sum_error <= 1e-12);
    }
}

#[test]
fn spread_and_hull_volume_do_not_grow() {
    for alpha in [0.5, 0.8, 1.0] {
        let s = short(preset_karate(4), alpha, 5.0, 1e-3);
        let rec = run_fractional(&s.config).unwrap();
        let r = build_report(&rec, &s.config.topology, &s.config.params);
        for w in r.hull_volume_series.windows(2) {
            assert!(w[1] <= w[0] + 1e-9);
        }
        for w in r.spread_series.windows(2) {
            for (a, b) in w[0].iter().zip(&w[1]) {
                assert!(b <= &(a + 1e-9));
            }
        }
    }
}

#[test]
fn inside_start_stays_inside() {
    for alpha in [0.5, 1.0] {
        let s = short(preset_karate_inside(2), alpha, 5.0, 1e-3);
        let rec = run_fractional(&s.config).unwrap();
        let r = build_report(&rec, &s.config.topology, &s.config.params);
        assert!(r.max_hull_distance_series.iter().all(|d| *d <= 1e-9));
    }
}

#[test]
fn record_stride_does_not_change_dynamics() {
    let mut s = short(preset_karate(5), 0.8, 1.0, 1e-3);
    let full = run_fractional(&s.config).unwrap();
    s.config.record_every = 10;
    let thin = run_fractional(&s.config).unwrap();
    assert_eq!(full.final_states(), thin.final_states());
    assert!(thin.states.len() < full.states.len() / 5);
}

#[test]
fn large_step_is_a_barrier_breach_for_the_fractional_scheme() {
    let s = short(preset_karate(0), 0.5, 50.0, 5.0);
    let f = run_fractional(&s.config).unwrap_err();
    assert!(matches!(f.partial.termination, Termination::Aborted { .. }));
    assert!(!f.partial.states.is_empty());
}

// The lower-order network leaves its start faster but settles more slowly:
// at the end of the horizon it is further from equilibrium.
#[test]
fn lower_order_fast_start_slow_tail() {
    let base = preset_karate(6);
    let run = |alpha| {
        let s = short(base.clone(), alpha, 20.0, 1e-3);
        let rec = run_fractional(&s.config).unwrap();
        let r = build_report(&rec, &s.config.topology, &s.config.params);
        (rec, r)
    };
    let (rec_half, half) = run(0.5);
    let (rec_one, one) = run(1.0);
    let first = |rec: &containment::sim::TrajectoryRecord| {
        let f = AgentId(0);
        let q0 = rec.states[0].get(f);
        let q1 = rec.states[10].get(f);
        q0.iter()
            .zip(q1)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt()
    };
    assert!(first(&rec_half) > first(&rec_one));
    let worst = |v: &[f64]| v.iter().copied().fold(0.0, f64::max);
    assert!(worst(&half.equilibrium_residuals) > worst(&one.equilibrium_residuals));
    assert!(half.completed && one.completed);
}
