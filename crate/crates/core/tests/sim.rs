use etc_traffic::etcmodel::{EtcModel, ModelSpec};
use etc_traffic::partition::grid_partition;
use etc_traffic::pipeline::build_abstraction;
use etc_traffic::quotient::Provenance;
use etc_traffic::reference::{abstraction_config, model_spec};
use etc_traffic::sim::{inter_sample, monte_carlo_bounds, simulate, validate, Disturbance, EventSystem, SimOptions};
use etc_traffic::symkernel::IntervalBox;

fn scalar(field: &str, trigger: &str, lo: f64, hi: f64) -> EtcModel {
    EtcModel::from_spec(&ModelSpec {
        states: vec!["x".into()],
        errors: None,
        disturbances: vec![],
        field: vec![field.into()],
        trigger: trigger.into(),
        disturbance_lo: vec![],
        disturbance_hi: vec![],
        state_lo: vec![lo],
        state_hi: vec![hi],
        heartbeat: None,
    })
    .unwrap()
}

#[test]
fn constant_field_triggers_at_a_over_c() {
    let m = scalar("-2", "e_x^2 - 0.01", -1.0, 1.0);
    let sys = EventSystem::from_model(&m);
    for x0 in [-0.5, 0.0, 0.3] {
        let ev = inter_sample(&sys, &[x0], 0.0, &Disturbance::Zero, 1.0, &SimOptions::default()).unwrap();
        assert!(!ev.capped);
        assert!((ev.tau - 0.05).abs() <= 1e-6, "{}", ev.tau);
    }
    let ev = inter_sample(&sys, &[0.0], 0.0, &Disturbance::Zero, 0.02, &SimOptions::default()).unwrap();
    assert!(ev.capped);
    assert_eq!(ev.tau, 0.02);
}

#[test]
fn decay_matches_the_closed_form() {
    let a: f64 = 0.1;
    let m = scalar("-x", "e_x^2 - 0.01", -1.0, 1.0);
    let sys = EventSystem::from_model(&m);
    let opts = SimOptions::default();
    for x0 in [0.5, 0.6, 0.75, 0.9, 1.0] {
        let ev = inter_sample(&sys, &[x0], 0.0, &Disturbance::Zero, 1.0, &opts).unwrap();
        let expect = -(1.0 - a / x0).ln();
        assert!((ev.tau - expect).abs() <= 1e-8, "x0 = {x0}: {} vs {expect}", ev.tau);
        assert!(sys.trigger_value(&ev.y, &[]).abs() <= 1e-8 * sys.trigger_scale());
    }
    let region = IntervalBox::from_bounds(&[0.5], &[1.0]).unwrap();
    let (lo, hi) = monte_carlo_bounds(&m, &region, 50, 1, 0.01, 1.0, 4, &opts).unwrap();
    assert!(lo >= a);
    assert!((lo + (1.0 - a).ln()).abs() <= 1e-8, "{lo}");
    assert!((hi + (1.0 - a / 0.5).ln()).abs() <= 1e-8, "{hi}");
}

#[test]
fn events_are_localized_on_the_benchmark() {
    let m = EtcModel::from_spec(&model_spec(false)).unwrap();
    let sys = EventSystem::from_model(&m);
    let d = Disturbance::Zero;
    let trace = simulate(&m, &[0.8, -0.8], 2.0, &d, 0.025, None, &SimOptions::default()).unwrap();
    let mut checked = 0;
    for w in trace.samples.windows(2) {
        if w[0].capped {
            continue;
        }
        let mut y = w[1].x.clone();
        y.extend(w[0].x.iter().zip(&w[1].x).map(|(a, b)| a - b));
        assert!(sys.trigger_value(&y, &[]).abs() <= 1e-8 * sys.trigger_scale());
        checked += 1;
    }
    assert!(checked > 10);
}

#[test]
fn zero_disturbance_reproduces_the_unperturbed_trace() {
    let m = EtcModel::from_spec(&model_spec(false)).unwrap();
    let md = EtcModel::from_spec(&model_spec(true)).unwrap();
    let opts = SimOptions::default();
    let a = simulate(&m, &[0.8, -0.8], 1.0, &Disturbance::Zero, 0.04, None, &opts).unwrap();
    let b = simulate(&md, &[0.8, -0.8], 1.0, &Disturbance::Zero, 0.04, None, &opts).unwrap();
    let c = simulate(&md, &[0.8, -0.8], 1.0, &Disturbance::Constant { value: vec![0.0] }, 0.04, None, &opts).unwrap();
    assert_eq!(a.samples, b.samples);
    assert_eq!(a.samples, c.samples);
    let s = simulate(&md, &[0.8, -0.8], 1.0, &Disturbance::Constant { value: vec![0.1] }, 0.04, None, &opts).unwrap();
    assert_ne!(a.samples, s.samples);
}

#[test]
fn monte_carlo_degenerate_and_signal_independent_cases() {
    let m = EtcModel::from_spec(&model_spec(false)).unwrap();
    let opts = SimOptions::default();
    let r = grid_partition(m.state_box(), &[7, 7]).unwrap().region(11).unwrap().bx.clone();
    let (lo, hi) = monte_carlo_bounds(&m, &r, 1, 1, 0.01, 0.025, 7, &opts).unwrap();
    assert_eq!(lo, hi);
    let one = monte_carlo_bounds(&m, &r, 30, 1, 0.01, 0.025, 7, &opts).unwrap();
    let many = monte_carlo_bounds(&m, &r, 30, 8, 0.01, 0.025, 7, &opts).unwrap();
    assert_eq!(one, many);
    assert!(one.0 <= lo && lo <= one.1);
}

#[test]
fn shrunken_upper_bounds_are_caught() {
    let md = EtcModel::from_spec(&model_spec(true)).unwrap();
    let cfg = abstraction_config(true, 7);
    let prov = Provenance {
        config_sha256: "0".repeat(64),
        tool_version: "test".into(),
    };
    let mut a = build_abstraction(&md, &cfg, prov).unwrap().abstraction;
    let p = grid_partition(md.state_box(), &[7, 7]).unwrap();
    let d = Disturbance::Sinusoid {
        amplitude: vec![0.1],
        omega: 10.0,
        phase: 0.0,
    };
    let trace = simulate(&md, &[0.8, -0.8], 2.0, &d, a.heartbeat, Some(&p), &SimOptions::default()).unwrap();
    assert!(validate(&a, &trace, 1e-8).pass);

    for r in &mut a.regions {
        r.tau_upper *= 0.5;
        r.tau_lower = r.tau_lower.min(r.tau_upper);
    }
    let report = validate(&a, &trace, 1e-8);
    let expected: Vec<usize> = trace
        .samples
        .iter()
        .filter(|s| s.tau > a.region(s.region.unwrap()).unwrap().tau_upper + 1e-8)
        .map(|s| s.i)
        .collect();
    assert!(!expected.is_empty());
    assert!(!report.pass);
    let flagged: Vec<usize> = report.samples.iter().filter(|s| !s.contained).map(|s| s.i).collect();
    assert_eq!(flagged, expected);
    assert!(trace.samples.iter().filter(|s| s.capped).all(|s| flagged.contains(&s.i)));
}
