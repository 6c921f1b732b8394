use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use etc_traffic::etcmodel::{build_extended, EtcModel, ModelSpec};
use etc_traffic::partition::grid_partition;
use etc_traffic::reach::{find_upper_bound, transitions, ReachOptions, Reacher};
use etc_traffic::reference::model_spec;
use etc_traffic::sim::{Disturbance, EventSystem, SimOptions};
use etc_traffic::symkernel::{IntervalBox, Polynomial};

fn benchmark(perturbed: bool) -> EtcModel {
    EtcModel::from_spec(&model_spec(perturbed)).unwrap()
}

fn stationary() -> EtcModel {
    EtcModel::from_spec(&ModelSpec {
        states: vec!["x1".into(), "x2".into()],
        errors: None,
        disturbances: vec![],
        field: vec!["0".into(), "0".into()],
        trigger: "e_x1^2 + e_x2^2 - 0.0001".into(),
        disturbance_lo: vec![],
        disturbance_hi: vec![],
        state_lo: vec![-1.0, -1.0],
        state_hi: vec![1.0, 1.0],
        heartbeat: None,
    })
    .unwrap()
}

#[test]
fn stationary_regions_only_reach_their_closed_neighbourhood() {
    let m = stationary();
    let p = grid_partition(m.state_box(), &[7, 7]).unwrap();
    let reacher = Reacher::for_model(&m);
    for id in [1usize, 17, 25, 49] {
        let bx = &p.region(id).unwrap().bx;
        let r = find_upper_bound(&m, &reacher, bx, 0.001, 0.025, &ReachOptions::default());
        assert_eq!(r.tau_upper, 0.025, "never triggers, so the heartbeat applies");
        for leaf in &r.leaves {
            for s in &leaf.flowpipe.segments {
                assert_eq!(s.enclosure.project(&[0, 1]), leaf.init.project(&[0, 1]));
            }
        }
        let t = transitions(&r, &p, 2);
        assert!(t.contains(&id));
        let closed: Vec<usize> = p.intersecting(bx);
        assert!(t.iter().all(|j| closed.contains(j)), "R{id}: {t:?}");
    }
}

#[test]
fn trigger_already_active_gives_a_tight_interval() {
    let m = benchmark(false);
    let p = grid_partition(m.state_box(), &[7, 7]).unwrap();
    let reacher = Reacher::for_model(&m);
    // Every trajectory from R1 samples before 0.0101; starting the checks
    // beyond that certifies at the first time point.
    let r = find_upper_bound(&m, &reacher, &p.region(1).unwrap().bx, 0.015, 0.025, &ReachOptions::default());
    assert_eq!(r.tau_upper, 0.015);
    assert_eq!(r.tau_lower, 0.015);
}

#[test]
fn upper_bounds_near_reference_values() {
    let m = benchmark(false);
    let p = grid_partition(m.state_box(), &[7, 7]).unwrap();
    let reacher = Reacher::for_model(&m);
    let ub = |id: usize| {
        find_upper_bound(&m, &reacher, &p.region(id).unwrap().bx, 0.001, 0.025, &ReachOptions::default()).tau_upper
    };
    let within = |v: f64, paper: f64| v >= 0.5 * paper && v <= 2.0 * paper;
    let (u1, u11, u25) = (ub(1), ub(11), ub(25));
    assert!(within(u1, 0.01), "{u1}");
    assert!(within(u11, 0.023), "{u11}");
    assert_eq!(u25, 0.025);
}

#[test]
fn refinement_never_loses_a_bound() {
    let m = benchmark(false);
    let p = grid_partition(m.state_box(), &[7, 7]).unwrap();
    let reacher = Reacher::for_model(&m);
    let coarse = ReachOptions::default();
    let fine = ReachOptions {
        step: Some(0.025 / 200.0),
        max_depth: 2 * coarse.max_depth,
        ..ReachOptions::default()
    };
    for id in [1usize, 3, 9, 11, 43] {
        let bx = &p.region(id).unwrap().bx;
        let a = find_upper_bound(&m, &reacher, bx, 0.002, 0.025, &coarse);
        let b = find_upper_bound(&m, &reacher, bx, 0.002, 0.025, &fine);
        assert!(b.tau_upper <= a.tau_upper, "R{id}: refined {} > {}", b.tau_upper, a.tau_upper);
        assert!(b.tau_upper >= 0.002);
    }
}

#[test]
fn disturbance_only_adds_transitions() {
    let m = benchmark(false);
    let md = benchmark(true);
    let p = grid_partition(m.state_box(), &[7, 7]).unwrap();
    let (r0, r1) = (Reacher::for_model(&m), Reacher::for_model(&md));
    for id in [1usize, 8, 19, 25, 37, 43, 49] {
        let bx = &p.region(id).unwrap().bx;
        let a = find_upper_bound(&m, &r0, bx, 0.002, 0.04, &ReachOptions::default());
        let b = find_upper_bound(&md, &r1, bx, 0.002, 0.04, &ReachOptions::default());
        assert!(b.tau_upper >= a.tau_upper || b.tau_upper == 0.04);
        let (ta, tb) = (transitions(&a, &p, 2), transitions(&b, &p, 2));
        assert!(ta.is_subset(&tb), "R{id}: {ta:?} not in {tb:?}");
    }
}

#[test]
fn region_flowpipes_contain_simulated_states() {
    let md = benchmark(true);
    let p = grid_partition(md.state_box(), &[7, 7]).unwrap();
    let field = build_extended(&md);
    let reacher = Reacher::new(&field, md.delta_box());
    let trig = Polynomial::constant(field[0].vars().clone(), -1.0);
    let sys = EventSystem::new(&field, &trig, 1);
    let mut rng = ChaCha8Rng::seed_from_u64(61);
    let delta = md.delta_box().unwrap();
    for id in [2usize, 25, 30, 48] {
        let init = p.region(id).unwrap().bx.product(&IntervalBox::from_point(&[0.0, 0.0]));
        let pipes = reacher.flowpipe(&init, 0.04, &ReachOptions::default()).unwrap();
        let times: Vec<f64> = (1..=20).map(|k| 0.002 * k as f64).collect();
        for j in 0..50 {
            let mut y0: Vec<f64> = init.dims()[..2].iter().map(|d| rng.gen_range(d.lo()..=d.hi())).collect();
            y0.extend([0.0, 0.0]);
            let d = Disturbance::PiecewiseRandom {
                lo: delta.lo(),
                hi: delta.hi(),
                dwell: 0.003,
                seed: 1000 * id as u64 + j,
            };
            let states = sys.states_at(&y0, 0.0, &d, &times, &SimOptions::default()).unwrap();
            let pipe = pipes.iter().find(|f| f.init.contains_point(&y0)).unwrap();
            for (t, y) in times.iter().zip(&states) {
                let enc = pipe.at(*t).unwrap();
                let inside = enc.dims().iter().zip(y).all(|(iv, v)| *v >= iv.lo() - 1e-9 && *v <= iv.hi() + 1e-9);
                assert!(inside, "R{id} escape at t = {t}: {y:?} not in {enc}");
            }
        }
    }
}
