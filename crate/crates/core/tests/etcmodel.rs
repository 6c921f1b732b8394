use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use etc_traffic::etcmodel::{build_extended, homogenize, EtcModel, ModelSpec};
use etc_traffic::reference::model_spec;
use etc_traffic::sim::{Disturbance, EventSystem, SimOptions};
use etc_traffic::symkernel::parse_poly;

fn benchmark() -> EtcModel {
    EtcModel::from_spec(&model_spec(false)).unwrap()
}

fn spec_1d(field: &str) -> ModelSpec {
    ModelSpec {
        states: vec!["x1".into()],
        errors: None,
        disturbances: vec![],
        field: vec![field.into()],
        trigger: "e_x1^2 - 0.01".into(),
        disturbance_lo: vec![],
        disturbance_hi: vec![],
        state_lo: vec![-1.0],
        state_hi: vec![1.0],
        heartbeat: None,
    }
}

#[test]
fn extended_field_of_the_benchmark() {
    let m = benchmark();
    let fe = build_extended(&m);
    assert_eq!(fe.len(), 4);
    assert_eq!(fe[2], -&fe[0]);
    assert_eq!(fe[3], -&fe[1]);
    let expect = parse_poly("x1^2 + x2^3 - (x2 + e2) - (x1 + e1)^2 - (x2 + e2)^3", m.vars()).unwrap();
    assert_eq!(fe[1], expect);
}

#[test]
fn extended_field_without_error_feedback() {
    let m = EtcModel::from_spec(&spec_1d("-x1")).unwrap();
    let fe = build_extended(&m);
    assert_eq!(fe[0], parse_poly("-x1", m.vars()).unwrap());
    assert_eq!(fe[1], parse_poly("x1", m.vars()).unwrap());
}

#[test]
fn homogenized_benchmark_matches_hand_form() {
    let m = benchmark();
    let hm = homogenize(&m, &build_extended(&m), "w").unwrap();
    assert_eq!((hm.alpha(), hm.theta()), (2, 1));
    let v = hm.vars();
    let f1 = parse_poly("-x1*w^2", v).unwrap();
    let f2 = parse_poly(
        "x1^2*w + x2^3 - (x2 + e2)*w^2 - (x1 + e1)^2*w - (x2 + e2)^3",
        v,
    )
    .unwrap();
    let f = hm.f_tilde();
    assert_eq!(f.len(), 5);
    assert_eq!(f[0], f1);
    assert_eq!(f[1], f2);
    assert_eq!(f[2], -&f1);
    assert_eq!(f[3], -&f2);
    assert!(f[4].is_zero());
    assert_eq!(hm.phi_tilde(), &parse_poly("e1^2 + e2^2 - 0.0001*w^2", v).unwrap());
}

#[test]
fn lie_chain_degrees_and_first_entry() {
    let m = benchmark();
    let hm = homogenize(&m, &build_extended(&m), "w").unwrap();
    let chain = hm.lie_chain(5);
    assert_eq!(chain.len(), 6);
    assert_eq!(&chain[0], hm.phi_tilde());
    for (k, q) in chain.iter().enumerate() {
        let deg = hm.theta() + 1 + k as u32 * hm.alpha();
        assert!(hm.is_homogeneous(q, deg), "L^{k} is not homogeneous of degree {deg}");
        assert!(!q.is_zero());
    }
    // d/dt (e1^2 + e2^2 - a w^2) = 2 e1 f̃3 + 2 e2 f̃4 with ẇ = 0
    let v = hm.vars();
    let hand = &(&parse_poly("2*e1", v).unwrap() * &hm.f_tilde()[2])
        + &(&parse_poly("2*e2", v).unwrap() * &hm.f_tilde()[3]);
    assert_eq!(chain[1], hand);
}

#[test]
fn perturbed_chain_is_first_order() {
    let m = EtcModel::from_spec(&model_spec(true)).unwrap();
    let hm = homogenize(&m, &build_extended(&m), "w").unwrap();
    assert_eq!(hm.lie_chain(5).len(), 2);
    assert_eq!((hm.alpha(), hm.theta()), (2, 1));
    assert_eq!(hm.vars().last().map(String::as_str), Some("d"));
}

#[test]
fn homogenized_flow_coincides_on_the_unit_plane() {
    let m = benchmark();
    let hm = homogenize(&m, &build_extended(&m), "w").unwrap();
    let plain = EventSystem::from_model(&m);
    let lifted = EventSystem::from_homogenized(&hm);
    let opts = SimOptions::default();
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for _ in 0..20 {
        let x = [rng.gen_range(-1.0..=1.0), rng.gen_range(-1.0..=1.0)];
        let a = plain
            .first_event(&[x[0], x[1], 0.0, 0.0], 0.0, &Disturbance::Zero, 0.5, &opts)
            .unwrap();
        let b = lifted
            .first_event(&[x[0], x[1], 0.0, 0.0, 1.0], 0.0, &Disturbance::Zero, 0.5, &opts)
            .unwrap();
        assert_eq!(a.capped, b.capped);
        assert!((a.tau - b.tau).abs() <= 1e-8, "{x:?}: {} vs {}", a.tau, b.tau);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn extended_field_is_antisymmetric(
        c in prop::collection::vec(-3i32..=3, 6),
        k in 1u32..=3,
    ) {
        let f1 = format!("{}*x1 + {}*x2^{k} + {}*(x1 + e_x1)*x2", c[0], c[1], c[2]);
        let f2 = format!("{}*x2 + {}*x1^2*e_x2 + {}*x1*x2", c[3], c[4], c[5]);
        let spec = ModelSpec {
            states: vec!["x1".into(), "x2".into()],
            errors: None,
            disturbances: vec![],
            field: vec![f1, f2],
            trigger: "e_x1^2 + e_x2^2 - 0.01".into(),
            disturbance_lo: vec![],
            disturbance_hi: vec![],
            state_lo: vec![-1.0, -1.0],
            state_hi: vec![1.0, 1.0],
            heartbeat: None,
        };
        let m = EtcModel::from_spec(&spec).unwrap();
        let fe = build_extended(&m);
        for i in 0..2 {
            prop_assert!((&fe[i] + &fe[i + 2]).is_zero());
        }
        let hm = homogenize(&m, &fe, "w").unwrap();
        for p in hm.f_tilde() {
            prop_assert!(hm.is_homogeneous(p, hm.alpha() + 1) || p.is_zero());
        }
        prop_assert!(hm.is_homogeneous(hm.phi_tilde(), hm.theta() + 1));
    }
}
