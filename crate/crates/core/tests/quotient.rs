use std::collections::BTreeSet;

use etc_traffic::partition::grid_partition;
use etc_traffic::pipeline::build_abstraction;
use etc_traffic::quotient::{assemble, Abstraction, Mode, Provenance, RegionResult, FORCED_SELF_LOOP};
use etc_traffic::reference::{abstraction_config, model_spec};
use etc_traffic::etcmodel::EtcModel;
use etc_traffic::symkernel::IntervalBox;

fn provenance() -> Provenance {
    Provenance {
        config_sha256: "0".repeat(64),
        tool_version: "test".into(),
    }
}

fn schema() -> serde_json::Value {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../schema/abstraction.schema.json");
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn check_schema(json: &str) {
    let validator = jsonschema::validator_for(&schema()).unwrap();
    let value: serde_json::Value = serde_json::from_str(json).unwrap();
    let errors: Vec<String> = validator.iter_errors(&value).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{errors:?}");
}

fn epsilon_of(a: &Abstraction) -> f64 {
    a.regions.iter().map(|r| r.tau_upper - r.tau_lower).fold(0.0, f64::max)
}

#[test]
fn benchmark_export_matches_the_schema() {
    let m = EtcModel::from_spec(&model_spec(true)).unwrap();
    let out = build_abstraction(&m, &abstraction_config(true, 7), provenance()).unwrap();
    let a = &out.abstraction;
    assert_eq!(a.regions.len(), 49);
    assert_eq!(a.mode, Mode::Perturbed);
    let json = a.to_json();
    check_schema(&json);
    let back = Abstraction::from_json(&json).unwrap();
    assert_eq!(&back, a);
    assert_eq!(back.to_json(), json);
    assert_eq!(a.epsilon, epsilon_of(a));
    // Totality: every region has a successor.
    for r in &a.regions {
        assert!(!a.successors(r.id).is_empty(), "R{} has no successor", r.id);
    }
    let dot = a.to_dot();
    assert_eq!(dot.matches("->").count(), a.transitions.len());
    assert!(dot.contains("R25 ["));
}

#[test]
fn stationary_single_region() {
    let x = IntervalBox::from_bounds(&[-1.0], &[1.0]).unwrap();
    let p = grid_partition(&x, &[1]).unwrap();
    let res = vec![RegionResult {
        id: 1,
        tau_lower: 0.004,
        tau_upper: 0.025,
        targets: BTreeSet::new(),
        diagnostics: vec![],
    }];
    let a = assemble(&p, &res, 0.025, Mode::Unperturbed, provenance()).unwrap();
    assert_eq!(a.transitions.iter().copied().collect::<Vec<_>>(), vec![(1, 1)]);
    assert_eq!(a.epsilon, 0.025 - 0.004);
    assert!(a.regions[0].diagnostics.contains(&FORCED_SELF_LOOP.to_string()));
    let json = a.to_json();
    assert!(json.contains("\"forced_self_loop\""));
    check_schema(&json);
}

#[test]
fn epsilon_is_the_widest_interval() {
    let x = IntervalBox::from_bounds(&[-1.0, -1.0], &[1.0, 1.0]).unwrap();
    let p = grid_partition(&x, &[3, 3]).unwrap();
    let res: Vec<RegionResult> = (1..=9)
        .map(|id| RegionResult {
            id,
            tau_lower: 0.001 * id as f64,
            tau_upper: 0.02 + 0.0005 * ((id * 7) % 9) as f64,
            targets: [id, 5].into_iter().collect(),
            diagnostics: vec![],
        })
        .collect();
    let a = assemble(&p, &res, 0.025, Mode::Unperturbed, provenance()).unwrap();
    let expect = res.iter().map(|r| r.tau_upper - r.tau_lower).fold(0.0, f64::max);
    assert_eq!(a.epsilon, expect);
    assert_eq!(a.transitions.len(), 17);
    check_schema(&a.to_json());
}

#[test]
fn tampered_files_are_rejected() {
    let x = IntervalBox::from_bounds(&[-1.0], &[1.0]).unwrap();
    let p = grid_partition(&x, &[3]).unwrap();
    let res: Vec<RegionResult> = (1..=3)
        .map(|id| RegionResult {
            id,
            tau_lower: 0.01,
            tau_upper: 0.02,
            targets: [2].into_iter().collect(),
            diagnostics: vec![],
        })
        .collect();
    let json = assemble(&p, &res, 0.025, Mode::Unperturbed, provenance()).unwrap().to_json();
    assert!(Abstraction::from_json(&json).is_ok());
    assert!(Abstraction::from_json(&json.replace("\"version\":1", "\"version\":2")).is_err());
    assert!(Abstraction::from_json(&json.replace("[2,2]", "[2,7]")).is_err());
    assert!(Abstraction::from_json("not json").is_err());
}
