//! The two-state polynomial benchmark with a Lebesgue-type trigger, with
//! and without an additive disturbance on the second state.

use crate::etcmodel::ModelSpec;
use crate::isochron::{DeltaOptions, IsochronConfig, RadiusOptions, XiOptions};
use crate::pipeline::AbstractionConfig;
use crate::reach::ReachOptions;
use crate::symkernel::{IntervalBox, IntervalScalar};

const CONTROL: &str = "-(x2 + e2) - (x1 + e1)^2 - (x2 + e2)^3";

pub fn model_spec(perturbed: bool) -> ModelSpec {
    let mut f2 = format!("x1^2 + x2^3 + {CONTROL}");
    if perturbed {
        f2.push_str(" + d");
    }
    ModelSpec {
        states: vec!["x1".into(), "x2".into()],
        errors: Some(vec!["e1".into(), "e2".into()]),
        disturbances: if perturbed { vec!["d".into()] } else { vec![] },
        field: vec!["-x1".into(), f2],
        trigger: "e1^2 + e2^2 - 0.01^2".into(),
        disturbance_lo: if perturbed { vec![-0.1] } else { vec![] },
        disturbance_hi: if perturbed { vec![0.1] } else { vec![] },
        state_lo: vec![-1.0, -1.0],
        state_hi: vec![1.0, 1.0],
        heartbeat: Some(if perturbed { 0.04 } else { 0.025 }),
    }
}

/// Abstraction settings of the benchmark on a `k × k` grid.
pub fn abstraction_config(perturbed: bool, k: usize) -> AbstractionConfig {
    AbstractionConfig {
        divisions: vec![k, k],
        isochron: IsochronConfig {
            z: IntervalBox::from_bounds(&[-0.1, -0.1], &[0.1, 0.1]).expect("valid box"),
            w: IntervalScalar::new(1e-7, 0.1).expect("valid interval"),
            rho: 0.099,
            c: 1e-6,
            p: 5,
            tau_star: 1e-3,
        },
        heartbeat: if perturbed { 0.04 } else { 0.025 },
        xi: XiOptions::default(),
        deltas: DeltaOptions::default(),
        radius: RadiusOptions::default(),
        reach: ReachOptions::default(),
        strict: false,
        jobs: None,
        keep_flowpipes: false,
    }
}
