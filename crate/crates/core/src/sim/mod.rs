//! Simulation of event-triggered sampling: adaptive integration between
//! samples, first zero crossing of the triggering function, disturbance
//! injection, Monte-Carlo timing oracles and validation of abstractions.

mod disturbance;
mod integrator;
mod validate;

pub use disturbance::Disturbance;
pub use integrator::{Event, EventSystem, SimOptions};
pub use validate::{validate, StepCheck, ValidationReport};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::etcmodel::EtcModel;
use crate::partition::Partition;
use crate::symkernel::IntervalBox;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error("triggering function is already non-negative at the sample (value {0})")]
    NonNegativeAtSample(f64),
    #[error("integrator failed at t = {t}: {msg}")]
    Integrator { t: f64, msg: String },
    #[error("initial state has {found} components, expected {expected}")]
    Arity { expected: usize, found: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub i: usize,
    pub t: f64,
    pub x: Vec<f64>,
    pub tau: f64,
    pub region: Option<usize>,
    pub capped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub samples: Vec<Sample>,
    pub disturbance: String,
    pub diagnostics: Vec<String>,
}

impl Trace {
    /// CSV with columns `i, t_i, <states>, tau_i, region_id, capped`.
    pub fn to_csv(&self, state_names: &[String]) -> String {
        let mut out = String::from("i,t_i");
        for s in state_names {
            out.push(',');
            out.push_str(s);
        }
        out.push_str(",tau_i,region_id,capped\n");
        for s in &self.samples {
            out.push_str(&format!("{},{:.17e}", s.i, s.t));
            for v in &s.x {
                out.push_str(&format!(",{v:.17e}"));
            }
            let region = s.region.map(|r| r.to_string()).unwrap_or_default();
            out.push_str(&format!(",{:.17e},{},{}\n", s.tau, region, s.capped as u8));
        }
        out
    }

    /// Consecutive region pairs visited by the sampled states.
    pub fn transitions(&self) -> Vec<(usize, usize)> {
        self.samples
            .windows(2)
            .filter_map(|w| Some((w[0].region?, w[1].region?)))
            .collect()
    }
}

/// Inter-sampling time of `model` from state `x` sampled at time `t0`.
pub fn inter_sample(
    sys: &EventSystem,
    x: &[f64],
    t0: f64,
    d: &Disturbance,
    heartbeat: f64,
    opts: &SimOptions,
) -> Result<Event, SimError> {
    let mut y = x.to_vec();
    y.resize(sys.dim(), 0.0);
    sys.first_event(&y, t0, d, heartbeat, opts)
}

/// Closed-loop simulation from `x0` over `[0, horizon)`.
pub fn simulate(
    model: &EtcModel,
    x0: &[f64],
    horizon: f64,
    d: &Disturbance,
    heartbeat: f64,
    partition: Option<&Partition>,
    opts: &SimOptions,
) -> Result<Trace, SimError> {
    let n = model.n();
    if x0.len() != n {
        return Err(SimError::Arity {
            expected: n,
            found: x0.len(),
        });
    }
    let sys = EventSystem::from_model(model);
    let mut samples = Vec::new();
    let mut diagnostics = Vec::new();
    let mut x = x0.to_vec();
    let mut t = 0.0;
    let mut i = 0;
    while t < horizon {
        if !model.state_box().contains_point(&x) {
            diagnostics.push(format!(
                "state left the state box at t = {t}; trace truncated"
            ));
            break;
        }
        let ev = inter_sample(&sys, &x, t, d, heartbeat, opts)?;
        samples.push(Sample {
            i,
            t,
            x: x.clone(),
            tau: ev.tau,
            region: partition.and_then(|p| p.locate(&x)),
            capped: ev.capped,
        });
        x = ev.y[..n].to_vec();
        t += ev.tau;
        i += 1;
    }
    Ok(Trace {
        samples,
        disturbance: d.describe(),
        diagnostics,
    })
}

/// Smallest and largest inter-sampling times observed from points of
/// `region`: its vertices, its center and uniformly drawn points, up to
/// `n_points` in total. With disturbances each point is simulated under
/// `n_signals` piecewise-constant signals of the given dwell.
#[allow(clippy::too_many_arguments)]
pub fn monte_carlo_bounds(
    model: &EtcModel,
    region: &IntervalBox,
    n_points: usize,
    n_signals: usize,
    dwell: f64,
    heartbeat: f64,
    seed: u64,
    opts: &SimOptions,
) -> Result<(f64, f64), SimError> {
    let sys = EventSystem::from_model(model);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points: Vec<Vec<f64>> = region.vertices();
    points.push(region.center());
    points.truncate(n_points.max(1));
    while points.len() < n_points {
        points.push(
            region
                .dims()
                .iter()
                .map(|d| rng.gen_range(d.lo()..=d.hi()))
                .collect(),
        );
    }
    let signals: Vec<Disturbance> = match model.delta_box() {
        None => vec![Disturbance::Zero],
        Some(b) => (0..n_signals.max(1))
            .map(|k| Disturbance::PiecewiseRandom {
                lo: b.lo(),
                hi: b.hi(),
                dwell,
                seed: seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(k as u64 + 1),
            })
            .collect(),
    };
    let results: Vec<Result<(f64, f64), SimError>> = points
        .par_iter()
        .map(|x| {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for d in &signals {
                let ev = inter_sample(&sys, x, 0.0, d, heartbeat, opts)?;
                lo = lo.min(ev.tau);
                hi = hi.max(ev.tau);
            }
            Ok((lo, hi))
        })
        .collect();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for r in results {
        let (a, b) = r?;
        lo = lo.min(a);
        hi = hi.max(b);
    }
    Ok((lo, hi))
}
