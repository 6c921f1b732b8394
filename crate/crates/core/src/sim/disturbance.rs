use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Disturbance realizations `d(t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Disturbance {
    Zero,
    Constant { value: Vec<f64> },
    /// `amplitude · sin(omega · t + phase)`, componentwise amplitudes.
    Sinusoid {
        amplitude: Vec<f64>,
        omega: f64,
        #[serde(default)]
        phase: f64,
    },
    /// Constant on `[k·dwell, (k+1)·dwell)`, with values drawn uniformly
    /// from `[lo, hi]` by a stream keyed on `(seed, k)`.
    PiecewiseRandom {
        lo: Vec<f64>,
        hi: Vec<f64>,
        dwell: f64,
        seed: u64,
    },
}

impl Disturbance {
    pub fn describe(&self) -> String {
        match self {
            Disturbance::Zero => "zero".into(),
            Disturbance::Constant { value } => format!("constant {value:?}"),
            Disturbance::Sinusoid {
                amplitude,
                omega,
                phase,
            } => format!("sinusoid amplitude {amplitude:?} omega {omega} phase {phase}"),
            Disturbance::PiecewiseRandom {
                lo,
                hi,
                dwell,
                seed,
            } => format!("piecewise-constant uniform in {lo:?}..{hi:?} dwell {dwell} seed {seed}"),
        }
    }

    pub fn is_piecewise_constant(&self) -> bool {
        !matches!(self, Disturbance::Sinusoid { .. })
    }

    /// First switching time strictly after `t`, if any.
    pub fn next_switch(&self, t: f64) -> Option<f64> {
        match self {
            Disturbance::PiecewiseRandom { dwell, .. } => {
                let k = (t / dwell).floor() + 1.0;
                let s = k * dwell;
                Some(if s > t { s } else { s + dwell })
            }
            _ => None,
        }
    }

    /// Writes `d(t)` into `out`; components beyond the specification are 0.
    pub fn value(&self, t: f64, out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        match self {
            Disturbance::Zero => {}
            Disturbance::Constant { value } => {
                for (o, v) in out.iter_mut().zip(value) {
                    *o = *v;
                }
            }
            Disturbance::Sinusoid {
                amplitude,
                omega,
                phase,
            } => {
                let s = (omega * t + phase).sin();
                for (o, a) in out.iter_mut().zip(amplitude) {
                    *o = a * s;
                }
            }
            Disturbance::PiecewiseRandom { lo, hi, dwell, seed } => {
                let k = (t / dwell).floor().max(0.0) as u64;
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                rng.set_stream(k);
                for (o, (l, h)) in out.iter_mut().zip(lo.iter().zip(hi)) {
                    *o = if h > l { rng.gen_range(*l..=*h) } else { *l };
                }
            }
        }
    }
}
