//! Dormand–Prince 5(4) integration with first-crossing detection.

use crate::etcmodel::{build_extended, EtcModel, HomogenizedModel};
use crate::symkernel::{CompiledPoly, Polynomial};

use super::{Disturbance, SimError};

#[derive(Debug, Clone, PartialEq)]
pub struct SimOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Largest step; `None` means a fiftieth of the time cap.
    pub h_max: Option<f64>,
    /// Width of the final bisection bracket around a crossing.
    pub event_tol: f64,
    pub max_steps: usize,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-9,
            atol: 1e-12,
            h_max: None,
            event_tol: 1e-9,
            max_steps: 1_000_000,
        }
    }
}

/// End of one inter-sample interval.
#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    /// Elapsed time from the sample.
    pub tau: f64,
    /// Integrated state at the event (or at the cap).
    pub y: Vec<f64>,
    pub capped: bool,
}

/// A polynomial vector field over `(y, d)` with a scalar triggering
/// function over the same variables; the event is the first time the
/// trigger becomes non-negative.
#[derive(Debug, Clone)]
pub struct EventSystem {
    dim: usize,
    nd: usize,
    field: Vec<CompiledPoly>,
    trigger: CompiledPoly,
    trigger_scale: f64,
}

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
// fifth-order weights minus the embedded fourth-order ones
const E: [f64; 7] = [
    35.0 / 384.0 - 5179.0 / 57600.0,
    0.0,
    500.0 / 1113.0 - 7571.0 / 16695.0,
    125.0 / 192.0 - 393.0 / 640.0,
    -2187.0 / 6784.0 + 92097.0 / 339200.0,
    11.0 / 84.0 - 187.0 / 2100.0,
    -1.0 / 40.0,
];

struct Work {
    z: Vec<f64>,
    k: Vec<Vec<f64>>,
    y5: Vec<f64>,
}

impl EventSystem {
    /// `field` and `trigger` are over `dim + nd` variables, `y` first.
    pub fn new(field: &[Polynomial], trigger: &Polynomial, nd: usize) -> Self {
        let dim = field.len();
        assert_eq!(field[0].nvars(), dim + nd, "field variables must be (y, d)");
        Self {
            dim,
            nd,
            field: field.iter().map(CompiledPoly::new).collect(),
            trigger: CompiledPoly::new(trigger),
            trigger_scale: trigger.coefficient_l1().max(f64::MIN_POSITIVE),
        }
    }

    /// The extended system `(ζ, e)` of an ETC model.
    pub fn from_model(m: &EtcModel) -> Self {
        Self::new(&build_extended(m), m.trigger(), m.nd())
    }

    /// The homogenized system over `(ζ, e, w)`.
    pub fn from_homogenized(hm: &HomogenizedModel) -> Self {
        Self::new(hm.f_tilde(), hm.phi_tilde(), hm.nd())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Sum of absolute trigger coefficients.
    pub fn trigger_scale(&self) -> f64 {
        self.trigger_scale
    }

    pub fn trigger_value(&self, y: &[f64], d: &[f64]) -> f64 {
        let mut z = y.to_vec();
        z.extend_from_slice(d);
        z.resize(self.dim + self.nd, 0.0);
        self.trigger.eval(&z)
    }

    fn deriv(&self, t: f64, y: &[f64], dist: &Disturbance, frozen: bool, w: &mut Work, out: usize) {
        w.z[..self.dim].copy_from_slice(y);
        if !frozen {
            dist.value(t, &mut w.z[self.dim..]);
        }
        for (o, f) in w.k[out].iter_mut().zip(&self.field) {
            *o = f.eval(&w.z);
        }
    }

    /// One Dormand–Prince step; the fifth-order result lands in `w.y5` and
    /// the scaled error norm is returned.
    fn step(&self, t: f64, y: &[f64], h: f64, dist: &Disturbance, frozen: bool, w: &mut Work, opts: &SimOptions) -> f64 {
        let mut stage = vec![0.0; self.dim];
        for s in 0..7 {
            for (i, st) in stage.iter_mut().enumerate() {
                let mut acc = 0.0;
                for j in 0..s {
                    acc += A[s][j] * w.k[j][i];
                }
                *st = y[i] + h * acc;
            }
            if s == 6 {
                w.y5.copy_from_slice(&stage);
            }
            self.deriv(t + C[s] * h, &stage, dist, frozen, w, s);
        }
        let mut err: f64 = 0.0;
        for i in 0..self.dim {
            let mut e = 0.0;
            for (s, es) in E.iter().enumerate() {
                e += es * w.k[s][i];
            }
            let sc = opts.atol + opts.rtol * y[i].abs().max(w.y5[i].abs());
            err = err.max((h * e).abs() / sc);
        }
        err
    }

    fn trigger_at(&self, y: &[f64], w: &mut Work) -> f64 {
        w.z[..self.dim].copy_from_slice(y);
        self.trigger.eval(&w.z)
    }

    /// Integrate from `y0` at absolute time `t0` until the trigger first
    /// becomes non-negative or `t_max` has elapsed.
    pub fn first_event(
        &self,
        y0: &[f64],
        t0: f64,
        dist: &Disturbance,
        t_max: f64,
        opts: &SimOptions,
    ) -> Result<Event, SimError> {
        self.run(y0, t0, dist, t_max, opts, true)
    }

    /// States at the given increasing elapsed `times`, ignoring the trigger.
    pub fn states_at(
        &self,
        y0: &[f64],
        t0: f64,
        dist: &Disturbance,
        times: &[f64],
        opts: &SimOptions,
    ) -> Result<Vec<Vec<f64>>, SimError> {
        let mut out = Vec::with_capacity(times.len());
        let mut y = y0.to_vec();
        let mut prev = 0.0;
        for &t in times {
            if t > prev {
                let mut o = opts.clone();
                o.h_max = Some(opts.h_max.unwrap_or(f64::INFINITY).min(t - prev));
                y = self.run(&y, t0 + prev, dist, t - prev, &o, false)?.y;
                prev = t;
            }
            out.push(y.clone());
        }
        Ok(out)
    }

    fn run(
        &self,
        y0: &[f64],
        t0: f64,
        dist: &Disturbance,
        t_max: f64,
        opts: &SimOptions,
        detect: bool,
    ) -> Result<Event, SimError> {
        if y0.len() != self.dim {
            return Err(SimError::Arity {
                expected: self.dim,
                found: y0.len(),
            });
        }
        let mut w = Work {
            z: vec![0.0; self.dim + self.nd],
            k: vec![vec![0.0; self.dim]; 7],
            y5: vec![0.0; self.dim],
        };
        dist.value(t0, &mut w.z[self.dim..]);
        let phi0 = self.trigger_at(y0, &mut w);
        if detect && phi0 >= 0.0 {
            return Err(SimError::NonNegativeAtSample(phi0));
        }
        let frozen = dist.is_piecewise_constant();
        let h_max = opts.h_max.unwrap_or(t_max / 50.0);
        let mut h = 0.1 * h_max;
        let mut y = y0.to_vec();
        let mut elapsed = 0.0;
        let mut steps = 0usize;
        while elapsed < t_max {
            steps += 1;
            if steps > opts.max_steps {
                return Err(SimError::Integrator {
                    t: t0 + elapsed,
                    msg: "step limit reached".into(),
                });
            }
            let t = t0 + elapsed;
            let remaining = t_max - elapsed;
            let mut hs = h.min(h_max);
            let mut last = false;
            if hs >= remaining {
                hs = remaining;
                last = true;
            }
            if let Some(mut sw) = dist.next_switch(t) {
                if sw - t < 1e-12 * t.abs().max(1.0) {
                    sw = dist.next_switch(sw).unwrap_or(f64::INFINITY);
                }
                if sw - t < hs {
                    hs = sw - t;
                    last = false;
                }
            }
            if frozen {
                dist.value(t + 0.5 * hs, &mut w.z[self.dim..]);
            }
            let err = self.step(t, &y, hs, dist, frozen, &mut w, opts);
            if !err.is_finite() {
                return Err(SimError::Integrator {
                    t,
                    msg: "non-finite state".into(),
                });
            }
            if err <= 1.0 {
                let y5 = w.y5.clone();
                if detect && self.trigger_at(&y5, &mut w) >= 0.0 {
                    let (mut lo, mut hi) = (0.0, hs);
                    let mut y_hi = y5;
                    while hi - lo > opts.event_tol {
                        let mid = 0.5 * (lo + hi);
                        self.step(t, &y, mid, dist, frozen, &mut w, opts);
                        let ym = w.y5.clone();
                        if self.trigger_at(&ym, &mut w) >= 0.0 {
                            hi = mid;
                            y_hi = ym;
                        } else {
                            lo = mid;
                        }
                    }
                    let tau = if last && hi == hs { t_max } else { elapsed + hi };
                    return Ok(Event {
                        tau,
                        y: y_hi,
                        capped: false,
                    });
                }
                y = y5;
                elapsed = if last { t_max } else { elapsed + hs };
            }
            let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            h = hs * fac;
        }
        Ok(Event {
            tau: t_max,
            y,
            capped: true,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symkernel::{parse_poly, var_list};

    #[test]
    fn constant_field_crossing_is_exact() {
        // y' = 2, trigger y^2 - 0.01: crossing at 0.05
        let vars = var_list(&["y"]);
        let f = [parse_poly("2", &vars).unwrap()];
        let phi = parse_poly("y^2 - 0.01", &vars).unwrap();
        let sys = EventSystem::new(&f, &phi, 0);
        let ev = sys
            .first_event(&[0.0], 0.0, &Disturbance::Zero, 1.0, &SimOptions::default())
            .unwrap();
        assert!(!ev.capped);
        assert!((ev.tau - 0.05).abs() < 1e-8, "{}", ev.tau);
    }

    #[test]
    fn decay_matches_closed_form() {
        // y' = -y from 1, trigger 0.5 - y: crossing at ln 2
        let vars = var_list(&["y"]);
        let f = [parse_poly("-y", &vars).unwrap()];
        let phi = parse_poly("0.5 - y", &vars).unwrap();
        let sys = EventSystem::new(&f, &phi, 0);
        let ev = sys
            .first_event(&[1.0], 0.0, &Disturbance::Zero, 5.0, &SimOptions::default())
            .unwrap();
        assert!((ev.tau - 2f64.ln()).abs() < 1e-8, "{}", ev.tau);
        assert!((ev.y[0] - 0.5).abs() < 1e-8);
    }

    #[test]
    fn cap_is_reported() {
        let vars = var_list(&["y"]);
        let f = [parse_poly("0", &vars).unwrap()];
        let phi = parse_poly("-1", &vars).unwrap();
        let sys = EventSystem::new(&f, &phi, 0);
        let ev = sys
            .first_event(&[0.3], 0.0, &Disturbance::Zero, 0.025, &SimOptions::default())
            .unwrap();
        assert!(ev.capped);
        assert_eq!(ev.tau, 0.025);
        assert_eq!(ev.y, vec![0.3]);
    }

    #[test]
    fn nonnegative_start_is_an_error() {
        let vars = var_list(&["y"]);
        let f = [parse_poly("1", &vars).unwrap()];
        let phi = parse_poly("y", &vars).unwrap();
        let sys = EventSystem::new(&f, &phi, 0);
        assert!(sys
            .first_event(&[0.0], 0.0, &Disturbance::Zero, 1.0, &SimOptions::default())
            .is_err());
    }
}
