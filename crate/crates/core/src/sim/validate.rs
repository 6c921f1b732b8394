use std::fmt::Write as _;

use serde::Serialize;

use crate::quotient::Abstraction;

use super::Trace;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleCheck {
    pub i: usize,
    pub t: f64,
    pub region: Option<usize>,
    pub tau: f64,
    pub tau_lower: Option<f64>,
    pub tau_upper: Option<f64>,
    pub contained: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepCheck {
    pub i: usize,
    pub from: usize,
    pub to: usize,
    pub present: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub pass: bool,
    pub samples: Vec<SampleCheck>,
    pub steps: Vec<StepCheck>,
    pub violations: Vec<String>,
    pub warnings: Vec<String>,
}

/// Compare a simulated trace against an abstraction. Times are compared
/// with an absolute `slack` covering the event localization tolerance.
pub fn validate(a: &Abstraction, trace: &Trace, slack: f64) -> ValidationReport {
    let mut samples = Vec::with_capacity(trace.samples.len());
    let mut violations = Vec::new();
    let mut warnings = trace.diagnostics.clone();
    for s in &trace.samples {
        let reg = s.region.and_then(|id| a.region(id));
        let contained = match reg {
            Some(r) => s.tau >= r.tau_lower - slack && s.tau <= r.tau_upper + slack,
            None => {
                warnings.push(format!("sample {} at t = {} has no region", s.i, s.t));
                false
            }
        };
        if let (Some(r), false) = (reg, contained) {
            violations.push(format!(
                "sample {} (t = {}): tau = {} outside R{} [{}, {}]",
                s.i, s.t, s.tau, r.id, r.tau_lower, r.tau_upper
            ));
        }
        samples.push(SampleCheck {
            i: s.i,
            t: s.t,
            region: s.region,
            tau: s.tau,
            tau_lower: reg.map(|r| r.tau_lower),
            tau_upper: reg.map(|r| r.tau_upper),
            contained,
        });
    }
    let mut steps = Vec::new();
    for w in trace.samples.windows(2) {
        if let (Some(from), Some(to)) = (w[0].region, w[1].region) {
            let present = a.has_transition(from, to);
            if !present {
                violations.push(format!("step {}: transition R{from} -> R{to} missing", w[0].i));
            }
            steps.push(StepCheck {
                i: w[0].i,
                from,
                to,
                present,
            });
        }
    }
    ValidationReport {
        pass: violations.is_empty(),
        samples,
        steps,
        violations,
        warnings,
    }
}

impl ValidationReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let inside = self.samples.iter().filter(|s| s.contained).count();
        let present = self.steps.iter().filter(|s| s.present).count();
        let _ = writeln!(out, "result: {}", if self.pass { "PASS" } else { "FAIL" });
        let _ = writeln!(out, "samples inside their interval: {inside}/{}", self.samples.len());
        let _ = writeln!(out, "transitions present: {present}/{}", self.steps.len());
        for v in &self.violations {
            let _ = writeln!(out, "violation: {v}");
        }
        for w in &self.warnings {
            let _ = writeln!(out, "warning: {w}");
        }
        out
    }
}
