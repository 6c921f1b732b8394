//! The finite traffic model: regions with inter-sampling intervals and a
//! transition relation, plus canonical JSON and DOT output.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::partition::Partition;

pub const FORMAT_VERSION: u32 = 1;
pub const FORCED_SELF_LOOP: &str = "forced_self_loop";

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum QuotientError {
    #[error("region {id}: lower bound {lower} exceeds upper bound {upper}")]
    Inversion { id: usize, lower: f64, upper: f64 },
    #[error("region {id}: interval [{lower}, {upper}] is not inside [0, {heartbeat}]")]
    OutOfRange {
        id: usize,
        lower: f64,
        upper: f64,
        heartbeat: f64,
    },
    #[error("no result for region {0}")]
    MissingRegion(usize),
    #[error("transition ({0}, {1}) refers to an unknown region")]
    UnknownTarget(usize, usize),
    #[error("malformed abstraction: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Unperturbed,
    Perturbed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_sha256: String,
    pub tool_version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxBounds {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbstractRegion {
    pub id: usize,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub tau_lower: f64,
    pub tau_upper: f64,
    pub diagnostics: Vec<String>,
}

/// Per-region output of the timing and reachability stages.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionResult {
    pub id: usize,
    pub tau_lower: f64,
    pub tau_upper: f64,
    pub targets: BTreeSet<usize>,
    pub diagnostics: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Abstraction {
    pub version: u32,
    pub mode: Mode,
    pub heartbeat: f64,
    pub epsilon: f64,
    pub state_box: BoxBounds,
    pub regions: Vec<AbstractRegion>,
    pub transitions: BTreeSet<(usize, usize)>,
    pub provenance: Provenance,
}

fn check_interval(id: usize, lower: f64, upper: f64, heartbeat: f64) -> Result<(), QuotientError> {
    if !(lower <= upper) {
        return Err(QuotientError::Inversion { id, lower, upper });
    }
    if !(lower >= 0.0 && upper <= heartbeat) {
        return Err(QuotientError::OutOfRange {
            id,
            lower,
            upper,
            heartbeat,
        });
    }
    Ok(())
}

/// Build the abstraction from one result per region of `partition`.
/// Regions without successors get a self-loop and a diagnostic.
pub fn assemble(
    partition: &Partition,
    results: &[RegionResult],
    heartbeat: f64,
    mode: Mode,
    provenance: Provenance,
) -> Result<Abstraction, QuotientError> {
    let mut regions = Vec::with_capacity(partition.regions().len());
    let mut transitions = BTreeSet::new();
    let count = partition.regions().len();
    for reg in partition.regions() {
        let res = results
            .iter()
            .find(|r| r.id == reg.id)
            .ok_or(QuotientError::MissingRegion(reg.id))?;
        check_interval(reg.id, res.tau_lower, res.tau_upper, heartbeat)?;
        let mut diagnostics = res.diagnostics.clone();
        if res.targets.is_empty() {
            diagnostics.push(FORCED_SELF_LOOP.to_string());
            transitions.insert((reg.id, reg.id));
        }
        for &t in &res.targets {
            if t == 0 || t > count {
                return Err(QuotientError::UnknownTarget(reg.id, t));
            }
            transitions.insert((reg.id, t));
        }
        regions.push(AbstractRegion {
            id: reg.id,
            lo: reg.bx.lo(),
            hi: reg.bx.hi(),
            tau_lower: res.tau_lower,
            tau_upper: res.tau_upper,
            diagnostics,
        });
    }
    let epsilon = regions
        .iter()
        .map(|r| r.tau_upper - r.tau_lower)
        .fold(0.0, f64::max);
    Ok(Abstraction {
        version: FORMAT_VERSION,
        mode,
        heartbeat,
        epsilon,
        state_box: BoxBounds {
            lo: partition.state_box().lo(),
            hi: partition.state_box().hi(),
        },
        regions,
        transitions,
        provenance,
    })
}

impl Abstraction {
    pub fn region(&self, id: usize) -> Option<&AbstractRegion> {
        self.regions.iter().find(|r| r.id == id)
    }

    pub fn has_transition(&self, from: usize, to: usize) -> bool {
        self.transitions.contains(&(from, to))
    }

    pub fn successors(&self, id: usize) -> Vec<usize> {
        self.transitions
            .range((id, 0)..=(id, usize::MAX))
            .map(|&(_, t)| t)
            .collect()
    }

    /// Regions carrying any diagnostic.
    pub fn diagnosed(&self) -> Vec<usize> {
        self.regions
            .iter()
            .filter(|r| !r.diagnostics.is_empty())
            .map(|r| r.id)
            .collect()
    }

    /// Re-check the structural invariants, e.g. after import.
    pub fn check(&self) -> Result<(), QuotientError> {
        let ids: BTreeSet<usize> = self.regions.iter().map(|r| r.id).collect();
        if ids.len() != self.regions.len() {
            return Err(QuotientError::Malformed("duplicate region ids".into()));
        }
        for r in &self.regions {
            check_interval(r.id, r.tau_lower, r.tau_upper, self.heartbeat)?;
            if r.lo.len() != r.hi.len() || r.lo.len() != self.state_box.lo.len() {
                return Err(QuotientError::Malformed(format!("region {} has bad bounds", r.id)));
            }
            if self.successors(r.id).is_empty() {
                return Err(QuotientError::Malformed(format!("region {} has no successor", r.id)));
            }
        }
        for &(a, b) in &self.transitions {
            if !ids.contains(&a) || !ids.contains(&b) {
                return Err(QuotientError::UnknownTarget(a, b));
            }
        }
        let eps = self
            .regions
            .iter()
            .map(|r| r.tau_upper - r.tau_lower)
            .fold(0.0, f64::max);
        if eps != self.epsilon {
            return Err(QuotientError::Malformed(format!(
                "epsilon {} differs from the widest interval {eps}",
                self.epsilon
            )));
        }
        Ok(())
    }

    /// Canonical JSON: sorted keys, floats with 17 significant digits.
    pub fn to_json(&self) -> String {
        let v = serde_json::to_value(self).expect("abstraction serializes");
        let mut out = String::new();
        write_canonical(&v, &mut out);
        out.push('\n');
        out
    }

    pub fn from_json(text: &str) -> Result<Self, QuotientError> {
        let a: Abstraction =
            serde_json::from_str(text).map_err(|e| QuotientError::Malformed(e.to_string()))?;
        if a.version != FORMAT_VERSION {
            return Err(QuotientError::Malformed(format!("unsupported version {}", a.version)));
        }
        a.check()?;
        Ok(a)
    }

    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph traffic {\n  node [shape=box];\n");
        for r in &self.regions {
            let _ = writeln!(
                out,
                "  R{} [label=\"R{} [{:.6},{:.6}]\"];",
                r.id, r.id, r.tau_lower, r.tau_upper
            );
        }
        for &(a, b) in &self.transitions {
            let _ = writeln!(out, "  R{a} -> R{b};");
        }
        out.push_str("}\n");
        out
    }
}

fn write_canonical(v: &Value, out: &mut String) {
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if let Some(u) = n.as_u64() {
                let _ = write!(out, "{u}");
            } else if let Some(i) = n.as_i64() {
                let _ = write!(out, "{i}");
            } else {
                let _ = write!(out, "{:.16e}", n.as_f64().unwrap_or(f64::NAN));
            }
        }
        Value::String(s) => out.push_str(&serde_json::to_string(s).expect("strings serialize")),
        Value::Array(items) => {
            out.push('[');
            for (k, item) in items.iter().enumerate() {
                if k > 0 {
                    out.push(',');
                }
                write_canonical(item, out);
            }
            out.push(']');
        }
        Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push('{');
            for (k, key) in keys.into_iter().enumerate() {
                if k > 0 {
                    out.push(',');
                }
                out.push_str(&serde_json::to_string(key).expect("strings serialize"));
                out.push(':');
                write_canonical(&map[key], out);
            }
            out.push('}');
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::partition::grid_partition;
    use crate::symkernel::IntervalBox;

    fn prov() -> Provenance {
        Provenance {
            config_sha256: "00".into(),
            tool_version: "test".into(),
        }
    }

    fn line(k: usize) -> Partition {
        grid_partition(&IntervalBox::from_bounds(&[-1.0], &[1.0]).unwrap(), &[k]).unwrap()
    }

    fn result(id: usize, lo: f64, hi: f64, targets: &[usize]) -> RegionResult {
        RegionResult {
            id,
            tau_lower: lo,
            tau_upper: hi,
            targets: targets.iter().copied().collect(),
            diagnostics: vec![],
        }
    }

    #[test]
    fn single_region_gets_self_loop() {
        let p = line(1);
        let a = assemble(&p, &[result(1, 0.01, 0.025, &[])], 0.025, Mode::Unperturbed, prov()).unwrap();
        assert_eq!(a.successors(1), vec![1]);
        assert_eq!(a.regions[0].diagnostics, vec![FORCED_SELF_LOOP.to_string()]);
        assert_eq!(a.epsilon, 0.025 - 0.01);
        assert!(a.to_json().contains("\"diagnostics\":[\"forced_self_loop\"]"));
    }

    #[test]
    fn inversion_is_rejected() {
        let p = line(1);
        let err = assemble(&p, &[result(1, 0.02, 0.01, &[1])], 0.025, Mode::Unperturbed, prov());
        assert!(matches!(err, Err(QuotientError::Inversion { id: 1, .. })));
        let err = assemble(&p, &[result(1, 0.0, 0.03, &[1])], 0.025, Mode::Unperturbed, prov());
        assert!(matches!(err, Err(QuotientError::OutOfRange { .. })));
    }

    #[test]
    fn json_round_trip_is_exact() {
        let p = line(3);
        let res = [
            result(1, 0.1 / 3.0, 0.2, &[1, 2]),
            result(2, 1e-7, 0.25, &[2]),
            result(3, 0.0, 0.0, &[2, 3]),
        ];
        let a = assemble(&p, &res, 0.25, Mode::Perturbed, prov()).unwrap();
        let text = a.to_json();
        let b = Abstraction::from_json(&text).unwrap();
        assert_eq!(a, b);
        assert_eq!(text, b.to_json());
        assert!(text.starts_with("{\"epsilon\":"));
        assert!(a.to_dot().contains("R1 -> R2;"));
    }
}
