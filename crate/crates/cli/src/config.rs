//! Job configuration files (TOML) and their validation.

use std::fmt;
use std::ops::Range;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use sha2::{Digest, Sha256};
use toml::Spanned;

use etc_traffic::etcmodel::{EtcModel, ModelError, ModelSpec};
use etc_traffic::isochron::{
    DeltaOptions, ErrorSetMode, IsochronConfig, RadiusOptions, RadiusStart, XiOptions,
};
use etc_traffic::partition::grid_partition;
use etc_traffic::pipeline::AbstractionConfig;
use etc_traffic::reach::ReachOptions;
use etc_traffic::sim::Disturbance;
use etc_traffic::symkernel::{parse_poly, var_list, IntervalBox, IntervalScalar, SearchLimits};

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub file: String,
    /// 1-based line and column, when the problem can be pinned down.
    pub at: Option<(usize, usize)>,
    pub key: String,
    pub msg: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.at {
            Some((l, c)) => write!(f, "{}:{l}:{c}: {}: {}", self.file, self.key, self.msg),
            None => write!(f, "{}: {}: {}", self.file, self.key, self.msg),
        }
    }
}

impl std::error::Error for ConfigError {}

type S<T> = Spanned<T>;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    system: S<RawSystem>,
    abstraction: S<RawAbstraction>,
    simulation: Option<S<RawSimulation>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSystem {
    dimension: Option<S<usize>>,
    states: S<Vec<String>>,
    errors: Option<S<Vec<String>>>,
    field: S<Vec<S<String>>>,
    trigger: S<String>,
    disturbances: Option<S<Vec<String>>>,
    disturbance_lo: Option<S<Vec<f64>>>,
    disturbance_hi: Option<S<Vec<f64>>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAbstraction {
    state_lo: S<Vec<f64>>,
    state_hi: S<Vec<f64>>,
    divisions: S<Vec<usize>>,
    z_lo: Option<S<Vec<f64>>>,
    z_hi: Option<S<Vec<f64>>>,
    w: Option<S<Vec<f64>>>,
    rho: Option<S<f64>>,
    c: Option<S<f64>>,
    p: Option<S<usize>>,
    tau_star: Option<S<f64>>,
    heartbeat: Option<S<f64>>,
    seed: Option<S<u64>>,
    jobs: Option<S<usize>>,
    strict: Option<bool>,
    sets: Option<S<RawSets>>,
    deltas: Option<S<RawDeltas>>,
    radius: Option<S<RawRadius>>,
    reach: Option<S<RawReach>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSets {
    error_set: Option<S<String>>,
    cap_factor: Option<S<f64>>,
    budget: Option<S<usize>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDeltas {
    search: Option<bool>,
    sweeps: Option<S<usize>>,
    budget: Option<S<usize>>,
    sup_tol: Option<S<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRadius {
    start: Option<S<String>>,
    factor: Option<S<f64>>,
    refine_steps: Option<usize>,
    samples_per_axis: Option<S<usize>>,
    budget: Option<S<usize>>,
    min_width: Option<S<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawReach {
    step: Option<S<f64>>,
    width_cap: Option<S<f64>>,
    max_depth: Option<usize>,
    budget: Option<S<usize>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSimulation {
    x0: S<Vec<f64>>,
    horizon: S<f64>,
    disturbance: Option<S<RawDisturbance>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDisturbance {
    kind: S<String>,
    value: Option<S<Vec<f64>>>,
    amplitude: Option<S<Vec<f64>>>,
    omega: Option<S<f64>>,
    phase: Option<f64>,
    dwell: Option<S<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    pub x0: Vec<f64>,
    pub horizon: f64,
    pub disturbance: Disturbance,
}

/// A fully validated job.
#[derive(Debug, Clone)]
pub struct JobConfig {
    pub path: PathBuf,
    pub sha256: String,
    pub model: EtcModel,
    pub abstraction: AbstractionConfig,
    pub seed: u64,
    pub simulation: Option<SimulationConfig>,
}

struct Ctx<'a> {
    file: String,
    src: &'a str,
}

impl Ctx<'_> {
    fn pos(&self, span: Range<usize>) -> (usize, usize) {
        let upto = &self.src[..span.start.min(self.src.len())];
        let line = upto.matches('\n').count() + 1;
        let col = upto.rfind('\n').map_or(upto.len(), |i| upto.len() - i - 1) + 1;
        (line, col)
    }

    fn err<T>(&self, key: &str, span: Option<Range<usize>>, msg: impl Into<String>) -> Result<T, ConfigError> {
        Err(ConfigError {
            file: self.file.clone(),
            at: span.map(|s| self.pos(s)),
            key: key.to_string(),
            msg: msg.into(),
        })
    }

    fn positive(&self, key: &str, v: &Option<S<f64>>, default: f64) -> Result<f64, ConfigError> {
        match v {
            None => Ok(default),
            Some(s) if *s.get_ref() > 0.0 && s.get_ref().is_finite() => Ok(*s.get_ref()),
            Some(s) => self.err(key, Some(s.span()), format!("must be positive, got {}", s.get_ref())),
        }
    }

    fn positive_count(&self, key: &str, v: &Option<S<usize>>, default: usize) -> Result<usize, ConfigError> {
        match v {
            None => Ok(default),
            Some(s) if *s.get_ref() > 0 => Ok(*s.get_ref()),
            Some(s) => self.err(key, Some(s.span()), "must be at least 1"),
        }
    }

    fn boxed(&self, key: &str, lo: &S<Vec<f64>>, hi: &S<Vec<f64>>, n: usize) -> Result<IntervalBox, ConfigError> {
        if lo.get_ref().len() != n {
            return self.err(key, Some(lo.span()), format!("expected {n} values, found {}", lo.get_ref().len()));
        }
        if hi.get_ref().len() != n {
            return self.err(key, Some(hi.span()), format!("expected {n} values, found {}", hi.get_ref().len()));
        }
        IntervalBox::from_bounds(lo.get_ref(), hi.get_ref())
            .or_else(|e| self.err(key, Some(lo.span()), format!("empty box: {e}")))
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Read and validate a configuration file.
pub fn load(path: &Path) -> Result<JobConfig, ConfigError> {
    let file = path.display().to_string();
    let src = std::fs::read_to_string(path).map_err(|e| ConfigError {
        file: file.clone(),
        at: None,
        key: "<file>".into(),
        msg: e.to_string(),
    })?;
    let mut job = parse(&src, &file)?;
    job.path = path.to_path_buf();
    Ok(job)
}

/// Validate configuration text; `file` is used in messages only.
pub fn parse(src: &str, file: &str) -> Result<JobConfig, ConfigError> {
    let cx = Ctx {
        file: file.to_string(),
        src,
    };
    let raw: RawConfig = toml::from_str(src).map_err(|e| ConfigError {
        file: file.to_string(),
        at: e.span().map(|s| cx.pos(s)),
        key: "<syntax>".into(),
        msg: e.message().to_string(),
    })?;
    let sys = raw.system.get_ref();
    let abs = raw.abstraction.get_ref();

    let states = sys.states.get_ref().clone();
    let n = states.len();
    if n == 0 {
        return cx.err("system.states", Some(sys.states.span()), "at least one state is required");
    }
    if let Some(d) = &sys.dimension {
        if *d.get_ref() != n {
            return cx.err("system.dimension", Some(d.span()), format!("is {}, but {n} states are named", d.get_ref()));
        }
    }
    if sys.field.get_ref().len() != n {
        return cx.err(
            "system.field",
            Some(sys.field.span()),
            format!("expected {n} expressions, found {}", sys.field.get_ref().len()),
        );
    }
    let errors: Vec<String> = match &sys.errors {
        Some(e) if e.get_ref().len() != n => {
            return cx.err("system.errors", Some(e.span()), format!("expected {n} names, found {}", e.get_ref().len()));
        }
        Some(e) => e.get_ref().clone(),
        None => states.iter().map(|s| format!("e_{s}")).collect(),
    };
    let disturbances: Vec<String> = sys.disturbances.as_ref().map(|d| d.get_ref().clone()).unwrap_or_default();
    let nd = disturbances.len();
    let (d_lo, d_hi) = if nd > 0 {
        let (Some(lo), Some(hi)) = (&sys.disturbance_lo, &sys.disturbance_hi) else {
            return cx.err(
                "system.disturbance_lo",
                Some(raw.system.span()),
                "disturbances need disturbance_lo and disturbance_hi",
            );
        };
        let b = cx.boxed("system.disturbance_lo", lo, hi, nd)?;
        (b.lo(), b.hi())
    } else {
        if let Some(lo) = &sys.disturbance_lo {
            return cx.err("system.disturbance_lo", Some(lo.span()), "given without disturbance variables");
        }
        (vec![], vec![])
    };
    let mut names: Vec<String> = states.iter().chain(&errors).chain(&disturbances).cloned().collect();
    names.sort();
    if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
        return cx.err("system.states", Some(sys.states.span()), format!("duplicate variable name `{}`", w[0]));
    }
    if names.iter().any(|v| v == "w") {
        return cx.err("system.states", Some(sys.states.span()), "`w` is reserved for the homogenization variable");
    }
    let all: Vec<String> = states.iter().chain(&errors).chain(&disturbances).cloned().collect();
    let vars = var_list(&all);
    for (i, f) in sys.field.get_ref().iter().enumerate() {
        if let Err(e) = parse_poly(f.get_ref(), &vars) {
            return cx.err(&format!("system.field[{i}]"), Some(f.span()), e.to_string());
        }
    }
    if let Err(e) = parse_poly(sys.trigger.get_ref(), &vars) {
        return cx.err("system.trigger", Some(sys.trigger.span()), e.to_string());
    }

    let heartbeat = cx.positive("abstraction.heartbeat", &abs.heartbeat, 0.025)?;
    let state_box = cx.boxed("abstraction.state_lo", &abs.state_lo, &abs.state_hi, n)?;
    let spec = ModelSpec {
        states,
        errors: Some(errors),
        disturbances,
        field: sys.field.get_ref().iter().map(|f| f.get_ref().clone()).collect(),
        trigger: sys.trigger.get_ref().clone(),
        disturbance_lo: d_lo,
        disturbance_hi: d_hi,
        state_lo: state_box.lo(),
        state_hi: state_box.hi(),
        heartbeat: Some(heartbeat),
    };
    let model = EtcModel::from_spec(&spec).or_else(|e| {
        let (key, span) = match &e {
            ModelError::TriggerUsesDisturbance(_) => ("system.trigger", sys.trigger.span()),
            ModelError::OriginNotInterior => ("abstraction.state_lo", abs.state_lo.span()),
            ModelError::DuplicateVariable(_) => ("system.states", sys.states.span()),
            _ => ("system", raw.system.span()),
        };
        cx.err(key, Some(span), e.to_string())
    })?;

    let divisions = abs.divisions.get_ref().clone();
    let partition = grid_partition(model.state_box(), &divisions)
        .or_else(|e| cx.err("abstraction.divisions", Some(abs.divisions.span()), e.to_string()))?;
    let vertices = partition.sample_points();
    if let Err(e) = model.check_trigger_points(&vertices) {
        return cx.err("system.trigger", Some(sys.trigger.span()), e.to_string());
    }
    let strict = abs.strict.unwrap_or(false);

    let z = match (&abs.z_lo, &abs.z_hi) {
        (Some(lo), Some(hi)) => cx.boxed("abstraction.z_lo", lo, hi, n)?,
        (None, None) => IntervalBox::from_bounds(&vec![-0.1; n], &vec![0.1; n]).expect("valid box"),
        (Some(s), None) | (None, Some(s)) => {
            return cx.err("abstraction.z_lo", Some(s.span()), "z_lo and z_hi must be given together");
        }
    };
    let w = match &abs.w {
        None => IntervalScalar::new(1e-7, 0.1).expect("valid interval"),
        Some(s) => {
            let v = s.get_ref();
            if v.len() != 2 || !(v[0] > 0.0 && v[1] > v[0]) {
                return cx.err("abstraction.w", Some(s.span()), "expected [lo, hi] with 0 < lo < hi");
            }
            IntervalScalar::new(v[0], v[1]).expect("checked bounds")
        }
    };
    let rho = cx.positive("abstraction.rho", &abs.rho, 0.099)?;
    let iso = IsochronConfig {
        z,
        w,
        rho,
        c: cx.positive("abstraction.c", &abs.c, 1e-6)?,
        p: cx.positive_count("abstraction.p", &abs.p, 5)?,
        tau_star: cx.positive("abstraction.tau_star", &abs.tau_star, 1e-3)?,
    };
    if let Err(e) = iso.validate(model.state_box()) {
        let span = abs.rho.as_ref().map(|r| r.span()).unwrap_or(raw.abstraction.span());
        return cx.err("abstraction.rho", Some(span), e.to_string());
    }

    let mut xi = XiOptions::default();
    if let Some(s) = &abs.sets {
        let s = s.get_ref();
        if let Some(m) = &s.error_set {
            xi.error_set = match m.get_ref().as_str() {
                "triggering" => ErrorSetMode::Triggering,
                "difference" => ErrorSetMode::Difference,
                other => {
                    return cx.err(
                        "abstraction.sets.error_set",
                        Some(m.span()),
                        format!("unknown mode `{other}` (expected triggering or difference)"),
                    )
                }
            };
        }
        xi.cap_factor = cx.positive("abstraction.sets.cap_factor", &s.cap_factor, xi.cap_factor)?;
        if xi.cap_factor <= 1.0 {
            let span = s.cap_factor.as_ref().map(|c| c.span());
            return cx.err("abstraction.sets.cap_factor", span, "must exceed 1");
        }
        xi.limits.budget = cx.positive_count("abstraction.sets.budget", &s.budget, xi.limits.budget)?;
    }
    let mut deltas = DeltaOptions::default();
    if let Some(d) = &abs.deltas {
        let d = d.get_ref();
        deltas.search = d.search.unwrap_or(deltas.search);
        deltas.sweeps = cx.positive_count("abstraction.deltas.sweeps", &d.sweeps, deltas.sweeps)?;
        deltas.budget = cx.positive_count("abstraction.deltas.budget", &d.budget, deltas.budget)?;
        deltas.sup_tol = cx.positive("abstraction.deltas.sup_tol", &d.sup_tol, deltas.sup_tol)?;
    }
    let mut radius = RadiusOptions::default();
    if let Some(r) = &abs.radius {
        let r = r.get_ref();
        if let Some(s) = &r.start {
            radius.start = match s.get_ref().as_str() {
                "estimate" => RadiusStart::Estimate,
                "norm" => RadiusStart::Norm,
                other => {
                    return cx.err(
                        "abstraction.radius.start",
                        Some(s.span()),
                        format!("unknown start `{other}` (expected estimate or norm)"),
                    )
                }
            };
        }
        radius.factor = cx.positive("abstraction.radius.factor", &r.factor, radius.factor)?;
        if radius.factor >= 1.0 {
            let span = r.factor.as_ref().map(|f| f.span());
            return cx.err("abstraction.radius.factor", span, "must lie in (0, 1)");
        }
        radius.refine_steps = r.refine_steps.unwrap_or(radius.refine_steps);
        radius.samples_per_axis =
            cx.positive_count("abstraction.radius.samples_per_axis", &r.samples_per_axis, radius.samples_per_axis)?;
        radius.limits.budget = cx.positive_count("abstraction.radius.budget", &r.budget, radius.limits.budget)?;
        radius.limits.min_width = cx.positive("abstraction.radius.min_width", &r.min_width, radius.limits.min_width)?;
    }
    let mut reach = ReachOptions::default();
    if let Some(r) = &abs.reach {
        let r = r.get_ref();
        if let Some(s) = &r.step {
            reach.step = Some(cx.positive("abstraction.reach.step", &Some(s.clone()), 0.0)?);
        }
        reach.width_cap = cx.positive("abstraction.reach.width_cap", &r.width_cap, reach.width_cap)?;
        reach.max_depth = r.max_depth.unwrap_or(reach.max_depth);
        reach.limits = SearchLimits {
            budget: cx.positive_count("abstraction.reach.budget", &r.budget, reach.limits.budget)?,
            ..reach.limits
        };
    }
    let jobs = match &abs.jobs {
        Some(j) => Some(cx.positive_count("abstraction.jobs", &Some(j.clone()), 1)?),
        None => None,
    };
    let seed = abs.seed.as_ref().map(|s| *s.get_ref()).unwrap_or(0);

    let simulation = match &raw.simulation {
        None => None,
        Some(s) => Some(simulation(&cx, s.get_ref(), &model, seed)?),
    };

    let abstraction = AbstractionConfig {
        divisions,
        isochron: iso,
        heartbeat,
        xi,
        deltas,
        radius,
        reach,
        strict,
        jobs,
        keep_flowpipes: false,
    };
    Ok(JobConfig {
        path: PathBuf::from(file),
        sha256: sha256_hex(src.as_bytes()),
        model,
        abstraction,
        seed,
        simulation,
    })
}

fn simulation(cx: &Ctx, s: &RawSimulation, model: &EtcModel, seed: u64) -> Result<SimulationConfig, ConfigError> {
    let x0 = s.x0.get_ref().clone();
    if x0.len() != model.n() {
        return cx.err(
            "simulation.x0",
            Some(s.x0.span()),
            format!("expected {} values, found {}", model.n(), x0.len()),
        );
    }
    if !model.state_box().contains_point(&x0) {
        return cx.err("simulation.x0", Some(s.x0.span()), "initial state lies outside the state box");
    }
    let horizon = cx.positive("simulation.horizon", &Some(s.horizon.clone()), 0.0)?;
    let nd = model.nd();
    let disturbance = match &s.disturbance {
        None => Disturbance::Zero,
        Some(d) => {
            let span = d.span();
            let d = d.get_ref();
            let dims = |key: &str, v: &Option<S<Vec<f64>>>| -> Result<Vec<f64>, ConfigError> {
                match v {
                    Some(v) if v.get_ref().len() == nd => Ok(v.get_ref().clone()),
                    Some(v) => cx.err(key, Some(v.span()), format!("expected {nd} values, found {}", v.get_ref().len())),
                    None => cx.err(key, Some(span.clone()), "required for this disturbance kind"),
                }
            };
            if nd == 0 && d.kind.get_ref() != "zero" {
                return cx.err(
                    "simulation.disturbance.kind",
                    Some(d.kind.span()),
                    "the system declares no disturbance variables",
                );
            }
            match d.kind.get_ref().as_str() {
                "zero" => Disturbance::Zero,
                "constant" => {
                    let value = dims("simulation.disturbance.value", &d.value)?;
                    check_in_delta(cx, "simulation.disturbance.value", d.value.as_ref().map(|v| v.span()), model, &value, &value)?;
                    Disturbance::Constant { value }
                }
                "sinusoid" => {
                    let amplitude = dims("simulation.disturbance.amplitude", &d.amplitude)?;
                    let neg: Vec<f64> = amplitude.iter().map(|a| -a.abs()).collect();
                    let pos: Vec<f64> = amplitude.iter().map(|a| a.abs()).collect();
                    check_in_delta(cx, "simulation.disturbance.amplitude", d.amplitude.as_ref().map(|v| v.span()), model, &neg, &pos)?;
                    Disturbance::Sinusoid {
                        amplitude,
                        omega: cx.positive("simulation.disturbance.omega", &d.omega, 1.0)?,
                        phase: d.phase.unwrap_or(0.0),
                    }
                }
                "piecewise_random" => {
                    let b = model.delta_box().expect("disturbances are declared");
                    Disturbance::PiecewiseRandom {
                        lo: b.lo(),
                        hi: b.hi(),
                        dwell: cx.positive("simulation.disturbance.dwell", &d.dwell, 0.01)?,
                        seed,
                    }
                }
                other => {
                    return cx.err(
                        "simulation.disturbance.kind",
                        Some(d.kind.span()),
                        format!("unknown kind `{other}` (expected zero, constant, sinusoid or piecewise_random)"),
                    )
                }
            }
        }
    };
    Ok(SimulationConfig {
        x0,
        horizon,
        disturbance,
    })
}

fn check_in_delta(
    cx: &Ctx,
    key: &str,
    span: Option<Range<usize>>,
    model: &EtcModel,
    lo: &[f64],
    hi: &[f64],
) -> Result<(), ConfigError> {
    let b = model.delta_box().expect("disturbances are declared");
    let inside = b
        .dims()
        .iter()
        .zip(lo.iter().zip(hi))
        .all(|(d, (l, h))| d.lo() <= *l && *h <= d.hi());
    if inside {
        Ok(())
    } else {
        cx.err(key, span, "signal leaves the disturbance bounds")
    }
}
