use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use etc_traffic::etcmodel::{build_extended, homogenize};
use etc_traffic::partition::grid_partition;
use etc_traffic::pipeline::{build_abstraction, prepare_model, Output, PipelineError};
use etc_traffic::quotient::{Abstraction, Provenance, QuotientError};
use etc_traffic::sim::{simulate, validate, Disturbance, SimError, SimOptions, Trace};

use crate::config::{load, ConfigError, JobConfig};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
/// Slack on time comparisons, above the event localization tolerance.
pub const VALIDATION_SLACK: f64 = 1e-8;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Pipeline(#[from] PipelineError),
    #[error("simulation failed: {0}")]
    Sim(#[from] SimError),
    #[error("{path}: {source}")]
    Abstraction { path: String, source: QuotientError },
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{0}")]
    Usage(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Clean,
    /// Finished, but with per-region diagnostics or validation violations.
    Findings,
}

impl Status {
    pub fn code(self) -> u8 {
        match self {
            Status::Clean => 0,
            Status::Findings => 2,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub jobs: Option<usize>,
    pub seed: Option<u64>,
    pub strict: bool,
}

pub fn load_job(path: &Path, ov: &Overrides) -> Result<JobConfig, CliError> {
    let mut job = load(path)?;
    if let Some(j) = ov.jobs {
        if j == 0 {
            return Err(CliError::Usage("--jobs must be at least 1".into()));
        }
        job.abstraction.jobs = Some(j);
    }
    if ov.strict {
        job.abstraction.strict = true;
    }
    if let Some(s) = ov.seed {
        job.seed = s;
        if let Some(sim) = &mut job.simulation {
            if let Disturbance::PiecewiseRandom { seed, .. } = &mut sim.disturbance {
                *seed = s;
            }
        }
    }
    Ok(job)
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn sibling(out: &Path, ext: &str) -> PathBuf {
    out.with_extension(ext)
}

pub fn provenance(job: &JobConfig) -> Provenance {
    Provenance {
        config_sha256: job.sha256.clone(),
        tool_version: TOOL_VERSION.to_string(),
    }
}

/// Per-region table written next to the abstraction.
pub fn region_log(out: &Output) -> String {
    let d = &out.derived;
    let mut s = String::new();
    let _ = writeln!(s, "# mode {:?}", out.abstraction.mode);
    let _ = writeln!(s, "# alpha {} theta {} p {}", d.alpha, d.theta, d.p);
    let _ = writeln!(s, "# deltas {:?}{}", d.deltas, if d.delta_fallback { " (fallback)" } else { "" });
    let _ = writeln!(s, "# epsilon {:.17e}", out.abstraction.epsilon);
    for n in &out.notes {
        let _ = writeln!(s, "# note: {n}");
    }
    s.push_str("id\tradius\ttau_lower\ttau_upper\ttransitions\tleaves\tdiagnostics\n");
    for r in &out.regions {
        let radius = r.radius.map(|v| format!("{v:.17e}")).unwrap_or_else(|| "-".into());
        let _ = writeln!(
            s,
            "{}\t{radius}\t{:.17e}\t{:.17e}\t{}\t{}\t{}",
            r.id,
            r.tau_lower,
            r.tau_upper,
            r.transitions,
            r.leaves,
            r.diagnostics.join(";")
        );
    }
    s
}

pub fn cmd_abstract(
    config: &Path,
    ov: &Overrides,
    out: &Path,
    dot: Option<&Path>,
    flowpipes: Option<&Path>,
) -> Result<Status, CliError> {
    let job = load_job(config, ov)?;
    let mut cfg = job.abstraction.clone();
    cfg.keep_flowpipes = flowpipes.is_some();
    let started = Instant::now();
    let built = build_abstraction(&job.model, &cfg, provenance(&job))?;
    for n in &built.notes {
        eprintln!("note: {n}");
    }
    write(out, &built.abstraction.to_json())?;
    write(&sibling(out, "regions.tsv"), &region_log(&built))?;
    if let Some(p) = dot {
        write(p, &built.abstraction.to_dot())?;
    }
    if let Some(p) = flowpipes {
        let mut csv = String::from("region_id,t_lo,t_hi,bounds...\n");
        for f in &built.flowpipes {
            csv.push_str(f);
        }
        write(p, &csv)?;
    }
    let lower: f64 = built.regions.iter().map(|r| r.lower_seconds).sum();
    let upper: f64 = built.regions.iter().map(|r| r.upper_seconds).sum();
    eprintln!(
        "{} regions, {} transitions, epsilon {:.6}; prepare {:.1}s, lower bounds {:.1}s, reachability {:.1}s, wall {:.1}s",
        built.abstraction.regions.len(),
        built.abstraction.transitions.len(),
        built.abstraction.epsilon,
        built.prepare_seconds,
        lower,
        upper,
        started.elapsed().as_secs_f64()
    );
    let diagnosed = built.abstraction.diagnosed();
    if diagnosed.is_empty() {
        Ok(Status::Clean)
    } else {
        eprintln!("regions with diagnostics: {diagnosed:?}");
        Ok(Status::Findings)
    }
}

fn run_simulation(job: &JobConfig) -> Result<Trace, CliError> {
    let sim = job
        .simulation
        .as_ref()
        .ok_or_else(|| CliError::Usage(format!("{}: no [simulation] table", job.path.display())))?;
    let partition = grid_partition(job.model.state_box(), &job.abstraction.divisions).map_err(PipelineError::from)?;
    Ok(simulate(
        &job.model,
        &sim.x0,
        sim.horizon,
        &sim.disturbance,
        job.abstraction.heartbeat,
        Some(&partition),
        &SimOptions::default(),
    )?)
}

/// Step-plot data: `t_i tau_i region [tau_lower tau_upper]`.
pub fn plot_data(trace: &Trace, a: Option<&Abstraction>) -> String {
    let mut s = String::from("# gnuplot: plot 'FILE' using 1:2 with steps title 'tau'");
    if a.is_some() {
        s.push_str(", '' using 1:4 with steps title 'lower', '' using 1:5 with steps title 'upper'");
    }
    s.push_str("\n# t_i tau_i region");
    if a.is_some() {
        s.push_str(" tau_lower tau_upper");
    }
    s.push('\n');
    for smp in &trace.samples {
        let region = smp.region.map(|r| r.to_string()).unwrap_or_else(|| "-".into());
        let _ = write!(s, "{:.17e} {:.17e} {region}", smp.t, smp.tau);
        if let Some(a) = a {
            match smp.region.and_then(|id| a.region(id)) {
                Some(r) => {
                    let _ = write!(s, " {:.17e} {:.17e}", r.tau_lower, r.tau_upper);
                }
                None => s.push_str(" - -"),
            }
        }
        s.push('\n');
    }
    s
}

fn load_abstraction(path: &Path) -> Result<Abstraction, CliError> {
    Abstraction::from_json(&read(path)?).map_err(|source| CliError::Abstraction {
        path: path.display().to_string(),
        source,
    })
}

pub fn cmd_simulate(config: &Path, ov: &Overrides, out: &Path, abstraction: Option<&Path>) -> Result<Status, CliError> {
    let job = load_job(config, ov)?;
    let a = abstraction.map(load_abstraction).transpose()?;
    let trace = run_simulation(&job)?;
    write(out, &trace.to_csv(job.model.state_names()))?;
    write(&sibling(out, "dat"), &plot_data(&trace, a.as_ref()))?;
    for d in &trace.diagnostics {
        eprintln!("warning: {d}");
    }
    eprintln!("{} samples, disturbance {}", trace.samples.len(), trace.disturbance);
    Ok(Status::Clean)
}

pub fn cmd_validate(config: &Path, ov: &Overrides, abstraction: &Path, out: &Path) -> Result<Status, CliError> {
    let job = load_job(config, ov)?;
    let a = load_abstraction(abstraction)?;
    let mut warnings = Vec::new();
    if a.provenance.config_sha256 != job.sha256 {
        warnings.push(format!(
            "abstraction was built from a different configuration (hash {} vs {})",
            a.provenance.config_sha256, job.sha256
        ));
    }
    if a.heartbeat != job.abstraction.heartbeat {
        warnings.push(format!(
            "heartbeat differs: abstraction {} vs configuration {}",
            a.heartbeat, job.abstraction.heartbeat
        ));
    }
    let trace = run_simulation(&job)?;
    let mut report = validate(&a, &trace, VALIDATION_SLACK);
    report.warnings.splice(0..0, warnings);
    write(out, &report.to_json())?;
    let text = report.to_text();
    write(&sibling(out, "txt"), &text)?;
    write(&sibling(out, "trace.csv"), &trace.to_csv(job.model.state_names()))?;
    write(&sibling(out, "dat"), &plot_data(&trace, Some(&a)))?;
    print!("{text}");
    Ok(if report.pass { Status::Clean } else { Status::Findings })
}

pub fn cmd_info(config: &Path, ov: &Overrides, abstraction: Option<&Path>) -> Result<Status, CliError> {
    let job = load_job(config, ov)?;
    let m = &job.model;
    println!("config sha256: {}", job.sha256);
    println!("states: {:?}", m.state_names());
    println!("variables: {:?}", m.vars().as_slice());
    for (i, f) in m.f_closed().iter().enumerate() {
        println!("f[{i}] = {f}");
    }
    println!("trigger = {}", m.trigger());
    if let Some(d) = m.delta_box() {
        println!("disturbance box: {d}");
    }
    let hm = homogenize(m, &build_extended(m), "w").map_err(PipelineError::from)?;
    for (i, f) in hm.f_tilde().iter().enumerate() {
        println!("homogenized f[{i}] = {f}");
    }
    println!("homogenized trigger = {}", hm.phi_tilde());
    let prep = prepare_model(m, &job.abstraction)?;
    for n in &prep.notes {
        println!("note: {n}");
    }
    let d = prep.derived();
    println!("alpha = {}, theta = {}, p = {}", d.alpha, d.theta, d.p);
    println!("deltas = {:?}{}", d.deltas, if d.delta_fallback { " (fallback)" } else { "" });
    println!("Phi = {}", prep.isochron.sets.phi);
    println!("E = {}", prep.isochron.sets.e);
    println!("regions = {}", prep.partition.regions().len());
    if let Some(p) = abstraction {
        let a = load_abstraction(p)?;
        println!("epsilon = {}", a.epsilon);
        println!("transitions = {}", a.transitions.len());
    }
    Ok(Status::Clean)
}
