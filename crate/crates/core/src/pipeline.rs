//! End-to-end construction of a traffic abstraction.

use std::collections::BTreeSet;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::etcmodel::{build_extended, homogenize, EtcModel, HomogenizedModel, ModelError};
use crate::isochron::{
    prepare, radius_search, Isochron, region_lower_bound, DeltaOptions, IsochronConfig, IsochronError,
    RadiusOptions, XiOptions,
};
use crate::partition::{grid_partition, Partition, PartitionError};
use crate::quotient::{assemble, Abstraction, Mode, Provenance, QuotientError, RegionResult};
use crate::reach::{find_upper_bound, flowpipe_csv, transitions, Reacher, ReachOptions};
use crate::symkernel::SearchLimits;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Isochron(#[from] IsochronError),
    #[error(transparent)]
    Partition(#[from] PartitionError),
    #[error(transparent)]
    Quotient(#[from] QuotientError),
    #[error("heartbeat must be positive, got {0}")]
    Heartbeat(f64),
    #[error("worker pool: {0}")]
    Pool(String),
}

pub const NO_LOWER_BOUND: &str = "no_lower_bound";

#[derive(Debug, Clone, PartialEq)]
pub struct AbstractionConfig {
    pub divisions: Vec<usize>,
    pub isochron: IsochronConfig,
    pub heartbeat: f64,
    pub xi: XiOptions,
    pub deltas: DeltaOptions,
    pub radius: RadiusOptions,
    pub reach: ReachOptions,
    /// Certify the trigger over the whole state box, not only at the grid
    /// vertices.
    pub strict: bool,
    pub jobs: Option<usize>,
    /// Keep a CSV dump of every region's flowpipe in the output.
    pub keep_flowpipes: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegionLog {
    pub id: usize,
    pub radius: Option<f64>,
    pub tau_lower: f64,
    pub tau_upper: f64,
    pub transitions: usize,
    pub leaves: usize,
    pub lower_seconds: f64,
    pub upper_seconds: f64,
    pub diagnostics: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Derived {
    pub alpha: u32,
    pub theta: u32,
    pub p: usize,
    pub deltas: Vec<f64>,
    pub delta_fallback: bool,
    pub phi_lo: Vec<f64>,
    pub phi_hi: Vec<f64>,
    pub e_lo: Vec<f64>,
    pub e_hi: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Output {
    pub abstraction: Abstraction,
    pub partition: Partition,
    pub derived: Derived,
    pub regions: Vec<RegionLog>,
    pub notes: Vec<String>,
    pub prepare_seconds: f64,
    /// Flowpipe CSV rows per region, empty unless requested.
    pub flowpipes: Vec<String>,
}

/// Everything computed before the per-region stages.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub homogenized: HomogenizedModel,
    pub isochron: Isochron,
    pub partition: Partition,
    pub notes: Vec<String>,
    pub seconds: f64,
}

impl Prepared {
    pub fn derived(&self) -> Derived {
        let iso = &self.isochron;
        Derived {
            alpha: self.homogenized.alpha(),
            theta: self.homogenized.theta(),
            p: iso.params.p(),
            deltas: iso.params.deltas().to_vec(),
            delta_fallback: iso.deltas.fallback,
            phi_lo: iso.sets.phi.lo(),
            phi_hi: iso.sets.phi.hi(),
            e_lo: iso.sets.e.lo(),
            e_hi: iso.sets.e.hi(),
        }
    }
}

fn pool(cfg: &AbstractionConfig) -> Result<rayon::ThreadPool, PipelineError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs.unwrap_or(0))
        .build()
        .map_err(|e| PipelineError::Pool(e.to_string()))
}

/// Checks, partition, homogenization, sets and coefficients.
pub fn prepare_model(model: &EtcModel, cfg: &AbstractionConfig) -> Result<Prepared, PipelineError> {
    if !(cfg.heartbeat > 0.0) {
        return Err(PipelineError::Heartbeat(cfg.heartbeat));
    }
    cfg.isochron.validate(model.state_box())?;
    let partition = grid_partition(model.state_box(), &cfg.divisions)?;
    let mut notes = Vec::new();
    let samples = partition.sample_points();
    model.check_trigger_points(&samples)?;
    if cfg.strict {
        model.verify_trigger_negative(SearchLimits::default())?;
    }
    let hm = homogenize(model, &build_extended(model), "w")?;
    let mut iso_cfg = cfg.isochron.clone();
    if model.is_perturbed() && iso_cfg.p != 1 {
        notes.push(format!(
            "disturbances present: using only the first Lie derivative (p = 1 instead of {})",
            iso_cfg.p
        ));
        iso_cfg.p = 1;
    }
    let started = Instant::now();
    let iso = pool(cfg)?.install(|| {
        prepare(
            &hm,
            model.delta_box(),
            &iso_cfg,
            &cfg.xi,
            &cfg.deltas,
            &samples,
            cfg.heartbeat,
        )
    })?;
    Ok(Prepared {
        homogenized: hm,
        isochron: iso,
        partition,
        notes,
        seconds: started.elapsed().as_secs_f64(),
    })
}

/// Run every stage and assemble the abstraction.
pub fn build_abstraction(
    model: &EtcModel,
    cfg: &AbstractionConfig,
    provenance: Provenance,
) -> Result<Output, PipelineError> {
    let prep = prepare_model(model, cfg)?;
    let pool = pool(cfg)?;
    let partition = &prep.partition;
    let iso = &prep.isochron;
    let params = &iso.params;
    let mut radius_opts = cfg.radius.clone();
    radius_opts.tau_cap = Some(cfg.heartbeat);
    let reacher = Reacher::for_model(model);
    let n = model.n();

    let per_region: Vec<(RegionResult, RegionLog, String)> = pool.install(|| {
        partition
            .regions()
            .par_iter()
            .map(|reg| {
                let t0 = Instant::now();
                let x_star = reg.x_star();
                let outcome = radius_search(params, &reg.bx, &x_star, &radius_opts);
                let mut diagnostics = Vec::new();
                let tau_lower = match outcome.radius {
                    Some(r) => region_lower_bound(r, &x_star, params).min(cfg.heartbeat),
                    None => {
                        diagnostics.push(NO_LOWER_BOUND.to_string());
                        0.0
                    }
                };
                let lower_seconds = t0.elapsed().as_secs_f64();
                let t1 = Instant::now();
                let reach = find_upper_bound(model, &reacher, &reg.bx, tau_lower, cfg.heartbeat, &cfg.reach);
                let targets: BTreeSet<usize> = transitions(&reach, partition, n);
                diagnostics.extend(reach.diagnostics.iter().cloned());
                let log = RegionLog {
                    id: reg.id,
                    radius: outcome.radius,
                    tau_lower,
                    tau_upper: reach.tau_upper,
                    transitions: targets.len(),
                    leaves: reach.leaves.len(),
                    lower_seconds,
                    upper_seconds: t1.elapsed().as_secs_f64(),
                    diagnostics: diagnostics.clone(),
                };
                let res = RegionResult {
                    id: reg.id,
                    tau_lower,
                    tau_upper: reach.tau_upper,
                    targets,
                    diagnostics,
                };
                let dump = if cfg.keep_flowpipes {
                    flowpipe_csv(reg.id, &reach)
                } else {
                    String::new()
                };
                (res, log, dump)
            })
            .collect()
    });
    let mut results = Vec::with_capacity(per_region.len());
    let mut regions = Vec::with_capacity(per_region.len());
    let mut flowpipes = Vec::with_capacity(per_region.len());
    for (res, log, dump) in per_region {
        results.push(res);
        regions.push(log);
        flowpipes.push(dump);
    }
    let mode = if model.is_perturbed() {
        Mode::Perturbed
    } else {
        Mode::Unperturbed
    };
    let abstraction = assemble(&partition, &results, cfg.heartbeat, mode, provenance)?;
    let derived = prep.derived();
    Ok(Output {
        abstraction,
        derived,
        regions,
        prepare_seconds: prep.seconds,
        partition: prep.partition,
        notes: prep.notes,
        flowpipes,
    })
}
