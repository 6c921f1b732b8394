//! Inner approximations of isochronous manifolds and the per-region lower
//! bounds on inter-sampling times derived from them.

mod deltas;
mod expm;
mod mu;
mod radius;
mod sets;

pub use deltas::{find_deltas, DeltaOptions, DeltaResult};
pub use expm::{expm, expm_enclosure};
pub use mu::{companion_matrix, IsochronParams};
pub use radius::{
    radius_search, region_lower_bound, segment_condition, RadiusOptions, RadiusOutcome,
    RadiusStart,
};
pub use sets::{build_xi, ErrorSetMode, XiOptions, XiSets};

use crate::etcmodel::HomogenizedModel;
use crate::symkernel::{IntervalBox, IntervalScalar};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum IsochronError {
    #[error("invalid isochron configuration: {0}")]
    Config(String),
    #[error("no bounded box contains the pre-event states (cap reached)")]
    PhiUnbounded,
    #[error("the μ-function is undefined at the origin")]
    ZeroPoint,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IsochronConfig {
    pub z: IntervalBox,
    pub w: IntervalScalar,
    pub rho: f64,
    pub c: f64,
    pub p: usize,
    pub tau_star: f64,
}

impl IsochronConfig {
    /// Check the geometric requirements against the state box `x`.
    pub fn validate(&self, x: &IntervalBox) -> Result<(), IsochronError> {
        let bad = |m: String| Err(IsochronError::Config(m));
        let (wl, wu) = (self.w.lo(), self.w.hi());
        if !(wl > 0.0 && wu > wl) {
            return bad(format!("W = [{wl}, {wu}] must satisfy 0 < lo < hi"));
        }
        if !(self.rho > wl) {
            return bad(format!("rho = {} must exceed the lower end of W ({wl})", self.rho));
        }
        if !(self.c > 0.0) || !(self.tau_star > 0.0) || self.p == 0 {
            return bad("c and tau_star must be positive and p at least 1".into());
        }
        if self.z.dim() != x.dim() {
            return bad(format!("Z has {} dimensions, X has {}", self.z.dim(), x.dim()));
        }
        let slice = (self.rho * self.rho - wl * wl).sqrt();
        for (i, d) in self.z.dims().iter().enumerate() {
            if !(d.lo() <= -slice && d.hi() >= slice) {
                return bad(format!(
                    "the rho-sphere slice (radius {slice}) leaves Z along axis {i}"
                ));
            }
        }
        let ball = (self.rho * self.rho - wl * wl) / (wl * wl);
        let far: f64 = x.dims().iter().map(|d| d.mag() * d.mag()).sum();
        if far > ball {
            return bad(format!(
                "X is not covered by the admissible ball: |x|^2 reaches {far}, limit {ball}"
            ));
        }
        Ok(())
    }

    /// The box `Z × {0} × W` (times `delta`) over the homogenized variables.
    pub fn initial_box(&self, delta: Option<&IntervalBox>) -> IntervalBox {
        let zero = IntervalBox::from_point(&vec![0.0; self.z.dim()]);
        let b = self.z.product(&zero).product(&IntervalBox::new(vec![self.w]));
        match delta {
            Some(d) => b.product(d),
            None => b,
        }
    }
}

/// Everything derived once per model: sets, `δ` coefficients and the
/// μ-function parameters.
#[derive(Debug, Clone)]
pub struct Isochron {
    pub sets: XiSets,
    pub deltas: DeltaResult,
    pub params: IsochronParams,
}

/// Build the sets, search the coefficients and assemble the μ-function.
/// `score_points` are states at which the candidate coefficients are
/// compared by their floating-point bound estimates; `tau_cap` caps those
/// estimates.
pub fn prepare(
    hm: &HomogenizedModel,
    delta: Option<&IntervalBox>,
    cfg: &IsochronConfig,
    xi_opts: &XiOptions,
    delta_opts: &DeltaOptions,
    score_points: &[Vec<f64>],
    tau_cap: f64,
) -> Result<Isochron, IsochronError> {
    let p = if delta.is_some() { 1 } else { cfg.p };
    let sets = build_xi(hm, &cfg.z, cfg.w, xi_opts)?;
    let chain = hm.lie_chain(p);
    let domain = match delta {
        Some(d) => sets.xi().product(d),
        None => sets.xi(),
    };
    let initial = cfg.initial_box(delta);
    let score = |d: &[f64]| {
        let params = IsochronParams::new(hm, &chain, d.to_vec(), cfg.rho, cfg.tau_star);
        let total: f64 = score_points
            .iter()
            .map(|x| params.point_lower_bound(x, tau_cap).max(1e-300).ln())
            .sum();
        total / score_points.len().max(1) as f64
    };
    let deltas = find_deltas(&chain, &domain, &initial, cfg.c, delta_opts, &score);
    let params = IsochronParams::new(hm, &chain, deltas.deltas.clone(), cfg.rho, cfg.tau_star);
    Ok(Isochron {
        sets,
        deltas,
        params,
    })
}
