//! Spherical-segment radii and the region lower bounds they imply.

use crate::symkernel::{verify_nonpositive, Expr, IntervalBox, IntervalScalar, SearchLimits, Verdict};

use super::expm::expm_enclosure;
use super::mu::IsochronParams;

/// Where the descending line search starts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RadiusStart {
    /// `|(x⋆, 1)|`, which caps the bound at `τ⋆`.
    Norm,
    /// The radius suggested by floating-point crossing times sampled over
    /// the region, capped so the bound does not exceed `tau_cap`.
    Estimate,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadiusOptions {
    pub start: RadiusStart,
    pub factor: f64,
    /// Smallest radius tried, relative to the start.
    pub floor: f64,
    /// Bisection steps between the first accepted radius and the last
    /// rejected one.
    pub refine_steps: usize,
    pub samples_per_axis: usize,
    /// Bounds above this value are not useful (the heartbeat).
    pub tau_cap: Option<f64>,
    pub limits: SearchLimits,
}

impl Default for RadiusOptions {
    fn default() -> Self {
        Self {
            start: RadiusStart::Estimate,
            factor: 0.9,
            floor: 1e-6,
            refine_steps: 6,
            samples_per_axis: 5,
            tau_cap: None,
            limits: SearchLimits {
                min_width: 1e-7,
                budget: 4_000,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadiusOutcome {
    /// Accepted radius, or `None` when the floor was reached.
    pub radius: Option<f64>,
    pub start: f64,
    pub candidates: usize,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `(r / |(x⋆, 1)|)^α · τ⋆`, where `x_star` is the lifted vertex.
pub fn region_lower_bound(r: f64, x_star: &[f64], params: &IsochronParams) -> f64 {
    (r / norm(x_star)).powi(params.alpha() as i32) * params.tau_star()
}

/// The check that the sphere of radius `r` lies inside the approximated
/// manifold over the directions of `region`.
pub fn segment_condition(params: &IsochronParams, mu0: &[Expr], r: f64) -> Expr {
    let ratio = IntervalScalar::point(r) * IntervalScalar::point(params.rho()).recip();
    let t = ratio.powi(params.alpha() as i32) * IntervalScalar::point(params.tau_star());
    let m = expm_enclosure(params.a_matrix(), t);
    Expr::weighted(m[0].iter().copied().zip(mu0.iter().cloned()).collect())
}

fn sample_grid(region: &IntervalBox, per_axis: usize) -> Vec<Vec<f64>> {
    let n = region.dim();
    let k = per_axis.max(2);
    let mut pts = Vec::with_capacity(k.pow(n as u32));
    let mut idx = vec![0usize; n];
    loop {
        pts.push(
            idx.iter()
                .zip(region.dims())
                .map(|(&i, d)| d.lo() + (d.hi() - d.lo()) * i as f64 / (k - 1) as f64)
                .collect(),
        );
        let mut j = 0;
        while j < n {
            idx[j] += 1;
            if idx[j] < k {
                break;
            }
            idx[j] = 0;
            j += 1;
        }
        if j == n {
            break;
        }
    }
    pts
}

/// Largest radius (on a descending geometric search followed by bisection)
/// for which the segment condition is proved over `region`.
pub fn radius_search(
    params: &IsochronParams,
    region: &IntervalBox,
    x_star: &[f64],
    opts: &RadiusOptions,
) -> RadiusOutcome {
    let alpha = params.alpha() as i32;
    let star_norm = norm(x_star);
    let r_cap = opts
        .tau_cap
        .map(|cap| star_norm * (cap / params.tau_star()).powf(1.0 / alpha as f64));
    let start = match opts.start {
        RadiusStart::Norm => star_norm,
        RadiusStart::Fixed(r) => r,
        RadiusStart::Estimate => {
            let cap = opts.tau_cap.unwrap_or(1e3 * params.tau_star());
            let t_min = sample_grid(region, opts.samples_per_axis)
                .iter()
                .map(|x| {
                    let lifted = (1.0 + x.iter().map(|v| v * v).sum::<f64>()).sqrt();
                    params.crossing_time(x, params.normalized_from_time(cap, lifted))
                })
                .fold(f64::INFINITY, f64::min);
            let r_est = params.rho() * (t_min / params.tau_star()).powf(1.0 / alpha as f64);
            let r = match r_cap {
                Some(c) => r_est.min(c),
                None => r_est,
            };
            if r.is_finite() && r > 0.0 {
                r
            } else {
                star_norm
            }
        }
    };
    let mu0 = params.mu0_exprs();
    let accepts = |r: f64| {
        matches!(
            verify_nonpositive(&segment_condition(params, &mu0, r), region, opts.limits),
            Verdict::Proved
        )
    };
    let floor = start * opts.floor;
    let mut candidates = 0usize;
    let mut r = start;
    let mut rejected: Option<f64> = None;
    let accepted = loop {
        if r < floor {
            break None;
        }
        candidates += 1;
        if accepts(r) {
            break Some(r);
        }
        rejected = Some(r);
        r *= opts.factor;
    };
    let radius = accepted.map(|mut lo| {
        if let Some(mut hi) = rejected {
            for _ in 0..opts.refine_steps {
                let mid = 0.5 * (lo + hi);
                candidates += 1;
                if accepts(mid) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
        }
        lo
    });
    RadiusOutcome {
        radius,
        start,
        candidates,
    }
}
