//! Boxes enclosing the states and measurement errors reachable before the
//! next event, as seen by the homogenized triggering function.

use crate::etcmodel::HomogenizedModel;
use crate::symkernel::{
    verify_nonpositive, Expr, IntervalBox, IntervalScalar, Polynomial, SearchLimits, Verdict,
};

use super::IsochronError;

/// How the error box is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ErrorSetMode {
    /// `Z − Φ` by interval subtraction.
    Difference,
    /// The smallest certified box outside of which `φ̃ ≥ 0` for every state
    /// in `Φ`; never larger than `Z − Φ`.
    #[default]
    Triggering,
}

#[derive(Debug, Clone, PartialEq)]
pub struct XiOptions {
    /// The search for `Φ` gives up once the box reaches `cap_factor` times
    /// the half-widths of `Z`.
    pub cap_factor: f64,
    /// First nonzero margin, relative to the half-widths.
    pub first_margin: f64,
    pub growth: f64,
    pub error_set: ErrorSetMode,
    pub limits: SearchLimits,
}

impl Default for XiOptions {
    fn default() -> Self {
        Self {
            cap_factor: 10.0,
            first_margin: 1e-4,
            growth: 1.5,
            error_set: ErrorSetMode::default(),
            limits: SearchLimits {
                min_width: 1e-6,
                budget: 20_000,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct XiSets {
    pub phi: IntervalBox,
    pub e: IntervalBox,
    pub w: IntervalScalar,
}

impl XiSets {
    /// `Φ × E × W`, in the variable order of the homogenized model.
    pub fn xi(&self) -> IntervalBox {
        self.phi
            .product(&self.e)
            .product(&IntervalBox::new(vec![self.w]))
    }
}

/// `φ̃` with disturbance variables (absent from it) dropped, over `(ζ, ε, w)`.
fn trigger_without_disturbance(hm: &HomogenizedModel) -> Expr {
    let k = 2 * hm.n() + 1;
    let phi = hm.phi_tilde();
    let vars = crate::symkernel::var_list(&hm.vars()[..k]);
    let mapping: Vec<usize> = (0..phi.nvars()).map(|i| i.min(k - 1)).collect();
    let reduced: Polynomial = phi.embed(vars, &mapping);
    Expr::poly(&(-&reduced))
}

fn box_around(center: &[f64], half: &[f64], scale: f64) -> IntervalBox {
    IntervalBox::new(
        center
            .iter()
            .zip(half)
            .map(|(&c, &h)| IntervalScalar::point(c) + IntervalScalar::new(-h * scale, h * scale).unwrap())
            .collect(),
    )
}

/// Slabs covering `outer` minus the interior of `inner`.
fn shell(inner: &IntervalBox, outer: &IntervalBox) -> Vec<IntervalBox> {
    let mut out = Vec::new();
    for i in 0..inner.dim() {
        let (ilo, ihi) = (inner.dims()[i].lo(), inner.dims()[i].hi());
        let (olo, ohi) = (outer.dims()[i].lo(), outer.dims()[i].hi());
        for (lo, hi) in [(ihi, ohi), (olo, ilo)] {
            if hi > lo {
                let mut b = outer.clone();
                b.dims_mut()[i] = IntervalScalar::new(lo, hi).unwrap();
                out.push(b);
            }
        }
    }
    out
}

fn certified_nonnegative(
    neg_phi: &Expr,
    boxes: impl Iterator<Item = IntervalBox>,
    limits: SearchLimits,
) -> bool {
    boxes
        .into_iter()
        .all(|b| matches!(verify_nonpositive(neg_phi, &b, limits), Verdict::Proved))
}

fn margins(opts: &XiOptions) -> impl Iterator<Item = f64> + '_ {
    std::iter::once(0.0).chain(
        (0..)
            .map(move |k| opts.first_margin * opts.growth.powi(k))
            .take_while(move |&m| m < opts.cap_factor - 1.0),
    )
}

/// Build `Φ`, `E` and `W`. Outside of `Φ` (within the cap box) every
/// admissible error makes `φ̃ ≥ 0`, so states reached before the next event
/// stay in `Φ`.
pub fn build_xi(
    hm: &HomogenizedModel,
    z: &IntervalBox,
    w: IntervalScalar,
    opts: &XiOptions,
) -> Result<XiSets, IsochronError> {
    let n = hm.n();
    if z.dim() != n {
        return Err(IsochronError::Config(format!(
            "Z has {} dimensions, the model has {n} states",
            z.dim()
        )));
    }
    let neg_phi = trigger_without_disturbance(hm);
    let wbox = IntervalBox::new(vec![w]);
    let zc = z.center();
    let zh: Vec<f64> = z.dims().iter().map(|d| d.radius()).collect();
    let cap = box_around(&zc, &zh, opts.cap_factor);

    let mut phi = None;
    for m in margins(opts) {
        let cand = box_around(&zc, &zh, 1.0 + m);
        // Errors compatible with a state in a slab are Z − slab.
        let slabs = shell(&cand, &cap).into_iter().map(|s| {
            let e: Vec<IntervalScalar> = z.dims().iter().zip(s.dims()).map(|(a, b)| *a - *b).collect();
            s.product(&IntervalBox::new(e)).product(&wbox)
        });
        if certified_nonnegative(&neg_phi, slabs, opts.limits) {
            phi = Some(cand);
            break;
        }
    }
    let phi = phi.ok_or(IsochronError::PhiUnbounded)?;

    let diff = IntervalBox::new(
        z.dims().iter().zip(phi.dims()).map(|(a, b)| *a - *b).collect(),
    );
    let e = match opts.error_set {
        ErrorSetMode::Difference => diff,
        ErrorSetMode::Triggering => {
            let dc = diff.center();
            let dh: Vec<f64> = diff.dims().iter().map(|d| d.radius()).collect();
            let mut found = diff.clone();
            for m in margins(opts).skip(1).take_while(|&m| m < 1.0) {
                let cand = box_around(&dc, &dh, m);
                let slabs = shell(&cand, &diff)
                    .into_iter()
                    .map(|s| phi.product(&s).product(&wbox));
                if certified_nonnegative(&neg_phi, slabs, opts.limits) {
                    found = cand;
                    break;
                }
            }
            found
        }
    };
    Ok(XiSets { phi, e, w })
}
