//! Interval flowpipes of the extended system (with disturbances as a box),
//! timing upper bounds and transition detection.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use crate::etcmodel::{build_extended, EtcModel};
use crate::partition::Partition;
use crate::symkernel::{
    verify_nonpositive, Expr, IntervalBox, IntervalScalar, PolyEnclosure, Polynomial,
    SearchLimits, Verdict,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ReachError {
    #[error("no a-priori enclosure found at t = {0}")]
    Enclosure(f64),
    #[error("initial box has {found} dimensions, expected {expected}")]
    Arity { expected: usize, found: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReachOptions {
    /// Time step; `None` means a hundredth of the horizon.
    pub step: Option<f64>,
    /// A leaf is subdivided once a state-box width exceeds this multiple of
    /// its initial width.
    pub width_cap: f64,
    pub max_depth: usize,
    /// Picard inflation attempts before the step is halved.
    pub retries: usize,
    pub halvings: usize,
    pub limits: SearchLimits,
}

impl Default for ReachOptions {
    fn default() -> Self {
        Self {
            step: None,
            width_cap: 2.0,
            max_depth: 3,
            retries: 20,
            halvings: 6,
            limits: SearchLimits {
                min_width: 1e-6,
                budget: 2_000,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub t_lo: f64,
    pub t_hi: f64,
    /// Contains every state over `[t_lo, t_hi]`.
    pub enclosure: IntervalBox,
    /// Contains every state at `t_hi`; a subset of `enclosure`.
    pub end: IntervalBox,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Flowpipe {
    pub init: IntervalBox,
    pub segments: Vec<Segment>,
}

impl Flowpipe {
    pub fn horizon(&self) -> (f64, f64) {
        match (self.segments.first(), self.segments.last()) {
            (Some(a), Some(b)) => (a.t_lo, b.t_hi),
            _ => (0.0, 0.0),
        }
    }

    /// Segment enclosure covering elapsed time `t`.
    pub fn at(&self, t: f64) -> Option<&IntervalBox> {
        self.segments
            .iter()
            .find(|s| s.t_lo <= t && t <= s.t_hi)
            .map(|s| &s.enclosure)
    }
}

/// Interval propagation of `ẏ = f(y, d)`, `d ∈ Δ`.
#[derive(Debug, Clone)]
pub struct Reacher {
    dim: usize,
    field: Vec<PolyEnclosure>,
    delta: Option<IntervalBox>,
}

struct LeafRun {
    segments: Vec<Segment>,
    /// Time at which the stop check succeeded.
    stopped: Option<f64>,
    failed: Option<f64>,
    too_wide: bool,
}

fn lerp_times(a: f64, b: f64, max_step: f64) -> Vec<f64> {
    if b <= a {
        return vec![];
    }
    let k = ((b - a) / max_step).ceil().max(1.0) as usize;
    (1..=k)
        .map(|j| if j == k { b } else { a + (b - a) * j as f64 / k as f64 })
        .collect()
}

impl Reacher {
    /// `field` over `(y, d)`; `delta` is the box of `d` when present.
    pub fn new(field: &[Polynomial], delta: Option<&IntervalBox>) -> Self {
        Self {
            dim: field.len(),
            field: field.iter().map(PolyEnclosure::new).collect(),
            delta: delta.cloned(),
        }
    }

    /// The extended system of `m` over `(ζ, e)`.
    pub fn for_model(m: &EtcModel) -> Self {
        Self::new(&build_extended(m), m.delta_box())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn with_delta(&self, b: &IntervalBox) -> IntervalBox {
        match &self.delta {
            Some(d) => b.product(d),
            None => b.clone(),
        }
    }

    fn eval(&self, b: &IntervalBox) -> Vec<IntervalScalar> {
        let full = self.with_delta(b);
        self.field.iter().map(|f| f.enclose(full.dims())).collect()
    }

    fn euler(&self, y: &IntervalBox, dt: IntervalScalar, over: &IntervalBox) -> IntervalBox {
        let f = self.eval(over);
        IntervalBox::new(y.dims().iter().zip(f).map(|(&a, fi)| a + dt * fi).collect())
    }

    fn apriori(&self, y: &IntervalBox, dt_hi: f64, retries: usize) -> Option<IntervalBox> {
        let h = IntervalScalar::new(0.0, dt_hi).ok()?;
        let mut c = self.euler(y, h, y);
        for _ in 0..retries {
            c = IntervalBox::new(
                c.dims()
                    .iter()
                    .map(|d| d.inflate(0.05 * d.width() + 1e-12 * (1.0 + d.mag())))
                    .collect(),
            );
            let next = self.euler(y, h, &c);
            if !next.dims().iter().all(|d| d.is_finite()) {
                return None;
            }
            if c.contains_box(&next) {
                return Some(next);
            }
            c = c.hull(&next);
        }
        None
    }

    /// Enclosures over `[t0, t1]` from `y` at `t0`, halving on failure.
    fn advance(&self, y: &IntervalBox, t0: f64, t1: f64, opts: &ReachOptions, depth: usize) -> Option<Vec<Segment>> {
        let dt = IntervalScalar::point(t1) - IntervalScalar::point(t0);
        if let Some(b) = self.apriori(y, dt.hi(), opts.retries) {
            let e = self.euler(y, dt, &b);
            let end = e.intersect(&b).unwrap_or(b.clone());
            return Some(vec![Segment {
                t_lo: t0,
                t_hi: t1,
                enclosure: b,
                end,
            }]);
        }
        if depth >= opts.halvings {
            return None;
        }
        let mid = 0.5 * (t0 + t1);
        let mut first = self.advance(y, t0, mid, opts, depth + 1)?;
        let y_mid = first.last()?.end.clone();
        first.extend(self.advance(&y_mid, mid, t1, opts, depth + 1)?);
        Some(first)
    }

    fn run_leaf(
        &self,
        init: &IntervalBox,
        times: &[f64],
        width_cap: Option<f64>,
        opts: &ReachOptions,
        stop: &mut dyn FnMut(&IntervalBox, f64) -> bool,
    ) -> LeafRun {
        let n_state = self.dim / 2;
        let scale = init.dims()[..n_state.max(1)]
            .iter()
            .map(|d| d.width())
            .fold(0.0, f64::max);
        let mut run = LeafRun {
            segments: Vec::new(),
            stopped: None,
            failed: None,
            too_wide: false,
        };
        let mut y = init.clone();
        let mut t = 0.0;
        for &t1 in times {
            let Some(segs) = self.advance(&y, t, t1, opts, 0) else {
                run.failed = Some(t);
                return run;
            };
            y = segs.last().expect("advance returns segments").end.clone();
            run.segments.extend(segs);
            t = t1;
            if let Some(cap) = width_cap {
                let w = y.dims()[..n_state.max(1)]
                    .iter()
                    .map(|d| d.width())
                    .fold(0.0, f64::max);
                if scale > 0.0 && w > cap * scale {
                    run.too_wide = true;
                    return run;
                }
            }
            if stop(&y, t) {
                run.stopped = Some(t);
                return run;
            }
        }
        run
    }

    /// Flowpipes over `[0, t_end]` covering `init`, subdividing the initial
    /// set along its widest axis when the width cap is exceeded.
    pub fn flowpipe(&self, init: &IntervalBox, t_end: f64, opts: &ReachOptions) -> Result<Vec<Flowpipe>, ReachError> {
        if init.dim() != self.dim {
            return Err(ReachError::Arity {
                expected: self.dim,
                found: init.dim(),
            });
        }
        let times = lerp_times(0.0, t_end, opts.step.unwrap_or(t_end / 100.0));
        let mut out = Vec::new();
        let mut work = vec![(init.clone(), 0usize)];
        while let Some((b, depth)) = work.pop() {
            let cap = (depth < opts.max_depth).then_some(opts.width_cap);
            let run = self.run_leaf(&b, &times, cap, opts, &mut |_, _| false);
            if let Some(t) = run.failed {
                if depth < opts.max_depth && b.max_width() > 0.0 {
                    push_split(&mut work, &b, depth, self.dim / 2);
                    continue;
                }
                return Err(ReachError::Enclosure(t));
            }
            if run.too_wide {
                push_split(&mut work, &b, depth, self.dim / 2);
                continue;
            }
            out.push(Flowpipe {
                init: b,
                segments: run.segments,
            });
        }
        Ok(out)
    }
}

/// Bisect the widest of the first `n_state` axes.
fn push_split(work: &mut Vec<(IntervalBox, usize)>, b: &IntervalBox, depth: usize, n_state: usize) {
    let n = n_state.max(1).min(b.dim());
    let axis = (0..n)
        .max_by(|&i, &j| {
            b.dims()[i]
                .width()
                .partial_cmp(&b.dims()[j].width())
                .unwrap()
                .then(j.cmp(&i))
        })
        .unwrap_or(0);
    let (l, r) = b.split(axis);
    work.push((r, depth + 1));
    work.push((l, depth + 1));
}

#[derive(Debug, Clone, PartialEq)]
pub struct Leaf {
    pub init: IntervalBox,
    pub flowpipe: Flowpipe,
    /// First checked time at which the trigger is certified positive.
    pub certified: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionReach {
    pub tau_lower: f64,
    pub tau_upper: f64,
    pub leaves: Vec<Leaf>,
    pub diagnostics: Vec<String>,
    pub aborted: bool,
}

/// Upper bound on the inter-sampling times from `region` (a box over the
/// states), never below `tau_lower` and never above `heartbeat`.
pub fn find_upper_bound(
    model: &EtcModel,
    reacher: &Reacher,
    region: &IntervalBox,
    tau_lower: f64,
    heartbeat: f64,
    opts: &ReachOptions,
) -> RegionReach {
    let n = model.n();
    let phi = model.trigger();
    let margin = 1e-12 * phi.coefficient_l1().max(1.0);
    let neg_phi = Expr::poly(&(&-phi + &Polynomial::constant(phi.vars().clone(), margin)));
    let step = opts.step.unwrap_or(heartbeat / 100.0);
    let lower = tau_lower.clamp(0.0, heartbeat);
    let mut times = lerp_times(0.0, lower, step);
    times.extend(lerp_times(lower, heartbeat, step));
    let zero = IntervalBox::from_point(&vec![0.0; n]);
    let mut certify = |y: &IntervalBox, t: f64| {
        if t < lower {
            return false;
        }
        let b = reacher.with_delta(y);
        matches!(verify_nonpositive(&neg_phi, &b, opts.limits), Verdict::Proved)
    };
    let mut leaves = Vec::new();
    let mut diagnostics = Vec::new();
    let mut aborted = false;
    let mut work = vec![(region.clone(), 0usize)];
    // the region itself holds at t = 0, so the check at τ̲ = 0 is on the
    // initial set
    while let Some((b, depth)) = work.pop() {
        let init = b.product(&zero);
        let split_ok = depth < opts.max_depth;
        let cap = split_ok.then_some(opts.width_cap);
        let at_zero = lower == 0.0 && certify(&init, 0.0);
        let run = if at_zero {
            LeafRun {
                segments: vec![Segment {
                    t_lo: 0.0,
                    t_hi: 0.0,
                    enclosure: init.clone(),
                    end: init.clone(),
                }],
                stopped: Some(0.0),
                failed: None,
                too_wide: false,
            }
        } else {
            reacher.run_leaf(&init, &times, cap, opts, &mut certify)
        };
        if run.too_wide || (split_ok && (run.failed.is_some() || run.stopped.is_none())) {
            push_split(&mut work, &b, depth, n);
            continue;
        }
        if let Some(t) = run.failed {
            aborted = true;
            diagnostics.push(format!(
                "flowpipe aborted at t = {t} for states {:?}..{:?}",
                b.lo(),
                b.hi()
            ));
        }
        leaves.push(Leaf {
            init: b,
            flowpipe: Flowpipe {
                init,
                segments: run.segments,
            },
            certified: run.stopped,
        });
    }
    let tau_upper = if aborted {
        heartbeat
    } else {
        leaves
            .iter()
            .map(|l| l.certified.unwrap_or(heartbeat))
            .fold(lower, f64::max)
            .min(heartbeat)
    };
    RegionReach {
        tau_lower: lower,
        tau_upper,
        leaves,
        diagnostics,
        aborted,
    }
}

/// Regions met by the state projection of the flowpipe segments that
/// overlap the sampling window of each leaf.
pub fn transitions(reach: &RegionReach, partition: &Partition, n: usize) -> BTreeSet<usize> {
    let mut out = BTreeSet::new();
    if reach.aborted {
        return out;
    }
    let idx: Vec<usize> = (0..n).collect();
    for leaf in &reach.leaves {
        let hi = leaf.certified.unwrap_or(reach.tau_upper);
        for s in &leaf.flowpipe.segments {
            if s.t_hi >= reach.tau_lower && s.t_lo <= hi {
                out.extend(partition.intersecting(&s.enclosure.project(&idx)));
            }
        }
    }
    out
}

/// CSV rows `region_id, t_lo, t_hi, lo_1, hi_1, ...` for every segment.
pub fn flowpipe_csv(region_id: usize, reach: &RegionReach) -> String {
    let mut out = String::new();
    for leaf in &reach.leaves {
        for s in &leaf.flowpipe.segments {
            let _ = write!(out, "{region_id},{:.17e},{:.17e}", s.t_lo, s.t_hi);
            for d in s.enclosure.dims() {
                let _ = write!(out, ",{:.17e},{:.17e}", d.lo(), d.hi());
            }
            out.push('\n');
        }
    }
    out
}
