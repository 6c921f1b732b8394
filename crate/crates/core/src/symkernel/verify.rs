//! Interval branch-and-bound for universally quantified inequalities.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::expr::Expr;
use super::interval::{IntervalBox, IntervalScalar};

/// Outcome of checking `∀x ∈ box: g(x) ≤ 0`.
#[derive(Debug, Clone, PartialEq)]
pub enum Verdict {
    Proved,
    /// A point where the rigorous point enclosure of `g` is strictly positive.
    Refuted(Vec<f64>),
    /// Boxes that could be neither certified nor refuted within the budget.
    Unknown(Vec<IntervalBox>),
}

impl Verdict {
    pub fn is_proved(&self) -> bool {
        matches!(self, Verdict::Proved)
    }
}

/// Stopping rules of the branch-and-bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchLimits {
    /// Smallest box width, relative to the width of the root box in the
    /// same coordinate, below which a box is no longer bisected.
    pub min_width: f64,
    /// Maximum number of boxes examined.
    pub budget: usize,
}

impl Default for SearchLimits {
    fn default() -> Self {
        Self {
            min_width: 1e-9,
            budget: 200_000,
        }
    }
}

struct Node {
    upper: f64,
    seq: u64,
    bx: IntervalBox,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    fn cmp(&self, other: &Self) -> Ordering {
        // Largest upper bound first; earlier insertion wins ties.
        self.upper
            .total_cmp(&other.upper)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

struct Frontier<'a> {
    expr: &'a Expr,
    heap: BinaryHeap<Node>,
    seq: u64,
    scale: Vec<f64>,
}

impl<'a> Frontier<'a> {
    fn new(expr: &'a Expr, root: &IntervalBox) -> Self {
        let scale = root.dims().iter().map(|d| d.width()).collect();
        let mut f = Self {
            expr,
            heap: BinaryHeap::new(),
            seq: 0,
            scale,
        };
        let upper = expr.enclose(root.dims()).hi();
        f.push(root.clone(), upper);
        f
    }

    fn push(&mut self, bx: IntervalBox, upper: f64) {
        self.heap.push(Node {
            upper,
            seq: self.seq,
            bx,
        });
        self.seq += 1;
    }

    fn normalized_width(&self, bx: &IntervalBox) -> f64 {
        bx.dims()
            .iter()
            .zip(&self.scale)
            .filter(|(_, &s)| s > 0.0)
            .map(|(d, &s)| d.width() / s)
            .fold(0.0, f64::max)
    }

    /// Bisect `node` and push the children, each inheriting the parent's
    /// bound when its own enclosure is looser.
    fn split(&mut self, node: &Node) {
        let axis = node.bx.widest_axis(&self.scale);
        let (a, b) = node.bx.split(axis);
        for child in [a, b] {
            let upper = self.expr.enclose(child.dims()).hi().min(node.upper);
            self.push(child, upper);
        }
    }
}

fn witness(expr: &Expr, x: &[f64]) -> bool {
    expr.eval_point(x).lo() > 0.0
}

/// Check `∀x ∈ b: expr(x) ≤ 0` by interval bisection along the widest
/// normalized coordinate (lowest index on ties), most suspicious box first.
pub fn verify_nonpositive(expr: &Expr, b: &IntervalBox, limits: SearchLimits) -> Verdict {
    if b.dim() <= 6 {
        for v in b.vertices() {
            if witness(expr, &v) {
                return Verdict::Refuted(v);
            }
        }
    }
    let mut frontier = Frontier::new(expr, b);
    let mut residual = Vec::new();
    let mut examined = 0usize;
    while let Some(node) = frontier.heap.pop() {
        if node.upper <= 0.0 {
            // Every remaining box has an even smaller bound.
            break;
        }
        if examined >= limits.budget {
            residual.push(node.bx);
            residual.extend(frontier.heap.drain().map(|n| n.bx));
            break;
        }
        examined += 1;
        let c = node.bx.center();
        if witness(expr, &c) {
            return Verdict::Refuted(c);
        }
        if frontier.normalized_width(&node.bx) <= limits.min_width {
            residual.push(node.bx);
            continue;
        }
        frontier.split(&node);
    }
    if residual.is_empty() {
        Verdict::Proved
    } else {
        Verdict::Unknown(residual)
    }
}

/// Upper bound on `sup_{x ∈ b} expr(x)`. The search stops once the bound is
/// within `tol` of the best sampled value or the budget runs out; the
/// returned value is always a valid upper bound.
pub fn sup_over_box(expr: &Expr, b: &IntervalBox, tol: f64, budget: usize) -> f64 {
    sup_over_box_until(expr, b, tol, budget, f64::NEG_INFINITY)
}

/// As [`sup_over_box`], additionally stopping as soon as the bound drops to
/// `target` or below (callers that only need `max(target, sup)`).
pub fn sup_over_box_until(
    expr: &Expr,
    b: &IntervalBox,
    tol: f64,
    budget: usize,
    target: f64,
) -> f64 {
    let mut frontier = Frontier::new(expr, b);
    let mut best_sample = f64::NEG_INFINITY;
    for v in b.vertices().into_iter().take(64) {
        best_sample = best_sample.max(expr.eval(&v));
    }
    let mut settled = f64::NEG_INFINITY;
    let mut examined = 0usize;
    while let Some(node) = frontier.heap.pop() {
        let upper = node.upper.max(settled);
        if upper <= target || upper - best_sample <= tol || examined >= budget {
            return upper;
        }
        examined += 1;
        let c = node.bx.center();
        best_sample = best_sample.max(expr.eval(&c));
        if frontier.normalized_width(&node.bx) <= 1e-12 {
            settled = settled.max(node.upper);
            continue;
        }
        frontier.split(&node);
    }
    settled.max(best_sample)
}

/// Enclosure of the range of `expr` over `b` (no subdivision).
pub fn eval_interval(expr: &Expr, b: &IntervalBox) -> IntervalScalar {
    expr.enclose(b.dims())
}
