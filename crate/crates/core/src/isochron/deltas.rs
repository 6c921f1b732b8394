//! Coefficients `δ₀ … δ_p` bounding the highest Lie derivative of `φ̃` by
//! the lower ones.

use std::collections::HashMap;

use crate::symkernel::{sup_over_box, sup_over_box_until, Expr, IntervalBox, IntervalScalar, Polynomial};

#[derive(Debug, Clone, PartialEq)]
pub struct DeltaOptions {
    /// When false only the fallback `δ_p = max{c, sup Lᵖφ̃}` is returned.
    pub search: bool,
    /// Candidate values tried for each of `δ₀ … δ_{p−1}`.
    pub lattice: Vec<f64>,
    pub sweeps: usize,
    /// Relative tolerance of the supremum bounds.
    pub sup_tol: f64,
    pub budget: usize,
}

impl Default for DeltaOptions {
    fn default() -> Self {
        let mut lattice = vec![0.0];
        lattice.extend((-8..=2).map(|k| 10f64.powi(k)));
        Self {
            search: true,
            lattice,
            sweeps: 2,
            sup_tol: 1e-3,
            budget: 20_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeltaResult {
    pub deltas: Vec<f64>,
    pub fallback: bool,
    /// Number of supremum computations performed.
    pub evaluations: usize,
}

/// Upper bound on `Σ |cᵢ|·|mᵢ(x)|` over `b`, used to absorb the rounding of
/// coefficients computed in floating point.
fn magnitude_bound(p: &Polynomial, b: &IntervalBox) -> f64 {
    let mag: Vec<f64> = b.dims().iter().map(|d| d.mag()).collect();
    p.map_coefficients(f64::abs).eval(&mag) * (1.0 + 1e-10)
}

struct Problem<'a> {
    chain: &'a [Polynomial],
    domain: &'a IntervalBox,
    neg_phi_sup: f64,
    c: f64,
    opts: &'a DeltaOptions,
    magnitudes: Vec<f64>,
    evaluations: usize,
}

impl Problem<'_> {
    /// Smallest certified `δ_p` for the given lower coefficients.
    fn delta_p(&mut self, lower: &[f64]) -> f64 {
        let p = self.chain.len() - 1;
        let mut poly = self.chain[p].clone();
        for (i, &d) in lower.iter().enumerate() {
            if d != 0.0 {
                poly = &poly - &self.chain[i].scale(d);
            }
        }
        let e = Expr::poly(&poly);
        let mut crude = 0.0f64;
        for v in self.domain.vertices().into_iter().take(64).chain([self.domain.center()]) {
            crude = crude.max(e.eval(&v).abs());
        }
        let d0 = lower.first().copied().unwrap_or(0.0);
        let ineq_b = (IntervalScalar::point(self.c)
            + IntervalScalar::point(d0) * IntervalScalar::point(self.neg_phi_sup))
        .hi();
        let rounding = 4.0
            * f64::EPSILON
            * (self.magnitudes[p]
                + lower
                    .iter()
                    .zip(&self.magnitudes)
                    .map(|(d, m)| d * m)
                    .sum::<f64>());
        let tol = self.opts.sup_tol * crude.max(ineq_b);
        self.evaluations += 1;
        let s = sup_over_box_until(&e, self.domain, tol, self.opts.budget, ineq_b - rounding);
        let ineq_a = (IntervalScalar::point(s) + IntervalScalar::point(rounding)).hi();
        ineq_a.max(ineq_b)
    }
}

/// Find `δ₀ … δ_p ≥ 0` such that `Lᵖφ̃ ≤ Σ δᵢ Lⁱφ̃ + δ_p` on `domain` and
/// `δ₀ φ̃ + δ_p ≥ c` on `initial`. Both boxes are over the variables of the
/// homogenized model. Among the lattice candidates, the one maximizing
/// `score` is kept.
pub fn find_deltas(
    chain: &[Polynomial],
    domain: &IntervalBox,
    initial: &IntervalBox,
    c: f64,
    opts: &DeltaOptions,
    score: &dyn Fn(&[f64]) -> f64,
) -> DeltaResult {
    let p = chain.len() - 1;
    assert!(p >= 1, "need at least one Lie derivative");
    let neg_phi = Expr::poly(&-&chain[0]);
    let neg_phi_sup = sup_over_box(&neg_phi, initial, 1e-3 * c, opts.budget).max(0.0);
    let magnitudes = chain.iter().map(|q| magnitude_bound(q, domain)).collect();
    let mut prob = Problem {
        chain,
        domain,
        neg_phi_sup,
        c,
        opts,
        magnitudes,
        evaluations: 0,
    };

    let mut best: Vec<f64> = vec![0.0; p];
    let dp = prob.delta_p(&best);
    let full = |lower: &[f64], dp: f64| {
        let mut v = lower.to_vec();
        v.push(dp);
        v
    };
    if !opts.search {
        return DeltaResult {
            deltas: full(&best, dp),
            fallback: true,
            evaluations: prob.evaluations,
        };
    }
    let mut cache: HashMap<Vec<u64>, (f64, f64)> = HashMap::new();
    let key = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    let best_score0 = score(&full(&best, dp));
    cache.insert(key(&best), (dp, best_score0));
    let mut best_score = best_score0;
    for _ in 0..opts.sweeps {
        let mut changed = false;
        for i in 0..p {
            for &v in &opts.lattice {
                let mut cand = best.clone();
                cand[i] = v;
                let k = key(&cand);
                let (_, sc) = match cache.get(&k) {
                    Some(&hit) => hit,
                    None => {
                        let dp = prob.delta_p(&cand);
                        let sc = score(&full(&cand, dp));
                        cache.insert(k, (dp, sc));
                        (dp, sc)
                    }
                };
                if sc > best_score {
                    best_score = sc;
                    best = cand;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    let dp = cache[&key(&best)].0;
    DeltaResult {
        deltas: full(&best, dp),
        fallback: false,
        evaluations: prob.evaluations,
    }
}
