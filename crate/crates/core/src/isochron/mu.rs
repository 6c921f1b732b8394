//! The μ-function whose zero level inner-approximates an isochronous
//! manifold.

use crate::etcmodel::HomogenizedModel;
use crate::symkernel::{var_list, Expr, IntervalScalar, Polynomial};

use super::expm::expm;
use super::IsochronError;

#[derive(Debug, Clone)]
pub struct IsochronParams {
    n: usize,
    p: usize,
    deltas: Vec<f64>,
    a: Vec<Vec<f64>>,
    alpha: u32,
    theta: u32,
    rho: f64,
    tau_star: f64,
    /// `Lᵏφ̃` at zero error, over `(ζ, w)`, for `k < p`.
    g: Vec<Polynomial>,
}

/// The companion-like matrix built from `δ₀ … δ_{p−1}`.
pub fn companion_matrix(deltas: &[f64]) -> Vec<Vec<f64>> {
    let p = deltas.len() - 1;
    let mut a = vec![vec![0.0; p + 1]; p + 1];
    for (i, row) in a.iter_mut().enumerate().take(p) {
        row[i + 1] = 1.0;
    }
    a[p - 1][..p].copy_from_slice(&deltas[..p]);
    a[p - 1][p] = 1.0;
    a
}

impl IsochronParams {
    /// `chain` holds at least `L⁰φ̃ … L^{p−1}φ̃`; `deltas` holds `δ₀ … δ_p`.
    pub fn new(
        hm: &HomogenizedModel,
        chain: &[Polynomial],
        deltas: Vec<f64>,
        rho: f64,
        tau_star: f64,
    ) -> Self {
        let n = hm.n();
        let p = deltas.len() - 1;
        assert!(p >= 1 && chain.len() >= p);
        let nv = hm.vars().len();
        let mut names: Vec<String> = hm.vars()[..n].to_vec();
        names.push(hm.vars()[2 * n].clone());
        let reduced = var_list(&names);
        // Errors and disturbances are zeroed, then the remaining variables
        // are renumbered onto (ζ, w).
        let mapping: Vec<usize> = (0..nv)
            .map(|i| if i < n { i } else if i == 2 * n { n } else { 0 })
            .collect();
        let g = chain[..p]
            .iter()
            .map(|q| {
                let mut q = q.clone();
                for i in (n..nv).filter(|&i| i != 2 * n) {
                    q = q.substitute(i, 0.0);
                }
                q.embed(reduced.clone(), &mapping)
            })
            .collect();
        Self {
            n,
            p,
            a: companion_matrix(&deltas),
            deltas,
            alpha: hm.alpha(),
            theta: hm.theta(),
            rho,
            tau_star,
            g,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn deltas(&self) -> &[f64] {
        &self.deltas
    }

    pub fn a_matrix(&self) -> &[Vec<f64>] {
        &self.a
    }

    /// Row selector `(1, 0, …, 0)`.
    pub fn c_row(&self) -> Vec<f64> {
        let mut c = vec![0.0; self.p + 1];
        c[0] = 1.0;
        c
    }

    pub fn alpha(&self) -> u32 {
        self.alpha
    }

    pub fn theta(&self) -> u32 {
        self.theta
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn tau_star(&self) -> f64 {
        self.tau_star
    }

    /// Homogeneous degree of `Lᵏφ̃`.
    fn degree(&self, k: usize) -> i32 {
        (self.theta + 1) as i32 + k as i32 * self.alpha as i32
    }

    /// `μ₀` for the direction of `y = (x, w)`: the chain evaluated at
    /// `ρ·y/|y|` with zero error, entries `1 … p−1` clamped at zero, and
    /// `δ_p` last.
    pub fn mu0(&self, y: &[f64]) -> Vec<f64> {
        let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        let proj: Vec<f64> = y.iter().map(|v| self.rho * v / norm).collect();
        let mut out: Vec<f64> = self.g.iter().map(|g| g.eval(&proj)).collect();
        for v in out.iter_mut().skip(1) {
            *v = v.max(0.0);
        }
        out.push(self.deltas[self.p]);
        out
    }

    /// `μ(y, t) = (|y|/ρ)^{θ+1} C exp(A (|y|/ρ)^α t) μ₀`.
    pub fn mu_eval(&self, y: &[f64], t: f64) -> Result<f64, IsochronError> {
        let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(IsochronError::ZeroPoint);
        }
        let s = norm / self.rho;
        let m0 = self.mu0(y);
        let e = expm(&self.a, s.powi(self.alpha as i32) * t);
        let y0: f64 = e[0].iter().zip(&m0).map(|(a, b)| a * b).sum();
        Ok(s.powi((self.theta + 1) as i32) * y0)
    }

    fn first_row_value(&self, m0: &[f64], t: f64) -> f64 {
        let e = expm(&self.a, t);
        e[0].iter().zip(m0).map(|(a, b)| a * b).sum()
    }

    /// Normalized crossing time `T` of the direction `(x, 1)`: the first
    /// zero of `C exp(A T) μ₀`, capped at `t_cap`. Relies on monotonicity
    /// in `T`.
    pub fn crossing_time(&self, x: &[f64], t_cap: f64) -> f64 {
        let mut y = x.to_vec();
        y.push(1.0);
        let m0 = self.mu0(&y);
        if self.first_row_value(&m0, 0.0) >= 0.0 {
            return 0.0;
        }
        if self.first_row_value(&m0, t_cap) < 0.0 {
            return t_cap;
        }
        let (mut lo, mut hi) = (0.0, t_cap);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.first_row_value(&m0, mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-12 * hi {
                break;
            }
        }
        lo
    }

    /// Convert a normalized time into the inter-sampling time bound it
    /// certifies at a point whose lifted norm is `norm`.
    pub fn time_from_normalized(&self, t: f64, norm: f64) -> f64 {
        t * (self.rho / norm).powi(self.alpha as i32)
    }

    pub fn normalized_from_time(&self, tau: f64, norm: f64) -> f64 {
        tau * (norm / self.rho).powi(self.alpha as i32)
    }

    /// Floating-point estimate of the isochron bound at `x`.
    pub fn point_lower_bound(&self, x: &[f64], tau_cap: f64) -> f64 {
        let norm = (1.0 + x.iter().map(|v| v * v).sum::<f64>()).sqrt();
        let t = self.crossing_time(x, self.normalized_from_time(tau_cap, norm));
        self.time_from_normalized(t, norm)
    }

    /// Entries of `μ₀` as functions of `x` for the direction `(x, 1)`.
    /// Entry `k < p` equals `(ρ/s)^{θ+1+kα}·gₖ(x, 1)` with
    /// `s = |(x, 1)|` (clamped for `k ≥ 1`); entry `p` is `δ_p`.
    pub fn mu0_exprs(&self) -> Vec<Expr> {
        let n = self.n;
        let xs = var_list(&self.g[0].vars()[..n]);
        let mut q = Polynomial::constant(xs.clone(), 1.0);
        for i in 0..n {
            q = &q + &Polynomial::var(xs.clone(), i).pow(2);
        }
        let qe = Expr::poly(&q);
        let mapping: Vec<usize> = (0..=n).map(|i| i.min(n - 1)).collect();
        let mut out = Vec::with_capacity(self.p + 1);
        for (k, g) in self.g.iter().enumerate() {
            let on_plane = g.substitute(n, 1.0).embed(xs.clone(), &mapping);
            let m = self.degree(k);
            let factor = if m % 2 == 0 {
                Expr::powi(qe.clone(), -(m / 2))
            } else {
                Expr::powi(Expr::sqrt(qe.clone()), -m)
            };
            let mut core = Expr::poly(&on_plane);
            if k >= 1 {
                core = Expr::max0(core);
            }
            let rho_m = IntervalScalar::point(self.rho).powi(m);
            out.push(Expr::weighted(vec![(rho_m, Expr::product(core, factor))]));
        }
        out.push(Expr::constant(self.deltas[self.p]));
        out
    }
}
