//! Flattened polynomial evaluators used in the hot loops of the verifier
//! and the flowpipe integrator.

use super::interval::IntervalScalar;
use super::polynomial::Polynomial;

/// A polynomial flattened into parallel coefficient/exponent arrays, with
/// its gradient precomputed for mean-value enclosures.
#[derive(Debug, Clone)]
pub struct CompiledPoly {
    nvars: usize,
    coefs: Vec<f64>,
    // Row-major `coefs.len() x nvars`.
    exps: Vec<u32>,
    max_exp: Vec<u32>,
    constant: Option<f64>,
}

impl CompiledPoly {
    pub fn new(p: &Polynomial) -> Self {
        let nvars = p.nvars();
        let mut coefs = Vec::with_capacity(p.num_terms());
        let mut exps = Vec::with_capacity(p.num_terms() * nvars);
        let mut max_exp = vec![0u32; nvars];
        for (m, c) in p.terms() {
            coefs.push(c);
            for (i, &e) in m.iter().enumerate() {
                exps.push(e);
                max_exp[i] = max_exp[i].max(e);
            }
        }
        Self {
            nvars,
            coefs,
            exps,
            max_exp,
            constant: p.as_constant(),
        }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn as_constant(&self) -> Option<f64> {
        self.constant
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (k, &c) in self.coefs.iter().enumerate() {
            let row = &self.exps[k * self.nvars..(k + 1) * self.nvars];
            let mut t = c;
            for (xi, &e) in x.iter().zip(row) {
                if e > 0 {
                    t *= xi.powi(e as i32);
                }
            }
            acc += t;
        }
        acc
    }

    /// Natural interval extension over the box `b`.
    pub fn eval_naive(&self, b: &[IntervalScalar]) -> IntervalScalar {
        debug_assert_eq!(b.len(), self.nvars);
        if let Some(c) = self.constant {
            return IntervalScalar::point(c);
        }
        let powers: Vec<Vec<IntervalScalar>> = b
            .iter()
            .zip(&self.max_exp)
            .map(|(x, &m)| (0..=m as i32).map(|k| x.powi(k)).collect())
            .collect();
        let mut acc = IntervalScalar::point(0.0);
        for (k, &c) in self.coefs.iter().enumerate() {
            let row = &self.exps[k * self.nvars..(k + 1) * self.nvars];
            let mut t = IntervalScalar::point(c);
            for (i, &e) in row.iter().enumerate() {
                if e > 0 {
                    t = t * powers[i][e as usize];
                }
            }
            acc = acc + t;
        }
        acc
    }
}

/// Polynomial together with its compiled gradient, enclosing ranges by the
/// intersection of the natural extension and the mean-value form.
#[derive(Debug, Clone)]
pub struct PolyEnclosure {
    poly: Polynomial,
    value: CompiledPoly,
    grad: Vec<CompiledPoly>,
}

impl PolyEnclosure {
    pub fn new(p: &Polynomial) -> Self {
        let grad = (0..p.nvars())
            .map(|i| CompiledPoly::new(&p.differentiate(i)))
            .collect();
        Self {
            poly: p.clone(),
            value: CompiledPoly::new(p),
            grad,
        }
    }

    pub fn polynomial(&self) -> &Polynomial {
        &self.poly
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.value.eval(x)
    }

    /// Rigorous enclosure of the value at a single point.
    pub fn eval_point(&self, x: &[f64]) -> IntervalScalar {
        let pts: Vec<IntervalScalar> = x.iter().map(|&v| IntervalScalar::point(v)).collect();
        self.value.eval_naive(&pts)
    }

    pub fn enclose(&self, b: &[IntervalScalar]) -> IntervalScalar {
        let naive = self.value.eval_naive(b);
        if self.value.as_constant().is_some() {
            return naive;
        }
        let center: Vec<f64> = b.iter().map(|d| d.mid()).collect();
        let mut mv = self.eval_point(&center);
        for (i, g) in self.grad.iter().enumerate() {
            if b[i].width() == 0.0 {
                continue;
            }
            if let Some(0.0) = g.as_constant() {
                continue;
            }
            let gi = g.eval_naive(b);
            let dx = b[i] - IntervalScalar::point(center[i]);
            mv = mv + gi * dx;
        }
        naive.intersect(&mv).unwrap_or_else(|| {
            // Both enclosures are sound, so they must overlap; an empty
            // intersection can only come from an infinite bound.
            naive.hull(&mv)
        })
    }
}
