//! Composite expressions built from polynomials: weighted sums, products,
//! `max`, integer powers and square roots. These cover the clamped entries
//! of the isochron μ-vector and the matrix-exponential-weighted sums that
//! the verifier has to bound.

use std::sync::Arc;

use super::eval::PolyEnclosure;
use super::interval::IntervalScalar;
use super::polynomial::Polynomial;

#[derive(Debug, Clone)]
pub enum Expr {
    Poly(Arc<PolyEnclosure>),
    Const(IntervalScalar),
    /// Sum of interval-weighted sub-expressions.
    Sum(Vec<(IntervalScalar, Expr)>),
    Product(Box<Expr>, Box<Expr>),
    Max(Box<Expr>, Box<Expr>),
    Powi(Box<Expr>, i32),
    Sqrt(Box<Expr>),
}

impl Expr {
    pub fn poly(p: &Polynomial) -> Self {
        Expr::Poly(Arc::new(PolyEnclosure::new(p)))
    }

    pub fn constant(c: f64) -> Self {
        Expr::Const(IntervalScalar::point(c))
    }

    pub fn constant_interval(c: IntervalScalar) -> Self {
        Expr::Const(c)
    }

    pub fn scaled(c: f64, e: Expr) -> Self {
        Expr::Sum(vec![(IntervalScalar::point(c), e)])
    }

    pub fn weighted(terms: Vec<(IntervalScalar, Expr)>) -> Self {
        Expr::Sum(terms)
    }

    pub fn sum(terms: Vec<Expr>) -> Self {
        Expr::Sum(
            terms
                .into_iter()
                .map(|e| (IntervalScalar::point(1.0), e))
                .collect(),
        )
    }

    pub fn product(a: Expr, b: Expr) -> Self {
        Expr::Product(Box::new(a), Box::new(b))
    }

    pub fn max(a: Expr, b: Expr) -> Self {
        Expr::Max(Box::new(a), Box::new(b))
    }

    /// `max(e, 0)`.
    pub fn max0(e: Expr) -> Self {
        Expr::max(e, Expr::constant(0.0))
    }

    pub fn powi(e: Expr, k: i32) -> Self {
        Expr::Powi(Box::new(e), k)
    }

    pub fn sqrt(e: Expr) -> Self {
        Expr::Sqrt(Box::new(e))
    }

    /// Floating-point value at `x`.
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Expr::Poly(p) => p.eval(x),
            Expr::Const(c) => c.mid(),
            Expr::Sum(ts) => ts.iter().map(|(w, e)| w.mid() * e.eval(x)).sum(),
            Expr::Product(a, b) => a.eval(x) * b.eval(x),
            Expr::Max(a, b) => a.eval(x).max(b.eval(x)),
            Expr::Powi(a, k) => a.eval(x).powi(*k),
            Expr::Sqrt(a) => a.eval(x).max(0.0).sqrt(),
        }
    }

    /// Rigorous enclosure of the value at the single point `x`.
    pub fn eval_point(&self, x: &[f64]) -> IntervalScalar {
        match self {
            Expr::Poly(p) => p.eval_point(x),
            _ => {
                let b: Vec<IntervalScalar> = x.iter().map(|&v| IntervalScalar::point(v)).collect();
                self.enclose(&b)
            }
        }
    }

    /// Enclosure of the range over the box `b`.
    pub fn enclose(&self, b: &[IntervalScalar]) -> IntervalScalar {
        match self {
            Expr::Poly(p) => p.enclose(b),
            Expr::Const(c) => *c,
            Expr::Sum(ts) => ts
                .iter()
                .fold(IntervalScalar::point(0.0), |acc, (w, e)| acc + *w * e.enclose(b)),
            Expr::Product(a, c) => a.enclose(b) * c.enclose(b),
            Expr::Max(a, c) => a.enclose(b).max(&c.enclose(b)),
            Expr::Powi(a, k) => a.enclose(b).powi(*k),
            Expr::Sqrt(a) => a.enclose(b).sqrt(),
        }
    }
}

impl From<&Polynomial> for Expr {
    fn from(p: &Polynomial) -> Self {
        Expr::poly(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symkernel::polynomial::var_list;
    use crate::symkernel::parse_poly;

    #[test]
    fn clamped_sum_encloses_samples() {
        let v = var_list(&["x"]);
        let p = parse_poly("x^2 - 0.25", &v).unwrap();
        let e = Expr::weighted(vec![
            (IntervalScalar::point(2.0), Expr::max0(Expr::poly(&p))),
            (IntervalScalar::point(-1.0), Expr::constant(0.1)),
        ]);
        let b = [IntervalScalar::new(-1.0, 1.0).unwrap()];
        let r = e.enclose(&b);
        for k in 0..=100 {
            let x = -1.0 + 0.02 * k as f64;
            assert!(r.contains(e.eval(&[x])));
        }
        assert!(r.lo() <= -0.1 && r.hi() >= 1.4);
    }

    #[test]
    fn reciprocal_norm_factor() {
        let v = var_list(&["x"]);
        let q = parse_poly("1 + x^2", &v).unwrap();
        let e = Expr::powi(Expr::sqrt(Expr::poly(&q)), -2);
        let b = [IntervalScalar::new(0.0, 1.0).unwrap()];
        let r = e.enclose(&b);
        assert!(r.contains(1.0) && r.contains(0.5));
        assert!((e.eval(&[1.0]) - 0.5).abs() < 1e-15);
    }
}
