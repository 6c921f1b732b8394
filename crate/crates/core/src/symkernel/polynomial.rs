//! Sparse multivariate polynomials over a named, ordered variable list.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use super::interval::{IntervalBox, IntervalScalar};
use super::KernelError;

/// Exponent vector, one entry per variable.
pub type Monomial = Vec<u32>;

/// Ordered variable names shared between polynomials of one family.
pub type VarList = Arc<Vec<String>>;

pub fn var_list<S: AsRef<str>>(names: &[S]) -> VarList {
    Arc::new(names.iter().map(|s| s.as_ref().to_string()).collect())
}

/// Sparse polynomial with real coefficients; terms are kept in
/// lexicographic exponent order and zero coefficients are never stored.
#[derive(Clone, PartialEq)]
pub struct Polynomial {
    vars: VarList,
    terms: BTreeMap<Monomial, f64>,
}

impl Polynomial {
    pub fn zero(vars: VarList) -> Self {
        Self {
            vars,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(vars: VarList, c: f64) -> Self {
        let mut p = Self::zero(vars);
        let n = p.vars.len();
        p.add_term(vec![0; n], c);
        p
    }

    /// The polynomial consisting of the single variable `idx`.
    pub fn var(vars: VarList, idx: usize) -> Self {
        let mut exps = vec![0; vars.len()];
        exps[idx] = 1;
        let mut p = Self::zero(vars);
        p.add_term(exps, 1.0);
        p
    }

    pub fn var_named(vars: VarList, name: &str) -> Result<Self, KernelError> {
        let idx = vars
            .iter()
            .position(|v| v == name)
            .ok_or_else(|| KernelError::UnknownVariable(name.to_string()))?;
        Ok(Self::var(vars, idx))
    }

    pub fn from_terms<I>(vars: VarList, terms: I) -> Result<Self, KernelError>
    where
        I: IntoIterator<Item = (Monomial, f64)>,
    {
        let mut p = Self::zero(vars);
        for (m, c) in terms {
            if m.len() != p.vars.len() {
                return Err(KernelError::ArityMismatch {
                    expected: p.vars.len(),
                    found: m.len(),
                });
            }
            p.add_term(m, c);
        }
        Ok(p)
    }

    /// Accumulate `c * monomial`, dropping the term if it cancels.
    pub fn add_term(&mut self, m: Monomial, c: f64) {
        debug_assert_eq!(m.len(), self.vars.len());
        if c == 0.0 {
            return;
        }
        match self.terms.entry(m) {
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut e) => {
                let s = *e.get() + c;
                if s == 0.0 {
                    e.remove();
                } else {
                    *e.get_mut() = s;
                }
            }
        }
    }

    pub fn vars(&self) -> &VarList {
        &self.vars
    }

    pub fn nvars(&self) -> usize {
        self.vars.len()
    }

    pub fn var_index(&self, name: &str) -> Option<usize> {
        self.vars.iter().position(|v| v == name)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, f64)> {
        self.terms.iter().map(|(m, &c)| (m, c))
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coefficient(&self, m: &[u32]) -> f64 {
        self.terms.get(m).copied().unwrap_or(0.0)
    }

    /// Constant value if the polynomial has no variable-dependent terms.
    pub fn as_constant(&self) -> Option<f64> {
        match self.terms.len() {
            0 => Some(0.0),
            1 => {
                let (m, &c) = self.terms.iter().next().unwrap();
                m.iter().all(|&e| e == 0).then_some(c)
            }
            _ => None,
        }
    }

    pub fn total_degree(&self) -> u32 {
        self.terms
            .keys()
            .map(|m| m.iter().sum::<u32>())
            .max()
            .unwrap_or(0)
    }

    /// Degree of a monomial counting only the variables flagged in `mask`.
    pub fn monomial_degree(m: &[u32], mask: &[bool]) -> u32 {
        m.iter().zip(mask).filter(|(_, &f)| f).map(|(&e, _)| e).sum()
    }

    /// Maximum degree over all terms counting only the flagged variables.
    pub fn degree_in(&self, mask: &[bool]) -> u32 {
        self.terms
            .keys()
            .map(|m| Self::monomial_degree(m, mask))
            .max()
            .unwrap_or(0)
    }

    /// Sum of absolute coefficient values.
    pub fn coefficient_l1(&self) -> f64 {
        self.terms.values().map(|c| c.abs()).sum()
    }

    fn check_same_vars(&self, other: &Self) {
        assert!(
            Arc::ptr_eq(&self.vars, &other.vars) || self.vars == other.vars,
            "polynomials over different variable lists: {:?} vs {:?}",
            self.vars,
            other.vars
        );
    }

    pub fn scale(&self, c: f64) -> Self {
        if c == 0.0 {
            return Self::zero(self.vars.clone());
        }
        let mut p = Self::zero(self.vars.clone());
        for (m, &v) in &self.terms {
            p.add_term(m.clone(), v * c);
        }
        p
    }

    pub fn pow(&self, k: u32) -> Self {
        let mut acc = Self::constant(self.vars.clone(), 1.0);
        let mut base = self.clone();
        let mut k = k;
        while k > 0 {
            if k & 1 == 1 {
                acc = &acc * &base;
            }
            k >>= 1;
            if k > 0 {
                base = &base * &base;
            }
        }
        acc
    }

    pub fn differentiate(&self, idx: usize) -> Self {
        let mut p = Self::zero(self.vars.clone());
        for (m, &c) in &self.terms {
            let e = m[idx];
            if e == 0 {
                continue;
            }
            let mut dm = m.clone();
            dm[idx] = e - 1;
            p.add_term(dm, c * e as f64);
        }
        p
    }

    pub fn differentiate_by(&self, name: &str) -> Result<Self, KernelError> {
        let idx = self
            .var_index(name)
            .ok_or_else(|| KernelError::UnknownVariable(name.to_string()))?;
        Ok(self.differentiate(idx))
    }

    /// Lie derivative `grad(self) . field`, where `field[i]` is the rate of
    /// variable `i`. Missing trailing entries are treated as zero rates.
    pub fn lie_derivative(&self, field: &[Polynomial]) -> Self {
        let mut acc = Self::zero(self.vars.clone());
        for (i, fi) in field.iter().enumerate() {
            if fi.is_zero() {
                continue;
            }
            let d = self.differentiate(i);
            if d.is_zero() {
                continue;
            }
            acc = &acc + &(&d * fi);
        }
        acc
    }

    /// Replace variable `idx` by the constant `value` (the variable stays in
    /// the list with exponent zero everywhere).
    pub fn substitute(&self, idx: usize, value: f64) -> Self {
        let mut p = Self::zero(self.vars.clone());
        for (m, &c) in &self.terms {
            let e = m[idx];
            let mut nm = m.clone();
            nm[idx] = 0;
            p.add_term(nm, c * value.powi(e as i32));
        }
        p
    }

    /// Re-express over `new_vars`, old variable `i` becoming new variable
    /// `mapping[i]`.
    pub fn embed(&self, new_vars: VarList, mapping: &[usize]) -> Self {
        assert_eq!(mapping.len(), self.vars.len());
        let n = new_vars.len();
        let mut p = Self::zero(new_vars);
        for (m, &c) in &self.terms {
            let mut nm = vec![0; n];
            for (i, &e) in m.iter().enumerate() {
                nm[mapping[i]] += e;
            }
            p.add_term(nm, c);
        }
        p
    }

    /// Re-express over `new_vars` matching variables by name.
    pub fn embed_by_name(&self, new_vars: VarList) -> Result<Self, KernelError> {
        let mapping = self
            .vars
            .iter()
            .map(|v| {
                new_vars
                    .iter()
                    .position(|w| w == v)
                    .ok_or_else(|| KernelError::UnknownVariable(v.clone()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(self.embed(new_vars, &mapping))
    }

    /// Point evaluation, summing terms in stored order.
    pub fn eval(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.vars.len());
        let mut acc = 0.0;
        for (m, &c) in &self.terms {
            let mut t = c;
            for (xi, &e) in x.iter().zip(m) {
                if e > 0 {
                    t *= xi.powi(e as i32);
                }
            }
            acc += t;
        }
        acc
    }

    /// Natural interval extension. Each monomial is bounded as a product of
    /// single-variable power ranges, so it is sound but not always tight.
    pub fn eval_interval(&self, b: &IntervalBox) -> Result<IntervalScalar, KernelError> {
        if b.dim() != self.vars.len() {
            return Err(KernelError::ArityMismatch {
                expected: self.vars.len(),
                found: b.dim(),
            });
        }
        Ok(super::eval::CompiledPoly::new(self).eval_naive(b.dims()))
    }

    /// Substitute `subs[i]` for variable `i`. All substitutes must share one
    /// variable list, which becomes the variable list of the result.
    pub fn compose(&self, subs: &[Polynomial]) -> Self {
        assert_eq!(subs.len(), self.vars.len());
        let vars = subs
            .first()
            .map(|s| s.vars.clone())
            .unwrap_or_else(|| self.vars.clone());
        let mut powers: Vec<Vec<Polynomial>> = subs
            .iter()
            .map(|s| vec![Self::constant(vars.clone(), 1.0), s.clone()])
            .collect();
        let mut acc = Self::zero(vars.clone());
        for (m, &c) in &self.terms {
            let mut t = Self::constant(vars.clone(), c);
            for (i, &e) in m.iter().enumerate() {
                if e == 0 {
                    continue;
                }
                while powers[i].len() <= e as usize {
                    let next = powers[i].last().unwrap() * &subs[i];
                    powers[i].push(next);
                }
                t = &t * &powers[i][e as usize];
            }
            acc = &acc + &t;
        }
        acc
    }

    /// Apply `f` to every coefficient.
    pub fn map_coefficients(&self, f: impl Fn(f64) -> f64) -> Self {
        let mut p = Self::zero(self.vars.clone());
        for (m, &c) in &self.terms {
            p.add_term(m.clone(), f(c));
        }
        p
    }
}

impl fmt::Debug for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Polynomial({self})")
    }
}

/// Prints in the expression grammar accepted by the parser, highest
/// exponent vectors first. Coefficients use the shortest representation
/// that reads back to the same `f64`.
impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (k, (m, &c)) in self.terms.iter().rev().enumerate() {
            let is_const = m.iter().all(|&e| e == 0);
            let mag = c.abs();
            if k == 0 {
                if c < 0.0 {
                    write!(f, "-")?;
                }
            } else if c < 0.0 {
                write!(f, " - ")?;
            } else {
                write!(f, " + ")?;
            }
            let mut first = true;
            if mag != 1.0 || is_const {
                write!(f, "{mag:?}")?;
                first = false;
            }
            for (i, &e) in m.iter().enumerate() {
                if e == 0 {
                    continue;
                }
                if !first {
                    write!(f, "*")?;
                }
                first = false;
                write!(f, "{}", self.vars[i])?;
                if e > 1 {
                    write!(f, "^{e}")?;
                }
            }
        }
        Ok(())
    }
}

impl Add for &Polynomial {
    type Output = Polynomial;
    fn add(self, rhs: &Polynomial) -> Polynomial {
        self.check_same_vars(rhs);
        let mut p = self.clone();
        for (m, &c) in &rhs.terms {
            p.add_term(m.clone(), c);
        }
        p
    }
}

impl Sub for &Polynomial {
    type Output = Polynomial;
    fn sub(self, rhs: &Polynomial) -> Polynomial {
        self.check_same_vars(rhs);
        let mut p = self.clone();
        for (m, &c) in &rhs.terms {
            p.add_term(m.clone(), -c);
        }
        p
    }
}

impl Mul for &Polynomial {
    type Output = Polynomial;
    fn mul(self, rhs: &Polynomial) -> Polynomial {
        self.check_same_vars(rhs);
        let mut p = Polynomial::zero(self.vars.clone());
        for (ma, &ca) in &self.terms {
            for (mb, &cb) in &rhs.terms {
                let m: Monomial = ma.iter().zip(mb).map(|(a, b)| a + b).collect();
                p.add_term(m, ca * cb);
            }
        }
        p
    }
}

impl Neg for &Polynomial {
    type Output = Polynomial;
    fn neg(self) -> Polynomial {
        self.scale(-1.0)
    }
}

macro_rules! forward_owned {
    ($tr:ident, $m:ident) => {
        impl $tr for Polynomial {
            type Output = Polynomial;
            fn $m(self, rhs: Polynomial) -> Polynomial {
                (&self).$m(&rhs)
            }
        }
    };
}
forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);

impl Neg for Polynomial {
    type Output = Polynomial;
    fn neg(self) -> Polynomial {
        self.scale(-1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vars2() -> VarList {
        var_list(&["x1", "x2"])
    }

    #[test]
    fn derivative_of_product() {
        let v = vars2();
        let x1 = Polynomial::var(v.clone(), 0);
        let x2 = Polynomial::var(v.clone(), 1);
        let p = &(&x1 * &x1) * &x2;
        let d = p.differentiate_by("x1").unwrap();
        let expected = (&x1 * &x2).scale(2.0);
        assert_eq!(d, expected);
    }

    #[test]
    fn derivative_of_constant_is_zero() {
        let p = Polynomial::constant(vars2(), 7.5);
        assert!(p.differentiate(0).is_zero());
    }

    #[test]
    fn derivative_of_cubic_weight() {
        let v = var_list(&["w", "x"]);
        let w = Polynomial::var(v.clone(), 0);
        let x = Polynomial::var(v.clone(), 1);
        let p = &w.pow(3) * &x;
        let d = p.differentiate_by("w").unwrap();
        assert_eq!(d, (&w.pow(2) * &x).scale(3.0));
        assert!(matches!(
            p.differentiate_by("q"),
            Err(KernelError::UnknownVariable(_))
        ));
    }

    #[test]
    fn cancellation_removes_terms() {
        let v = vars2();
        let x1 = Polynomial::var(v.clone(), 0);
        let z = &x1 - &x1;
        assert!(z.is_zero());
        assert_eq!(z.num_terms(), 0);
    }

    #[test]
    fn substitute_and_embed() {
        let v = vars2();
        let x1 = Polynomial::var(v.clone(), 0);
        let x2 = Polynomial::var(v.clone(), 1);
        let p = &(&x1 * &x2) + &x2.pow(2);
        let s = p.substitute(1, 2.0);
        assert_eq!(s.eval(&[3.0, 100.0]), 3.0 * 2.0 + 4.0);
        let nv = var_list(&["a", "x2", "x1"]);
        let e = p.embed_by_name(nv).unwrap();
        assert_eq!(e.eval(&[9.0, 2.0, 3.0]), p.eval(&[3.0, 2.0]));
    }

    #[test]
    fn display_reads_naturally() {
        let v = vars2();
        let x1 = Polynomial::var(v.clone(), 0);
        let x2 = Polynomial::var(v.clone(), 1);
        let p = &(&x1.pow(2).scale(3.0) - &x2) + &Polynomial::constant(v, -0.5);
        assert_eq!(p.to_string(), "3.0*x1^2 - x2 - 0.5");
    }

    #[test]
    fn compose_substitutes_polynomials() {
        let v = vars2();
        let x1 = Polynomial::var(v.clone(), 0);
        let x2 = Polynomial::var(v.clone(), 1);
        let p = &x1.pow(2) - &x2;
        let u = var_list(&["a", "b"]);
        let a = Polynomial::var(u.clone(), 0);
        let b = Polynomial::var(u.clone(), 1);
        let q = p.compose(&[&a - &b, b.scale(2.0)]);
        assert_eq!(q.to_string(), "a^2 - 2.0*a*b + b^2 - 2.0*b");
    }
}
