//! Outward-rounded interval arithmetic.
//!
//! Every arithmetic result is widened by one unit in the last place on each
//! side, so the true real-valued range is always contained even though the
//! underlying operations round to nearest.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use super::KernelError;

#[inline]
fn down(x: f64) -> f64 {
    if x.is_finite() {
        x.next_down()
    } else {
        x
    }
}

#[inline]
fn up(x: f64) -> f64 {
    if x.is_finite() {
        x.next_up()
    } else {
        x
    }
}

/// A closed interval `[lo, hi]` of reals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalScalar {
    lo: f64,
    hi: f64,
}

impl IntervalScalar {
    pub fn new(lo: f64, hi: f64) -> Result<Self, KernelError> {
        if lo.is_nan() || hi.is_nan() || lo > hi {
            return Err(KernelError::EmptyInterval { lo, hi });
        }
        Ok(Self { lo, hi })
    }

    /// Degenerate interval containing exactly `x`.
    pub const fn point(x: f64) -> Self {
        Self { lo: x, hi: x }
    }

    /// Interval containing `x` widened by one ulp on each side. Used for
    /// values that are themselves the result of a rounded computation.
    pub fn around(x: f64) -> Self {
        Self { lo: down(x), hi: up(x) }
    }

    pub const fn lo(&self) -> f64 {
        self.lo
    }

    pub const fn hi(&self) -> f64 {
        self.hi
    }

    pub fn mid(&self) -> f64 {
        if self.lo == self.hi {
            self.lo
        } else {
            0.5 * self.lo + 0.5 * self.hi
        }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    /// Half width, rounded up.
    pub fn radius(&self) -> f64 {
        up(0.5 * (self.hi - self.lo))
    }

    /// Smallest absolute value over the interval.
    pub fn mig(&self) -> f64 {
        if self.lo > 0.0 {
            self.lo
        } else if self.hi < 0.0 {
            -self.hi
        } else {
            0.0
        }
    }

    /// Largest absolute value over the interval.
    pub fn mag(&self) -> f64 {
        self.lo.abs().max(self.hi.abs())
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn contains_interval(&self, other: &Self) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }

    pub fn intersects(&self, other: &Self) -> bool {
        self.lo <= other.hi && other.lo <= self.hi
    }

    pub fn intersect(&self, other: &Self) -> Option<Self> {
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        (lo <= hi).then_some(Self { lo, hi })
    }

    pub fn hull(&self, other: &Self) -> Self {
        Self {
            lo: self.lo.min(other.lo),
            hi: self.hi.max(other.hi),
        }
    }

    /// Widen symmetrically by `r >= 0`.
    pub fn inflate(&self, r: f64) -> Self {
        Self {
            lo: down(self.lo - r),
            hi: up(self.hi + r),
        }
    }

    pub fn bisect(&self) -> (Self, Self) {
        let m = self.mid();
        (Self { lo: self.lo, hi: m }, Self { lo: m, hi: self.hi })
    }

    pub fn max(&self, other: &Self) -> Self {
        Self {
            lo: self.lo.max(other.lo),
            hi: self.hi.max(other.hi),
        }
    }

    pub fn min(&self, other: &Self) -> Self {
        Self {
            lo: self.lo.min(other.lo),
            hi: self.hi.min(other.hi),
        }
    }

    pub fn scale(&self, c: f64) -> Self {
        if c >= 0.0 {
            Self {
                lo: down(self.lo * c),
                hi: up(self.hi * c),
            }
        } else {
            Self {
                lo: down(self.hi * c),
                hi: up(self.lo * c),
            }
        }
    }

    /// Integer power. Even powers are non-negative; no dependency loss
    /// occurs because the power is taken of a single interval.
    pub fn powi(&self, k: i32) -> Self {
        if k == 0 {
            return Self::point(1.0);
        }
        if k < 0 {
            return self.powi(-k).recip();
        }
        if k == 1 {
            return *self;
        }
        let pow_down = |x: f64| {
            let mut a = 1.0f64;
            for _ in 0..k {
                a = down(a * x);
            }
            a.max(0.0)
        };
        let pow_up = |x: f64| {
            let mut a = 1.0f64;
            for _ in 0..k {
                a = up(a * x);
            }
            a
        };
        if k % 2 == 0 {
            Self {
                lo: pow_down(self.mig()),
                hi: pow_up(self.mag()),
            }
        } else if self.lo >= 0.0 {
            Self {
                lo: pow_down(self.lo),
                hi: pow_up(self.hi),
            }
        } else if self.hi <= 0.0 {
            Self {
                lo: -pow_up(-self.lo),
                hi: -pow_down(-self.hi),
            }
        } else {
            Self {
                lo: -pow_up(-self.lo),
                hi: pow_up(self.hi),
            }
        }
    }

    /// Reciprocal; the interval must not contain zero, otherwise the result
    /// is the whole real line.
    pub fn recip(&self) -> Self {
        if self.lo > 0.0 || self.hi < 0.0 {
            Self {
                lo: down(1.0 / self.hi),
                hi: up(1.0 / self.lo),
            }
        } else {
            Self::entire()
        }
    }

    /// Square root of the non-negative part of the interval.
    pub fn sqrt(&self) -> Self {
        let lo = self.lo.max(0.0);
        let hi = self.hi.max(0.0);
        Self {
            lo: down(lo.sqrt()).max(0.0),
            hi: up(hi.sqrt()),
        }
    }

    pub fn entire() -> Self {
        Self {
            lo: f64::NEG_INFINITY,
            hi: f64::INFINITY,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite()
    }
}

impl fmt::Display for IntervalScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

impl From<f64> for IntervalScalar {
    fn from(x: f64) -> Self {
        Self::point(x)
    }
}

impl Add for IntervalScalar {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        if rhs.lo == 0.0 && rhs.hi == 0.0 {
            return self;
        }
        if self.lo == 0.0 && self.hi == 0.0 {
            return rhs;
        }
        Self {
            lo: down(self.lo + rhs.lo),
            hi: up(self.hi + rhs.hi),
        }
    }
}

impl Sub for IntervalScalar {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        if rhs.lo == 0.0 && rhs.hi == 0.0 {
            return self;
        }
        Self {
            lo: down(self.lo - rhs.hi),
            hi: up(self.hi - rhs.lo),
        }
    }
}

impl Neg for IntervalScalar {
    type Output = Self;
    fn neg(self) -> Self {
        Self {
            lo: -self.hi,
            hi: -self.lo,
        }
    }
}

impl Mul for IntervalScalar {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        if (self.lo == 0.0 && self.hi == 0.0) || (rhs.lo == 0.0 && rhs.hi == 0.0) {
            return Self::point(0.0);
        }
        if self.lo == self.hi && rhs.lo == rhs.hi {
            let p = self.lo * rhs.lo;
            return Self { lo: down(p), hi: up(p) };
        }
        let candidates = [
            self.lo * rhs.lo,
            self.lo * rhs.hi,
            self.hi * rhs.lo,
            self.hi * rhs.hi,
        ];
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for c in candidates {
            // 0 * inf is the only NaN source; it means a zero factor.
            let c = if c.is_nan() { 0.0 } else { c };
            lo = lo.min(c);
            hi = hi.max(c);
        }
        Self { lo: down(lo), hi: up(hi) }
    }
}

/// Axis-aligned box: one interval per coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalBox {
    dims: Vec<IntervalScalar>,
}

impl IntervalBox {
    pub fn new(dims: Vec<IntervalScalar>) -> Self {
        Self { dims }
    }

    pub fn from_bounds(lo: &[f64], hi: &[f64]) -> Result<Self, KernelError> {
        if lo.len() != hi.len() {
            return Err(KernelError::ArityMismatch {
                expected: lo.len(),
                found: hi.len(),
            });
        }
        let dims = lo
            .iter()
            .zip(hi)
            .map(|(&l, &h)| IntervalScalar::new(l, h))
            .collect::<Result<_, _>>()?;
        Ok(Self { dims })
    }

    pub fn from_point(x: &[f64]) -> Self {
        Self {
            dims: x.iter().map(|&v| IntervalScalar::point(v)).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dims.len()
    }

    pub fn dims(&self) -> &[IntervalScalar] {
        &self.dims
    }

    pub fn dims_mut(&mut self) -> &mut [IntervalScalar] {
        &mut self.dims
    }

    pub fn lo(&self) -> Vec<f64> {
        self.dims.iter().map(|d| d.lo()).collect()
    }

    pub fn hi(&self) -> Vec<f64> {
        self.dims.iter().map(|d| d.hi()).collect()
    }

    pub fn center(&self) -> Vec<f64> {
        self.dims.iter().map(|d| d.mid()).collect()
    }

    pub fn max_width(&self) -> f64 {
        self.dims.iter().map(|d| d.width()).fold(0.0, f64::max)
    }

    pub fn volume(&self) -> f64 {
        self.dims.iter().map(|d| d.width()).product()
    }

    pub fn contains_point(&self, x: &[f64]) -> bool {
        x.len() == self.dims.len() && self.dims.iter().zip(x).all(|(d, &v)| d.contains(v))
    }

    pub fn contains_box(&self, other: &Self) -> bool {
        self.dims.len() == other.dims.len()
            && self
                .dims
                .iter()
                .zip(&other.dims)
                .all(|(a, b)| a.contains_interval(b))
    }

    pub fn intersects(&self, other: &Self) -> bool {
        self.dims.len() == other.dims.len()
            && self.dims.iter().zip(&other.dims).all(|(a, b)| a.intersects(b))
    }

    pub fn intersect(&self, other: &Self) -> Option<Self> {
        let dims = self
            .dims
            .iter()
            .zip(&other.dims)
            .map(|(a, b)| a.intersect(b))
            .collect::<Option<Vec<_>>>()?;
        Some(Self { dims })
    }

    pub fn hull(&self, other: &Self) -> Self {
        Self {
            dims: self.dims.iter().zip(&other.dims).map(|(a, b)| a.hull(b)).collect(),
        }
    }

    /// Concatenate coordinates of `self` followed by `other`.
    pub fn product(&self, other: &Self) -> Self {
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        Self { dims }
    }

    /// Keep only the coordinates listed in `idx`.
    pub fn project(&self, idx: &[usize]) -> Self {
        Self {
            dims: idx.iter().map(|&i| self.dims[i]).collect(),
        }
    }

    /// Split along coordinate `axis` at its midpoint.
    pub fn split(&self, axis: usize) -> (Self, Self) {
        let (a, b) = self.dims[axis].bisect();
        let mut left = self.clone();
        let mut right = self.clone();
        left.dims[axis] = a;
        right.dims[axis] = b;
        (left, right)
    }

    /// Index of the widest coordinate after dividing each width by
    /// `scale[i]`; ties go to the lowest index.
    pub fn widest_axis(&self, scale: &[f64]) -> usize {
        let mut best = 0;
        let mut best_w = f64::NEG_INFINITY;
        for (i, d) in self.dims.iter().enumerate() {
            let s = scale.get(i).copied().unwrap_or(1.0);
            let w = if s > 0.0 { d.width() / s } else { 0.0 };
            if w > best_w {
                best_w = w;
                best = i;
            }
        }
        best
    }

    /// All 2^n corner points, vertex `k` taking the upper bound in
    /// coordinate `i` iff bit `i` of `k` is set.
    pub fn vertices(&self) -> Vec<Vec<f64>> {
        let n = self.dims.len();
        (0..1usize << n)
            .map(|k| {
                (0..n)
                    .map(|i| {
                        if k >> i & 1 == 1 {
                            self.dims[i].hi()
                        } else {
                            self.dims[i].lo()
                        }
                    })
                    .collect()
            })
            .collect()
    }
}

impl fmt::Display for IntervalBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, d) in self.dims.iter().enumerate() {
            if i > 0 {
                write!(f, " x ")?;
            }
            write!(f, "{d}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn iv(lo: f64, hi: f64) -> IntervalScalar {
        IntervalScalar::new(lo, hi).unwrap()
    }

    #[test]
    fn rejects_inverted_bounds() {
        assert!(IntervalScalar::new(1.0, 0.0).is_err());
        assert!(IntervalScalar::new(f64::NAN, 0.0).is_err());
    }

    #[test]
    fn addition_is_outward() {
        let s = IntervalScalar::point(0.1) + IntervalScalar::point(0.2);
        assert!(s.lo() < 0.1 + 0.2 && s.hi() > 0.1 + 0.2);
        assert!(s.contains(0.3));
    }

    #[test]
    fn even_power_is_non_negative() {
        let x = iv(-1.0, 1.0);
        let sq = x.powi(2);
        assert!(sq.lo() >= 0.0 && sq.contains(1.0));
        let cube = x.powi(3);
        assert!(cube.contains(-1.0) && cube.contains(1.0));
        let neg = iv(-3.0, -2.0).powi(3);
        assert!(neg.contains(-27.0) && neg.contains(-8.0) && neg.hi() < 0.0);
    }

    #[test]
    fn multiplication_signs() {
        let p = iv(-2.0, 3.0) * iv(-1.0, 4.0);
        assert!(p.contains(-8.0) && p.contains(12.0));
        assert!(p.lo() <= -8.0 && p.hi() >= 12.0);
    }

    #[test]
    fn reciprocal_and_sqrt() {
        let r = iv(2.0, 4.0).recip();
        assert!(r.contains(0.25) && r.contains(0.5));
        assert!(!iv(-1.0, 1.0).recip().is_finite());
        let s = iv(2.0, 9.0).sqrt();
        assert!(s.contains(2f64.sqrt()) && s.contains(3.0));
    }

    #[test]
    fn box_vertices_and_split() {
        let b = IntervalBox::from_bounds(&[0.0, 2.0], &[1.0, 3.0]).unwrap();
        let v = b.vertices();
        assert_eq!(v.len(), 4);
        assert_eq!(v[0], vec![0.0, 2.0]);
        assert_eq!(v[3], vec![1.0, 3.0]);
        let (l, r) = b.split(1);
        assert_eq!(l.dims()[1].hi(), 2.5);
        assert_eq!(r.dims()[1].lo(), 2.5);
        assert_eq!(b.widest_axis(&[1.0, 1.0]), 0);
        assert_eq!(b.widest_axis(&[2.0, 1.0]), 1);
    }
}
