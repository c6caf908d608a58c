//! Closed intervals with outward rounding.
//!
//! Every arithmetic result is widened by one ulp on each side. Round-to-nearest
//! is off by at most half an ulp, so the widened interval still contains the
//! exact result.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    lo: f64,
    hi: f64,
}

#[inline]
fn down(x: f64) -> f64 {
    if x == f64::NEG_INFINITY { x } else { x.next_down() }
}

#[inline]
fn up(x: f64) -> f64 {
    if x == f64::INFINITY { x } else { x.next_up() }
}

impl Interval {
    /// Panics on `lo > hi` or NaN; every constructor funnels through here.
    pub fn new(lo: f64, hi: f64) -> Self {
        assert!(lo <= hi, "empty interval [{lo}, {hi}]");
        Self { lo, hi }
    }

    pub const fn point(x: f64) -> Self {
        Self { lo: x, hi: x }
    }

    pub const ZERO: Self = Self::point(0.0);
    pub const ONE: Self = Self::point(1.0);

    fn outward(lo: f64, hi: f64) -> Self {
        Self::new(down(lo), up(hi))
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn mid(&self) -> f64 {
        0.5 * self.lo + 0.5 * self.hi
    }

    pub fn mag(&self) -> f64 {
        self.lo.abs().max(self.hi.abs())
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn contains_zero(&self) -> bool {
        self.contains(0.0)
    }

    pub fn is_subset_of(&self, other: &Interval) -> bool {
        other.lo <= self.lo && self.hi <= other.hi
    }

    pub fn is_point(&self) -> bool {
        self.lo == self.hi
    }

    pub fn hull(&self, other: &Interval) -> Interval {
        Interval::new(self.lo.min(other.lo), self.hi.max(other.hi))
    }

    pub fn intersect(&self, other: &Interval) -> Option<Interval> {
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        (lo <= hi).then(|| Interval::new(lo, hi))
    }

    /// Clamps both ends into `[a, b]`.
    pub fn clamp(&self, a: f64, b: f64) -> Interval {
        Interval::new(self.lo.clamp(a, b), self.hi.clamp(a, b))
    }

    pub fn split(&self) -> (Interval, Interval) {
        let m = self.mid();
        (Interval::new(self.lo, m), Interval::new(m, self.hi))
    }

    /// Exact range of `x²`, rounded outward.
    pub fn sqr(&self) -> Interval {
        let (a, b) = (self.lo.abs(), self.hi.abs());
        if self.contains_zero() {
            Interval::new(0.0, up(a.max(b) * a.max(b)))
        } else {
            let (s, l) = (a.min(b), a.max(b));
            Interval::new(down(s * s).max(0.0), up(l * l))
        }
    }

    pub fn abs(&self) -> Interval {
        if self.lo >= 0.0 {
            *self
        } else if self.hi <= 0.0 {
            -*self
        } else {
            Interval::new(0.0, self.mag())
        }
    }

    /// Square root of the non-negative part; fails only if nothing is left.
    pub fn sqrt(&self) -> Result<Interval> {
        if self.hi < 0.0 {
            return Err(Error::OutOfRange(format!("sqrt of {self}")));
        }
        Ok(Interval::new(down(self.lo.max(0.0).sqrt()).max(0.0), up(self.hi.sqrt())))
    }

    pub fn div(&self, other: &Interval) -> Result<Interval> {
        if other.contains_zero() {
            return Err(Error::DivisionByZero);
        }
        let q = [self.lo / other.lo, self.lo / other.hi, self.hi / other.lo, self.hi / other.hi];
        Ok(Interval::outward(min4(q), max4(q)))
    }

    pub fn powi(&self, k: u32) -> Interval {
        let mut acc = Interval::ONE;
        for _ in 0..k {
            acc = acc * *self;
        }
        if k % 2 == 0 && k > 0 {
            acc.clamp(0.0, f64::INFINITY)
        } else {
            acc
        }
    }

    pub fn min(&self, other: &Interval) -> Interval {
        Interval::new(self.lo.min(other.lo), self.hi.min(other.hi))
    }

    pub fn max(&self, other: &Interval) -> Interval {
        Interval::new(self.lo.max(other.lo), self.hi.max(other.hi))
    }

    pub fn scale(&self, c: f64) -> Interval {
        *self * Interval::point(c)
    }
}

fn min4(q: [f64; 4]) -> f64 {
    q.into_iter().fold(f64::INFINITY, f64::min)
}

fn max4(q: [f64; 4]) -> f64 {
    q.into_iter().fold(f64::NEG_INFINITY, f64::max)
}

impl From<f64> for Interval {
    fn from(x: f64) -> Self {
        Interval::point(x)
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{:.17e}, {:.17e}]", self.lo, self.hi)
    }
}

impl Add for Interval {
    type Output = Interval;
    fn add(self, o: Interval) -> Interval {
        if o == Interval::ZERO {
            return self;
        }
        if self == Interval::ZERO {
            return o;
        }
        Interval::outward(self.lo + o.lo, self.hi + o.hi)
    }
}

impl Sub for Interval {
    type Output = Interval;
    fn sub(self, o: Interval) -> Interval {
        if o == Interval::ZERO {
            return self;
        }
        Interval::outward(self.lo - o.hi, self.hi - o.lo)
    }
}

impl Neg for Interval {
    type Output = Interval;
    fn neg(self) -> Interval {
        Interval::new(-self.hi, -self.lo)
    }
}

impl Mul for Interval {
    type Output = Interval;
    fn mul(self, o: Interval) -> Interval {
        if (self.is_point() && self.lo == 0.0) || (o.is_point() && o.lo == 0.0) {
            return Interval::ZERO;
        }
        let q = [self.lo * o.lo, self.lo * o.hi, self.hi * o.lo, self.hi * o.hi];
        Interval::outward(min4(q), max4(q))
    }
}

impl Add<f64> for Interval {
    type Output = Interval;
    fn add(self, o: f64) -> Interval {
        self + Interval::point(o)
    }
}

impl Sub<f64> for Interval {
    type Output = Interval;
    fn sub(self, o: f64) -> Interval {
        self - Interval::point(o)
    }
}

impl Mul<f64> for Interval {
    type Output = Interval;
    fn mul(self, o: f64) -> Interval {
        self * Interval::point(o)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn constants_are_degenerate() {
        let c = Interval::point(0.3);
        assert_eq!(c.width(), 0.0);
        assert!(c.contains(0.3));
        assert_eq!(c.neg().lo(), -0.3);
    }

    #[test]
    fn one_tenth_sum_encloses_exact_value() {
        // the stored 0.1 is slightly above 1/10, so ten of them exceed 1, while
        // naive float summation lands below 1
        let t = Interval::point(0.1);
        let mut s = Interval::ZERO;
        for _ in 0..10 {
            s = s + t;
        }
        assert!(s.lo() < 1.0 && s.hi() > 1.0);
        assert!(s.width() < 1e-14);
    }

    #[test]
    fn division_by_zero_interval() {
        let a = Interval::new(1.0, 2.0);
        assert!(matches!(a.div(&Interval::new(-1.0, 1.0)), Err(Error::DivisionByZero)));
        let q = a.div(&Interval::new(2.0, 4.0)).unwrap();
        assert!(q.contains(0.25) && q.contains(1.0));
    }

    #[test]
    fn sqr_is_tighter_than_self_product() {
        let x = Interval::new(-1.0, 2.0);
        assert_eq!(x.sqr().lo(), 0.0);
        assert!((x * x).lo() < 0.0);
    }

    fn iv() -> impl Strategy<Value = Interval> {
        (-10.0f64..10.0, 0.0f64..5.0).prop_map(|(a, w)| Interval::new(a, a + w))
    }

    fn pick(i: &Interval, t: f64) -> f64 {
        (i.lo() + t * (i.hi() - i.lo())).clamp(i.lo(), i.hi())
    }

    proptest! {
        #[test]
        fn operations_enclose_point_results(a in iv(), b in iv(), s in 0.0f64..=1.0, t in 0.0f64..=1.0) {
            let (x, y) = (pick(&a, s), pick(&b, t));
            prop_assert!((a + b).contains(x + y));
            prop_assert!((a - b).contains(x - y));
            prop_assert!((a * b).contains(x * y));
            prop_assert!(a.sqr().contains(x * x));
            prop_assert!(a.abs().contains(x.abs()));
            prop_assert!(a.powi(3).contains(x * x * x));
            if let Ok(q) = a.div(&b) {
                prop_assert!(q.contains(x / y));
            }
            if let Ok(r) = a.sqrt() {
                prop_assert!(x < 0.0 || r.contains(x.sqrt()));
            }
            if let Ok(r) = a.abs().sqrt() {
                prop_assert!(r.contains(x.abs().sqrt()));
            }
        }

        #[test]
        fn inclusion_monotone(a in iv(), b in iv(), s in 0.0f64..=1.0, w in 0.0f64..=1.0) {
            let lo = pick(&a, s);
            let inner = Interval::new(lo, pick(&a, s + w * (1.0 - s)).max(lo));
            prop_assert!((inner * b).is_subset_of(&(a * b)));
            prop_assert!((inner + b).is_subset_of(&(a + b)));
            prop_assert!(inner.sqr().is_subset_of(&a.sqr()));
        }
    }
}
