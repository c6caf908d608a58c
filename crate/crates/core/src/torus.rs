//! Geometry of the flat torus `T^n = (R/[-1,1])^n`.
//!
//! Coordinates are kept in the half-open canonical interval `[-1, 1)`; the
//! quotient identifies `-1 ~ 1`, so `1.0` is always stored as `-1.0`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Reduces a real number modulo 2 into `[-1, 1)`.
#[inline]
pub fn reduce_coord(x: f64) -> f64 {
    let mut y = x - 2.0 * ((x + 1.0) * 0.5).floor();
    if y >= 1.0 {
        y -= 2.0;
    }
    if y < -1.0 {
        y += 2.0;
    }
    y
}

/// Signed shortest arc from `a` to `b`, in `[-1, 1)`.
#[inline]
pub fn arc_diff(a: f64, b: f64) -> f64 {
    reduce_coord(b - a)
}

/// Length of the shortest arc between two circle coordinates.
#[inline]
pub fn arc_len(a: f64, b: f64) -> f64 {
    let d = (a - b).abs() % 2.0;
    d.min(2.0 - d)
}

/// Reduces every coordinate in place.
#[inline]
pub fn reduce_in_place(x: &mut [f64]) {
    for c in x {
        *c = reduce_coord(*c);
    }
}

/// Toral distance between raw coordinate slices of equal length.
#[inline]
pub fn dist_raw(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = arc_len(x, y);
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TorusPoint {
    coords: Vec<f64>,
}

impl TorusPoint {
    /// Builds a point from arbitrary real coordinates, reducing them mod 2.
    pub fn reduce(raw: &[f64]) -> Result<Self> {
        if raw.is_empty() {
            return Err(Error::InvalidDimension(0));
        }
        Ok(Self {
            coords: raw.iter().map(|&x| reduce_coord(x)).collect(),
        })
    }

    pub fn origin(n: usize) -> Self {
        Self { coords: vec![0.0; n] }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.coords
    }

    pub fn dist(&self, other: &TorusPoint) -> Result<f64> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: other.dim(),
            });
        }
        Ok(dist_raw(&self.coords, &other.coords))
    }
}

/// Tangent vector split into an unstable head of `m` components and a
/// central tail of `n - m` components.
#[derive(Clone, Debug, PartialEq)]
pub struct TangentVector {
    components: Vec<f64>,
    m: usize,
}

impl TangentVector {
    pub fn new(components: Vec<f64>, m: usize) -> Result<Self> {
        if m == 0 || m > components.len() {
            return Err(Error::OutOfRange(format!(
                "unstable block size {m} for a vector of length {}",
                components.len()
            )));
        }
        Ok(Self { components, m })
    }

    pub fn components(&self) -> &[f64] {
        &self.components
    }

    pub fn unstable(&self) -> &[f64] {
        &self.components[..self.m]
    }

    pub fn central(&self) -> &[f64] {
        &self.components[self.m..]
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn k(&self) -> usize {
        self.components.len() - self.m
    }
}

/// Axis-aligned product of toral arcs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Box {
    pub center: Vec<f64>,
    pub half_widths: Vec<f64>,
}

impl Box {
    pub fn new(center: &[f64], half_widths: &[f64]) -> Result<Self> {
        if center.is_empty() {
            return Err(Error::InvalidDimension(0));
        }
        if center.len() != half_widths.len() {
            return Err(Error::DimensionMismatch {
                expected: center.len(),
                got: half_widths.len(),
            });
        }
        if half_widths.iter().any(|&h| !(h > 0.0 && h <= 1.0)) {
            return Err(Error::OutOfRange("box half-widths must lie in (0, 1]".into()));
        }
        Ok(Self {
            center: center.iter().map(|&c| reduce_coord(c)).collect(),
            half_widths: half_widths.to_vec(),
        })
    }

    pub fn cube(center: &[f64], half_width: f64) -> Result<Self> {
        Self::new(center, &vec![half_width; center.len()])
    }

    pub fn whole(n: usize) -> Self {
        Self {
            center: vec![0.0; n],
            half_widths: vec![1.0; n],
        }
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    /// Inradius of an axis-aligned box: its smallest half-width.
    pub fn inradius(&self) -> f64 {
        self.half_widths.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Diameter in the toral metric (arcs longer than half the circle wrap).
    pub fn diameter(&self) -> f64 {
        self.half_widths
            .iter()
            .map(|&h| {
                let w = (2.0 * h).min(1.0);
                w * w
            })
            .sum::<f64>()
            .sqrt()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(&self.center)
            .zip(&self.half_widths)
            .all(|((&xi, &c), &h)| h >= 1.0 || arc_len(xi, c) <= h)
    }

    /// Canonical point of the box at offsets `t` in `[-1, 1]^n` (relative to
    /// the half-widths).
    pub fn point_at(&self, t: &[f64]) -> Vec<f64> {
        self.center
            .iter()
            .zip(&self.half_widths)
            .zip(t)
            .map(|((&c, &h), &s)| reduce_coord(c + s * h))
            .collect()
    }
}

/// Free-function form of [`Box::inradius`].
pub fn box_inradius(b: &Box) -> f64 {
    b.inradius()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Exact mod-2 reduction on rationals `num/den` with `den > 0`.
    fn reduce_rational(num: i64, den: i64) -> (i64, i64) {
        let two = 2 * den;
        let mut r = num.rem_euclid(two);
        if r >= den {
            r -= two;
        }
        (r, den)
    }

    #[test]
    fn reduce_examples() {
        let p = TorusPoint::reduce(&[0.0, 0.0, 0.0]).unwrap();
        assert_eq!(p.coords(), &[0.0, 0.0, 0.0]);

        // 2.1 = 21/10, 0.5 = 1/2, -3 = -3/1, 10.25 = 41/4
        let oracle = |n, d| {
            let (a, b) = reduce_rational(n, d);
            a as f64 / b as f64
        };
        let p = TorusPoint::reduce(&[2.1, 0.5, -3.0]).unwrap();
        let expect = [oracle(21, 10), oracle(1, 2), oracle(-3, 1)];
        assert_eq!(expect[2], -1.0);
        for (a, b) in p.coords().iter().zip(expect) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
        let p = TorusPoint::reduce(&[10.25, 0.0, 0.0]).unwrap();
        assert_eq!(p.coords()[0], oracle(41, 4));
        assert_eq!(p.coords()[0], 0.25);
    }

    #[test]
    fn reduce_rejects_empty() {
        assert!(matches!(TorusPoint::reduce(&[]), Err(Error::InvalidDimension(0))));
    }

    #[test]
    fn one_is_canonically_minus_one() {
        assert_eq!(reduce_coord(1.0), -1.0);
        assert_eq!(reduce_coord(-1.0), -1.0);
        assert!(reduce_coord(-1.0 - 1e-17) < 1.0);
    }

    #[test]
    fn dist_examples() {
        let a = TorusPoint::reduce(&[-0.9, 0.0, 0.0]).unwrap();
        let b = TorusPoint::reduce(&[0.9, 0.0, 0.0]).unwrap();
        assert!((a.dist(&b).unwrap() - 0.2).abs() < 1e-12);
        assert_eq!(a.dist(&a).unwrap(), 0.0);
        let o = TorusPoint::origin(3);
        let q = TorusPoint::reduce(&[0.3, 0.4, 0.0]).unwrap();
        // Pythagoras: sqrt(0.09 + 0.16)
        assert!((o.dist(&q).unwrap() - (0.09f64 + 0.16).sqrt()).abs() < 1e-12);
        let short = TorusPoint::origin(2);
        assert!(matches!(o.dist(&short), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn box_inradius_examples() {
        assert_eq!(Box::cube(&[0.0; 3], 0.1).unwrap().inradius(), 0.1);
        assert_eq!(Box::new(&[0.0, 0.0], &[0.2, 0.05]).unwrap().inradius(), 0.05);
        assert_eq!(box_inradius(&Box::whole(3)), 1.0);
        assert!(Box::new(&[0.0], &[0.0]).is_err());
    }

    #[test]
    fn box_contains_wraps() {
        let b = Box::cube(&[0.95], 0.1).unwrap();
        assert!(b.contains(&[-0.98]));
        assert!(!b.contains(&[0.8]));
    }

    #[test]
    fn tangent_split() {
        let v = TangentVector::new(vec![1.0, 0.3, 0.4], 1).unwrap();
        assert_eq!(v.unstable(), &[1.0]);
        assert_eq!(v.central(), &[0.3, 0.4]);
        assert_eq!(v.k(), 2);
        assert!(TangentVector::new(vec![1.0], 2).is_err());
    }

    fn coord() -> impl Strategy<Value = f64> {
        -50.0f64..50.0
    }

    proptest! {
        #[test]
        fn reduce_is_idempotent_and_canonical(xs in prop::collection::vec(coord(), 1..6)) {
            let p = TorusPoint::reduce(&xs).unwrap();
            let q = TorusPoint::reduce(p.coords()).unwrap();
            prop_assert_eq!(&p, &q);
            for (&c, &x) in p.coords().iter().zip(&xs) {
                prop_assert!((-1.0..1.0).contains(&c));
                let k = (x - c) / 2.0;
                prop_assert!((k - k.round()).abs() < 1e-9);
            }
        }

        #[test]
        fn dist_is_a_bounded_metric(
            a in prop::collection::vec(coord(), 3),
            b in prop::collection::vec(coord(), 3),
            c in prop::collection::vec(coord(), 3),
        ) {
            let (a, b, c) = (
                TorusPoint::reduce(&a).unwrap(),
                TorusPoint::reduce(&b).unwrap(),
                TorusPoint::reduce(&c).unwrap(),
            );
            let ab = a.dist(&b).unwrap();
            prop_assert!((ab - b.dist(&a).unwrap()).abs() < 1e-12);
            prop_assert!(ab <= a.dist(&c).unwrap() + c.dist(&b).unwrap() + 1e-12);
            prop_assert!(ab <= 3f64.sqrt() + 1e-12);
        }
    }
}
