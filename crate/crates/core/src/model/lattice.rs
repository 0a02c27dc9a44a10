use std::collections::HashMap;
use std::ops::{Add, Sub};

use serde::{Deserialize, Serialize};

/// A point of Z^n.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LatticeIndex(pub Vec<i64>);

impl LatticeIndex {
    pub fn new(coords: Vec<i64>) -> Self {
        LatticeIndex(coords)
    }

    pub fn zero(dim: usize) -> Self {
        LatticeIndex(vec![0; dim])
    }

    /// Unit vector along `axis` (0-based).
    pub fn unit(dim: usize, axis: usize) -> Self {
        let mut v = vec![0; dim];
        v[axis] = 1;
        LatticeIndex(v)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// l1 norm.
    pub fn norm(&self) -> i64 {
        self.0.iter().map(|c| c.abs()).sum()
    }

    pub fn coords(&self) -> &[i64] {
        &self.0
    }
}

impl Add for &LatticeIndex {
    type Output = LatticeIndex;
    fn add(self, rhs: &LatticeIndex) -> LatticeIndex {
        LatticeIndex(self.0.iter().zip(&rhs.0).map(|(a, b)| a + b).collect())
    }
}

impl Sub for &LatticeIndex {
    type Output = LatticeIndex;
    fn sub(self, rhs: &LatticeIndex) -> LatticeIndex {
        LatticeIndex(self.0.iter().zip(&rhs.0).map(|(a, b)| a - b).collect())
    }
}

/// The l1 ball of radius r around the origin, in lexicographic order.
#[derive(Clone, Debug)]
pub struct Ball {
    dim: usize,
    radius: usize,
    offsets: Vec<LatticeIndex>,
    origin: usize,
    unit: Vec<usize>,
    lookup: HashMap<LatticeIndex, usize>,
}

impl Ball {
    pub fn new(dim: usize, radius: usize) -> Self {
        let r = radius as i64;
        let side = 2 * radius + 1;
        let total = side.pow(dim as u32);
        let mut offsets = Vec::new();
        for flat in 0..total {
            // decode with the last axis fastest so the order is lexicographic
            let mut rem = flat;
            let mut c = vec![0i64; dim];
            for a in (0..dim).rev() {
                c[a] = (rem % side) as i64 - r;
                rem /= side;
            }
            let idx = LatticeIndex(c);
            if idx.norm() <= r {
                offsets.push(idx);
            }
        }
        let lookup: HashMap<_, _> = offsets.iter().cloned().enumerate().map(|(i, o)| (o, i)).collect();
        let origin = lookup[&LatticeIndex::zero(dim)];
        let unit = offsets
            .iter()
            .enumerate()
            .filter(|(_, o)| o.norm() == 1)
            .map(|(i, _)| i)
            .collect();
        Ball {
            dim,
            radius,
            offsets,
            origin,
            unit,
            lookup,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    pub fn offsets(&self) -> &[LatticeIndex] {
        &self.offsets
    }

    /// Position of the origin inside the ball ordering.
    pub fn origin(&self) -> usize {
        self.origin
    }

    /// Positions of the 2n nearest neighbours.
    pub fn unit_neighbors(&self) -> &[usize] {
        &self.unit
    }

    pub fn position(&self, offset: &LatticeIndex) -> Option<usize> {
        self.lookup.get(offset).copied()
    }
}

/// Anything that can be read as a real function on (part of) Z^n.
pub trait LatticeFn {
    fn dim(&self) -> usize;
    /// `None` when the field is not defined at `idx`.
    fn value_at(&self, idx: &[i64]) -> Option<f64>;
}

/// A field given on a finite box `lo + [0, shape)`; undefined elsewhere.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiniteField {
    pub lo: Vec<i64>,
    pub shape: Vec<usize>,
    /// Values with the first axis fastest.
    pub values: Vec<f64>,
}

impl FiniteField {
    pub fn from_fn(lo: Vec<i64>, shape: Vec<usize>, f: impl Fn(&[i64]) -> f64) -> Self {
        let len = shape.iter().product();
        let mut values = Vec::with_capacity(len);
        let mut idx = lo.clone();
        for flat in 0..len {
            let mut rem = flat;
            for (a, &s) in shape.iter().enumerate() {
                idx[a] = lo[a] + (rem % s) as i64;
                rem /= s;
            }
            values.push(f(&idx));
        }
        FiniteField { lo, shape, values }
    }
}

impl LatticeFn for FiniteField {
    fn dim(&self) -> usize {
        self.lo.len()
    }

    fn value_at(&self, idx: &[i64]) -> Option<f64> {
        let mut flat = 0usize;
        let mut stride = 1usize;
        for a in 0..self.lo.len() {
            let off = idx[a] - self.lo[a];
            if off < 0 || off as usize >= self.shape[a] {
                return None;
            }
            flat += off as usize * stride;
            stride *= self.shape[a];
        }
        Some(self.values[flat])
    }
}

/// Lazy view of `u(i + offset * e_axis)`.
pub struct Shifted<'a, F: LatticeFn + ?Sized> {
    inner: &'a F,
    axis: usize,
    offset: i64,
}

impl<F: LatticeFn + ?Sized> LatticeFn for Shifted<'_, F> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn value_at(&self, idx: &[i64]) -> Option<f64> {
        let mut j = idx.to_vec();
        j[self.axis] += self.offset;
        self.inner.value_at(&j)
    }
}

/// Fields that can be translated into a field of the same type.
pub trait Translate: Sized {
    /// Returns the field `i -> u(i + offset * e_axis)`.
    fn translate(&self, axis: usize, offset: i64) -> crate::Result<Self>;
}

/// Translation `i -> u(i + offset * e_axis)` with a 0-based axis.
pub fn shift<F: Translate + LatticeFn>(u: &F, axis: usize, offset: i64) -> crate::Result<F> {
    if axis >= u.dim() {
        return Err(crate::FkError::AxisOutOfRange { axis, dim: u.dim() });
    }
    u.translate(axis, offset)
}

/// Lazy translation usable on any lattice function.
pub fn shifted<F: LatticeFn + ?Sized>(u: &F, axis: usize, offset: i64) -> crate::Result<Shifted<'_, F>> {
    if axis >= u.dim() {
        return Err(crate::FkError::AxisOutOfRange { axis, dim: u.dim() });
    }
    Ok(Shifted { inner: u, axis, offset })
}

impl Translate for FiniteField {
    fn translate(&self, axis: usize, offset: i64) -> crate::Result<Self> {
        let mut out = self.clone();
        out.lo[axis] -= offset;
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ball_sizes() {
        assert_eq!(Ball::new(2, 1).len(), 5);
        assert_eq!(Ball::new(3, 1).len(), 7);
        assert_eq!(Ball::new(2, 2).len(), 13);
        assert_eq!(Ball::new(1, 3).len(), 7);
        let b = Ball::new(2, 1);
        assert_eq!(b.offsets()[b.origin()], LatticeIndex::zero(2));
        assert_eq!(b.unit_neighbors().len(), 4);
    }

    #[test]
    fn norm_is_l1() {
        assert_eq!(LatticeIndex::new(vec![2, -3, 1]).norm(), 6);
    }

    #[test]
    fn finite_field_shift_and_support() {
        let f = FiniteField::from_fn(vec![-2, 0], vec![5, 2], |i| (i[0] * 10 + i[1]) as f64);
        assert_eq!(f.value_at(&[1, 1]), Some(11.0));
        assert_eq!(f.value_at(&[3, 0]), None);
        let g = shift(&f, 0, 1).unwrap();
        assert_eq!(g.value_at(&[0, 1]), Some(11.0));
        assert!(matches!(shift(&f, 2, 1), Err(crate::FkError::AxisOutOfRange { .. })));
    }
}
