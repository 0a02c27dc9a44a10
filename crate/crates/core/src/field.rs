//! Periodic fields on tori and windowed fields on strips.

use serde::{Deserialize, Serialize};

use crate::model::{LatticeFn, Translate};
use crate::{FkError, Result};

/// Largest number of cells a torus may have.
pub const MAX_CELLS: usize = 1 << 22;

/// Period vector `p` with every component >= 1.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Periods(Vec<usize>);

impl Periods {
    pub fn new(p: Vec<usize>) -> Result<Self> {
        if p.is_empty() || p.contains(&0) {
            return Err(FkError::InvalidPeriods(p));
        }
        let cells = p.iter().try_fold(1usize, |acc, &x| acc.checked_mul(x));
        match cells {
            Some(c) if c <= MAX_CELLS => Ok(Periods(p)),
            _ => Err(FkError::InvalidArgument(format!(
                "torus {p:?} exceeds {MAX_CELLS} cells"
            ))),
        }
    }

    pub fn ones(dim: usize) -> Self {
        Periods(vec![1; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn cells(&self) -> usize {
        self.0.iter().product()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    /// Flat index of `idx` reduced modulo the periods, first axis fastest.
    pub fn flat(&self, idx: &[i64]) -> usize {
        let mut flat = 0usize;
        let mut stride = 1usize;
        for (a, &p) in self.0.iter().enumerate() {
            flat += idx[a].rem_euclid(p as i64) as usize * stride;
            stride *= p;
        }
        flat
    }

    pub fn coords(&self, mut flat: usize) -> Vec<i64> {
        self.0
            .iter()
            .map(|&p| {
                let c = (flat % p) as i64;
                flat /= p;
                c
            })
            .collect()
    }

    /// True when every component of `self` divides the matching one of `other`.
    pub fn divides(&self, other: &Periods) -> bool {
        self.dim() == other.dim() && self.0.iter().zip(&other.0).all(|(a, b)| b % a == 0)
    }
}

/// A `p`-periodic field, stored on one fundamental cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TorusField {
    pub periods: Periods,
    /// Values with the first axis fastest.
    pub values: Vec<f64>,
    /// Integer subtracted by the last lift normalization.
    pub lift: i64,
}

impl TorusField {
    pub fn constant(periods: Periods, c: f64) -> Self {
        let n = periods.cells();
        TorusField {
            periods,
            values: vec![c; n],
            lift: 0,
        }
    }

    pub fn from_values(periods: Periods, values: Vec<f64>) -> Result<Self> {
        if values.len() != periods.cells() {
            return Err(FkError::PeriodMismatch(format!(
                "{} values for torus {:?}",
                values.len(),
                periods.as_slice()
            )));
        }
        Ok(TorusField {
            periods,
            values,
            lift: 0,
        })
    }

    pub fn from_fn(periods: Periods, mut f: impl FnMut(&[i64]) -> f64) -> Self {
        let values = (0..periods.cells()).map(|k| f(&periods.coords(k))).collect();
        TorusField {
            periods,
            values,
            lift: 0,
        }
    }

    pub fn at(&self, idx: &[i64]) -> f64 {
        self.values[self.periods.flat(idx)]
    }

    pub fn cells(&self) -> usize {
        self.values.len()
    }

    fn same_torus(&self, other: &TorusField) -> Result<()> {
        if self.periods != other.periods {
            return Err(FkError::PeriodMismatch(format!(
                "{:?} vs {:?}",
                self.periods.as_slice(),
                other.periods.as_slice()
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &TorusField) -> Result<TorusField> {
        self.same_torus(other)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect();
        Ok(TorusField {
            periods: self.periods.clone(),
            values,
            lift: 0,
        })
    }

    pub fn sub(&self, other: &TorusField) -> Result<TorusField> {
        self.same_torus(other)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect();
        Ok(TorusField {
            periods: self.periods.clone(),
            values,
            lift: 0,
        })
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> TorusField {
        TorusField {
            periods: self.periods.clone(),
            values: self.values.iter().map(|&x| f(x)).collect(),
            lift: 0,
        }
    }

    pub fn sup_distance(&self, other: &TorusField) -> Result<f64> {
        self.same_torus(other)?;
        Ok(crate::linalg::sup_dist(&self.values, &other.values))
    }

    /// Same field regarded on the larger torus `p`.
    pub fn extend_to(&self, p: &Periods) -> Result<TorusField> {
        if !self.periods.divides(p) {
            return Err(FkError::PeriodMismatch(format!(
                "{:?} does not divide {:?}",
                self.periods.as_slice(),
                p.as_slice()
            )));
        }
        Ok(TorusField::from_fn(p.clone(), |i| self.at(i)))
    }

    /// Subtract the integer that brings the value at site 0 into `[0, 1)`.
    pub fn normalized(&self) -> TorusField {
        let k = self.values[0].floor() as i64;
        let mut out = self.map(|x| x - k as f64);
        out.lift = self.lift + k;
        out
    }

    /// Values as CSV rows `i1,...,in,value` (17 significant digits).
    pub fn to_csv(&self) -> String {
        let n = self.periods.dim();
        let mut s: String = (1..=n).map(|a| format!("i{a},")).collect();
        s.push_str("value\n");
        for (k, v) in self.values.iter().enumerate() {
            for c in self.periods.coords(k) {
                s.push_str(&format!("{c},"));
            }
            s.push_str(&format!("{v:.16e}\n"));
        }
        s
    }
}

impl LatticeFn for TorusField {
    fn dim(&self) -> usize {
        self.periods.dim()
    }

    fn value_at(&self, idx: &[i64]) -> Option<f64> {
        Some(self.at(idx))
    }
}

impl Translate for TorusField {
    fn translate(&self, axis: usize, offset: i64) -> Result<Self> {
        let mut out = TorusField::from_fn(self.periods.clone(), |i| {
            let mut j = i.to_vec();
            j[axis] += offset;
            self.at(&j)
        });
        out.lift = self.lift;
        Ok(out)
    }
}

/// Periods of the transverse axes `2..n` of a strip `Z x T^q`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TransversePeriods(Vec<usize>);

impl TransversePeriods {
    pub fn new(q: Vec<usize>) -> Result<Self> {
        if q.contains(&0) {
            return Err(FkError::InvalidPeriods(q));
        }
        Ok(TransversePeriods(q))
    }

    pub fn ones(transverse_dims: usize) -> Self {
        TransversePeriods(vec![1; transverse_dims])
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    /// Number of sites per layer.
    pub fn cells(&self) -> usize {
        self.0.iter().product()
    }

    /// Lattice dimension `n` of the strip.
    pub fn dim(&self) -> usize {
        self.0.len() + 1
    }

    pub fn flat(&self, t: &[i64]) -> usize {
        let mut flat = 0usize;
        let mut stride = 1usize;
        for (a, &q) in self.0.iter().enumerate() {
            flat += t[a].rem_euclid(q as i64) as usize * stride;
            stride *= q;
        }
        flat
    }

    pub fn coords(&self, mut flat: usize) -> Vec<i64> {
        self.0
            .iter()
            .map(|&q| {
                let c = (flat % q) as i64;
                flat /= q;
                c
            })
            .collect()
    }
}

/// A field on `Z x T^q` stored on the window `[-W, W]` of layers, equal to a
/// periodic tail outside the window.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StripField {
    pub q: TransversePeriods,
    pub half_width: usize,
    /// Layer-major values: index `(i + W) * q.cells() + t`.
    pub values: Vec<f64>,
    pub left: TorusField,
    pub right: TorusField,
}

impl StripField {
    pub fn from_fn(
        q: TransversePeriods,
        half_width: usize,
        left: TorusField,
        right: TorusField,
        f: impl Fn(i64, &[i64]) -> f64,
    ) -> Result<Self> {
        if left.dim() != q.dim() || right.dim() != q.dim() {
            return Err(FkError::InvalidArgument(
                "tail dimension does not match the strip".into(),
            ));
        }
        let ct = q.cells();
        let w = half_width as i64;
        let mut values = Vec::with_capacity((2 * half_width + 1) * ct);
        for i in -w..=w {
            for t in 0..ct {
                values.push(f(i, &q.coords(t)));
            }
        }
        Ok(StripField {
            q,
            half_width,
            values,
            left,
            right,
        })
    }

    /// Field with zero tails and zero window values (offset coordinates).
    pub fn zeros(q: TransversePeriods, half_width: usize) -> Self {
        let z = TorusField::constant(Periods::ones(q.dim()), 0.0);
        StripField::from_fn(q, half_width, z.clone(), z, |_, _| 0.0).unwrap()
    }

    pub fn dim(&self) -> usize {
        self.q.dim()
    }

    pub fn layer_cells(&self) -> usize {
        self.q.cells()
    }

    pub fn window_index(&self, i: i64, t: usize) -> Option<usize> {
        let w = self.half_width as i64;
        if i < -w || i > w {
            return None;
        }
        Some((i + w) as usize * self.q.cells() + t)
    }

    pub fn layer(&self, i: i64) -> Option<&[f64]> {
        let ct = self.q.cells();
        self.window_index(i, 0).map(|k| &self.values[k..k + ct])
    }

    pub fn at(&self, idx: &[i64]) -> f64 {
        let i = idx[0];
        let w = self.half_width as i64;
        if i < -w {
            self.left.at(idx)
        } else if i > w {
            self.right.at(idx)
        } else {
            self.values[self.window_index(i, self.q.flat(&idx[1..])).unwrap()]
        }
    }

    /// True when both tails vanish identically.
    pub fn has_zero_tails(&self) -> bool {
        self.left.values.iter().chain(&self.right.values).all(|&x| x == 0.0)
    }

    fn same_strip(&self, other: &StripField) -> Result<()> {
        if self.q != other.q || self.half_width != other.half_width {
            return Err(FkError::PeriodMismatch(
                "strip windows or transverse periods differ".into(),
            ));
        }
        Ok(())
    }

    fn tail_combine(a: &TorusField, b: &TorusField, f: impl Fn(f64, f64) -> f64) -> TorusField {
        let p: Vec<usize> = a
            .periods
            .as_slice()
            .iter()
            .zip(b.periods.as_slice())
            .map(|(&x, &y)| lcm(x, y))
            .collect();
        let p = Periods::new(p).expect("lcm of valid periods");
        TorusField::from_fn(p, |i| f(a.at(i), b.at(i)))
    }

    pub fn add(&self, other: &StripField) -> Result<StripField> {
        self.same_strip(other)?;
        Ok(StripField {
            q: self.q.clone(),
            half_width: self.half_width,
            values: self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect(),
            left: Self::tail_combine(&self.left, &other.left, |a, b| a + b),
            right: Self::tail_combine(&self.right, &other.right, |a, b| a + b),
        })
    }

    pub fn sub(&self, other: &StripField) -> Result<StripField> {
        self.same_strip(other)?;
        Ok(StripField {
            q: self.q.clone(),
            half_width: self.half_width,
            values: self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect(),
            left: Self::tail_combine(&self.left, &other.left, |a, b| a - b),
            right: Self::tail_combine(&self.right, &other.right, |a, b| a - b),
        })
    }

    /// Same field on a window of half-width `w`, filled from the tails or truncated.
    pub fn with_window(&self, w: usize) -> StripField {
        StripField::from_fn(self.q.clone(), w, self.left.clone(), self.right.clone(), |i, t| {
            let mut idx = vec![i];
            idx.extend_from_slice(t);
            self.at(&idx)
        })
        .unwrap()
    }

    /// Replace the window values, keeping layout and tails.
    pub fn with_values(&self, values: Vec<f64>) -> StripField {
        assert_eq!(values.len(), self.values.len());
        StripField { values, ..self.clone() }
    }

    /// CSV rows `i1,...,in,value` over the window.
    pub fn to_csv(&self) -> String {
        let n = self.dim();
        let mut s: String = (1..=n).map(|a| format!("i{a},")).collect();
        s.push_str("value\n");
        let ct = self.q.cells();
        for (k, v) in self.values.iter().enumerate() {
            let i = (k / ct) as i64 - self.half_width as i64;
            s.push_str(&format!("{i},"));
            for c in self.q.coords(k % ct) {
                s.push_str(&format!("{c},"));
            }
            s.push_str(&format!("{v:.16e}\n"));
        }
        s
    }
}

impl LatticeFn for StripField {
    fn dim(&self) -> usize {
        self.q.dim()
    }

    fn value_at(&self, idx: &[i64]) -> Option<f64> {
        Some(self.at(idx))
    }
}

impl Translate for StripField {
    fn translate(&self, axis: usize, offset: i64) -> Result<Self> {
        let left = self.left.translate(axis, offset)?;
        let right = self.right.translate(axis, offset)?;
        StripField::from_fn(self.q.clone(), self.half_width, left, right, |i, t| {
            let mut idx = vec![i];
            idx.extend_from_slice(t);
            idx[axis] += offset;
            self.at(&idx)
        })
    }
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

pub(crate) fn lcm(a: usize, b: usize) -> usize {
    a / gcd(a, b) * b
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::shift;

    #[test]
    fn periods_validate() {
        assert!(matches!(Periods::new(vec![0, 1]), Err(FkError::InvalidPeriods(_))));
        let p = Periods::new(vec![3, 2]).unwrap();
        assert_eq!(p.cells(), 6);
        for k in 0..6 {
            assert_eq!(p.flat(&p.coords(k)), k);
        }
        assert_eq!(p.flat(&[-1, 5]), p.flat(&[2, 1]));
    }

    #[test]
    fn torus_shift_and_extend() {
        let p = Periods::new(vec![3, 1]).unwrap();
        let u = TorusField::from_fn(p.clone(), |i| i[0] as f64);
        let s = shift(&u, 0, 1).unwrap();
        assert_eq!(s.values, vec![1.0, 2.0, 0.0]);
        let big = u.extend_to(&Periods::new(vec![6, 2]).unwrap()).unwrap();
        assert_eq!(big.at(&[4, 1]), 1.0);
        assert!(u.extend_to(&Periods::new(vec![4, 1]).unwrap()).is_err());
    }

    #[test]
    fn normalization_tracks_lift() {
        let u = TorusField::constant(Periods::ones(2), -0.25).normalized();
        assert_eq!(u.values[0], 0.75);
        assert_eq!(u.lift, -1);
    }

    #[test]
    fn strip_tails_and_translation() {
        let q = TransversePeriods::new(vec![2]).unwrap();
        let l = TorusField::constant(Periods::ones(2), -1.0);
        let r = TorusField::constant(Periods::ones(2), 1.0);
        let u = StripField::from_fn(q, 2, l, r, |i, t| i as f64 * 0.1 + t[0] as f64).unwrap();
        assert_eq!(u.at(&[-5, 0]), -1.0);
        assert_eq!(u.at(&[7, 1]), 1.0);
        assert_eq!(u.at(&[1, 3]), 0.1 + 1.0);
        let s = shift(&u, 0, 1).unwrap();
        assert_eq!(s.at(&[1, 0]), u.at(&[2, 0]));
        assert_eq!(s.at(&[2, 0]), 1.0);
        let wide = u.with_window(4);
        assert_eq!(wide.at(&[3, 0]), 1.0);
        assert_eq!(wide.at(&[-2, 1]), u.at(&[-2, 1]));
    }
}
