//! Order relations between fields and the bracketing parameters of a path.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::field::{lcm, Periods, TorusField};
use crate::flow::{integrate_quiet, FlowParams};
use crate::functional::{Functional, LatticeProblem};
use crate::linalg::sup_norm;
use crate::model::{LatticeFn, SitePotential};
use crate::periodic::GapPair;
use crate::tolerances::{ORDER_TOL, SADDLE_TOL};
use crate::{FkError, Result};

use super::{is_monotone, PathOnBox};

/// How `u` sits relative to `v`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Intersection {
    /// `u < v` at every site.
    Below,
    Above,
    /// `u <= v`, `u != v`, with equality somewhere.
    TouchBelow,
    TouchAbove,
    Equal,
    /// `u - v` takes both signs.
    Cross,
}

/// Compare `u` and `v` on the listed sites with equality tolerance `tol`.
pub fn intersects_on<U: LatticeFn + ?Sized, V: LatticeFn + ?Sized>(
    u: &U,
    v: &V,
    sites: &[Vec<i64>],
    tol: f64,
) -> Result<Intersection> {
    let (mut pos, mut neg, mut eq) = (false, false, false);
    for i in sites {
        let (Some(a), Some(b)) = (u.value_at(i), v.value_at(i)) else {
            return Err(FkError::InsufficientSupport { site: i.clone() });
        };
        let d = a - b;
        if d > tol {
            pos = true;
        } else if d < -tol {
            neg = true;
        } else {
            eq = true;
        }
    }
    Ok(match (pos, neg, eq) {
        (true, true, _) => Intersection::Cross,
        (false, false, _) => Intersection::Equal,
        (false, true, false) => Intersection::Below,
        (false, true, true) => Intersection::TouchBelow,
        (true, false, false) => Intersection::Above,
        (true, false, true) => Intersection::TouchAbove,
    })
}

/// Compare two periodic fields over a common period cell.
pub fn intersects(u: &TorusField, v: &TorusField) -> Result<Intersection> {
    if u.periods.dim() != v.periods.dim() {
        return Err(FkError::PeriodMismatch("fields of different dimension".into()));
    }
    let p: Vec<usize> = u
        .periods
        .as_slice()
        .iter()
        .zip(v.periods.as_slice())
        .map(|(&a, &b)| lcm(a, b))
        .collect();
    let p = Periods::new(p)?;
    let sites: Vec<Vec<i64>> = (0..p.cells()).map(|k| p.coords(k)).collect();
    intersects_on(u, v, &sites, ORDER_TOL)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThetaBounds {
    pub t: f64,
    /// Supremum of parameters whose flowed node lies below `u0`.
    pub under: Option<f64>,
    /// Infimum of parameters whose flowed node lies above `u0`.
    pub over: Option<f64>,
}

/// Bracket the stationary field `u0` (offset coordinates) by the flowed path at time `t`.
///
/// On the node grid a parameter counts when `Phi_t(h(theta)) <= u0` and differs
/// from it; when the neighbouring node coincides with `u0` the bound moves onto
/// that node, which is where the supremum is attained.
pub fn theta_bounds(
    s: &dyn SitePotential,
    gap: &GapPair,
    path: &PathOnBox,
    u0: &TorusField,
    t: f64,
) -> Result<ThetaBounds> {
    let f = LatticeProblem::torus(s, &gap.v0)?;
    if &u0.periods != gap.periods() {
        return Err(FkError::PeriodMismatch("u0 and gap pair live on different tori".into()));
    }
    let upper = gap.gap().values;
    if u0.values.iter().zip(&upper).any(|(v, g)| *v <= 0.0 || *v >= *g) {
        return Err(FkError::InvalidArgument("u0 is not strictly inside the box".into()));
    }
    if sup_norm(&f.gradient_vec(&u0.values)) > SADDLE_TOL {
        return Err(FkError::InvalidArgument("u0 is not stationary".into()));
    }
    let flat = path.flat();
    if !is_monotone(&flat) {
        return Err(FkError::InvalidArgument("path is not monotone".into()));
    }
    let flowed: Vec<Vec<f64>> = if t > 0.0 {
        flat.par_iter()
            .map(|x| integrate_quiet(&f, x, &FlowParams::horizon(t)).map(|o| o.state))
            .collect::<Result<_>>()?
    } else {
        flat
    };
    let n = flowed.len();
    let th = |m: usize| m as f64 / (n - 1) as f64;
    let cmp = |x: &[f64]| -> (bool, bool, bool) {
        let le = x.iter().zip(&u0.values).all(|(a, b)| *a <= b + ORDER_TOL);
        let ge = x.iter().zip(&u0.values).all(|(a, b)| *a >= b - ORDER_TOL);
        (le, ge, le && ge)
    };
    let flags: Vec<(bool, bool, bool)> = flowed.iter().map(|x| cmp(x)).collect();
    let under = (0..n).rev().find(|&m| flags[m].0 && !flags[m].2).map(|m| {
        if m + 1 < n && flags[m + 1].2 {
            th(m + 1)
        } else {
            th(m)
        }
    });
    let over = (0..n)
        .find(|&m| flags[m].1 && !flags[m].2)
        .map(|m| if m > 0 && flags[m - 1].2 { th(m - 1) } else { th(m) });
    Ok(ThetaBounds { t, under, over })
}

/// [`theta_bounds`] at each time of `ts`, in order.
pub fn theta_history(
    s: &dyn SitePotential,
    gap: &GapPair,
    path: &PathOnBox,
    u0: &TorusField,
    ts: &[f64],
) -> Result<Vec<ThetaBounds>> {
    ts.iter().map(|&t| theta_bounds(s, gap, path, u0, t)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::FiniteField;

    #[test]
    fn classification() {
        let p = Periods::new(vec![3, 1]).unwrap();
        let u = TorusField::from_values(p.clone(), vec![0.0, 0.0, 0.0]).unwrap();
        let v = TorusField::from_values(p.clone(), vec![0.1, -0.1, 0.0]).unwrap();
        assert_eq!(intersects(&u, &v).unwrap(), Intersection::Cross);
        let w = TorusField::from_values(p.clone(), vec![0.1, 0.0, 0.2]).unwrap();
        assert_eq!(intersects(&u, &w).unwrap(), Intersection::TouchBelow);
        assert_eq!(intersects(&w, &u).unwrap(), Intersection::TouchAbove);
        assert_eq!(intersects(&u, &u).unwrap(), Intersection::Equal);
        let up = u.map(|x| x + 1.0);
        assert_eq!(intersects(&u, &up).unwrap(), Intersection::Below);
        let f = FiniteField::from_fn(vec![0, 0], vec![1, 1], |_| 0.0);
        assert!(intersects_on(&u, &f, &[vec![5, 0]], 0.0).is_err());
    }
}
