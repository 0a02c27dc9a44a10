//! Lattice, site potentials, local energies and Euler-Lagrange residuals.

mod lattice;
mod potential;
mod validate;

pub use lattice::{shift, shifted, Ball, FiniteField, LatticeFn, LatticeIndex, Shifted, Translate};
pub use potential::{
    build_potential, fd_gradient, fd_hessian, FkPotential, ModelSpec, OnSite, SitePotential, BUILTIN_MODELS,
    MODEL_PARAMS,
};
pub use validate::{validate_assumptions, AssumptionCheck, ValidationReport};

use crate::{FkError, Result};

fn gather<F: LatticeFn + ?Sized>(s: &dyn SitePotential, u: &F, center: &[i64], out: &mut Vec<f64>) -> Result<()> {
    out.clear();
    let mut idx = center.to_vec();
    for off in s.ball().offsets() {
        for (a, c) in off.coords().iter().enumerate() {
            idx[a] = center[a] + c;
        }
        match u.value_at(&idx) {
            Some(v) => out.push(v),
            None => return Err(FkError::InsufficientSupport { site: center.to_vec() }),
        }
    }
    Ok(())
}

fn check_dim<F: LatticeFn + ?Sized>(s: &dyn SitePotential, u: &F, site: &[i64]) -> Result<()> {
    if u.dim() != s.dim() || site.len() != s.dim() {
        return Err(FkError::InvalidArgument(format!(
            "dimension mismatch: potential {}, field {}, site {}",
            s.dim(),
            u.dim(),
            site.len()
        )));
    }
    Ok(())
}

/// `S_j(u) = s(u(j + .))` restricted to the ball.
pub fn local_energy<F: LatticeFn + ?Sized>(s: &dyn SitePotential, u: &F, j: &[i64]) -> Result<f64> {
    check_dim(s, u, j)?;
    let mut buf = Vec::with_capacity(s.ball().len());
    gather(s, u, j, &mut buf)?;
    Ok(s.eval(&buf))
}

/// Euler-Lagrange residual `sum_{|j - i| <= r} d_i S_j(u)` at site `i`.
pub fn el_residual<F: LatticeFn + ?Sized>(s: &dyn SitePotential, u: &F, i: &[i64]) -> Result<f64> {
    check_dim(s, u, i)?;
    let m = s.ball().len();
    let mut buf = Vec::with_capacity(m);
    let mut g = vec![0.0; m];
    let mut center = i.to_vec();
    let mut total = 0.0;
    for (b, off) in s.ball().offsets().iter().enumerate() {
        // site i sits at offset `off` inside the ball around i - off
        for (a, c) in off.coords().iter().enumerate() {
            center[a] = i[a] - c;
        }
        gather(s, u, &center, &mut buf).map_err(|_| FkError::InsufficientSupport { site: i.to_vec() })?;
        s.grad(&buf, &mut g);
        total += g[b];
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Const(f64);
    impl LatticeFn for Const {
        fn dim(&self) -> usize {
            2
        }
        fn value_at(&self, _: &[i64]) -> Option<f64> {
            Some(self.0)
        }
    }

    #[test]
    fn classical_local_energy_and_residual() {
        let s = FkPotential::classical(2);
        assert!((local_energy(&s, &Const(-0.25), &[0, 0]).unwrap() + 1.0).abs() < 1e-15);
        assert!((local_energy(&s, &Const(0.25), &[3, -1]).unwrap() - 1.0).abs() < 1e-15);
        for c in [0.1, 0.37, -2.2] {
            let e = local_energy(&s, &Const(c), &[0, 0]).unwrap();
            assert!((e - (2.0 * std::f64::consts::PI * c).sin()).abs() < 1e-14);
        }
        assert!(el_residual(&s, &Const(-0.25), &[0, 0]).unwrap().abs() < 1e-14);
        let r = el_residual(&s, &Const(0.0), &[0, 0]).unwrap();
        assert!((r - 2.0 * std::f64::consts::PI).abs() < 1e-14);
    }

    #[test]
    fn insufficient_support_is_reported() {
        let s = FkPotential::classical(2);
        let f = FiniteField::from_fn(vec![-1, -1], vec![3, 3], |_| 0.0);
        assert!(local_energy(&s, &f, &[0, 0]).is_ok());
        assert!(matches!(
            el_residual(&s, &f, &[0, 0]),
            Err(FkError::InsufficientSupport { .. })
        ));
        let g = FiniteField::from_fn(vec![-2, -2], vec![5, 5], |_| 0.0);
        assert!(el_residual(&s, &g, &[0, 0]).is_ok());
    }
}
