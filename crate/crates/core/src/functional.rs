//! Energies, gradients and Hessians of lattice problems in flat coordinates.

use nalgebra::DMatrix;

use crate::field::{StripField, TorusField};
use crate::model::SitePotential;
use crate::{FkError, Result};

/// A smooth functional on `R^len` with the data needed by the integrators.
pub trait Functional: Sync {
    fn len(&self) -> usize;
    fn energy(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64], out: &mut [f64]);
    fn hessian(&self, x: &[f64]) -> DMatrix<f64>;
    /// Step size guaranteed by the Lipschitz bound of the gradient.
    fn dt_safe(&self) -> f64;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn gradient_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.len()];
        self.gradient(x, &mut g);
        g
    }

    /// `grad(x + d) - grad(x)`.
    fn gradient_difference(&self, x: &[f64], d: &[f64], out: &mut [f64]) {
        let xd: Vec<f64> = x.iter().zip(d).map(|(a, b)| a + b).collect();
        self.gradient(&xd, out);
        let g = self.gradient_vec(x);
        out.iter_mut().zip(&g).for_each(|(o, b)| *o -= b);
    }
}

/// Sum of shifted local energies over a finite set of centres, as a function of
/// the free sites.
///
/// The full field is `base + x` on the free sites and `base` on ghost sites.
pub struct LatticeProblem<'a> {
    pot: &'a dyn SitePotential,
    n_free: usize,
    base: Vec<f64>,
    stencil: Vec<usize>,
    m: usize,
    energy_shift: f64,
}

impl<'a> LatticeProblem<'a> {
    /// Relative energy `x -> J(x + base)` on the torus of `base`.
    pub fn torus(pot: &'a dyn SitePotential, base: &TorusField) -> Result<Self> {
        let p = &base.periods;
        if p.dim() != pot.dim() {
            return Err(FkError::PeriodMismatch(format!(
                "torus dimension {} vs potential dimension {}",
                p.dim(),
                pot.dim()
            )));
        }
        let m = pot.ball().len();
        let mut stencil = Vec::with_capacity(p.cells() * m);
        let mut idx = vec![0i64; p.dim()];
        for c in 0..p.cells() {
            let coords = p.coords(c);
            for off in pot.ball().offsets() {
                for a in 0..p.dim() {
                    idx[a] = coords[a] + off.coords()[a];
                }
                stencil.push(p.flat(&idx));
            }
        }
        Ok(LatticeProblem {
            pot,
            n_free: p.cells(),
            base: base.values.clone(),
            stencil,
            m,
            energy_shift: 0.0,
        })
    }

    /// Renormalized strip energy `x -> sum_j [S_j(base + x) - c0]` over every
    /// centre whose ball meets the window; `x` lives on the window of `base`.
    pub fn strip(pot: &'a dyn SitePotential, base: &StripField, c0: f64) -> Result<Self> {
        if base.dim() != pot.dim() {
            return Err(FkError::PeriodMismatch(format!(
                "strip dimension {} vs potential dimension {}",
                base.dim(),
                pot.dim()
            )));
        }
        let r = pot.radius() as i64;
        let w = base.half_width as i64;
        let ct = base.layer_cells();
        let n_free = base.values.len();
        let ghost_layers = 2 * r;
        let ext_index = |i: i64, t: usize| -> usize {
            if i.abs() <= w {
                ((i + w) as usize) * ct + t
            } else if i < -w {
                n_free + ((i + w + ghost_layers) as usize) * ct + t
            } else {
                n_free + ((ghost_layers + i - w - 1) as usize) * ct + t
            }
        };
        let mut ext = base.values.clone();
        ext.resize(n_free + 2 * ghost_layers as usize * ct, 0.0);
        for i in (-w - ghost_layers..-w).chain(w + 1..=w + ghost_layers) {
            for t in 0..ct {
                let mut idx = vec![i];
                idx.extend(base.q.coords(t));
                ext[ext_index(i, t)] = base.at(&idx);
            }
        }
        let m = pot.ball().len();
        let mut stencil = Vec::new();
        for i in -w - r..=w + r {
            for t in 0..ct {
                let tc = base.q.coords(t);
                for off in pot.ball().offsets() {
                    let o = off.coords();
                    let tt: Vec<i64> = tc.iter().zip(&o[1..]).map(|(a, b)| a + b).collect();
                    stencil.push(ext_index(i + o[0], base.q.flat(&tt)));
                }
            }
        }
        Ok(LatticeProblem {
            pot,
            n_free,
            base: ext,
            stencil,
            m,
            energy_shift: c0,
        })
    }

    pub fn potential(&self) -> &dyn SitePotential {
        self.pot
    }

    pub fn centers(&self) -> usize {
        self.stencil.len() / self.m
    }

    fn full(&self, x: &[f64]) -> Vec<f64> {
        let mut phi = self.base.clone();
        for (p, v) in phi.iter_mut().zip(x) {
            *p += v;
        }
        phi
    }

    /// Local energy `S_c - shift` of every centre, in centre order.
    pub fn local_energies(&self, x: &[f64]) -> Vec<f64> {
        let phi = self.full(x);
        let mut buf = vec![0.0; self.m];
        self.stencil
            .chunks(self.m)
            .map(|st| {
                for (b, &k) in st.iter().enumerate() {
                    buf[b] = phi[k];
                }
                self.pot.eval(&buf) - self.energy_shift
            })
            .collect()
    }
}

impl Functional for LatticeProblem<'_> {
    fn len(&self) -> usize {
        self.n_free
    }

    fn energy(&self, x: &[f64]) -> f64 {
        self.local_energies(x).iter().sum()
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|g| *g = 0.0);
        let phi = self.full(x);
        let mut buf = vec![0.0; self.m];
        let mut g = vec![0.0; self.m];
        for st in self.stencil.chunks(self.m) {
            for (b, &k) in st.iter().enumerate() {
                buf[b] = phi[k];
            }
            self.pot.grad(&buf, &mut g);
            for (b, &k) in st.iter().enumerate() {
                if k < self.n_free {
                    out[k] += g[b];
                }
            }
        }
    }

    fn gradient_difference(&self, x: &[f64], d: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|g| *g = 0.0);
        let phi = self.full(x);
        let mut dphi = d.to_vec();
        dphi.resize(phi.len(), 0.0);
        let mut buf = vec![0.0; self.m];
        let mut dbuf = vec![0.0; self.m];
        let mut g = vec![0.0; self.m];
        for st in self.stencil.chunks(self.m) {
            for (b, &k) in st.iter().enumerate() {
                buf[b] = phi[k];
                dbuf[b] = dphi[k];
            }
            self.pot.grad_difference(&buf, &dbuf, &mut g);
            for (b, &k) in st.iter().enumerate() {
                if k < self.n_free {
                    out[k] += g[b];
                }
            }
        }
    }

    fn hessian(&self, x: &[f64]) -> DMatrix<f64> {
        let n = self.n_free;
        let m = self.m;
        let mut hm = DMatrix::zeros(n, n);
        let phi = self.full(x);
        let mut buf = vec![0.0; m];
        let mut h = vec![0.0; m * m];
        for st in self.stencil.chunks(m) {
            for (b, &k) in st.iter().enumerate() {
                buf[b] = phi[k];
            }
            self.pot.hess(&buf, &mut h);
            for (a, &ka) in st.iter().enumerate() {
                if ka >= n {
                    continue;
                }
                for (b, &kb) in st.iter().enumerate() {
                    if kb < n {
                        hm[(ka, kb)] += h[a * m + b];
                    }
                }
            }
        }
        hm
    }

    fn dt_safe(&self) -> f64 {
        // Lipschitz constant C * sqrt(C(r) C1(r)); both counts equal |B|^2
        let c = self.pot.second_derivative_bound().max(f64::MIN_POSITIVE);
        let b2 = (self.m * self.m) as f64;
        1.0 / (2.0 * c * b2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{Periods, TransversePeriods};
    use crate::model::FkPotential;

    #[test]
    fn two_cell_reduction_matches_closed_form() {
        // J(u + v0) on the (2,1) torus reduces to (b-a)^2/4 - cos 2pi a - cos 2pi b
        let s = FkPotential::classical(2);
        let v0 = TorusField::constant(Periods::new(vec![2, 1]).unwrap(), -0.25);
        let f = LatticeProblem::torus(&s, &v0).unwrap();
        for (a, b) in [(0.0, 0.0), (0.5, 0.5), (0.3, 0.9), (0.1, 0.7)] {
            let tau = 2.0 * std::f64::consts::PI;
            let want = 0.25 * (b - a) * (b - a) - (tau * a).cos() - (tau * b).cos();
            assert!((f.energy(&[a, b]) - want).abs() < 1e-13);
        }
    }

    #[test]
    fn gradient_and_hessian_match_fd() {
        let s = FkPotential::classical(2);
        let v0 = TorusField::constant(Periods::new(vec![3, 2]).unwrap(), -0.25);
        let f = LatticeProblem::torus(&s, &v0).unwrap();
        let x: Vec<f64> = (0..6).map(|k| 0.11 * k as f64).collect();
        let g = f.gradient_vec(&x);
        let h = f.hessian(&x);
        let eps = 1e-6;
        for k in 0..6 {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[k] += eps;
            xm[k] -= eps;
            let fd = (f.energy(&xp) - f.energy(&xm)) / (2.0 * eps);
            assert!((fd - g[k]).abs() < 1e-6 * g[k].abs().max(1.0));
            let gp = f.gradient_vec(&xp);
            let gm = f.gradient_vec(&xm);
            for l in 0..6 {
                let fd = (gp[l] - gm[l]) / (2.0 * eps);
                assert!((fd - h[(l, k)]).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn strip_energy_vanishes_on_asymptote() {
        let s = FkPotential::classical(2);
        let q = TransversePeriods::new(vec![2]).unwrap();
        let v0 = TorusField::constant(Periods::ones(2), -0.25);
        let base = StripField::from_fn(q, 3, v0.clone(), v0, |_, _| -0.25).unwrap();
        let f = LatticeProblem::strip(&s, &base, -1.0).unwrap();
        assert_eq!(f.len(), 14);
        assert!(f.energy(&[0.0; 14]).abs() < 1e-14);
        assert!(f.gradient_vec(&[0.0; 14]).iter().all(|g| g.abs() < 1e-14));
    }
}
