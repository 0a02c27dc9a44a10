use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::lattice::Ball;
use crate::tolerances::FD_STEP;
use crate::{FkError, Result};

/// A site potential `s` acting on the values of a field on the ball `B_0^r`.
///
/// Slices passed to the methods are indexed in the order of [`Ball::offsets`].
/// Only `eval` is mandatory; `grad` and `hess` fall back to central differences,
/// which costs accuracy (roughly 1e-9 for the gradient and 1e-6 for the Hessian).
pub trait SitePotential: Send + Sync + fmt::Debug {
    fn name(&self) -> &str;
    fn ball(&self) -> &Ball;
    fn eval(&self, u: &[f64]) -> f64;

    fn grad(&self, u: &[f64], out: &mut [f64]) {
        fd_gradient(self, u, out);
    }

    /// Row-major `|B| x |B|` Hessian.
    fn hess(&self, u: &[f64], out: &mut [f64]) {
        fd_hessian(self, u, out);
    }

    /// `grad(u + d) - grad(u)`. Implementations may evaluate it without the
    /// cancellation of the plain difference, keeping relative accuracy for tiny `d`.
    fn grad_difference(&self, u: &[f64], d: &[f64], out: &mut [f64]) {
        let ud: Vec<f64> = u.iter().zip(d).map(|(a, b)| a + b).collect();
        let mut g = vec![0.0; u.len()];
        self.grad(&ud, out);
        self.grad(u, &mut g);
        out.iter_mut().zip(&g).for_each(|(o, b)| *o -= b);
    }

    /// A bound `C` on the absolute value of every second derivative.
    fn second_derivative_bound(&self) -> f64;

    fn dim(&self) -> usize {
        self.ball().dim()
    }

    fn radius(&self) -> usize {
        self.ball().radius()
    }
}

pub fn fd_gradient<P: SitePotential + ?Sized>(s: &P, u: &[f64], out: &mut [f64]) {
    let mut w = u.to_vec();
    for b in 0..u.len() {
        let h = FD_STEP * (1.0 + u[b].abs());
        w[b] = u[b] + h;
        let fp = s.eval(&w);
        w[b] = u[b] - h;
        let fm = s.eval(&w);
        w[b] = u[b];
        out[b] = (fp - fm) / (2.0 * h);
    }
}

pub fn fd_hessian<P: SitePotential + ?Sized>(s: &P, u: &[f64], out: &mut [f64]) {
    let m = u.len();
    let mut w = u.to_vec();
    // second differences of `eval` need a larger step than first differences
    let h = 1e-4;
    let f0 = s.eval(u);
    for a in 0..m {
        for b in a..m {
            let v = if a == b {
                w[a] = u[a] + h;
                let fp = s.eval(&w);
                w[a] = u[a] - h;
                let fm = s.eval(&w);
                w[a] = u[a];
                (fp - 2.0 * f0 + fm) / (h * h)
            } else {
                let mut f = [0.0; 4];
                for (k, (sa, sb)) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)].iter().enumerate() {
                    w[a] = u[a] + sa * h;
                    w[b] = u[b] + sb * h;
                    f[k] = s.eval(&w);
                }
                w[a] = u[a];
                w[b] = u[b];
                (f[0] - f[1] - f[2] + f[3]) / (4.0 * h * h)
            };
            out[a * m + b] = v;
            out[b * m + a] = v;
        }
    }
}

/// On-site part of a Frenkel-Kontorova type potential.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum OnSite {
    /// `A sin(2 pi u)`, one well per unit period.
    Sine,
    /// `A cos^2(2 pi u)`, two wells per unit period.
    TwoWell,
    /// No on-site term.
    Free,
}

/// `s(u) = offset + A g(u(0)) + sum over unit neighbours j of k_j (u(j) - u(0))^2`.
#[derive(Clone, Debug)]
pub struct FkPotential {
    name: String,
    ball: Ball,
    onsite: OnSite,
    amplitude: f64,
    /// One coupling per entry of `ball.unit_neighbors()`.
    couplings: Vec<f64>,
    offset: f64,
}

impl FkPotential {
    pub fn new(name: &str, dim: usize, onsite: OnSite, amplitude: f64, coupling: f64) -> Self {
        let ball = Ball::new(dim, 1);
        let couplings = vec![coupling; ball.unit_neighbors().len()];
        FkPotential {
            name: name.to_string(),
            ball,
            onsite,
            amplitude,
            couplings,
            offset: 0.0,
        }
    }

    /// Classical model: `sin(2 pi u(0)) + (1/16) sum (u(j) - u(0))^2`.
    pub fn classical(dim: usize) -> Self {
        Self::new("classical-fk", dim, OnSite::Sine, 1.0, 1.0 / 16.0)
    }

    /// Classical coupling with the on-site term multiplied by `strength`.
    pub fn pinned(dim: usize, strength: f64) -> Self {
        Self::new("pinned-fk", dim, OnSite::Sine, strength, 1.0 / 16.0)
    }

    /// Two wells per period, `cos^2(2 pi u(0))` on-site.
    pub fn two_well(dim: usize) -> Self {
        Self::new("two-well-fk", dim, OnSite::TwoWell, 1.0, 1.0 / 16.0)
    }

    /// Pure nearest-neighbour coupling, every constant is a minimizer.
    pub fn free_chain(dim: usize) -> Self {
        Self::new("free-chain", dim, OnSite::Free, 0.0, 1.0 / 16.0)
    }

    pub fn with_offset(mut self, offset: f64) -> Self {
        self.offset = offset;
        self
    }

    /// Replace the coupling of the bonds to `+e_axis` and `-e_axis`.
    pub fn with_bond_coupling(mut self, axis: usize, coupling: f64) -> Self {
        for k in self.axis_bonds(axis) {
            self.couplings[k] = coupling;
        }
        self
    }

    /// Positions in `couplings` of the bonds to `+e_axis` and `-e_axis`.
    fn axis_bonds(&self, axis: usize) -> Vec<usize> {
        let e = super::LatticeIndex::unit(self.ball.dim(), axis);
        let z = super::LatticeIndex::zero(self.ball.dim());
        [&e, &(&z - &e)]
            .into_iter()
            .map(|target| {
                let pos = self.ball.position(target).expect("unit offset lies in the ball");
                self.ball.unit_neighbors().iter().position(|&p| p == pos).unwrap()
            })
            .collect()
    }

    pub fn with_name(mut self, name: &str) -> Self {
        self.name = name.to_string();
        self
    }

    pub fn onsite(&self) -> OnSite {
        self.onsite
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    pub fn couplings(&self) -> &[f64] {
        &self.couplings
    }

    fn g(&self, x: f64) -> (f64, f64, f64) {
        let a = self.amplitude;
        match self.onsite {
            OnSite::Sine => {
                let (s, c) = (2.0 * PI * x).sin_cos();
                (a * s, 2.0 * PI * a * c, -4.0 * PI * PI * a * s)
            }
            OnSite::TwoWell => {
                let c = (2.0 * PI * x).cos();
                let (s4, c4) = (4.0 * PI * x).sin_cos();
                (a * c * c, -2.0 * PI * a * s4, -8.0 * PI * PI * a * c4)
            }
            OnSite::Free => (0.0, 0.0, 0.0),
        }
    }

    /// `g'(x + d) - g'(x)` in product form.
    fn dg_difference(&self, x: f64, d: f64) -> f64 {
        let a = self.amplitude;
        match self.onsite {
            OnSite::Sine => -4.0 * PI * a * (2.0 * PI * x + PI * d).sin() * (PI * d).sin(),
            OnSite::TwoWell => -4.0 * PI * a * (4.0 * PI * x + 2.0 * PI * d).cos() * (2.0 * PI * d).sin(),
            OnSite::Free => 0.0,
        }
    }
}

impl SitePotential for FkPotential {
    fn name(&self) -> &str {
        &self.name
    }

    fn ball(&self) -> &Ball {
        &self.ball
    }

    fn eval(&self, u: &[f64]) -> f64 {
        let o = self.ball.origin();
        let u0 = u[o];
        let mut e = self.offset + self.g(u0).0;
        for (k, &j) in self.couplings.iter().zip(self.ball.unit_neighbors()) {
            let d = u[j] - u0;
            e += k * d * d;
        }
        e
    }

    fn grad(&self, u: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|x| *x = 0.0);
        let o = self.ball.origin();
        let u0 = u[o];
        let mut g0 = self.g(u0).1;
        for (k, &j) in self.couplings.iter().zip(self.ball.unit_neighbors()) {
            let d = 2.0 * k * (u[j] - u0);
            out[j] = d;
            g0 -= d;
        }
        out[o] = g0;
    }

    fn grad_difference(&self, u: &[f64], d: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|x| *x = 0.0);
        let o = self.ball.origin();
        let mut g0 = self.dg_difference(u[o], d[o]);
        for (k, &j) in self.couplings.iter().zip(self.ball.unit_neighbors()) {
            let dd = 2.0 * k * (d[j] - d[o]);
            out[j] = dd;
            g0 -= dd;
        }
        out[o] = g0;
    }

    fn hess(&self, u: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|x| *x = 0.0);
        let m = self.ball.len();
        let o = self.ball.origin();
        let mut h00 = self.g(u[o]).2;
        for (k, &j) in self.couplings.iter().zip(self.ball.unit_neighbors()) {
            h00 += 2.0 * k;
            out[j * m + j] = 2.0 * k;
            out[o * m + j] = -2.0 * k;
            out[j * m + o] = -2.0 * k;
        }
        out[o * m + o] = h00;
    }

    fn second_derivative_bound(&self) -> f64 {
        let a = self.amplitude.abs();
        let onsite = match self.onsite {
            OnSite::Sine => 4.0 * PI * PI * a,
            OnSite::TwoWell => 8.0 * PI * PI * a,
            OnSite::Free => 0.0,
        };
        let ksum: f64 = self.couplings.iter().map(|k| 2.0 * k.abs()).sum();
        let kmax = self.couplings.iter().fold(0.0f64, |m, k| m.max(2.0 * k.abs()));
        (onsite + ksum).max(kmax)
    }
}

/// Declarative description of a built-in potential.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub name: String,
    pub dim: usize,
    pub radius: usize,
    pub params: BTreeMap<String, f64>,
}

impl ModelSpec {
    pub fn new(name: &str, dim: usize) -> Self {
        ModelSpec {
            name: name.to_string(),
            dim,
            radius: 1,
            params: BTreeMap::new(),
        }
    }

    pub fn with_param(mut self, key: &str, value: f64) -> Self {
        self.params.insert(key.to_string(), value);
        self
    }
}

/// Names accepted by [`build_potential`].
pub const BUILTIN_MODELS: &[&str] = &["classical-fk", "pinned-fk", "two-well-fk", "free-chain"];

/// Parameter keys understood by the built-ins.
pub const MODEL_PARAMS: &[&str] = &["amplitude", "coupling", "strength", "offset", "flip_axis"];

/// Instantiate a built-in potential.
///
/// Parameters: `amplitude`, `coupling`, `offset`, `strength` (pinned-fk only,
/// default 2) and `flip_axis` (negates the couplings along that axis).
pub fn build_potential(spec: &ModelSpec) -> Result<Arc<dyn SitePotential>> {
    if spec.dim == 0 {
        return Err(FkError::InvalidArgument("model dimension must be >= 1".into()));
    }
    if spec.radius != 1 {
        return Err(FkError::Unsupported(format!(
            "built-in models have radius 1, got {}",
            spec.radius
        )));
    }
    for k in spec.params.keys() {
        if !MODEL_PARAMS.contains(&k.as_str()) {
            return Err(FkError::InvalidArgument(format!("unknown model parameter `{k}`")));
        }
    }
    let n = spec.dim;
    let mut pot = match spec.name.as_str() {
        "classical-fk" => FkPotential::classical(n),
        "pinned-fk" => FkPotential::pinned(n, spec.params.get("strength").copied().unwrap_or(2.0)),
        "two-well-fk" => FkPotential::two_well(n),
        "free-chain" => FkPotential::free_chain(n),
        other => return Err(FkError::InvalidArgument(format!("unknown model `{other}`"))),
    };
    if let Some(&a) = spec.params.get("amplitude") {
        pot.amplitude = a;
    }
    if let Some(&k) = spec.params.get("coupling") {
        pot.couplings.iter_mut().for_each(|c| *c = k);
    }
    if let Some(&o) = spec.params.get("offset") {
        pot.offset = o;
    }
    if let Some(&ax) = spec.params.get("flip_axis") {
        let axis = ax as usize;
        if ax < 0.0 || ax.fract() != 0.0 || axis >= n {
            return Err(FkError::AxisOutOfRange { axis, dim: n });
        }
        for k in pot.axis_bonds(axis) {
            pot.couplings[k] = -pot.couplings[k];
        }
    }
    Ok(Arc::new(pot))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ball_vals(s: &FkPotential, f: impl Fn(usize) -> f64) -> Vec<f64> {
        (0..s.ball().len()).map(f).collect()
    }

    #[test]
    fn grad_difference_matches_plain_difference() {
        for s in [
            FkPotential::classical(2),
            FkPotential::two_well(2),
            FkPotential::free_chain(2),
        ] {
            let u = ball_vals(&s, |k| 0.13 * k as f64 - 0.2);
            let d = ball_vals(&s, |k| 0.01 * (k as f64 + 1.0));
            let (mut a, mut b, mut c) = (vec![0.0; 5], vec![0.0; 5], vec![0.0; 5]);
            s.grad_difference(&u, &d, &mut a);
            let ud: Vec<f64> = u.iter().zip(&d).map(|(x, y)| x + y).collect();
            s.grad(&ud, &mut b);
            s.grad(&u, &mut c);
            for k in 0..5 {
                assert!((a[k] - (b[k] - c[k])).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn classical_constant_values() {
        let s = FkPotential::classical(2);
        assert!((s.eval(&ball_vals(&s, |_| -0.25)) + 1.0).abs() < 1e-15);
        assert!((s.eval(&ball_vals(&s, |_| 0.25)) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn analytic_derivatives_match_fd() {
        for s in [
            FkPotential::classical(2),
            FkPotential::two_well(3),
            FkPotential::pinned(2, 3.0),
        ] {
            let u: Vec<f64> = (0..s.ball().len()).map(|i| 0.13 * i as f64 - 0.4).collect();
            let m = u.len();
            let (mut g, mut gf) = (vec![0.0; m], vec![0.0; m]);
            s.grad(&u, &mut g);
            fd_gradient(&s, &u, &mut gf);
            for b in 0..m {
                assert!((g[b] - gf[b]).abs() <= 1e-6 * g[b].abs().max(1.0));
            }
            let (mut h, mut hf) = (vec![0.0; m * m], vec![0.0; m * m]);
            s.hess(&u, &mut h);
            fd_hessian(&s, &u, &mut hf);
            for b in 0..m * m {
                assert!(
                    (h[b] - hf[b]).abs() <= 1e-4 * h[b].abs().max(1.0),
                    "{} vs {}",
                    h[b],
                    hf[b]
                );
            }
        }
    }

    #[test]
    fn builder_rejects_unknown() {
        assert!(build_potential(&ModelSpec::new("nope", 2)).is_err());
        assert!(build_potential(&ModelSpec::new("classical-fk", 2).with_param("dx", 1.0)).is_err());
        let flipped = build_potential(&ModelSpec::new("classical-fk", 2).with_param("flip_axis", 0.0)).unwrap();
        assert_eq!(flipped.name(), "classical-fk");
    }
}
