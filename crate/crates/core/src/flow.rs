//! Negative-gradient semiflow integrated with classical RK4.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::functional::Functional;
use crate::linalg::norm2;
use crate::tolerances::{ENERGY_RISE_SLACK, MAX_HALVINGS, STATIONARITY_TOL};
use crate::{FkError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowParams {
    /// Step size; `None` selects the safe step of the functional.
    pub dt: Option<f64>,
    pub t_max: f64,
    /// Stop once the l2 norm of the gradient is at most this.
    pub stationarity_tol: f64,
    pub max_steps: usize,
}

impl Default for FlowParams {
    fn default() -> Self {
        FlowParams {
            dt: None,
            t_max: f64::INFINITY,
            stationarity_tol: STATIONARITY_TOL,
            max_steps: 2_000_000,
        }
    }
}

impl FlowParams {
    /// Run exactly to time `t` regardless of stationarity.
    pub fn horizon(t: f64) -> Self {
        FlowParams {
            dt: None,
            t_max: t,
            stationarity_tol: 0.0,
            max_steps: usize::MAX,
        }
    }

    pub fn resolve_dt(&self, f: &dyn Functional) -> Result<f64> {
        let safe = f.dt_safe();
        match self.dt {
            None => Ok(safe),
            Some(dt) if dt > 0.0 && dt <= safe * (1.0 + 1e-12) => Ok(dt),
            Some(dt) => Err(FkError::InvalidArgument(format!(
                "dt = {dt:e} must lie in (0, {safe:e}]"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub t: f64,
    pub energy: f64,
    /// l2 norm of the gradient.
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowOutcome {
    pub state: Vec<f64>,
    pub trace: Vec<TracePoint>,
    pub converged: bool,
    pub steps: usize,
    pub t: f64,
    pub energy: f64,
    pub residual: f64,
}

/// One RK4 step of `x' = -grad I(x)` given the gradient `g` at `x`.
pub fn rk4_step(f: &dyn Functional, x: &[f64], g: &[f64], dt: f64) -> Vec<f64> {
    let n = x.len();
    let mut tmp = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    for i in 0..n {
        tmp[i] = x[i] - 0.5 * dt * g[i];
    }
    f.gradient(&tmp, &mut k2);
    for i in 0..n {
        tmp[i] = x[i] - 0.5 * dt * k2[i];
    }
    f.gradient(&tmp, &mut k3);
    for i in 0..n {
        tmp[i] = x[i] - dt * k3[i];
    }
    f.gradient(&tmp, &mut k4);
    (0..n)
        .map(|i| x[i] - dt / 6.0 * (g[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect()
}

/// RK4 step that halves `dt` while the energy rises by more than the slack.
///
/// Returns the new state, its energy and the step actually taken.
pub fn guarded_step(f: &dyn Functional, x: &[f64], energy: f64, g: &[f64], dt: f64) -> Result<(Vec<f64>, f64, f64)> {
    let mut h = dt;
    for _ in 0..=MAX_HALVINGS {
        let y = rk4_step(f, x, g, h);
        let e = f.energy(&y);
        if !e.is_finite() || y.iter().any(|v| !v.is_finite()) {
            return Err(FkError::NonFinite("flow step"));
        }
        if e <= energy + ENERGY_RISE_SLACK {
            return Ok((y, e, h));
        }
        h *= 0.5;
    }
    Err(FkError::StepRejected { dt: h * 2.0 })
}

/// Flow `x0` and `x0 + d0` together to time `t`, returning `(x(t), d(t))`.
///
/// The difference is advanced with [`Functional::gradient_difference`], so a
/// gap far below the resolution of the fields themselves stays resolved.
/// Both members use the same steps, chosen by the energy guard on `x`.
pub fn integrate_pair(f: &dyn Functional, x0: &[f64], d0: &[f64], t: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let dt = f.dt_safe();
    let n = x0.len();
    let (mut x, mut d) = (x0.to_vec(), d0.to_vec());
    let mut e = f.energy(&x);
    let mut now = 0.0;
    let mut gx = vec![0.0; n];
    let mut gd = vec![0.0; n];
    while now < t {
        let mut h = dt.min(t - now);
        f.gradient(&x, &mut gx);
        f.gradient_difference(&x, &d, &mut gd);
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let (y, dy) = rk4_pair(f, &x, &d, &gx, &gd, h);
            let ey = f.energy(&y);
            if !ey.is_finite() || dy.iter().any(|v| !v.is_finite()) {
                return Err(FkError::NonFinite("paired flow step"));
            }
            if ey <= e + ENERGY_RISE_SLACK {
                accepted = Some((y, dy, ey));
                break;
            }
            h *= 0.5;
        }
        let Some((y, dy, ey)) = accepted else {
            return Err(FkError::StepRejected { dt: h * 2.0 });
        };
        x = y;
        d = dy;
        e = ey;
        now = if h == t - now { t } else { now + h };
    }
    Ok((x, d))
}

fn rk4_pair(f: &dyn Functional, x: &[f64], d: &[f64], gx: &[f64], gd: &[f64], h: f64) -> (Vec<f64>, Vec<f64>) {
    let n = x.len();
    let stage = |a: &[f64], k: &[f64], c: f64| -> Vec<f64> { a.iter().zip(k).map(|(v, g)| v - c * g).collect() };
    let mut kx = [gx.to_vec(), vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    let mut kd = [gd.to_vec(), vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    for (s, c) in [(1usize, 0.5), (2, 0.5), (3, 1.0)] {
        let xs = stage(x, &kx[s - 1], c * h);
        let ds = stage(d, &kd[s - 1], c * h);
        f.gradient(&xs, &mut kx[s]);
        f.gradient_difference(&xs, &ds, &mut kd[s]);
    }
    let comb = |a: &[f64], k: &[Vec<f64>; 4]| -> Vec<f64> {
        (0..n)
            .map(|i| a[i] - h / 6.0 * (k[0][i] + 2.0 * k[1][i] + 2.0 * k[2][i] + k[3][i]))
            .collect()
    };
    (comb(x, &kx), comb(d, &kd))
}

/// Integrate from `x0` until stationary, `t_max` or `max_steps`.
pub fn integrate(f: &dyn Functional, x0: &[f64], params: &FlowParams) -> Result<FlowOutcome> {
    run(f, x0, params, true)
}

/// Same as [`integrate`] without recording a trace.
pub fn integrate_quiet(f: &dyn Functional, x0: &[f64], params: &FlowParams) -> Result<FlowOutcome> {
    run(f, x0, params, false)
}

fn run(f: &dyn Functional, x0: &[f64], params: &FlowParams, record: bool) -> Result<FlowOutcome> {
    let dt = params.resolve_dt(f)?;
    let mut x = x0.to_vec();
    let mut e = f.energy(&x);
    if !e.is_finite() {
        return Err(FkError::NonFinite("initial energy"));
    }
    let mut g = vec![0.0; x.len()];
    let mut t = 0.0;
    let mut steps = 0;
    let mut trace = Vec::new();
    loop {
        f.gradient(&x, &mut g);
        let res = norm2(&g);
        if record {
            trace.push(TracePoint {
                t,
                energy: e,
                residual: res,
            });
        }
        if res <= params.stationarity_tol {
            return Ok(FlowOutcome {
                state: x,
                trace,
                converged: true,
                steps,
                t,
                energy: e,
                residual: res,
            });
        }
        if t >= params.t_max || steps >= params.max_steps {
            return Ok(FlowOutcome {
                state: x,
                trace,
                converged: false,
                steps,
                t,
                energy: e,
                residual: res,
            });
        }
        let h = dt.min(params.t_max - t);
        let (y, ey, used) = guarded_step(f, &x, e, &g, h)?;
        x = y;
        e = ey;
        t = if used == params.t_max - t {
            params.t_max
        } else {
            t + used
        };
        steps += 1;
    }
}

/// Newton iterations on a converged flow state, kept while the residual drops.
///
/// Stops at the first step that does not lower the residual or when the
/// Hessian is not positive definite, so saddles are left as they are.
pub fn newton_polish(f: &dyn Functional, out: &mut FlowOutcome) {
    for _ in 0..20 {
        let g = f.gradient_vec(&out.state);
        let h = f.hessian(&out.state);
        let Some(chol) = h.cholesky() else { return };
        let step = chol.solve(&DVector::from_vec(g));
        let y: Vec<f64> = out.state.iter().zip(step.iter()).map(|(x, d)| x - d).collect();
        let r = norm2(&f.gradient_vec(&y));
        if !(r < out.residual) {
            return;
        }
        out.energy = f.energy(&y);
        out.state = y;
        out.residual = r;
    }
}
