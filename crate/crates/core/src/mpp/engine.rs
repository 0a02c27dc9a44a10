//! Path deformation on a box `[0, upper]` of a generic functional.
//!
//! Node flow is a string method: every interior node takes a guarded RK4 step
//! of the negative gradient flow and the nodes are redistributed by arc length
//! every few sweeps. Heat flow deforms the whole path by the semiflow alone and
//! locates the parameter whose orbit stays at the top by bisection between
//! neighbouring nodes with different limits.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::flow::{guarded_step, integrate_quiet, FlowParams};
use crate::functional::Functional;
use crate::linalg::{clip, dist2, dot, lerp, norm2, sup_dist, sup_norm};
use crate::tolerances::{DEDUP_TOL, NODE_COLLAPSE_TOL, ORDER_TOL, SADDLE_TOL};
use crate::{FkError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum MountainPassMode {
    NodeFlow,
    HeatFlow,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MountainPassParams {
    pub flow: FlowParams,
    pub mode: MountainPassMode,
    /// Arc-length redistribution period in sweeps.
    pub reparam_every: usize,
    /// Stop when the top energy moved less than `stall_tol` over this many sweeps.
    pub stall_window: usize,
    pub stall_tol: f64,
    pub min_sweeps: usize,
    pub max_sweeps: usize,
    /// Sup-norm residual the refined critical point must reach.
    pub saddle_tol: f64,
    /// Node flow only: interior nodes start displaced by up to `jitter (upper)`
    /// sitewise, so that paths with a lattice symmetry can leave the ridge the
    /// symmetry would otherwise hold them on.
    pub jitter: f64,
    pub jitter_seed: u64,
}

impl Default for MountainPassParams {
    fn default() -> Self {
        MountainPassParams {
            flow: FlowParams::default(),
            mode: MountainPassMode::NodeFlow,
            reparam_every: 10,
            stall_window: 50,
            stall_tol: 1e-12,
            min_sweeps: 200,
            max_sweeps: 400_000,
            saddle_tol: SADDLE_TOL,
            jitter: 1e-3,
            jitter_seed: 0,
        }
    }
}

impl MountainPassParams {
    pub fn with_mode(mut self, mode: MountainPassMode) -> Self {
        self.mode = mode;
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EngineOutcome {
    /// Energy of the refined critical point.
    pub value: f64,
    /// Largest node energy of the final path.
    pub path_max: f64,
    pub argmax_index: usize,
    pub critical: Vec<f64>,
    /// Sup norm of the gradient at `critical`.
    pub residual: f64,
    pub iterations: usize,
    /// Largest node energy after every deformation step.
    pub value_trace: Vec<f64>,
    /// Largest increase of the top energy caused by a deformation step.
    pub flow_rise: f64,
    /// Parameter in `[0, 1]` of the persistent top (heat flow only).
    pub theta_infinity: Option<f64>,
    pub monotone_preserved: bool,
    #[serde(skip)]
    pub nodes: Vec<Vec<f64>>,
}

pub fn is_monotone(nodes: &[Vec<f64>]) -> bool {
    nodes
        .windows(2)
        .all(|w| w[0].iter().zip(&w[1]).all(|(a, b)| *b >= *a - ORDER_TOL))
}

/// Redistribute nodes at equal l2 arc length along the polygonal path.
pub fn equidistribute(nodes: &mut [Vec<f64>]) -> Result<()> {
    let n = nodes.len();
    let mut cum = vec![0.0; n];
    for k in 1..n {
        cum[k] = cum[k - 1] + dist2(&nodes[k - 1], &nodes[k]);
    }
    let total = cum[n - 1];
    if total <= NODE_COLLAPSE_TOL * (n as f64) {
        return Err(FkError::NodeCollapse {
            index: 0,
            tol: NODE_COLLAPSE_TOL,
        });
    }
    let old = nodes.to_vec();
    let mut seg = 0;
    for (j, node) in nodes.iter_mut().enumerate().take(n - 1).skip(1) {
        let target = total * j as f64 / (n - 1) as f64;
        while seg + 1 < n - 1 && cum[seg + 1] < target {
            seg += 1;
        }
        let len = cum[seg + 1] - cum[seg];
        let s = if len > 0.0 {
            ((target - cum[seg]) / len).clamp(0.0, 1.0)
        } else {
            0.0
        };
        *node = lerp(&old[seg], &old[seg + 1], s);
    }
    for k in 0..n - 1 {
        if dist2(&nodes[k], &nodes[k + 1]) < NODE_COLLAPSE_TOL {
            return Err(FkError::NodeCollapse {
                index: k,
                tol: NODE_COLLAPSE_TOL,
            });
        }
    }
    Ok(())
}

fn argmax(e: &[f64]) -> usize {
    let mut best = 0;
    for (k, &v) in e.iter().enumerate() {
        if v > e[best] {
            best = k;
        }
    }
    best
}

/// Minimize `|grad I|^2` by Levenberg-Marquardt, projecting onto the box.
pub fn lm_refine(f: &dyn Functional, x0: &[f64], upper: &[f64], target: f64, max_iter: usize) -> (Vec<f64>, f64) {
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut g = f.gradient_vec(&x);
    let mut lambda = 1e-6;
    for _ in 0..max_iter {
        if sup_norm(&g) <= target {
            break;
        }
        let h = f.hessian(&x);
        let hh = &h * &h;
        let gv = DVector::from_column_slice(&g);
        let rhs = -(&h * &gv);
        let scale = (0..n).fold(0.0f64, |m, i| m.max(hh[(i, i)])).max(1.0);
        let mut accepted = false;
        while lambda < 1e8 {
            let a = &hh + DMatrix::identity(n, n) * (lambda * scale);
            if let Some(ch) = a.cholesky() {
                let d = ch.solve(&rhs);
                let mut y: Vec<f64> = x.iter().zip(d.iter()).map(|(a, b)| a + b).collect();
                clip(&mut y, upper);
                let gy = f.gradient_vec(&y);
                if norm2(&gy) < norm2(&g) {
                    x = y;
                    g = gy;
                    lambda = (lambda * 0.1).max(1e-15);
                    accepted = true;
                    break;
                }
            }
            lambda *= 10.0;
        }
        if !accepted {
            break;
        }
    }
    let r = sup_norm(&g);
    (x, r)
}

/// Climbing dynamics `x' = -g + 2 (g . tau) tau` that ascends along `tau`.
fn climb(f: &dyn Functional, x0: &[f64], tau: &[f64], upper: &[f64], dt: f64, stop: f64, max_steps: usize) -> Vec<f64> {
    let mut x = x0.to_vec();
    let mut g = vec![0.0; x.len()];
    for _ in 0..max_steps {
        f.gradient(&x, &mut g);
        if norm2(&g) <= stop {
            break;
        }
        let gt = dot(&g, tau);
        for i in 0..x.len() {
            x[i] += dt * (-g[i] + 2.0 * gt * tau[i]);
        }
        clip(&mut x, upper);
    }
    x
}

fn refine_from_node(
    f: &dyn Functional,
    nodes: &[Vec<f64>],
    m: usize,
    upper: &[f64],
    dt: f64,
    saddle_tol: f64,
) -> Result<(Vec<f64>, f64)> {
    let n = nodes.len();
    let (a, b) = (m.saturating_sub(1), (m + 1).min(n - 1));
    let mut tau: Vec<f64> = nodes[b].iter().zip(&nodes[a]).map(|(p, q)| p - q).collect();
    let tn = norm2(&tau);
    if tn > 0.0 {
        tau.iter_mut().for_each(|t| *t /= tn);
    }
    let x = climb(f, &nodes[m], &tau, upper, dt, 1e-5, 20_000);
    let (x, r) = lm_refine(f, &x, upper, saddle_tol * 1e-4, 200);
    if r > saddle_tol {
        // fall back on polishing the node itself
        let (y, ry) = lm_refine(f, &nodes[m], upper, saddle_tol * 1e-4, 200);
        if ry <= saddle_tol {
            return Ok((y, ry));
        }
        return Err(FkError::SaddleNotIsolated {
            residual: r.min(ry),
            tol: saddle_tol,
        });
    }
    Ok((x, r))
}

fn check_path(nodes: &[Vec<f64>], upper: &[f64]) -> Result<()> {
    if nodes.len() < 3 {
        return Err(FkError::InvalidArgument("a path needs at least 3 nodes".into()));
    }
    let d = upper.len();
    if nodes.iter().any(|x| x.len() != d) {
        return Err(FkError::InvalidArgument(
            "path node length does not match the box".into(),
        ));
    }
    if sup_norm(&nodes[0]) > 1e-12 || sup_dist(&nodes[nodes.len() - 1], upper) > 1e-12 {
        return Err(FkError::InvalidArgument(
            "path must start at 0 and end at the upper corner".into(),
        ));
    }
    for x in nodes {
        if x.iter().zip(upper).any(|(v, u)| *v < -1e-12 || *v > u + 1e-12) {
            return Err(FkError::InvalidArgument("path leaves the box; clip it first".into()));
        }
    }
    Ok(())
}

/// Node-flow deformation followed by saddle refinement at the top node.
pub fn node_flow(
    f: &dyn Functional,
    upper: &[f64],
    path: &[Vec<f64>],
    params: &MountainPassParams,
) -> Result<EngineOutcome> {
    check_path(path, upper)?;
    let dt = params.flow.resolve_dt(f)?;
    let mut nodes = path.to_vec();
    let last = nodes.len() - 1;
    if params.jitter > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(params.jitter_seed);
        for x in nodes[1..last].iter_mut() {
            for (v, u) in x.iter_mut().zip(upper) {
                *v = (*v + params.jitter * u * rng.gen_range(-1.0..1.0)).clamp(0.0, *u);
            }
        }
    }
    let was_monotone = is_monotone(&nodes);
    equidistribute(&mut nodes)?;
    let mut energies: Vec<f64> = nodes.par_iter().map(|x| f.energy(x)).collect();
    let mut trace = Vec::new();
    let mut flow_rise = 0.0f64;
    let mut monotone = was_monotone;
    let mut sweeps = 0;
    while sweeps < params.max_sweeps {
        sweeps += 1;
        let pre = energies[1..last].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let stepped: Vec<Result<(Vec<f64>, f64, f64)>> = (1..last)
            .into_par_iter()
            .map(|k| {
                let g = f.gradient_vec(&nodes[k]);
                guarded_step(f, &nodes[k], energies[k], &g, dt)
            })
            .collect();
        for (k, r) in (1..last).zip(stepped) {
            let (y, e, _) = r?;
            nodes[k] = y;
            energies[k] = e;
        }
        let post = energies[1..last].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        flow_rise = flow_rise.max(post - pre);
        trace.push(energies.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
        if was_monotone && !is_monotone(&nodes) {
            monotone = false;
        }
        if sweeps % params.reparam_every == 0 {
            equidistribute(&mut nodes)?;
            energies = nodes.par_iter().map(|x| f.energy(x)).collect();
        }
        let w = params.stall_window;
        if sweeps >= params.min_sweeps && trace.len() > w {
            let s = trace.len() - 1;
            if (trace[s - w] - trace[s]).abs() < params.stall_tol {
                break;
            }
        }
    }
    let m = argmax(&energies);
    let path_max = energies[m];
    let (critical, residual) = refine_from_node(f, &nodes, m, upper, dt, params.saddle_tol)?;
    let value = f.energy(&critical);
    Ok(EngineOutcome {
        value,
        path_max,
        argmax_index: m,
        critical,
        residual,
        iterations: sweeps,
        value_trace: trace,
        flow_rise,
        theta_infinity: None,
        monotone_preserved: monotone,
        nodes,
    })
}

fn classify(limits: &mut Vec<Vec<f64>>, x: &[f64]) -> usize {
    if let Some(k) = limits.iter().position(|l| sup_dist(l, x) <= DEDUP_TOL) {
        return k;
    }
    limits.push(x.to_vec());
    limits.len() - 1
}

/// Heat-flow deformation: flow the whole path, then track the top orbit.
/// Separation at which two bracketing edge orbits count as parted.
const EDGE_SPLIT: f64 = 1e-3;

pub fn heat_flow(
    f: &dyn Functional,
    upper: &[f64],
    path: &[Vec<f64>],
    params: &MountainPassParams,
) -> Result<EngineOutcome> {
    check_path(path, upper)?;
    let dt = params.flow.resolve_dt(f)?;
    let n = path.len();
    let was_monotone = is_monotone(path);
    let stat = params.flow.stationarity_tol;

    // h_t = flow of every node, run in lockstep
    let mut nodes = path.to_vec();
    let mut energies: Vec<f64> = nodes.par_iter().map(|x| f.energy(x)).collect();
    let mut done = vec![false; n];
    let mut trace = vec![energies.iter().cloned().fold(f64::NEG_INFINITY, f64::max)];
    let mut argmax_trace = vec![argmax(&energies)];
    let mut flow_rise = 0.0f64;
    let mut monotone = was_monotone;
    let mut steps = 0;
    while done.iter().any(|d| !d) {
        if steps >= params.flow.max_steps {
            return Err(FkError::NotConverged("heat flow did not settle every node".into()));
        }
        steps += 1;
        let pre = trace[trace.len() - 1];
        let stepped: Vec<Result<Option<(Vec<f64>, f64)>>> = (0..n)
            .into_par_iter()
            .map(|k| {
                if done[k] {
                    return Ok(None);
                }
                let g = f.gradient_vec(&nodes[k]);
                if norm2(&g) <= stat {
                    return Ok(None);
                }
                guarded_step(f, &nodes[k], energies[k], &g, dt).map(|(y, e, _)| Some((y, e)))
            })
            .collect();
        for (k, r) in stepped.into_iter().enumerate() {
            match r? {
                Some((y, e)) => {
                    nodes[k] = y;
                    energies[k] = e;
                }
                None => done[k] = true,
            }
        }
        let post = energies.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        flow_rise = flow_rise.max(post - pre);
        trace.push(post);
        argmax_trace.push(argmax(&energies));
        if was_monotone && !is_monotone(&nodes) {
            monotone = false;
        }
    }

    let mut limits: Vec<Vec<f64>> = Vec::new();
    let labels: Vec<usize> = nodes.iter().map(|x| classify(&mut limits, x)).collect();
    let flow_params = FlowParams {
        dt: Some(dt),
        ..params.flow.clone()
    };

    let mut best: Option<(f64, Vec<f64>, f64, f64, usize)> = None;
    for m in 0..n - 1 {
        if labels[m] == labels[m + 1] {
            continue;
        }
        let (a, b) = (&path[m], &path[m + 1]);
        let seg = sup_dist(a, b);
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        for _ in 0..80 {
            if (hi - lo) * seg < 1e-15 {
                break;
            }
            let mid = 0.5 * (lo + hi);
            let out = integrate_quiet(f, &lerp(a, b, mid), &flow_params)?;
            if !out.converged {
                return Err(FkError::NotConverged("edge bisection flow".into()));
            }
            if classify(&mut limits, &out.state) == labels[m] {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        // both bracketing orbits shadow the stable manifold of the critical
        // point and part ways near it; the smallest gradient before they part
        // marks the closest approach
        let mut x = lerp(a, b, lo);
        let mut y = lerp(a, b, hi);
        let (mut ex, mut ey) = (f.energy(&x), f.energy(&y));
        let mut gx = vec![0.0; x.len()];
        let mut gy = vec![0.0; y.len()];
        let mut best_x = x.clone();
        let mut best_r = f64::INFINITY;
        for _ in 0..params.flow.max_steps {
            if sup_dist(&x, &y) > EDGE_SPLIT {
                break;
            }
            f.gradient(&x, &mut gx);
            f.gradient(&y, &mut gy);
            let r = norm2(&gx);
            if r < best_r {
                best_r = r;
                best_x = x.clone();
            }
            if r <= stat {
                break;
            }
            let (nx, nex, _) = guarded_step(f, &x, ex, &gx, dt)?;
            let (ny, ney, _) = guarded_step(f, &y, ey, &gy, dt)?;
            x = nx;
            ex = nex;
            y = ny;
            ey = ney;
        }
        let (crit, r) = lm_refine(f, &best_x, upper, params.saddle_tol * 1e-4, 200);
        if r > params.saddle_tol {
            return Err(FkError::SaddleNotIsolated {
                residual: r,
                tol: params.saddle_tol,
            });
        }
        let e = f.energy(&crit);
        let theta = (m as f64 + lo) / (n - 1) as f64;
        if best.as_ref().is_none_or(|b| e > b.0) {
            best = Some((e, crit, r, theta, m));
        }
    }
    let (value, critical, residual, theta, m) =
        best.ok_or_else(|| FkError::NotConverged("every node flows to the same limit".into()))?;
    let path_max = path.iter().map(|x| f.energy(x)).fold(f64::NEG_INFINITY, f64::max);
    Ok(EngineOutcome {
        value,
        path_max,
        argmax_index: m,
        critical,
        residual,
        iterations: steps,
        value_trace: trace,
        flow_rise,
        theta_infinity: Some(theta),
        monotone_preserved: monotone,
        nodes,
    })
}

pub fn run(f: &dyn Functional, upper: &[f64], path: &[Vec<f64>], params: &MountainPassParams) -> Result<EngineOutcome> {
    match params.mode {
        MountainPassMode::NodeFlow => node_flow(f, upper, path, params),
        MountainPassMode::HeatFlow => heat_flow(f, upper, path, params),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equidistribution_spaces_evenly() {
        let mut nodes: Vec<Vec<f64>> = [0.0, 0.1, 0.15, 0.2, 1.0].iter().map(|&x| vec![x]).collect();
        equidistribute(&mut nodes).unwrap();
        for (k, x) in nodes.iter().enumerate() {
            assert!((x[0] - k as f64 / 4.0).abs() < 1e-14);
        }
        let mut flat = vec![vec![0.0], vec![0.0], vec![0.0]];
        assert!(matches!(equidistribute(&mut flat), Err(FkError::NodeCollapse { .. })));
    }
}
