//! Mountain-pass critical points between adjacent periodic minimizers.

mod engine;
mod order;
mod paths;
mod scan;

pub(crate) use engine::run as engine_run;
pub use engine::{equidistribute, is_monotone, lm_refine, EngineOutcome, MountainPassMode, MountainPassParams};
pub use order::{intersects, intersects_on, theta_bounds, theta_history, Intersection, ThetaBounds};
pub use paths::{chi_path, phi_path};
pub use scan::{
    multiplicity_scan, phi_witness, shift_normalized_distance, unconstrained_paths_check, MultiplicityReport, ScanRow,
    UnconstrainedCase, UnconstrainedReport,
};

use serde::{Deserialize, Serialize};

use crate::field::{Periods, TorusField};
use crate::functional::{Functional, LatticeProblem};
use crate::linalg::clip;
use crate::model::SitePotential;
use crate::periodic::GapPair;
use crate::{FkError, Result};

/// Initial path family.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PathKind {
    /// `theta -> theta (w0 - v0)`.
    Linear,
    /// `theta -> phi_k(theta, i_axis) (w0 - v0)` along a lattice axis.
    Chi { k: usize },
}

/// A discrete path in the gap box from `0` to `w0 - v0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathOnBox {
    pub nodes: Vec<TorusField>,
    pub monotone: bool,
}

impl PathOnBox {
    pub fn from_nodes(nodes: Vec<TorusField>) -> Self {
        let flat: Vec<Vec<f64>> = nodes.iter().map(|x| x.values.clone()).collect();
        PathOnBox {
            monotone: is_monotone(&flat),
            nodes,
        }
    }

    pub fn flat(&self) -> Vec<Vec<f64>> {
        self.nodes.iter().map(|x| x.values.clone()).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinimaxResult<F> {
    /// Mountain-pass value, the energy of the refined critical point.
    pub d: f64,
    /// Energy of the lower minimizer.
    pub c: f64,
    pub path_max: f64,
    pub argmax_index: usize,
    /// Critical point in offset coordinates.
    pub critical_field: F,
    /// Sup norm of the residual at the critical point.
    pub residual: f64,
    pub iterations: usize,
    pub value_trace: Vec<f64>,
    pub flow_rise: f64,
    pub theta_infinity: Option<f64>,
    pub monotone_preserved: bool,
    /// Smallest distance of the critical point to the faces of the box.
    pub box_margin: f64,
    #[serde(skip)]
    pub final_path: Vec<Vec<f64>>,
}

impl<F> MinimaxResult<F> {
    pub fn gap_energy(&self) -> f64 {
        self.d - self.c
    }
}

/// Default node count `16 prod(p) + 1`, at most 257.
pub fn default_nodes(cells: usize) -> usize {
    (16 * cells + 1).min(257)
}

/// Value of the path family at parameter `theta` and lattice site `idx`.
pub fn path_value(kind: PathKind, axis: usize, theta: f64, idx: &[i64]) -> Result<f64> {
    match kind {
        PathKind::Linear => Ok(theta),
        PathKind::Chi { k } => phi_path(k, theta, idx[axis]),
    }
}

/// Discretize `kind` with `n_nodes` equally spaced parameters on the torus of `gap`.
pub fn build_initial_path(kind: PathKind, n_nodes: usize, gap: &GapPair) -> Result<PathOnBox> {
    if n_nodes < 3 {
        return Err(FkError::InvalidArgument("a path needs at least 3 nodes".into()));
    }
    if let PathKind::Chi { k } = kind {
        if k < 2 {
            return Err(FkError::InvalidArgument(format!("chi path needs k >= 2, got {k}")));
        }
    }
    let g = gap.gap();
    let p = gap.periods().clone();
    let mut nodes = Vec::with_capacity(n_nodes);
    for m in 0..n_nodes {
        let th = m as f64 / (n_nodes - 1) as f64;
        let mut err = None;
        let node = TorusField::from_fn(p.clone(), |i| match path_value(kind, 0, th, i) {
            Ok(v) => v * g.at(i),
            Err(e) => {
                err = Some(e);
                0.0
            }
        });
        if let Some(e) = err {
            return Err(e);
        }
        nodes.push(node);
    }
    Ok(PathOnBox::from_nodes(nodes))
}

/// Project every node sitewise onto `[0, w0 - v0]`.
pub fn clip_to_box(path: &PathOnBox, gap: &GapPair) -> Result<PathOnBox> {
    let upper = gap.gap();
    let nodes = path
        .nodes
        .iter()
        .map(|x| {
            if x.periods != upper.periods {
                return Err(FkError::PeriodMismatch("path node on a different torus".into()));
            }
            let mut v = x.values.clone();
            clip(&mut v, &upper.values);
            TorusField::from_values(x.periods.clone(), v)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PathOnBox::from_nodes(nodes))
}

pub(crate) fn box_margin(x: &[f64], upper: &[f64]) -> f64 {
    x.iter()
        .zip(upper)
        .fold(f64::INFINITY, |m, (v, u)| m.min(*v).min(u - v))
}

/// Mountain-pass value and critical point between `v0` and `w0` starting from `path0`.
pub fn mountain_pass(
    s: &dyn SitePotential,
    gap: &GapPair,
    path0: &PathOnBox,
    params: &MountainPassParams,
) -> Result<MinimaxResult<TorusField>> {
    let f = LatticeProblem::torus(s, &gap.v0)?;
    let upper = gap.gap().values;
    if path0.nodes.iter().any(|x| &x.periods != gap.periods()) {
        return Err(FkError::PeriodMismatch(
            "path and gap pair live on different tori".into(),
        ));
    }
    let out = engine::run(&f, &upper, &path0.flat(), params)?;
    let c = f.energy(&vec![0.0; upper.len()]);
    finish(out, c, &upper, |v| TorusField::from_values(gap.periods().clone(), v))
}

pub(crate) fn finish<F>(
    out: EngineOutcome,
    c: f64,
    upper: &[f64],
    wrap: impl Fn(Vec<f64>) -> Result<F>,
) -> Result<MinimaxResult<F>> {
    Ok(MinimaxResult {
        d: out.value,
        c,
        path_max: out.path_max,
        argmax_index: out.argmax_index,
        box_margin: box_margin(&out.critical, upper),
        critical_field: wrap(out.critical)?,
        residual: out.residual,
        iterations: out.iterations,
        value_trace: out.value_trace,
        flow_rise: out.flow_rise,
        theta_infinity: out.theta_infinity,
        monotone_preserved: out.monotone_preserved,
        final_path: out.nodes,
    })
}

/// Period vector `(k, 1, ..., 1)`.
pub fn axis_periods(dim: usize, k: usize) -> Result<Periods> {
    let mut p = vec![1; dim];
    p[0] = k;
    Periods::new(p)
}
