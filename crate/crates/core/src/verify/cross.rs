//! Three-way agreement of the mountain-pass value on a two-cell torus.

use serde::{Deserialize, Serialize};

use crate::functional::{Functional, LatticeProblem};
use crate::model::SitePotential;
use crate::mpp::{build_initial_path, mountain_pass, MountainPassMode, MountainPassParams, PathKind};
use crate::periodic::GapPair;
use crate::{FkError, Result};

use super::oracle::{bottleneck_minimax_2d, OracleGrid2D};

fn check_two_cell(gap: &GapPair) -> Result<()> {
    if gap.periods().as_slice() != [2, 1] {
        return Err(FkError::Unsupported(format!(
            "reduced landscape needs periods (2, 1), got {:?}",
            gap.periods().as_slice()
        )));
    }
    Ok(())
}

/// `(a, b) -> I(v0 + (a g(0), b g(e_1)))` on the torus `(2, 1)`, with `g = w0 - v0`.
pub fn reduced_landscape<'a>(s: &'a dyn SitePotential, gap: &GapPair) -> Result<impl Fn(f64, f64) -> f64 + Sync + 'a> {
    check_two_cell(gap)?;
    let f = LatticeProblem::torus(s, &gap.v0)?;
    let g = gap.gap().values;
    Ok(move |a: f64, b: f64| f.energy(&[a * g[0], b * g[1]]))
}

/// Rows `(a, b, I)` on the `grid x grid` lattice of `[0, 1]^2`, `a` fastest.
pub fn landscape_grid(s: &dyn SitePotential, gap: &GapPair, grid: usize) -> Result<Vec<(f64, f64, f64)>> {
    if grid < 2 {
        return Err(FkError::InvalidArgument(
            "landscape grid needs at least 2 points per axis".into(),
        ));
    }
    let f = reduced_landscape(s, gap)?;
    let h = 1.0 / (grid - 1) as f64;
    let mut out = Vec::with_capacity(grid * grid);
    for j in 0..grid {
        for i in 0..grid {
            let (a, b) = (i as f64 * h, j as f64 * h);
            out.push((a, b, f(a, b)));
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleRow {
    pub resolution: usize,
    pub value: f64,
    pub argmax: (f64, f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossCheck {
    pub c: f64,
    pub node_flow: f64,
    pub heat_flow: f64,
    pub node_flow_residual: f64,
    pub heat_flow_residual: f64,
    pub oracle: Vec<OracleRow>,
    /// Largest pairwise difference among the two engines and the finest oracle.
    pub max_disagreement: f64,
    pub tol: f64,
    pub passed: bool,
}

/// Compare node flow, heat flow (both from the `chi_2` path with `n_nodes`
/// nodes) and the grid oracle at each resolution, on the torus `(2, 1)`.
pub fn cross_check_mountain_pass(
    s: &dyn SitePotential,
    gap: &GapPair,
    resolutions: &[usize],
    n_nodes: usize,
    params: &MountainPassParams,
    tol: f64,
) -> Result<CrossCheck> {
    check_two_cell(gap)?;
    let path = build_initial_path(PathKind::Chi { k: 2 }, n_nodes, gap)?;
    let node = mountain_pass(s, gap, &path, &params.clone().with_mode(MountainPassMode::NodeFlow))?;
    let heat = mountain_pass(s, gap, &path, &params.clone().with_mode(MountainPassMode::HeatFlow))?;
    let land = reduced_landscape(s, gap)?;
    let mut oracle = Vec::new();
    for &r in resolutions {
        let grid = OracleGrid2D::from_fn(r, &land)?;
        let o = bottleneck_minimax_2d(&grid);
        oracle.push(OracleRow {
            resolution: r,
            value: o.value,
            argmax: o.argmax,
        });
    }
    let mut vals = vec![node.d, heat.d];
    if let Some(o) = oracle.iter().max_by_key(|o| o.resolution) {
        vals.push(o.value);
    }
    let mut max_disagreement = 0.0f64;
    for a in &vals {
        for b in &vals {
            max_disagreement = max_disagreement.max((a - b).abs());
        }
    }
    Ok(CrossCheck {
        c: node.c,
        node_flow: node.d,
        heat_flow: heat.d,
        node_flow_residual: node.residual,
        heat_flow_residual: heat.residual,
        oracle,
        max_disagreement,
        tol,
        passed: max_disagreement <= tol,
    })
}
