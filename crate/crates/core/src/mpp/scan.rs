//! Scans over period families and the unconstrained-path comparison.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::field::{lcm, Periods, TorusField};
use crate::functional::{Functional, LatticeProblem};
use crate::linalg::{clip, sup_dist};
use crate::model::{SitePotential, Translate};
use crate::periodic::GapPair;
use crate::tolerances::CLIP_SLACK;
use crate::{FkError, Result};

use super::order::{intersects, Intersection};
use super::{
    axis_periods, build_initial_path, default_nodes, mountain_pass, path_value, MinimaxResult, MountainPassParams,
    PathKind, PathOnBox,
};

/// `max_theta I(h(theta)) - I(0)` for the path family `kind` sampled at `samples` parameters.
pub fn phi_witness(s: &dyn SitePotential, gap: &GapPair, kind: PathKind, samples: usize) -> Result<f64> {
    let f = LatticeProblem::torus(s, &gap.v0)?;
    let g = gap.gap();
    let p = gap.periods();
    let sites: Vec<Vec<i64>> = (0..p.cells()).map(|k| p.coords(k)).collect();
    let c = f.energy(&vec![0.0; g.cells()]);
    let mut best = f64::NEG_INFINITY;
    for j in 0..samples.max(2) {
        let th = j as f64 / (samples.max(2) - 1) as f64;
        let x: Vec<f64> = sites
            .iter()
            .zip(&g.values)
            .map(|(i, gv)| path_value(kind, 0, th, i).map(|v| v * gv))
            .collect::<Result<_>>()?;
        best = best.max(f.energy(&x));
    }
    Ok(best - c)
}

/// Smallest sup distance between `v` and a translate of `u`, over a common period cell.
pub fn shift_normalized_distance(u: &TorusField, v: &TorusField) -> Result<f64> {
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
    let (ue, ve) = (u.extend_to(&p)?, v.extend_to(&p)?);
    let mut best = f64::INFINITY;
    for k in 0..p.cells() {
        let s = p.coords(k);
        let mut w = ue.clone();
        for (a, &o) in s.iter().enumerate() {
            if o != 0 {
                w = w.translate(a, o)?;
            }
        }
        best = best.min(sup_dist(&w.values, &ve.values));
    }
    Ok(best)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub k: usize,
    pub c: f64,
    pub d: f64,
    pub gap_energy: f64,
    pub residual: f64,
    pub path_max: f64,
    /// Top of the initial path family above `c` (`k >= 2`).
    pub witness: Option<f64>,
    /// Position of the critical field relative to the first row's.
    pub vs_first: Intersection,
    pub iterations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultiplicityReport {
    pub rows: Vec<ScanRow>,
    /// Pairwise shift-normalized sup distances between critical fields.
    pub distances: Vec<Vec<f64>>,
    pub fields: Vec<TorusField>,
}

/// Mountain-pass data on the tori `(k, 1, ..., 1)` for each `k` in `ks`.
///
/// `gap` must live on the unit torus. The initial path is linear for `k = 1`
/// and `phi_k` along the first axis otherwise.
pub fn multiplicity_scan(
    s: &dyn SitePotential,
    gap: &GapPair,
    ks: &[usize],
    params: &MountainPassParams,
) -> Result<MultiplicityReport> {
    if gap.periods().cells() != 1 {
        return Err(FkError::PeriodMismatch(
            "scan expects a gap pair on the unit torus".into(),
        ));
    }
    let n = gap.periods().dim();
    let mut rows = Vec::new();
    let mut fields: Vec<TorusField> = Vec::new();
    for &k in ks {
        let p = axis_periods(n, k)?;
        let gk = gap.extend_to(&p)?;
        let kind = if k == 1 { PathKind::Linear } else { PathKind::Chi { k } };
        let path = build_initial_path(kind, default_nodes(k), &gk)?;
        let mp = mountain_pass(s, &gk, &path, params)?;
        let witness = if k >= 2 {
            Some(phi_witness(s, &gk, kind, 4001)?)
        } else {
            None
        };
        let vs_first = match fields.first() {
            Some(f0) => intersects(&mp.critical_field, f0)?,
            None => Intersection::Equal,
        };
        rows.push(ScanRow {
            k,
            c: mp.c,
            d: mp.d,
            gap_energy: mp.gap_energy(),
            residual: mp.residual,
            path_max: mp.path_max,
            witness,
            vs_first,
            iterations: mp.iterations,
        });
        fields.push(mp.critical_field);
    }
    let m = fields.len();
    let mut distances = vec![vec![0.0; m]; m];
    for a in 0..m {
        for b in a + 1..m {
            let d = shift_normalized_distance(&fields[a], &fields[b])?;
            distances[a][b] = d;
            distances[b][a] = d;
        }
    }
    Ok(MultiplicityReport {
        rows,
        distances,
        fields,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnconstrainedCase {
    pub name: String,
    pub d: f64,
    /// `|d - d_reference|`.
    pub deviation: f64,
    /// Largest `I(clip(x)) - I(x)` over the nodes of the unclipped path.
    pub clip_excess: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnconstrainedReport {
    pub d_reference: f64,
    pub cases: Vec<UnconstrainedCase>,
}

impl UnconstrainedReport {
    pub fn passed(&self, tol: f64) -> bool {
        self.cases
            .iter()
            .all(|c| c.deviation <= tol && c.clip_excess <= CLIP_SLACK)
    }
}

/// Push the converged path of `base` out of the box (scaled by 1.5, and
/// randomly perturbed), clip it back and rerun the minimax.
pub fn unconstrained_paths_check(
    s: &dyn SitePotential,
    gap: &GapPair,
    base: &MinimaxResult<TorusField>,
    params: &MountainPassParams,
    seed: u64,
) -> Result<UnconstrainedReport> {
    let f = LatticeProblem::torus(s, &gap.v0)?;
    let upper = gap.gap().values;
    let nodes = &base.final_path;
    let last = nodes.len() - 1;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scaled: Vec<Vec<f64>> = nodes.iter().map(|x| x.iter().map(|v| 1.5 * v).collect()).collect();
    let perturbed: Vec<Vec<f64>> = nodes
        .iter()
        .enumerate()
        .map(|(m, x)| {
            if m == 0 || m == last {
                return x.clone();
            }
            x.iter()
                .zip(&upper)
                .map(|(v, u)| v + u * rng.gen_range(-0.1..0.1))
                .collect()
        })
        .collect();
    let mut cases = Vec::new();
    for (name, raw) in [("in-box", nodes.clone()), ("scaled", scaled), ("perturbed", perturbed)] {
        let mut clip_excess = f64::NEG_INFINITY;
        let mut clipped = Vec::with_capacity(raw.len());
        for x in &raw {
            let mut y = x.clone();
            clip(&mut y, &upper);
            clip_excess = clip_excess.max(f.energy(&y) - f.energy(x));
            clipped.push(TorusField::from_values(gap.periods().clone(), y)?);
        }
        let mp = mountain_pass(s, gap, &PathOnBox::from_nodes(clipped), params)?;
        cases.push(UnconstrainedCase {
            name: name.into(),
            d: mp.d,
            deviation: (mp.d - base.d).abs(),
            clip_excess,
        });
    }
    Ok(UnconstrainedReport {
        d_reference: base.d,
        cases,
    })
}
