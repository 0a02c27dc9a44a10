//! Heteroclinic fields on the strip `Z x T^q` between the two members of a
//! periodic gap pair: renormalized energy, strip flow, minimization, gap
//! detection and the mountain pass between adjacent heteroclinics.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::field::{StripField, TransversePeriods};
use crate::flow::{integrate, integrate_quiet, newton_polish, FlowOutcome, FlowParams};
use crate::functional::{Functional, LatticeProblem};
use crate::linalg::{norm2, sup_dist};
use crate::model::{SitePotential, Translate};
use crate::mpp::{default_nodes, engine_run, finish, phi_path, MinimaxResult, MountainPassParams};
use crate::periodic::{AdjacencyEvidence, GapPair};
use crate::tolerances::{DEDUP_TOL, ORDER_TOL, TAIL_TOL, WINDOW_CAP, WINDOW_START};
use crate::{FkError, Result};

/// Width of the smooth step in the default seeds.
pub const SEED_WIDTH: f64 = 5.0;

/// Largest change of the minimum energy accepted when the window is doubled.
pub const DOUBLING_TOL: f64 = 1e-9;

/// `l1 + l2` norm of the window values. Infinite unless both tails vanish.
pub fn strip_norm(u: &StripField) -> f64 {
    if !u.has_zero_tails() {
        return f64::INFINITY;
    }
    u.values.iter().map(|v| v.abs()).sum::<f64>() + norm2(&u.values)
}

fn check_strip(s: &dyn SitePotential, u: &StripField) -> Result<()> {
    if u.dim() != s.dim() {
        return Err(FkError::PeriodMismatch(format!(
            "strip dimension {} vs model {}",
            u.dim(),
            s.dim()
        )));
    }
    Ok(())
}

/// `C |B| sum |u - tail|` over the outer `2r` layers on each side of the window.
///
/// Bounds the energy missed by truncating a field that keeps approaching its
/// tails beyond the window.
pub fn tail_bound(s: &dyn SitePotential, u: &StripField) -> f64 {
    let w = u.half_width as i64;
    let margin = (2 * s.radius() as i64).min(w + 1);
    let ct = u.layer_cells();
    let mut mass = 0.0;
    for k in 0..margin {
        for (i, tail) in [(-w + k, &u.left), (w - k, &u.right)] {
            for t in 0..ct {
                let mut idx = vec![i];
                idx.extend(u.q.coords(t));
                mass += (u.at(&idx) - tail.at(&idx)).abs();
            }
        }
    }
    s.second_derivative_bound() * s.ball().len() as f64 * mass
}

/// `J1` of the absolute field `u`: layer sums of local energy minus `c0` per cell.
pub fn strip_energy(s: &dyn SitePotential, u: &StripField, c0: f64) -> Result<f64> {
    check_strip(s, u)?;
    let f = LatticeProblem::strip(s, u, c0)?;
    Ok(f.energy(&vec![0.0; u.values.len()]))
}

/// `I1(u) = J1(v1 + u)` for an offset field `u` with vanishing tails.
///
/// Errors when `v1 + u` has not settled onto its tails at the window edge.
pub fn renormalized_energy(s: &dyn SitePotential, v1: &StripField, u: &StripField, c0: f64) -> Result<f64> {
    if !u.has_zero_tails() {
        return Err(FkError::InvalidArgument("offset field must have zero tails".into()));
    }
    let full = v1.add(u)?;
    let b = tail_bound(s, &full);
    if b > TAIL_TOL {
        return Err(FkError::InvalidArgument(format!(
            "window W = {} too small: tail bound {b:e} exceeds {TAIL_TOL:e}",
            u.half_width
        )));
    }
    strip_energy(s, &full, c0)
}

/// Most negative sum of consecutive layer energies of `u`, negated.
pub fn partial_sum_floor(s: &dyn SitePotential, u: &StripField, c0: f64) -> Result<f64> {
    check_strip(s, u)?;
    let f = LatticeProblem::strip(s, u, c0)?;
    let ct = u.layer_cells();
    let layers: Vec<f64> = f
        .local_energies(&vec![0.0; u.values.len()])
        .chunks(ct)
        .map(|c| c.iter().sum())
        .collect();
    // minimum subarray sum
    let (mut cur, mut best) = (0.0f64, 0.0f64);
    for e in layers {
        cur = (cur + e).min(e);
        best = best.min(cur);
    }
    Ok(0.0 - best)
}

/// Negative-gradient flow of `J1` on the window, tails held fixed.
pub fn flow_hetero(
    s: &dyn SitePotential,
    u0: &StripField,
    c0: f64,
    params: &FlowParams,
) -> Result<(StripField, FlowOutcome)> {
    check_strip(s, u0)?;
    let f = LatticeProblem::strip(s, u0, c0)?;
    let out = integrate(&f, &vec![0.0; u0.values.len()], params)?;
    let values = u0.values.iter().zip(&out.state).map(|(a, b)| a + b).collect();
    Ok((u0.with_values(values), out))
}

fn flow_quiet(
    s: &dyn SitePotential,
    u0: &StripField,
    c0: f64,
    params: &FlowParams,
) -> Result<(StripField, FlowOutcome)> {
    let f = LatticeProblem::strip(s, u0, c0)?;
    let mut out = integrate_quiet(&f, &vec![0.0; u0.values.len()], params)?;
    if out.converged {
        newton_polish(&f, &mut out);
    }
    let values = u0.values.iter().zip(&out.state).map(|(a, b)| a + b).collect();
    Ok((u0.with_values(values), out))
}

fn sigma(x: f64) -> f64 {
    0.5 * (1.0 + x.tanh())
}

/// `v0 + sigma((i1 - centre) / width) (w0 - v0)` on the window `[-W, W]`.
pub fn step_seed(
    gap0: &GapPair,
    q: &TransversePeriods,
    half_width: usize,
    centre: f64,
    width: f64,
) -> Result<StripField> {
    check_unit(gap0, q)?;
    let (v0, w0) = (&gap0.v0, &gap0.w0);
    StripField::from_fn(q.clone(), half_width, v0.clone(), w0.clone(), |i, t| {
        let mut idx = vec![i];
        idx.extend_from_slice(t);
        let (a, b) = (v0.at(&idx), w0.at(&idx));
        a + sigma((i as f64 - centre) / width) * (b - a)
    })
}

fn check_unit(gap0: &GapPair, q: &TransversePeriods) -> Result<()> {
    if gap0.periods().cells() != 1 {
        return Err(FkError::PeriodMismatch(
            "heteroclinics need a gap pair on the unit torus".into(),
        ));
    }
    if gap0.periods().dim() != q.dim() {
        return Err(FkError::PeriodMismatch(format!(
            "gap pair dimension {} vs strip dimension {}",
            gap0.periods().dim(),
            q.dim()
        )));
    }
    Ok(())
}

/// Step seeds centred between sites, plus transversally perturbed copies.
///
/// Centres sit off the lattice sites so that symmetric seeds do not settle on
/// the site-centred saddle.
pub fn default_hetero_seeds(
    gap0: &GapPair,
    q: &TransversePeriods,
    half_width: usize,
    perturbed: usize,
    seed: u64,
) -> Result<Vec<StripField>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for centre in [0.5, 0.3, -0.2] {
        out.push(step_seed(gap0, q, half_width, centre, SEED_WIDTH)?);
    }
    let gap = gap0.gap().values[0];
    for _ in 0..perturbed {
        let base = step_seed(gap0, q, half_width, rng.gen_range(-0.5..0.5), SEED_WIDTH)?;
        let noise: Vec<f64> = base
            .values
            .iter()
            .map(|_| 0.05 * gap * rng.gen_range(-1.0..1.0))
            .collect();
        let v = base.values.iter().zip(&noise).map(|(a, b)| a + b).collect();
        out.push(base.with_values(v));
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowDiagnostics {
    pub half_width: usize,
    /// [`tail_bound`] of the minimizer.
    pub tail_bound: f64,
    /// Change of the minimum energy when the window is doubled and the field reflowed.
    pub doubling_change: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RenormalizationConstants {
    pub c0: f64,
    /// Minimum of `J1` on the strip with unit transverse periods.
    pub c1: f64,
    /// Empirical floor of windowed partial sums, `J1 >= -K1`.
    pub k1: f64,
    pub window: WindowDiagnostics,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StripLimit {
    pub field: StripField,
    pub energy: f64,
    pub residual: f64,
    pub steps: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeteroMinimum {
    pub v1: StripField,
    pub c1q: f64,
    /// Distinct converged limits of the seeds on the accepted window.
    pub limits: Vec<StripLimit>,
    pub window: WindowDiagnostics,
    /// `|c1q - prod(q) c1|` when a reference `c1` was given.
    pub scaling_deviation: Option<f64>,
}

fn flow_seeds(s: &dyn SitePotential, seeds: &[StripField], c0: f64, params: &FlowParams) -> Result<Vec<StripLimit>> {
    let outs: Vec<Result<(StripField, FlowOutcome)>> = seeds.par_iter().map(|u| flow_quiet(s, u, c0, params)).collect();
    let mut limits: Vec<StripLimit> = Vec::new();
    for out in outs {
        let (field, out) = out?;
        if !out.converged {
            continue;
        }
        if limits
            .iter()
            .any(|l| sup_dist(&l.field.values, &field.values) <= DEDUP_TOL)
        {
            continue;
        }
        limits.push(StripLimit {
            field,
            energy: out.energy,
            residual: out.residual,
            steps: out.steps,
        });
    }
    Ok(limits)
}

fn lowest(limits: &[StripLimit]) -> Option<&StripLimit> {
    limits
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.energy.total_cmp(&b.1.energy).then(a.0.cmp(&b.0)))
        .map(|(_, l)| l)
}

/// Flow seeds built by `seeds(W)` on growing windows until the minimizer has
/// settled onto its tails, then confirm the minimum on the doubled window.
///
/// `c1_ref`, the minimum at unit transverse periods, turns on the scaling check
/// `|c1q - prod(q) c1| <= 1e-8 prod(q)`.
pub fn minimize_hetero(
    s: &dyn SitePotential,
    gap0: &GapPair,
    q: &TransversePeriods,
    c1_ref: Option<f64>,
    seeds: impl Fn(usize) -> Result<Vec<StripField>>,
    params: &FlowParams,
) -> Result<HeteroMinimum> {
    check_unit(gap0, q)?;
    if q.dim() != s.dim() {
        return Err(FkError::PeriodMismatch(format!(
            "strip dimension {} vs model {}",
            q.dim(),
            s.dim()
        )));
    }
    let c0 = gap0.c0();
    let mut w = WINDOW_START;
    loop {
        if w > WINDOW_CAP {
            return Err(FkError::WindowCap {
                cap: WINDOW_CAP,
                tail: f64::NAN,
            });
        }
        let seeds_w = seeds(w)?;
        if seeds_w.iter().any(|u| u.half_width != w || &u.q != q) {
            return Err(FkError::InvalidArgument(
                "seed window or transverse periods do not match".into(),
            ));
        }
        let limits = flow_seeds(s, &seeds_w, c0, params)?;
        let best = lowest(&limits)
            .ok_or_else(|| FkError::NotConverged("no heteroclinic seed reached stationarity".into()))?
            .clone();
        let tb = tail_bound(s, &best.field);
        if tb >= TAIL_TOL {
            if 2 * w > WINDOW_CAP {
                return Err(FkError::WindowCap {
                    cap: WINDOW_CAP,
                    tail: tb,
                });
            }
            w *= 2;
            continue;
        }
        let (wide, out) = flow_quiet(s, &best.field.with_window(2 * w), c0, params)?;
        if !out.converged {
            return Err(FkError::NotConverged(
                "minimizer did not restabilize on the doubled window".into(),
            ));
        }
        let change = (out.energy - best.energy).abs();
        if change > DOUBLING_TOL {
            if 2 * w > WINDOW_CAP {
                return Err(FkError::WindowCap {
                    cap: WINDOW_CAP,
                    tail: tb,
                });
            }
            w *= 2;
            continue;
        }
        drop(wide);
        let scaling_deviation = c1_ref.map(|c1| (best.energy - q.cells() as f64 * c1).abs());
        if let Some(dev) = scaling_deviation {
            let cells = q.cells() as f64;
            if dev > 1e-8 * cells {
                return Err(FkError::NotConverged(format!(
                    "c1 scaling violated: |c1q - {cells} c1| = {dev:e}"
                )));
            }
        }
        return Ok(HeteroMinimum {
            v1: best.field,
            c1q: best.energy,
            limits,
            window: WindowDiagnostics {
                half_width: w,
                tail_bound: tb,
                doubling_change: change,
            },
            scaling_deviation,
        });
    }
}

/// Minimum at unit transverse periods together with the constants derived from it.
pub fn renormalization_constants(
    s: &dyn SitePotential,
    gap0: &GapPair,
    seed: u64,
    params: &FlowParams,
) -> Result<(HeteroMinimum, RenormalizationConstants)> {
    let q = TransversePeriods::ones(s.dim() - 1);
    let min = minimize_hetero(
        s,
        gap0,
        &q,
        None,
        |w| default_hetero_seeds(gap0, &q, w, 0, seed),
        params,
    )?;
    let k1 = partial_sum_floor(s, &min.v1, gap0.c0())?;
    let consts = RenormalizationConstants {
        c0: gap0.c0(),
        c1: min.c1q,
        k1,
        window: min.window.clone(),
    };
    Ok((min, consts))
}

/// Two adjacent heteroclinic minimizers `v1 < w1` on a common window.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeteroGapPair {
    pub v1: StripField,
    pub w1: StripField,
    pub c1q: f64,
    pub c0: f64,
    /// `w1` is the flowed translate `v1(. + shift e_1)`.
    pub shift: i64,
    pub evidence: AdjacencyEvidence,
}

impl HeteroGapPair {
    /// `w1 - v1` clamped at zero, the upper corner of the strip box.
    pub fn gap(&self) -> Vec<f64> {
        self.w1
            .values
            .iter()
            .zip(&self.v1.values)
            .map(|(a, b)| (a - b).max(0.0))
            .collect()
    }

    pub fn q(&self) -> &TransversePeriods {
        &self.v1.q
    }

    /// The same pair regarded on transverse periods `q`, a multiple of the current ones.
    pub fn extend_to(&self, q: &TransversePeriods) -> Result<HeteroGapPair> {
        let cur = self.q().as_slice();
        if q.dim() != self.q().dim() || q.as_slice().iter().zip(cur).any(|(a, b)| a % b != 0) {
            return Err(FkError::PeriodMismatch("transverse periods are not multiples".into()));
        }
        let ext = |u: &StripField| {
            StripField::from_fn(q.clone(), u.half_width, u.left.clone(), u.right.clone(), |i, t| {
                let mut idx = vec![i];
                idx.extend_from_slice(t);
                u.at(&idx)
            })
        };
        let ratio = q.cells() as f64 / self.q().cells() as f64;
        Ok(HeteroGapPair {
            v1: ext(&self.v1)?,
            w1: ext(&self.w1)?,
            c1q: self.c1q * ratio,
            ..self.clone()
        })
    }

    /// Both fields moved to window `w` and reflowed to stationarity.
    pub fn with_window(&self, s: &dyn SitePotential, w: usize, params: &FlowParams) -> Result<HeteroGapPair> {
        let (v1, ov) = flow_quiet(s, &self.v1.with_window(w), self.c0, params)?;
        let (w1, ow) = flow_quiet(s, &self.w1.with_window(w), self.c0, params)?;
        if !ov.converged || !ow.converged {
            return Err(FkError::NotConverged(
                "gap pair did not restabilize on the new window".into(),
            ));
        }
        Ok(HeteroGapPair {
            v1,
            w1,
            c1q: ov.energy,
            ..self.clone()
        })
    }
}

fn strictly_above(w: &StripField, v: &StripField) -> bool {
    let d: Vec<f64> = w.values.iter().zip(&v.values).map(|(a, b)| a - b).collect();
    d.iter().all(|&x| x >= -ORDER_TOL) && d.iter().any(|&x| x > DEDUP_TOL)
}

/// Pair `v1` with a flowed axis-1 translate and test adjacency by probe flows.
///
/// Probes are `probes` interior convex combinations plus `probes` random
/// points of the order interval; the pair is rejected when one of them
/// settles on a third minimizer or fails to settle.
pub fn find_gap_pair_hetero(
    s: &dyn SitePotential,
    min: &HeteroMinimum,
    c0: f64,
    probes: usize,
    seed: u64,
    params: &FlowParams,
) -> Result<Option<HeteroGapPair>> {
    let v1 = &min.v1;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for shift in [1i64, -1] {
        let (w1, out) = flow_quiet(s, &v1.translate(0, shift)?, c0, params)?;
        if !out.converged || !strictly_above(&w1, v1) {
            continue;
        }
        if (out.energy - min.c1q).abs() > 1e-9 * (1.0 + min.c1q.abs()) {
            continue;
        }
        let gap: Vec<f64> = w1
            .values
            .iter()
            .zip(&v1.values)
            .map(|(a, b)| (a - b).max(0.0))
            .collect();
        let k = probes.max(1);
        let mut cands: Vec<StripField> = (1..=k)
            .map(|j| {
                let th = j as f64 / (k + 1) as f64;
                v1.with_values(v1.values.iter().zip(&gap).map(|(a, g)| a + th * g).collect())
            })
            .collect();
        for _ in 0..probes {
            cands.push(
                v1.with_values(
                    v1.values
                        .iter()
                        .zip(&gap)
                        .map(|(a, g)| a + rng.gen::<f64>() * g)
                        .collect(),
                ),
            );
        }
        let outs: Vec<Result<(StripField, FlowOutcome)>> =
            cands.par_iter().map(|u| flow_quiet(s, u, c0, params)).collect();
        let mut ev = AdjacencyEvidence {
            probes: cands.len(),
            converged: 0,
            foreign_minimizers: 0,
            max_residual: 0.0,
        };
        let mut inconclusive = false;
        for r in outs {
            let (u, out) = r?;
            if !out.converged {
                inconclusive = true;
                continue;
            }
            ev.converged += 1;
            ev.max_residual = ev.max_residual.max(out.residual);
            let minimal = out.energy <= min.c1q + 1e-9 * (1.0 + min.c1q.abs());
            if minimal && sup_dist(&u.values, &v1.values) > DEDUP_TOL && sup_dist(&u.values, &w1.values) > DEDUP_TOL {
                ev.foreign_minimizers += 1;
            }
        }
        if !inconclusive && ev.foreign_minimizers == 0 {
            return Ok(Some(HeteroGapPair {
                v1: v1.clone(),
                w1,
                c1q: min.c1q,
                c0,
                shift,
                evidence: ev,
            }));
        }
    }
    Ok(None)
}

/// Transverse path `theta -> phi_k(theta, i_2) (w1 - v1)`, linear for `k = 1`.
pub fn transverse_path(gap1: &HeteroGapPair, k: usize, n_nodes: usize) -> Result<Vec<Vec<f64>>> {
    if n_nodes < 3 {
        return Err(FkError::InvalidArgument("a path needs at least 3 nodes".into()));
    }
    let g = gap1.gap();
    let ct = gap1.v1.layer_cells();
    let q = gap1.q();
    if k >= 2 && q.dim() < 2 {
        return Err(FkError::InvalidArgument("transverse paths need n >= 2".into()));
    }
    (0..n_nodes)
        .map(|m| {
            let th = m as f64 / (n_nodes - 1) as f64;
            g.iter()
                .enumerate()
                .map(|(idx, gv)| {
                    if k <= 1 {
                        return Ok(th * gv);
                    }
                    let t = q.coords(idx % ct);
                    Ok(phi_path(k, th, t[0])? * gv)
                })
                .collect()
        })
        .collect()
}

/// Minimax of `I1` over paths from `0` to `w1 - v1` inside the strip box.
pub fn mountain_pass_hetero(
    s: &dyn SitePotential,
    gap1: &HeteroGapPair,
    path0: &[Vec<f64>],
    params: &MountainPassParams,
) -> Result<MinimaxResult<StripField>> {
    check_strip(s, &gap1.v1)?;
    let f = LatticeProblem::strip(s, &gap1.v1, gap1.c0)?;
    let upper = gap1.gap();
    let out = engine_run(&f, &upper, path0, params)?;
    let c = f.energy(&vec![0.0; upper.len()]);
    let zero = StripField::zeros(gap1.q().clone(), gap1.v1.half_width);
    finish(out, c, &upper, |v| Ok(zero.with_values(v)))
}

/// `max_theta I1(h(theta)) - I1(0)` along [`transverse_path`] sampled at `samples` parameters.
pub fn hetero_witness(s: &dyn SitePotential, gap1: &HeteroGapPair, k: usize, samples: usize) -> Result<f64> {
    let f = LatticeProblem::strip(s, &gap1.v1, gap1.c0)?;
    let path = transverse_path(gap1, k, samples.max(3))?;
    let c = f.energy(&path[0]);
    let top = path
        .par_iter()
        .map(|x| f.energy(x))
        .reduce(|| f64::NEG_INFINITY, f64::max);
    Ok(top - c)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeteroScanRow {
    pub k: usize,
    pub c1q: Option<f64>,
    pub d1q: Option<f64>,
    pub gap_energy: Option<f64>,
    pub witness: Option<f64>,
    pub residual: Option<f64>,
    /// `|c1q - k c1|`.
    pub scaling_deviation: Option<f64>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeteroScan {
    pub rows: Vec<HeteroScanRow>,
    /// Largest `d1q - c1q` over successful rows.
    pub max_gap_energy: f64,
    /// Largest witness over successful rows.
    pub max_witness: f64,
}

impl HeteroScan {
    pub fn bounded(&self) -> bool {
        self.rows.iter().all(|r| r.error.is_none()) && self.max_gap_energy <= self.max_witness
    }
}

/// Mountain pass on the transverse periods `(k, 1, ..., 1)` for `k = 1..=k_max`,
/// started from the transverse path. A failing row records its error.
pub fn bound_scan_hetero(
    s: &dyn SitePotential,
    gap1: &HeteroGapPair,
    k_max: usize,
    params: &MountainPassParams,
) -> Result<HeteroScan> {
    if gap1.q().cells() != 1 {
        return Err(FkError::PeriodMismatch("scan expects unit transverse periods".into()));
    }
    if s.dim() < 2 {
        return Err(FkError::InvalidArgument("transverse scan needs n >= 2".into()));
    }
    let mut rows = Vec::new();
    for k in 1..=k_max {
        let row = (|| -> Result<HeteroScanRow> {
            let mut qk = vec![1; s.dim() - 1];
            qk[0] = k;
            let gk = gap1.extend_to(&TransversePeriods::new(qk)?)?;
            let path = transverse_path(&gk, k, default_nodes(k))?;
            let mp = mountain_pass_hetero(s, &gk, &path, params)?;
            let witness = hetero_witness(s, &gk, k, 4001)?;
            Ok(HeteroScanRow {
                k,
                c1q: Some(mp.c),
                d1q: Some(mp.d),
                gap_energy: Some(mp.gap_energy()),
                witness: Some(witness),
                residual: Some(mp.residual),
                scaling_deviation: Some((mp.c - k as f64 * gap1.c1q).abs()),
                error: None,
            })
        })();
        rows.push(row.unwrap_or_else(|e| HeteroScanRow {
            k,
            c1q: None,
            d1q: None,
            gap_energy: None,
            witness: None,
            residual: None,
            scaling_deviation: None,
            error: Some(e.to_string()),
        }));
    }
    let max_gap_energy = rows
        .iter()
        .filter_map(|r| r.gap_energy)
        .fold(f64::NEG_INFINITY, f64::max);
    let max_witness = rows.iter().filter_map(|r| r.witness).fold(f64::NEG_INFINITY, f64::max);
    Ok(HeteroScan {
        rows,
        max_gap_energy,
        max_witness,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Asymptote {
    V0,
    W0,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerDistance {
    pub i: i64,
    /// Sup over the layer of `|u - v0|`.
    pub to_v0: f64,
    pub to_w0: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticsReport {
    pub layers: Vec<LayerDistance>,
    pub left: Asymptote,
    pub right: Asymptote,
    /// Median ratio of successive distances to the nearer asymptote over the
    /// outer half of each side, ignoring distances below `1e-14`.
    pub left_decay: Option<f64>,
    pub right_decay: Option<f64>,
}

fn median_ratio(d: &[f64]) -> Option<f64> {
    let mut r: Vec<f64> = d
        .windows(2)
        .filter(|w| w[0] > 1e-14 && w[1] > 1e-14)
        .map(|w| w[1] / w[0])
        .collect();
    if r.is_empty() {
        return None;
    }
    r.sort_by(f64::total_cmp);
    Some(r[r.len() / 2])
}

/// Per-layer distances of an absolute strip field to `v0` and `w0`.
pub fn asymptotics_report(u: &StripField, gap0: &GapPair) -> Result<AsymptoticsReport> {
    check_unit(gap0, &u.q)?;
    let w = u.half_width as i64;
    let ct = u.layer_cells();
    let layers: Vec<LayerDistance> = (-w..=w)
        .map(|i| {
            let (mut a, mut b) = (0.0f64, 0.0f64);
            for t in 0..ct {
                let mut idx = vec![i];
                idx.extend(u.q.coords(t));
                let x = u.at(&idx);
                a = a.max((x - gap0.v0.at(&idx)).abs());
                b = b.max((x - gap0.w0.at(&idx)).abs());
            }
            LayerDistance { i, to_v0: a, to_w0: b }
        })
        .collect();
    let tag = |l: &LayerDistance| {
        if l.to_v0 <= l.to_w0 {
            Asymptote::V0
        } else {
            Asymptote::W0
        }
    };
    let left = tag(&layers[0]);
    let right = tag(&layers[layers.len() - 1]);
    let near = |l: &LayerDistance, a: Asymptote| if a == Asymptote::V0 { l.to_v0 } else { l.to_w0 };
    let half = layers.len() / 2;
    // distances measured moving away from the centre
    let left_d: Vec<f64> = layers[..half].iter().rev().map(|l| near(l, left)).collect();
    let right_d: Vec<f64> = layers[layers.len() - half..].iter().map(|l| near(l, right)).collect();
    Ok(AsymptoticsReport {
        left,
        right,
        left_decay: median_ratio(&left_d),
        right_decay: median_ratio(&right_d),
        layers,
    })
}
