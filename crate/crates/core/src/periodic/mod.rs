//! Periodic energies, the semiflow on a torus, minimizers and gap pairs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::field::{Periods, TorusField};
use crate::flow::{integrate, integrate_quiet, newton_polish, FlowOutcome, FlowParams};
use crate::functional::{Functional, LatticeProblem};
use crate::linalg::{clip, norm2, sup_dist, sup_norm};
use crate::model::{LatticeFn, SitePotential};
use crate::tolerances::{DEDUP_TOL, ORDER_TOL};
use crate::{FkError, Result};

/// Two adjacent minimizers `v0 < w0` of the periodic energy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapPair {
    pub v0: TorusField,
    pub w0: TorusField,
    pub c0p: f64,
    pub evidence: AdjacencyEvidence,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdjacencyEvidence {
    pub probes: usize,
    pub converged: usize,
    /// Probe limits that are minimizers distinct from both ends.
    pub foreign_minimizers: usize,
    pub max_residual: f64,
}

impl GapPair {
    pub fn periods(&self) -> &Periods {
        &self.v0.periods
    }

    /// `w0 - v0`, the upper corner of the gap box in offset coordinates.
    pub fn gap(&self) -> TorusField {
        self.w0.sub(&self.v0).unwrap()
    }

    /// The same pair regarded on a torus whose periods are multiples of the current ones.
    pub fn extend_to(&self, p: &Periods) -> Result<GapPair> {
        let ratio = p.cells() as f64 / self.v0.cells() as f64;
        Ok(GapPair {
            v0: self.v0.extend_to(p)?,
            w0: self.w0.extend_to(p)?,
            c0p: self.c0p * ratio,
            evidence: self.evidence.clone(),
        })
    }

    /// Energy per cell.
    pub fn c0(&self) -> f64 {
        self.c0p / self.v0.cells() as f64
    }
}

fn check_torus(s: &dyn SitePotential, u: &TorusField) -> Result<()> {
    if u.periods.dim() != s.dim() {
        return Err(FkError::PeriodMismatch(format!(
            "field dimension {} vs model {}",
            u.periods.dim(),
            s.dim()
        )));
    }
    Ok(())
}

/// `J0^p(u)`, the sum of local energies over one fundamental cell.
pub fn torus_energy(s: &dyn SitePotential, u: &TorusField) -> Result<f64> {
    check_torus(s, u)?;
    let zero = TorusField::constant(u.periods.clone(), 0.0);
    Ok(LatticeProblem::torus(s, &zero)?.energy(&u.values))
}

/// `I(u) = J0^p(u + v0)`.
pub fn relative_energy(s: &dyn SitePotential, u: &TorusField, v0: &TorusField) -> Result<f64> {
    check_torus(s, u)?;
    let v = v0.extend_to(&u.periods)?;
    Ok(LatticeProblem::torus(s, &v)?.energy(&u.values))
}

/// Gradient of `I` at `u`; equals the residual field of `u + v0`.
pub fn gradient(s: &dyn SitePotential, u: &TorusField, v0: &TorusField) -> Result<TorusField> {
    check_torus(s, u)?;
    let v = v0.extend_to(&u.periods)?;
    let g = LatticeProblem::torus(s, &v)?.gradient_vec(&u.values);
    TorusField::from_values(u.periods.clone(), g)
}

/// Flow `u` (offset from `v0`) under the negative gradient of `I`.
pub fn flow(
    s: &dyn SitePotential,
    u: &TorusField,
    v0: &TorusField,
    params: &FlowParams,
) -> Result<(TorusField, FlowOutcome)> {
    check_torus(s, u)?;
    let v = v0.extend_to(&u.periods)?;
    let f = LatticeProblem::torus(s, &v)?;
    let out = integrate(&f, &u.values, params)?;
    Ok((TorusField::from_values(u.periods.clone(), out.state.clone())?, out))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Limit {
    pub field: TorusField,
    pub energy: f64,
    /// l2 norm of the gradient at the limit.
    pub residual: f64,
    pub steps: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeriodicMinimum {
    pub best: TorusField,
    pub c0p: f64,
    /// Distinct stationary limits of the seeds, lift-normalized.
    pub limits: Vec<Limit>,
    pub iterations: usize,
}

/// Flow every seed (absolute field) to stationarity and keep the lowest limit.
pub fn minimize_periodic(
    s: &dyn SitePotential,
    p: &Periods,
    seeds: &[TorusField],
    params: &FlowParams,
) -> Result<PeriodicMinimum> {
    if p.dim() != s.dim() {
        return Err(FkError::PeriodMismatch(format!(
            "torus dimension {} vs model {}",
            p.dim(),
            s.dim()
        )));
    }
    if seeds.is_empty() {
        return Err(FkError::InvalidArgument("no seeds given".into()));
    }
    let zero = TorusField::constant(p.clone(), 0.0);
    let f = LatticeProblem::torus(s, &zero)?;
    let outs: Vec<Result<FlowOutcome>> = seeds
        .par_iter()
        .map(|seed| {
            let x = seed.extend_to(p)?;
            let mut out = integrate_quiet(&f, &x.values, params)?;
            if out.converged {
                newton_polish(&f, &mut out);
            }
            Ok(out)
        })
        .collect();
    let mut limits: Vec<Limit> = Vec::new();
    let mut iterations = 0;
    for out in outs {
        let out = out?;
        iterations += out.steps;
        if !out.converged {
            continue;
        }
        let field = TorusField::from_values(p.clone(), out.state)?.normalized();
        let dup = limits
            .iter()
            .any(|l| sup_dist(&l.field.values, &field.values) <= DEDUP_TOL);
        if !dup {
            limits.push(Limit {
                field,
                energy: out.energy,
                residual: out.residual,
                steps: out.steps,
            });
        }
    }
    if limits.is_empty() {
        return Err(FkError::NotConverged(format!(
            "no seed reached stationarity within {} steps",
            params.max_steps
        )));
    }
    let best = limits
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.energy.total_cmp(&b.1.energy).then(a.0.cmp(&b.0)))
        .map(|(_, l)| l.clone())
        .unwrap();
    Ok(PeriodicMinimum {
        best: best.field,
        c0p: best.energy,
        limits,
        iterations,
    })
}

fn is_minimal(e: f64, c0p: f64) -> bool {
    e <= c0p + 1e-9 * (1.0 + c0p.abs())
}

/// Search for two adjacent minimizers `v0 < w0` on the torus `p`.
///
/// Minimizers are collected from constant and random seeds; each consecutive
/// pair is accepted when no probe between them flows to a third minimizer.
/// Probes are the `probes` interior convex combinations plus `probes` random
/// points of the order interval.
pub fn find_gap_pair(
    s: &dyn SitePotential,
    p: &Periods,
    probes: usize,
    seed: u64,
    params: &FlowParams,
) -> Result<Option<GapPair>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seeds: Vec<TorusField> = (0..32)
        .map(|j| TorusField::constant(p.clone(), j as f64 / 32.0))
        .collect();
    for _ in 0..probes {
        seeds.push(TorusField::from_fn(p.clone(), |_| rng.gen::<f64>()));
    }
    let min = minimize_periodic(s, p, &seeds, params)?;
    let mut mins: Vec<TorusField> = min
        .limits
        .iter()
        .filter(|l| is_minimal(l.energy, min.c0p))
        .map(|l| l.field.clone())
        .collect();
    mins.sort_by(|a, b| a.values[0].total_cmp(&b.values[0]));
    if mins.is_empty() {
        return Ok(None);
    }
    let zero = TorusField::constant(p.clone(), 0.0);
    let f = LatticeProblem::torus(s, &zero)?;
    let k = probes.max(1);
    for idx in 0..mins.len() {
        let v = mins[idx].clone();
        let w = if idx + 1 < mins.len() {
            mins[idx + 1].clone()
        } else {
            mins[0].map(|x| x + 1.0)
        };
        let lift = if v.values[0] >= 0.5 { 1.0 } else { 0.0 };
        let v = v.map(|x| x - lift);
        let w = w.map(|x| x - lift);
        let gap: Vec<f64> = w.values.iter().zip(&v.values).map(|(a, b)| a - b).collect();
        if gap.iter().any(|&g| g <= ORDER_TOL) {
            continue;
        }
        let mut candidates: Vec<Vec<f64>> = (1..=k)
            .map(|j| {
                let th = j as f64 / (k + 1) as f64;
                v.values.iter().zip(&gap).map(|(a, g)| a + th * g).collect()
            })
            .collect();
        for _ in 0..probes {
            candidates.push(
                v.values
                    .iter()
                    .zip(&gap)
                    .map(|(a, g)| a + rng.gen::<f64>() * g)
                    .collect(),
            );
        }
        let outs: Vec<Result<FlowOutcome>> = candidates.par_iter().map(|x| integrate_quiet(&f, x, params)).collect();
        let mut ev = AdjacencyEvidence {
            probes: candidates.len(),
            converged: 0,
            foreign_minimizers: 0,
            max_residual: 0.0,
        };
        let mut inconclusive = false;
        for out in outs {
            let out = out?;
            if !out.converged {
                inconclusive = true;
                continue;
            }
            ev.converged += 1;
            ev.max_residual = ev.max_residual.max(out.residual);
            if is_minimal(out.energy, min.c0p)
                && sup_dist(&out.state, &v.values) > DEDUP_TOL
                && sup_dist(&out.state, &w.values) > DEDUP_TOL
            {
                ev.foreign_minimizers += 1;
            }
        }
        if !inconclusive && ev.foreign_minimizers == 0 {
            return Ok(Some(GapPair {
                v0: v,
                w0: w,
                c0p: min.c0p,
                evidence: ev,
            }));
        }
    }
    Ok(None)
}

/// Whether all translates `u(. + m e_a) + l` compare uniformly with `u` on the
/// window `[-R, R]^n`, for `|m| <= R` and `l in {-1, 0, 1}`.
pub fn is_birkhoff<F: LatticeFn + ?Sized>(u: &F, scan_range: usize) -> bool {
    let n = u.dim();
    let r = scan_range as i64;
    let side = (2 * r + 1) as usize;
    let total = side.pow(n as u32);
    let sites: Vec<Vec<i64>> = (0..total)
        .map(|mut flat| {
            (0..n)
                .map(|_| {
                    let c = (flat % side) as i64 - r;
                    flat /= side;
                    c
                })
                .collect()
        })
        .collect();
    for a in 0..n {
        for m in -r..=r {
            for l in [-1.0, 0.0, 1.0] {
                if m == 0 && l == 0.0 {
                    continue;
                }
                let (mut pos, mut neg) = (false, false);
                for i in &sites {
                    let mut j = i.clone();
                    j[a] += m;
                    let (Some(x), Some(y)) = (u.value_at(&j), u.value_at(i)) else {
                        continue;
                    };
                    let d = x + l - y;
                    pos |= d > ORDER_TOL;
                    neg |= d < -ORDER_TOL;
                }
                if pos && neg {
                    return false;
                }
            }
        }
    }
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxMaximum {
    /// Maximizer in offset coordinates.
    pub field: TorusField,
    pub value: f64,
    /// Largest |grad I| over sites strictly inside the box.
    pub interior_residual: f64,
    /// Largest grad I over sites at the lower face (must be <= 0).
    pub lower_residual: f64,
    /// Smallest grad I over sites at the upper face (must be >= 0).
    pub upper_residual: f64,
    pub steps: usize,
}

/// Maximize `I` over the gap box by projected gradient ascent from each seed
/// (offset coordinates); seeds default to the box midpoint.
pub fn box_maximize(
    s: &dyn SitePotential,
    gap: &GapPair,
    seeds: &[TorusField],
    params: &FlowParams,
) -> Result<BoxMaximum> {
    let f = LatticeProblem::torus(s, &gap.v0)?;
    let upper = gap.gap().values;
    let dt = params.resolve_dt(&f)?;
    let seeds: Vec<Vec<f64>> = if seeds.is_empty() {
        vec![upper.iter().map(|u| 0.5 * u).collect()]
    } else {
        seeds
            .iter()
            .map(|x| x.extend_to(gap.periods()).map(|x| x.values))
            .collect::<Result<_>>()?
    };
    let mut best: Option<BoxMaximum> = None;
    for x0 in seeds {
        let mut x = x0;
        clip(&mut x, &upper);
        let mut steps = 0;
        let mut g = vec![0.0; x.len()];
        loop {
            f.gradient(&x, &mut g);
            let pg: Vec<f64> = (0..x.len())
                .map(|i| {
                    if x[i] <= 0.0 {
                        g[i].max(0.0)
                    } else if x[i] >= upper[i] {
                        g[i].min(0.0)
                    } else {
                        g[i]
                    }
                })
                .collect();
            if norm2(&pg) <= params.stationarity_tol || steps >= params.max_steps {
                break;
            }
            for i in 0..x.len() {
                x[i] += dt * g[i];
            }
            clip(&mut x, &upper);
            steps += 1;
        }
        let (mut interior, mut lower, mut upper_r) = (0.0f64, f64::NEG_INFINITY, f64::INFINITY);
        for i in 0..x.len() {
            if x[i] <= 0.0 {
                lower = lower.max(g[i]);
            } else if x[i] >= upper[i] {
                upper_r = upper_r.min(g[i]);
            } else {
                interior = interior.max(g[i].abs());
            }
        }
        let value = f.energy(&x);
        let cand = BoxMaximum {
            field: TorusField::from_values(gap.periods().clone(), x)?,
            value,
            interior_residual: interior,
            lower_residual: lower,
            upper_residual: upper_r,
            steps,
        };
        if best.as_ref().is_none_or(|b| cand.value > b.value) {
            best = Some(cand);
        }
    }
    Ok(best.unwrap())
}

/// Constant seeds `c` for every `c` in `values`.
pub fn constant_seeds(p: &Periods, values: &[f64]) -> Vec<TorusField> {
    values.iter().map(|&c| TorusField::constant(p.clone(), c)).collect()
}

/// Sup-norm of the gradient of `I` at `u`.
pub fn sup_residual(s: &dyn SitePotential, u: &TorusField, v0: &TorusField) -> Result<f64> {
    Ok(sup_norm(&gradient(s, u, v0)?.values))
}
