//! Seeded property checks of the site potential, the periodic functional and its flow.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::field::{Periods, TorusField};
use crate::flow::{guarded_step, integrate, integrate_pair, integrate_quiet, newton_polish, FlowParams};
use crate::functional::{Functional, LatticeProblem};
use crate::linalg::{clip, sup_dist};
use crate::model::SitePotential;
use crate::periodic::{constant_seeds, find_gap_pair, minimize_periodic, AdjacencyEvidence, GapPair};
use crate::tolerances::{
    BOX_TOL, CLIP_SLACK, DEDUP_TOL, ENERGY_RISE_SLACK, FD_REL_TOL, FD_STEP, ORDER_TOL, SCALING_REL_TOL,
    SUBMODULARITY_SLACK,
};
use crate::{FkError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropertyReport {
    pub name: String,
    pub trials: usize,
    /// Worst observed value of the checked quantity, see [`PROPERTIES`].
    pub worst: f64,
    pub threshold: f64,
    pub passed: bool,
    pub seed: u64,
}

/// Checked quantity and pass rule of every property, in report order.
pub const PROPERTIES: &[(&str, &str)] = &[
    ("submodularity", "min of s(u)+s(v)-s(u max v)-s(u min v) >= -threshold"),
    (
        "comparison",
        "min sitewise gap of flowed ordered pairs at t = 1 > threshold",
    ),
    (
        "strong-comparison",
        "min sitewise gap between ordered distinct stationary fields > threshold",
    ),
    ("energy-decrease", "max energy increase of one flow step <= threshold"),
    (
        "gradient-fd",
        "max relative gradient error against central differences <= threshold",
    ),
    (
        "box-invariance",
        "min distance of flowed box fields to the box faces >= -threshold",
    ),
    ("clip-decrease", "max of I(clip x) - I(x) <= threshold"),
    ("endpoint-fixity", "max drift of v0 and w0 under the flow <= threshold"),
    ("scaling", "max |c0^p - prod(p) c0| / prod(p) <= threshold"),
];

/// Flow budget for suite trials. Models without a bounded energy would
/// otherwise run to the step cap.
fn suite_flow() -> FlowParams {
    FlowParams {
        t_max: 1000.0,
        ..FlowParams::default()
    }
}

fn trial_rng(seed: u64, property: usize, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((property as u64) << 32) | trial as u64);
    rng
}

/// Period vectors used by the scaling property.
pub fn scaling_periods(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for p in [[1, 1], [2, 1], [3, 1], [2, 2], [3, 2]] {
        let mut v = vec![1; n];
        for (a, &x) in p.iter().enumerate().take(n) {
            v[a] = x;
        }
        if n == 1 && out.iter().any(|o: &Vec<usize>| o == &v) {
            continue;
        }
        out.push(v);
    }
    out
}

struct Ctx {
    gap: GapPair,
    c0: f64,
    seed: u64,
    trials: usize,
}

impl Ctx {
    fn upper(&self) -> Vec<f64> {
        self.gap.gap().values
    }

    /// Uniform point of the box followed by one flow step.
    fn box_field(&self, f: &dyn Functional, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
        let x: Vec<f64> = self.upper().iter().map(|g| rng.gen::<f64>() * g).collect();
        let g = f.gradient_vec(&x);
        Ok(guarded_step(f, &x, f.energy(&x), &g, f.dt_safe())?.0)
    }

    /// Run `trial` in parallel and fold worst values with `combine`.
    fn run(
        &self,
        id: usize,
        threshold: f64,
        start: f64,
        combine: fn(f64, f64) -> f64,
        pass: impl Fn(f64) -> bool,
        trial: impl Fn(&mut ChaCha8Rng) -> Result<f64> + Sync,
    ) -> Result<PropertyReport> {
        let vals: Vec<Result<f64>> = (0..self.trials)
            .into_par_iter()
            .map(|t| {
                let mut rng = trial_rng(self.seed, id, t);
                trial(&mut rng)
            })
            .collect();
        let mut worst = start;
        for v in vals {
            worst = combine(worst, v?);
        }
        Ok(PropertyReport {
            name: PROPERTIES[id].0.into(),
            trials: self.trials,
            worst,
            threshold,
            passed: pass(worst),
            seed: self.seed,
        })
    }
}

fn min_gap(lo: &[f64], hi: &[f64]) -> f64 {
    hi.iter().zip(lo).map(|(b, a)| b - a).fold(f64::INFINITY, f64::min)
}

/// Run every property of [`PROPERTIES`] with `trials` seeded trials on the torus `p`.
///
/// Box-valued trials live in the gap box of the adjacent pair found on the
/// unit torus, or in `[0, 1]` when the model has none. `trials = 0` gives an
/// empty report.
pub fn run_property_suite(s: &dyn SitePotential, p: &Periods, seed: u64, trials: usize) -> Result<Vec<PropertyReport>> {
    if trials == 0 {
        return Ok(Vec::new());
    }
    if p.dim() != s.dim() {
        return Err(FkError::PeriodMismatch(format!(
            "torus dimension {} vs model {}",
            p.dim(),
            s.dim()
        )));
    }
    let fp = suite_flow();
    let unit = Periods::ones(s.dim());
    let gap1 = find_gap_pair(s, &unit, 4, seed, &fp)?.unwrap_or_else(|| GapPair {
        v0: TorusField::constant(unit.clone(), 0.0),
        w0: TorusField::constant(unit.clone(), 1.0),
        c0p: crate::periodic::torus_energy(s, &TorusField::constant(unit.clone(), 0.0)).unwrap_or(0.0),
        evidence: AdjacencyEvidence {
            probes: 0,
            converged: 0,
            foreign_minimizers: 0,
            max_residual: 0.0,
        },
    });
    let c0 = gap1.c0();
    let ctx = Ctx {
        gap: gap1.extend_to(p)?,
        c0,
        seed,
        trials,
    };
    let f = LatticeProblem::torus(s, &ctx.gap.v0)?;
    let f = &f;
    let upper = ctx.upper();
    let upper = &upper;
    let mut out = Vec::new();

    let m = s.ball().len();
    out.push(ctx.run(
        0,
        SUBMODULARITY_SLACK,
        f64::INFINITY,
        f64::min,
        |w| w >= -SUBMODULARITY_SLACK,
        |rng| {
            let u: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..2.0)).collect();
            let v: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..2.0)).collect();
            let hi: Vec<f64> = u.iter().zip(&v).map(|(a, b)| a.max(*b)).collect();
            let lo: Vec<f64> = u.iter().zip(&v).map(|(a, b)| a.min(*b)).collect();
            Ok(s.eval(&u) + s.eval(&v) - s.eval(&hi) - s.eval(&lo))
        },
    )?);

    out.push(ctx.run(
        1,
        0.0,
        f64::INFINITY,
        f64::min,
        |w| w > 0.0,
        |rng| {
            let x1 = ctx.box_field(f, rng)?;
            let mut d: Vec<f64> = upper
                .iter()
                .map(|g| {
                    if rng.gen_bool(0.5) {
                        0.0
                    } else {
                        0.1 * g * rng.gen::<f64>()
                    }
                })
                .collect();
            if d.iter().all(|&v| v == 0.0) {
                let k = rng.gen_range(0..d.len());
                d[k] = 0.1 * upper[k];
            }
            let (_, gap) = integrate_pair(f, &x1, &d, 1.0)?;
            Ok(gap.iter().cloned().fold(f64::INFINITY, f64::min))
        },
    )?);

    // stationary limits from box fields, compared pairwise after collection
    let limits: Vec<Result<Option<Vec<f64>>>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(seed, 2, t);
            let x = ctx.box_field(f, &mut rng)?;
            let mut o = integrate_quiet(f, &x, &fp)?;
            if !o.converged {
                return Ok(None);
            }
            newton_polish(f, &mut o);
            Ok(Some(o.state))
        })
        .collect();
    let mut stat: Vec<Vec<f64>> = vec![vec![0.0; upper.len()], upper.clone()];
    for l in limits {
        if let Some(x) = l? {
            if stat.iter().all(|y| sup_dist(y, &x) > DEDUP_TOL) {
                stat.push(x);
            }
        }
    }
    let mut worst = f64::INFINITY;
    for a in &stat {
        for b in &stat {
            let le = a.iter().zip(b).all(|(x, y)| *x <= y + ORDER_TOL);
            if le && sup_dist(a, b) > DEDUP_TOL {
                worst = worst.min(min_gap(a, b));
            }
        }
    }
    out.push(PropertyReport {
        name: PROPERTIES[2].0.into(),
        trials,
        worst,
        threshold: ORDER_TOL,
        passed: worst > ORDER_TOL,
        seed,
    });

    out.push(ctx.run(
        3,
        ENERGY_RISE_SLACK,
        f64::NEG_INFINITY,
        f64::max,
        |w| w <= ENERGY_RISE_SLACK,
        |rng| {
            let x: Vec<f64> = upper.iter().map(|g| rng.gen::<f64>() * g).collect();
            let tr = integrate(f, &x, &FlowParams::horizon(1.0))?.trace;
            Ok(tr
                .windows(2)
                .map(|w| w[1].energy - w[0].energy)
                .fold(f64::NEG_INFINITY, f64::max))
        },
    )?);

    out.push(ctx.run(
        4,
        FD_REL_TOL,
        f64::NEG_INFINITY,
        f64::max,
        |w| w <= FD_REL_TOL,
        |rng| {
            let x: Vec<f64> = upper.iter().map(|g| rng.gen_range(-0.5..1.5) * g).collect();
            let g = f.gradient_vec(&x);
            let scale = g.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            let mut err = 0.0f64;
            for k in 0..x.len() {
                let (mut xp, mut xm) = (x.clone(), x.clone());
                xp[k] += FD_STEP;
                xm[k] -= FD_STEP;
                let fd = (f.energy(&xp) - f.energy(&xm)) / (2.0 * FD_STEP);
                err = err.max((fd - g[k]).abs() / scale);
            }
            Ok(err)
        },
    )?);

    out.push(ctx.run(
        5,
        BOX_TOL,
        f64::INFINITY,
        f64::min,
        |w| w >= -BOX_TOL,
        |rng| {
            let x: Vec<f64> = upper.iter().map(|g| rng.gen::<f64>() * g).collect();
            let y = integrate_quiet(f, &x, &FlowParams::horizon(1.0))?.state;
            Ok(y.iter()
                .zip(upper)
                .map(|(v, g)| v.min(g - v))
                .fold(f64::INFINITY, f64::min))
        },
    )?);

    out.push(ctx.run(
        6,
        CLIP_SLACK,
        f64::NEG_INFINITY,
        f64::max,
        |w| w <= CLIP_SLACK,
        |rng| {
            let x: Vec<f64> = upper.iter().map(|g| rng.gen_range(-0.5..1.5) * g).collect();
            let mut y = x.clone();
            clip(&mut y, upper);
            Ok(f.energy(&y) - f.energy(&x))
        },
    )?);

    out.push(ctx.run(
        7,
        BOX_TOL,
        f64::NEG_INFINITY,
        f64::max,
        |w| w <= BOX_TOL,
        |rng| {
            let t = 1.0 - rng.gen::<f64>();
            let mut drift = 0.0f64;
            for x in [vec![0.0; upper.len()], upper.clone()] {
                let y = integrate_quiet(f, &x, &FlowParams::horizon(t))?.state;
                drift = drift.max(sup_dist(&x, &y));
            }
            Ok(drift)
        },
    )?);

    let ps = scaling_periods(s.dim());
    let devs: Vec<Result<f64>> = ps
        .par_iter()
        .enumerate()
        .map(|(t, pv)| {
            let pp = Periods::new(pv.clone())?;
            let mut rng = trial_rng(seed, 8, t);
            let mut seeds = constant_seeds(&pp, &(0..32).map(|j| j as f64 / 32.0).collect::<Vec<_>>());
            for _ in 0..4 {
                seeds.push(TorusField::from_fn(pp.clone(), |_| rng.gen::<f64>()));
            }
            let min = minimize_periodic(s, &pp, &seeds, &fp)?;
            let cells = pp.cells() as f64;
            Ok((min.c0p - cells * ctx.c0).abs() / cells)
        })
        .collect();
    let mut worst = f64::NEG_INFINITY;
    for d in devs {
        worst = worst.max(match d {
            Ok(v) => v,
            Err(FkError::NotConverged(_)) => f64::INFINITY,
            Err(e) => return Err(e),
        });
    }
    out.push(PropertyReport {
        name: PROPERTIES[8].0.into(),
        trials: ps.len(),
        worst,
        threshold: SCALING_REL_TOL,
        passed: worst <= SCALING_REL_TOL,
        seed,
    });
    Ok(out)
}
