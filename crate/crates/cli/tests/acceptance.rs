//! Acceptance suite: one line per criterion, nonzero exit if any fails.
//!
//! Runs without the libtest harness so the lines show up in `cargo test` output.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use anyhow::{anyhow, ensure, Result};
use fk_saddle::hetero::{
    bound_scan_hetero, default_hetero_seeds, find_gap_pair_hetero, minimize_hetero, mountain_pass_hetero,
    renormalization_constants, transverse_path, DOUBLING_TOL,
};
use fk_saddle::model::shift;
use fk_saddle::mpp::{
    axis_periods, build_initial_path, default_nodes, mountain_pass, multiplicity_scan, phi_witness, MountainPassMode,
    MountainPassParams, PathKind,
};
use fk_saddle::periodic::{constant_seeds, find_gap_pair, minimize_periodic, sup_residual};
use fk_saddle::verify::{cross_check_mountain_pass, run_property_suite, PROPERTIES};
use fk_saddle::{FkPotential, FlowParams, GapPair, Periods, SitePotential, TransversePeriods};
use fk_saddle_cli::{emit_landscape, parse_config, run};

type Scalars = Vec<(String, f64)>;

struct Outcome {
    passed: bool,
    detail: String,
    scalars: Scalars,
}

struct Criterion {
    id: usize,
    name: &'static str,
    budget: Duration,
    check: fn() -> Result<Outcome>,
}

fn outcome(passed: bool, detail: String, scalars: &[(&str, f64)]) -> Result<Outcome> {
    Ok(Outcome {
        passed,
        detail,
        scalars: scalars.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
    })
}

fn unit_gap(s: &dyn SitePotential) -> Result<GapPair> {
    find_gap_pair(s, &Periods::ones(2), 4, 1, &FlowParams::default())?.ok_or_else(|| anyhow!("no gap pair"))
}

fn eighths(p: &Periods) -> Vec<fk_saddle::TorusField> {
    constant_seeds(p, &[0.0, 0.125, 0.25, 0.375, 0.5, 0.625, 0.75, 0.875])
}

/// Distance from `x` to the nearest point of `a + Z`.
fn dist_mod1(x: f64, a: f64) -> f64 {
    let r = (x - a).rem_euclid(1.0);
    r.min(1.0 - r)
}

fn c1_single_cell() -> Result<Outcome> {
    let s = FkPotential::classical(2);
    let p = Periods::ones(2);
    let m = minimize_periodic(&s, &p, &eighths(&p), &FlowParams::default())?;
    let off = m.best.values.iter().map(|&v| dist_mod1(v, -0.25)).fold(0.0, f64::max);
    let g = unit_gap(&s)?;
    let (v0, w0) = (g.v0.values[0], g.w0.values[0]);
    let cfg = parse_config("command = minimize\nmodel = classical-fk\np = 1,1\n")?;
    let via_cli = run(&cfg)
        .scalars
        .get("c0")
        .copied()
        .ok_or_else(|| anyhow!("pipeline reported no c0"))?;
    let ok = (m.c0p + 1.0).abs() <= 1e-8
        && off <= 1e-8
        && (v0 + 0.25).abs() <= 1e-8
        && (w0 - 0.75).abs() <= 1e-8
        && (g.c0p + 1.0).abs() <= 1e-8
        && (via_cli + 1.0).abs() <= 1e-8;
    outcome(
        ok,
        format!(
            "c0 = {:.12}, minimizer off -1/4 by {off:.1e}, gap pair ({v0:.12}, {w0:.12}), pipeline c0 = {via_cli:.12}",
            m.c0p
        ),
        &[("c0", m.c0p), ("v0", v0), ("w0", w0), ("pipeline_c0", via_cli)],
    )
}

fn c2_scaling() -> Result<Outcome> {
    let s = FkPotential::classical(2);
    let c0 = minimize_periodic(
        &s,
        &Periods::ones(2),
        &eighths(&Periods::ones(2)),
        &FlowParams::default(),
    )?
    .c0p;
    let mut worst = 0.0f64;
    let mut scalars = Vec::new();
    for per in [[1, 1], [2, 1], [3, 1], [2, 2], [3, 2]] {
        let p = Periods::new(per.to_vec())?;
        let m = minimize_periodic(&s, &p, &eighths(&p), &FlowParams::default())?;
        let cells = p.cells() as f64;
        worst = worst.max((m.c0p - cells * c0).abs() / cells);
        scalars.push((format!("c0p{per:?}"), m.c0p));
    }
    Ok(Outcome {
        passed: worst <= 1e-8,
        detail: format!("worst |c0p - prod(p) c0| / prod(p) = {worst:.2e}"),
        scalars,
    })
}

fn c3_two_cell_pass() -> Result<Outcome> {
    let s = FkPotential::classical(2);
    let g = unit_gap(&s)?.extend_to(&Periods::new(vec![2, 1])?)?;
    let params = MountainPassParams::default();
    let cc = cross_check_mountain_pass(&s, &g, &[2001], 65, &params, 1e-3)?;
    let oracle = cc.oracle.last().ok_or_else(|| anyhow!("no oracle row"))?.value;
    let pairwise = [
        (cc.node_flow - cc.heat_flow).abs(),
        (cc.node_flow - oracle).abs(),
        (cc.heat_flow - oracle).abs(),
    ]
    .into_iter()
    .fold(0.0, f64::max);

    let path = build_initial_path(PathKind::Chi { k: 2 }, 65, &g)?;
    let mp = mountain_pass(&s, &g, &path, &params.with_mode(MountainPassMode::NodeFlow))?;
    let u = &mp.critical_field;
    let gap = g.gap();
    let inside = u
        .values
        .iter()
        .zip(&gap.values)
        .map(|(&x, &w)| x.min(w - x))
        .fold(f64::INFINITY, f64::min);
    let spread = u.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - u.values.iter().cloned().fold(f64::INFINITY, f64::min);
    let twin = shift(u, 0, -1)?;
    let twin_residual = sup_residual(&s, &twin, &g.v0)?;
    let twin_distance = twin.sup_distance(u)?;
    let ok = pairwise <= 1e-3
        && mp.residual <= 1e-8
        && inside > 0.0
        && spread > 1e-3
        && twin_distance > 1e-3
        && twin_residual <= 1e-8;
    outcome(
        ok,
        format!(
            "node {:.6} heat {:.6} oracle {oracle:.6} (max gap {pairwise:.1e}); residual {:.1e}, inner margin {inside:.3e}, translate residual {twin_residual:.1e} at distance {twin_distance:.3}",
            cc.node_flow, cc.heat_flow, mp.residual
        ),
        &[("node_flow", cc.node_flow), ("heat_flow", cc.heat_flow), ("oracle", oracle), ("residual", mp.residual), ("twin_residual", twin_residual)],
    )
}

fn c4_landscape() -> Result<Outcome> {
    let s = FkPotential::classical(2);
    let g = unit_gap(&s)?.extend_to(&Periods::new(vec![2, 1])?)?;
    let dir = tempfile::tempdir()?;
    let out = dir.path().join("landscape.csv");
    let (a, b, top) = emit_landscape(&s, &g, 400, &out)?;
    let rows = std::fs::read_to_string(&out)?.lines().count() - 1;
    // An even lattice misses (1/2, 1/2); the nearest node is h/2 away on each
    // axis, and the reduced Hessian has norm at most 4 pi^2 + 1.
    let h = 1.0 / 399.0;
    let slack = 0.5 * (4.0 * PI * PI + 1.0) * (h * h / 2.0);
    let ok = rows == 400 * 400 && top <= 2.0 && 2.0 - top <= slack && (a - 0.5).abs() <= h && (b - 0.5).abs() <= h;
    outcome(
        ok,
        format!(
            "{rows} rows, max {top:.12} at ({a:.5}, {b:.5}); 2 - max = {:.2e} <= {slack:.2e}",
            2.0 - top
        ),
        &[("grid_max", top), ("a", a), ("b", b)],
    )
}

fn c5_strictness() -> Result<Outcome> {
    let params = MountainPassParams::default();
    let classical = FkPotential::classical(2);
    let g = unit_gap(&classical)?;
    let single = mountain_pass(&classical, &g, &build_initial_path(PathKind::Linear, 33, &g)?, &params)?;
    let unit_gap_energy = single.gap_energy();

    let matrix: Vec<(FkPotential, Vec<usize>)> = vec![
        (FkPotential::classical(2), vec![1, 1]),
        (FkPotential::classical(2), vec![2, 1]),
        (FkPotential::classical(2), vec![3, 1]),
        (FkPotential::classical(2), vec![2, 2]),
        (FkPotential::pinned(2, 2.0), vec![1, 1]),
        (FkPotential::pinned(2, 2.0), vec![2, 1]),
        (FkPotential::two_well(2), vec![1, 1]),
        (FkPotential::two_well(2), vec![2, 1]),
    ];
    let mut min_gap = f64::INFINITY;
    let mut scalars = vec![("d-c[1,1]".to_string(), unit_gap_energy)];
    for (s, per) in &matrix {
        let p = Periods::new(per.clone())?;
        let g = unit_gap(s)?.extend_to(&p)?;
        let kind = if p.cells() == 1 {
            PathKind::Linear
        } else {
            PathKind::Chi { k: 2 }
        };
        let path = build_initial_path(kind, default_nodes(p.cells()), &g)?;
        let mp = mountain_pass(s, &g, &path, &params)?;
        min_gap = min_gap.min(mp.gap_energy());
        scalars.push((format!("{}{per:?}", s.name()), mp.gap_energy()));
    }
    Ok(Outcome {
        passed: (unit_gap_energy - 2.0).abs() <= 1e-6 && min_gap > 1e-6,
        detail: format!(
            "d - c on (1,1) = {unit_gap_energy:.9}; smallest d - c over {} cases = {min_gap:.3e}",
            matrix.len()
        ),
        scalars,
    })
}

fn c6_uniform_bound() -> Result<Outcome> {
    let s = FkPotential::classical(2);
    let g1 = unit_gap(&s)?;
    // At most two sites of a chi path move at once and the profile has two
    // edges, so at most six sites per period see anything but a minimizer
    // neighbourhood. Each carries at most sup|onsite| + sum(couplings) * gap^2 - c0.
    let width = g1.gap().values[0];
    let per_site = s.amplitude() + s.couplings().iter().sum::<f64>() * width * width - g1.c0p;
    let m0 = 6.0 * per_site;

    let params = MountainPassParams::default();
    let (mut max_gap, mut max_witness) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    let mut scalars = Vec::new();
    for k in 2..=8 {
        let g = g1.extend_to(&axis_periods(2, k)?)?;
        let kind = PathKind::Chi { k };
        let mp = mountain_pass(&s, &g, &build_initial_path(kind, default_nodes(k), &g)?, &params)?;
        let w = phi_witness(&s, &g, kind, 4001)?;
        max_gap = max_gap.max(mp.gap_energy());
        max_witness = max_witness.max(w);
        scalars.push((format!("gap_energy[k={k}]"), mp.gap_energy()));
        scalars.push((format!("witness[k={k}]"), w));
    }
    Ok(Outcome {
        passed: max_gap <= max_witness && max_witness <= m0,
        detail: format!("max d - c = {max_gap:.6} <= max witness = {max_witness:.6} <= M0 = {m0:.4}"),
        scalars,
    })
}

fn c7_multiplicity() -> Result<Outcome> {
    let s = FkPotential::classical(2);
    let g = unit_gap(&s)?;
    let ks: Vec<usize> = (1..=6).collect();
    let rep = multiplicity_scan(&s, &g, &ks, &MountainPassParams::default())?;
    let mut distinct_pairs = 0;
    let mut largest = 0.0f64;
    for a in 0..ks.len() {
        for b in a + 1..ks.len() {
            largest = largest.max(rep.distances[a][b]);
            if rep.distances[a][b] > 1e-3 {
                distinct_pairs += 1;
            }
        }
    }
    let mut scalars: Scalars = rep.rows.iter().map(|r| (format!("d[k={}]", r.k), r.d)).collect();
    scalars.extend(
        rep.distances
            .iter()
            .flatten()
            .enumerate()
            .map(|(i, &d)| (format!("dist[{i}]"), d)),
    );
    Ok(Outcome {
        passed: distinct_pairs >= 1,
        detail: format!("{distinct_pairs} of 15 pairs differ by more than 1e-3 (largest {largest:.4})"),
        scalars,
    })
}

fn c8_properties() -> Result<Outcome> {
    let s = FkPotential::classical(2);
    let p = Periods::new(vec![2, 1])?;
    let reps = run_property_suite(&s, &p, 7, 100)?;
    ensure!(reps.len() == PROPERTIES.len(), "suite returned {} reports", reps.len());
    let failed: Vec<&str> = reps.iter().filter(|r| !r.passed).map(|r| r.name.as_str()).collect();
    let detail = if failed.is_empty() {
        format!("{} properties x 100 trials, all pass", reps.len())
    } else {
        format!("failed: {}", failed.join(", "))
    };
    Ok(Outcome {
        passed: failed.is_empty(),
        detail,
        scalars: reps.iter().map(|r| (r.name.clone(), r.worst)).collect(),
    })
}

fn c9_hetero() -> Result<Outcome> {
    let s = FkPotential::pinned(2, 2.0);
    let fp = FlowParams::default();
    let gap0 = unit_gap(&s)?;
    let (min, k) = renormalization_constants(&s, &gap0, 7, &fp)?;
    let q2 = TransversePeriods::new(vec![2])?;
    let m2 = minimize_hetero(
        &s,
        &gap0,
        &q2,
        Some(k.c1),
        |w| default_hetero_seeds(&gap0, &q2, w, 2, 3),
        &fp,
    )?;
    let scaling = (m2.c1q - 2.0 * k.c1).abs();
    let g1 = find_gap_pair_hetero(&s, &min, k.c0, 4, 5, &fp)?.ok_or_else(|| anyhow!("no heteroclinic gap pair"))?;
    let params = MountainPassParams::default();
    let mp = mountain_pass_hetero(&s, &g1, &transverse_path(&g1, 1, 33)?, &params)?;
    let scan = bound_scan_hetero(&s, &g1, 4, &params)?;
    let stable = k.window.doubling_change.max(m2.window.doubling_change);
    let ok =
        stable <= DOUBLING_TOL && scaling <= 1e-8 && mp.gap_energy() > 1e-6 && mp.residual <= 1e-8 && scan.bounded();
    let mut scalars: Scalars = vec![
        ("c1".into(), k.c1),
        ("c1q[2]".into(), m2.c1q),
        ("d1".into(), mp.d),
        ("residual".into(), mp.residual),
    ];
    for r in &scan.rows {
        scalars.push((format!("scan_gap[k={}]", r.k), r.gap_energy.unwrap_or(f64::NAN)));
        scalars.push((format!("scan_witness[k={}]", r.k), r.witness.unwrap_or(f64::NAN)));
    }
    Ok(Outcome {
        passed: ok,
        detail: format!(
            "window change {stable:.1e}; |c1(2) - 2 c1| = {scaling:.1e}; d1 - c1 = {:.6} (residual {:.1e}); scan max d - c {:.4} vs witness {:.4}",
            mp.gap_energy(),
            mp.residual,
            scan.max_gap_energy,
            scan.max_witness
        ),
        scalars,
    })
}

const CRITERIA: [Criterion; 9] = [
    Criterion {
        id: 1,
        name: "single-cell values",
        budget: Duration::from_secs(5),
        check: c1_single_cell,
    },
    Criterion {
        id: 2,
        name: "scaling law",
        budget: Duration::from_secs(30),
        check: c2_scaling,
    },
    Criterion {
        id: 3,
        name: "two-cell mountain pass",
        budget: Duration::from_secs(120),
        check: c3_two_cell_pass,
    },
    Criterion {
        id: 4,
        name: "landscape",
        budget: Duration::from_secs(5),
        check: c4_landscape,
    },
    Criterion {
        id: 5,
        name: "d > c",
        budget: Duration::from_secs(600),
        check: c5_strictness,
    },
    Criterion {
        id: 6,
        name: "uniform bound",
        budget: Duration::from_secs(300),
        check: c6_uniform_bound,
    },
    Criterion {
        id: 7,
        name: "multiplicity",
        budget: Duration::from_secs(600),
        check: c7_multiplicity,
    },
    Criterion {
        id: 8,
        name: "property suite",
        budget: Duration::from_secs(180),
        check: c8_properties,
    },
    Criterion {
        id: 9,
        name: "heteroclinic pipeline",
        budget: Duration::from_secs(600),
        check: c9_hetero,
    },
];

fn run_all(report: bool) -> (bool, Vec<Option<Scalars>>) {
    let mut all = true;
    let mut scalars = Vec::new();
    for c in &CRITERIA {
        let t = Instant::now();
        let r = (c.check)();
        let dt = t.elapsed();
        let (ok, detail, sc) = match r {
            Ok(o) => {
                let in_budget = dt <= c.budget;
                let detail = if in_budget {
                    o.detail
                } else {
                    format!("{} [over budget {:?}]", o.detail, c.budget)
                };
                (o.passed && in_budget, detail, Some(o.scalars))
            }
            Err(e) => (false, format!("error: {e:#}"), None),
        };
        all &= ok;
        if report {
            println!(
                "criterion {:>2} {:<24} {} {:>7.2}s  {detail}",
                c.id,
                c.name,
                if ok { "PASS" } else { "FAIL" },
                dt.as_secs_f64()
            );
        }
        scalars.push(sc);
    }
    (all, scalars)
}

fn main() {
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let t = Instant::now();
    let (mut all, first) = run_all(true);
    let (_, second) = run_all(false);
    let mut compared = 0;
    let mut mismatches = Vec::new();
    for (c, (a, b)) in CRITERIA.iter().zip(first.iter().zip(&second)) {
        match (a, b) {
            (Some(a), Some(b)) if a.len() == b.len() => {
                for ((ka, va), (kb, vb)) in a.iter().zip(b) {
                    compared += 1;
                    if ka != kb || va.to_bits() != vb.to_bits() {
                        mismatches.push(format!("{}:{ka}", c.id));
                    }
                }
            }
            _ => mismatches.push(format!("{}: no scalars", c.id)),
        }
    }
    let det = mismatches.is_empty();
    all &= det;
    let detail = if det {
        format!("{compared} scalars identical on rerun")
    } else {
        format!("mismatches: {}", mismatches.join(", "))
    };
    println!(
        "criterion 10 {:<24} {} {:>7.2}s  {detail}",
        "determinism",
        if det { "PASS" } else { "FAIL" },
        t.elapsed().as_secs_f64()
    );
    if !all {
        std::process::exit(1);
    }
}
