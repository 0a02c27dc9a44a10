//! Stage dispatch for every subcommand and the run manifest.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use anyhow::{anyhow, bail, Context};
use fk_saddle::hetero::{
    asymptotics_report, bound_scan_hetero, default_hetero_seeds, find_gap_pair_hetero, flow_hetero, hetero_witness,
    minimize_hetero, mountain_pass_hetero, renormalization_constants, tail_bound, transverse_path,
};
use fk_saddle::mpp::{
    build_initial_path, default_nodes, mountain_pass, multiplicity_scan, MountainPassParams, PathKind,
};
use fk_saddle::periodic::{constant_seeds, find_gap_pair, minimize_periodic};
use fk_saddle::verify::{cross_check_mountain_pass, run_property_suite};
use fk_saddle::{build_potential, FlowParams, GapPair, ModelSpec, Periods, SitePotential, TransversePeriods};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::{print_config, Command, PathChoice, RunConfig, Window};
use crate::output::{emit_landscape, write_text};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    pub name: String,
    pub ok: bool,
    pub error: Option<String>,
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: RunConfig,
    /// Canonical config text; feeding it back reproduces the run.
    pub config_text: String,
    pub version: String,
    pub wall_time_s: f64,
    pub scalars: BTreeMap<String, f64>,
    pub summary: BTreeMap<String, Value>,
    pub files: Vec<PathBuf>,
    pub stages: Vec<StageReport>,
    pub success: bool,
}

impl RunManifest {
    pub fn failed_stages(&self) -> Vec<&StageReport> {
        self.stages.iter().filter(|s| !s.ok).collect()
    }
}

#[derive(Default)]
struct Ctx {
    stages: Vec<StageReport>,
    scalars: BTreeMap<String, f64>,
    summary: BTreeMap<String, Value>,
    /// `(name, csv)` to be written beside the primary output.
    fields: Vec<(String, String)>,
}

impl Ctx {
    fn stage<T>(&mut self, name: &str, f: impl FnOnce(&mut Ctx) -> anyhow::Result<T>) -> Option<T> {
        let t = Instant::now();
        let r = f(self);
        let seconds = t.elapsed().as_secs_f64();
        match r {
            Ok(v) => {
                self.stages.push(StageReport {
                    name: name.into(),
                    ok: true,
                    error: None,
                    seconds,
                });
                Some(v)
            }
            Err(e) => {
                self.stages.push(StageReport {
                    name: name.into(),
                    ok: false,
                    error: Some(format!("{e:#}")),
                    seconds,
                });
                None
            }
        }
    }

    fn scalar(&mut self, key: &str, v: f64) {
        self.scalars.insert(key.into(), v);
    }

    fn note(&mut self, key: &str, v: impl Serialize) {
        self.summary
            .insert(key.into(), serde_json::to_value(v).unwrap_or(Value::Null));
    }
}

fn potential(cfg: &RunConfig) -> anyhow::Result<Arc<dyn SitePotential>> {
    let spec = ModelSpec {
        name: cfg.model.name.clone(),
        dim: cfg.model.dim,
        radius: 1,
        params: cfg.model.params.clone(),
    };
    Ok(build_potential(&spec)?)
}

fn flow_params(cfg: &RunConfig) -> FlowParams {
    FlowParams {
        dt: cfg.flow.dt,
        t_max: cfg.flow.t_max,
        stationarity_tol: cfg.flow.tol,
        max_steps: cfg.flow.max_steps,
    }
}

fn mpp_params(cfg: &RunConfig) -> MountainPassParams {
    MountainPassParams {
        flow: flow_params(cfg),
        mode: cfg.path.mode,
        jitter: cfg.path.jitter,
        jitter_seed: cfg.seed.unwrap_or(0),
        ..MountainPassParams::default()
    }
}

fn seed(cfg: &RunConfig) -> u64 {
    cfg.seed.unwrap_or(0)
}

fn unit_gap(s: &dyn SitePotential, cfg: &RunConfig) -> anyhow::Result<GapPair> {
    find_gap_pair(
        s,
        &Periods::ones(cfg.model.dim),
        cfg.probes,
        seed(cfg),
        &flow_params(cfg),
    )?
    .ok_or_else(|| anyhow!("no gap pair found for model {}", cfg.model.name))
}

/// Execute the pipeline named by `cfg.command` and write its artifacts.
///
/// Stage failures do not abort the call; they are recorded in the manifest
/// and clear [`RunManifest::success`].
pub fn run(cfg: &RunConfig) -> RunManifest {
    let start = Instant::now();
    let mut ctx = Ctx::default();
    if let Some(s) = ctx.stage("model", |_| potential(cfg)) {
        let s = s.as_ref();
        match cfg.command {
            Command::Minimize => minimize(&mut ctx, s, cfg),
            Command::Gap => gap(&mut ctx, s, cfg),
            Command::Mpp => mpp(&mut ctx, s, cfg),
            Command::Hetero => hetero(&mut ctx, s, cfg),
            Command::Mph => mph(&mut ctx, s, cfg),
            Command::Multiplicity => multiplicity(&mut ctx, s, cfg),
            Command::Verify => verify(&mut ctx, s, cfg),
            Command::Landscape => landscape(&mut ctx, s, cfg),
        }
    }
    let files = ctx.stage("write", |c| write_fields(c, cfg)).unwrap_or_default();
    let success = ctx.stages.iter().all(|s| s.ok);
    let mut manifest = RunManifest {
        config: cfg.clone(),
        config_text: print_config(cfg),
        version: env!("CARGO_PKG_VERSION").to_string(),
        wall_time_s: 0.0,
        scalars: ctx.scalars,
        summary: ctx.summary,
        files,
        stages: ctx.stages,
        success,
    };
    manifest.wall_time_s = start.elapsed().as_secs_f64();
    if let Some(path) = manifest_path(cfg) {
        manifest.files.push(path.clone());
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        if let Err(e) = write_text(&path, &text) {
            manifest.success = false;
            manifest.stages.push(StageReport {
                name: "manifest".into(),
                ok: false,
                error: Some(format!("{e:#}")),
                seconds: 0.0,
            });
        }
    }
    manifest
}

/// Where the manifest goes: `out` itself, or `<stem>.manifest.json` when `out`
/// holds the landscape CSV.
pub fn manifest_path(cfg: &RunConfig) -> Option<PathBuf> {
    let out = cfg.out.as_ref()?;
    if cfg.command == Command::Landscape {
        Some(sibling(out, "manifest.json"))
    } else {
        Some(out.clone())
    }
}

fn sibling(out: &Path, suffix: &str) -> PathBuf {
    let stem = out
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "run".into());
    out.with_file_name(format!("{stem}.{suffix}"))
}

fn write_fields(ctx: &mut Ctx, cfg: &RunConfig) -> anyhow::Result<Vec<PathBuf>> {
    let Some(out) = &cfg.out else { return Ok(Vec::new()) };
    let mut files = Vec::new();
    if cfg.command == Command::Landscape {
        files.push(out.clone());
    }
    for (name, csv) in std::mem::take(&mut ctx.fields) {
        let path = sibling(out, &format!("{name}.csv"));
        write_text(&path, &csv)?;
        files.push(path);
    }
    Ok(files)
}

fn minimize(ctx: &mut Ctx, s: &dyn SitePotential, cfg: &RunConfig) {
    ctx.stage("minimize", |c| {
        let p = Periods::new(cfg.p.clone())?;
        let mut seeds = constant_seeds(&p, &[0.0, 0.125, 0.25, 0.375, 0.5, 0.625, 0.75, 0.875]);
        if let Some(sd) = cfg.seed {
            let mut rng = ChaCha8Rng::seed_from_u64(sd);
            for _ in 0..4 {
                seeds.push(fk_saddle::TorusField::from_fn(p.clone(), |_| rng.gen::<f64>()));
            }
        }
        let m = minimize_periodic(s, &p, &seeds, &flow_params(cfg))?;
        let residuals: Vec<f64> = m.limits.iter().map(|l| l.residual).collect();
        c.scalar("c0p", m.c0p);
        c.scalar("c0", m.c0p / p.cells() as f64);
        c.scalar("max_residual", residuals.iter().cloned().fold(0.0, f64::max));
        c.note("c0p", m.c0p);
        c.note(
            "limits",
            m.limits
                .iter()
                .map(|l| json!({"energy": l.energy, "residual": l.residual, "steps": l.steps}))
                .collect::<Vec<_>>(),
        );
        c.note("residuals", residuals);
        c.note("iterations", m.iterations);
        c.fields.push(("field".into(), m.best.to_csv()));
        Ok(())
    });
}

fn gap(ctx: &mut Ctx, s: &dyn SitePotential, cfg: &RunConfig) {
    ctx.stage("gap", |c| {
        let p = Periods::new(cfg.p.clone())?;
        let g = find_gap_pair(s, &p, cfg.probes, seed(cfg), &flow_params(cfg))?
            .ok_or_else(|| anyhow!("no gap pair found for model {}", cfg.model.name))?;
        let w = g.gap().values;
        c.scalar("c0p", g.c0p);
        c.scalar("gap_min", w.iter().cloned().fold(f64::INFINITY, f64::min));
        c.scalar("gap_max", w.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
        c.note("evidence", &g.evidence);
        c.fields.push(("v0".into(), g.v0.to_csv()));
        c.fields.push(("w0".into(), g.w0.to_csv()));
        Ok(())
    });
}

fn mpp(ctx: &mut Ctx, s: &dyn SitePotential, cfg: &RunConfig) {
    let Some(g0) = ctx.stage("gap", |_| unit_gap(s, cfg)) else {
        return;
    };
    ctx.stage("mountain-pass", |c| {
        let p = Periods::new(cfg.p.clone())?;
        let g = g0.extend_to(&p)?;
        let kind = match cfg.path.kind {
            PathChoice::Linear => PathKind::Linear,
            PathChoice::Chi => PathKind::Chi { k: cfg.path.k },
        };
        let nodes = cfg.path.nodes.unwrap_or_else(|| default_nodes(p.cells()));
        let path = build_initial_path(kind, nodes, &g)?;
        let mp = mountain_pass(s, &g, &path, &mpp_params(cfg))?;
        c.scalar("c0p", mp.c);
        c.scalar("d0p", mp.d);
        c.scalar("gap_energy", mp.gap_energy());
        c.scalar("residual", mp.residual);
        c.scalar("box_margin", mp.box_margin);
        c.note("nodes", nodes);
        c.note("path_max", mp.path_max);
        c.note("iterations", mp.iterations);
        c.note("flow_rise", mp.flow_rise);
        c.note("theta_infinity", mp.theta_infinity);
        c.note("monotone_preserved", mp.monotone_preserved);
        c.fields.push(("critical".into(), mp.critical_field.to_csv()));
        if mp.residual > mpp_params(cfg).saddle_tol {
            bail!("critical point residual {:e} above tolerance", mp.residual);
        }
        Ok(())
    });
}

fn strip_q(cfg: &RunConfig) -> anyhow::Result<TransversePeriods> {
    Ok(TransversePeriods::new(cfg.strip.q.clone())?)
}

fn hetero(ctx: &mut Ctx, s: &dyn SitePotential, cfg: &RunConfig) {
    let Some(g0) = ctx.stage("gap", |_| unit_gap(s, cfg)) else {
        return;
    };
    let fp = flow_params(cfg);
    let Some((min1, consts)) = ctx.stage("constants", |c| {
        let (min, k) = renormalization_constants(s, &g0, seed(cfg), &fp)?;
        c.scalar("c0", k.c0);
        c.scalar("c1", k.c1);
        c.scalar("k1", k.k1);
        c.note("constants", &k);
        Ok((min, k))
    }) else {
        return;
    };
    ctx.stage("minimize-strip", |c| {
        let q = strip_q(cfg)?;
        let min = if q.cells() == 1 {
            min1
        } else {
            minimize_hetero(
                s,
                &g0,
                &q,
                Some(consts.c1),
                |w| default_hetero_seeds(&g0, &q, w, 2, seed(cfg)),
                &fp,
            )?
        };
        let mut v1 = min.v1.clone();
        let mut c1q = min.c1q;
        if let Window::Fixed(w) = cfg.strip.window {
            let (u, out) = flow_hetero(s, &min.v1.with_window(w), consts.c0, &fp)?;
            if !out.converged {
                bail!("minimizer did not settle on the window W = {w}");
            }
            v1 = u;
            c1q = out.energy;
        }
        let tb = tail_bound(s, &v1);
        c.scalar("c1q", c1q);
        c.scalar("tail_bound", tb);
        c.scalar("half_width", v1.half_width as f64);
        if let Some(dev) = min.scaling_deviation {
            c.scalar("scaling_deviation", dev);
        }
        c.note("window", &min.window);
        c.note(
            "limit_energies",
            min.limits.iter().map(|l| l.energy).collect::<Vec<_>>(),
        );
        let a = asymptotics_report(&v1, &g0)?;
        c.note(
            "asymptotics",
            json!({"left": a.left, "right": a.right, "left_decay": a.left_decay, "right_decay": a.right_decay}),
        );
        c.fields.push(("v1".into(), v1.to_csv()));
        Ok(())
    });
}

fn mph(ctx: &mut Ctx, s: &dyn SitePotential, cfg: &RunConfig) {
    let Some(g0) = ctx.stage("gap", |_| unit_gap(s, cfg)) else {
        return;
    };
    let fp = flow_params(cfg);
    let Some(g1) = ctx.stage("strip-gap", |c| {
        let (min, k) = renormalization_constants(s, &g0, seed(cfg), &fp)?;
        c.scalar("c1", k.c1);
        let g1 = find_gap_pair_hetero(s, &min, k.c0, cfg.strip.probes, seed(cfg), &fp)?
            .ok_or_else(|| anyhow!("no heteroclinic gap pair found"))?;
        let g1 = match cfg.strip.window {
            Window::Auto => g1,
            Window::Fixed(w) => g1.with_window(s, w, &fp)?,
        };
        c.note("shift", g1.shift);
        c.note("evidence", &g1.evidence);
        c.scalar("half_width", g1.v1.half_width as f64);
        Ok(g1)
    }) else {
        return;
    };
    ctx.stage("mountain-pass", |c| {
        let q = strip_q(cfg)?;
        let k = q.as_slice()[0];
        let gq = g1.extend_to(&q)?;
        let nodes = cfg.path.nodes.unwrap_or_else(|| default_nodes(k));
        let path = transverse_path(&gq, k, nodes)?;
        let mp = mountain_pass_hetero(s, &gq, &path, &mpp_params(cfg))?;
        c.scalar("c1q", mp.c);
        c.scalar("d1q", mp.d);
        c.scalar("gap_energy", mp.gap_energy());
        c.scalar("residual", mp.residual);
        c.scalar("witness", hetero_witness(s, &gq, k, 4001)?);
        c.note("nodes", nodes);
        c.note("iterations", mp.iterations);
        c.note("tail_bound", tail_bound(s, &gq.v1.add(&mp.critical_field)?));
        c.fields.push(("critical".into(), mp.critical_field.to_csv()));
        if mp.residual > mpp_params(cfg).saddle_tol {
            bail!("critical point residual {:e} above tolerance", mp.residual);
        }
        Ok(())
    });
    if cfg.strip.k_max > 0 {
        ctx.stage("bound-scan", |c| {
            let scan = bound_scan_hetero(s, &g1, cfg.strip.k_max, &mpp_params(cfg))?;
            c.scalar("scan_max_gap_energy", scan.max_gap_energy);
            c.scalar("scan_max_witness", scan.max_witness);
            c.note("scan", &scan.rows);
            if !scan.bounded() {
                bail!("scan not bounded by its witness or a row failed");
            }
            Ok(())
        });
    }
}

fn multiplicity(ctx: &mut Ctx, s: &dyn SitePotential, cfg: &RunConfig) {
    let Some(g0) = ctx.stage("gap", |_| unit_gap(s, cfg)) else {
        return;
    };
    ctx.stage("scan", |c| {
        let ks: Vec<usize> = (1..=cfg.scan_k_max).collect();
        let rep = multiplicity_scan(s, &g0, &ks, &mpp_params(cfg))?;
        let max_gap = rep.rows.iter().map(|r| r.gap_energy).fold(f64::NEG_INFINITY, f64::max);
        let max_witness = rep
            .rows
            .iter()
            .filter_map(|r| r.witness)
            .fold(f64::NEG_INFINITY, f64::max);
        let max_dist = rep.distances.iter().flatten().cloned().fold(0.0, f64::max);
        c.scalar("max_gap_energy", max_gap);
        c.scalar("max_witness", max_witness);
        c.scalar("max_distance", max_dist);
        c.note("rows", &rep.rows);
        c.note("distances", &rep.distances);
        for (k, f) in ks.iter().zip(&rep.fields) {
            c.fields.push((format!("critical_k{k}"), f.to_csv()));
        }
        Ok(())
    });
}

fn verify(ctx: &mut Ctx, s: &dyn SitePotential, cfg: &RunConfig) {
    ctx.stage("properties", |c| {
        let p = Periods::new(cfg.p.clone())?;
        let reps = run_property_suite(s, &p, seed(cfg), cfg.trials)?;
        for r in &reps {
            c.scalar(&format!("worst.{}", r.name), r.worst);
        }
        let failed: Vec<&str> = reps.iter().filter(|r| !r.passed).map(|r| r.name.as_str()).collect();
        c.note("properties", &reps);
        if !failed.is_empty() {
            bail!("properties failed: {}", failed.join(", "));
        }
        Ok(())
    });
    if !cfg.resolutions.is_empty() {
        ctx.stage("cross-check", |c| {
            let g = unit_gap(s, cfg)?.extend_to(&Periods::new(cfg.p.clone())?)?;
            let nodes = cfg.path.nodes.unwrap_or(65);
            let cc = cross_check_mountain_pass(s, &g, &cfg.resolutions, nodes, &mpp_params(cfg), 1e-3)?;
            c.scalar("node_flow", cc.node_flow);
            c.scalar("heat_flow", cc.heat_flow);
            c.scalar("max_disagreement", cc.max_disagreement);
            c.note("cross_check", &cc);
            if !cc.passed {
                bail!("routes disagree by {:e}", cc.max_disagreement);
            }
            Ok(())
        });
    }
}

fn landscape(ctx: &mut Ctx, s: &dyn SitePotential, cfg: &RunConfig) {
    let Some(g0) = ctx.stage("gap", |_| unit_gap(s, cfg)) else {
        return;
    };
    ctx.stage("landscape", |c| {
        let g = g0.extend_to(&Periods::new(cfg.p.clone())?)?;
        let out = cfg.out.as_ref().context("the landscape stage needs an output path")?;
        let top = emit_landscape(s, &g, cfg.grid, out)?;
        c.scalar("grid_max", top.2);
        c.scalar("grid_max_a", top.0);
        c.scalar("grid_max_b", top.1);
        c.note("rows", cfg.grid * cfg.grid);
        Ok(())
    });
}
