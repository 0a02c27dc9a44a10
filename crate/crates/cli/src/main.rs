use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fk_saddle_cli::{config::parse_entries, configure_threads, run, Command, Entries, DEFAULTS};

#[derive(Parser)]
#[command(
    name = "fk-saddle",
    version,
    about = "Minimizers, mountain passes and heteroclinics for Frenkel-Kontorova type lattice models"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Periodic ground states on a torus.
    Minimize(Overrides),
    /// Ordered pair of adjacent minimizers with nothing in between.
    Gap(Overrides),
    /// Periodic mountain pass between a gap pair.
    Mpp(Overrides),
    /// Heteroclinic minimizer and its renormalized energy.
    Hetero(Overrides),
    /// Mountain pass between heteroclinic minimizers.
    Mph(Overrides),
    /// Mountain-pass scan over cell counts.
    Multiplicity(Overrides),
    /// Property suite and route cross-check.
    Verify(Overrides),
    /// Reduced two-cell landscape as CSV.
    Landscape(Overrides),
    /// Run the command named in a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Print every config key with its default.
    Defaults,
}

#[derive(Args, Default)]
struct Overrides {
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    dim: Option<String>,
    /// Model parameter, `name=value`; repeatable.
    #[arg(long = "param", value_name = "NAME=VALUE")]
    params: Vec<String>,
    /// Torus periods, comma separated.
    #[arg(long)]
    p: Option<String>,
    /// Strip transverse periods, comma separated.
    #[arg(long)]
    q: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    tol: Option<String>,
    #[arg(long)]
    dt: Option<String>,
    #[arg(long)]
    nodes: Option<String>,
    /// Initial path: `linear` or `chi`.
    #[arg(long)]
    path: Option<String>,
    #[arg(long)]
    k: Option<String>,
    /// `node-flow` or `heat-flow`.
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    window: Option<String>,
    #[arg(long)]
    probes: Option<String>,
    #[arg(long)]
    trials: Option<String>,
    /// Comma separated oracle resolutions for `verify`.
    #[arg(long)]
    resolutions: Option<String>,
    #[arg(long)]
    grid: Option<String>,
    /// Largest cell count for `multiplicity`, or for the `mph` bound scan.
    #[arg(long = "k-max")]
    k_max: Option<String>,
}

impl Overrides {
    fn apply(&self, command: Option<Command>, e: &mut Entries) -> Result<(), fk_saddle_cli::ConfigError> {
        let cmd = command.or_else(|| e_command(e));
        let mut set = |k: &str, v: &Option<String>| match v {
            Some(v) => e.set(k, v, None),
            None => Ok(()),
        };
        set("model.name", &self.model)?;
        set("model.dim", &self.dim)?;
        set("torus.p", &self.p)?;
        set("strip.q", &self.q)?;
        set("seed", &self.seed)?;
        set("out", &self.out.as_ref().map(|p| p.display().to_string()))?;
        set("flow.tol", &self.tol)?;
        set("flow.dt", &self.dt)?;
        set("path.nodes", &self.nodes)?;
        set("path.kind", &self.path)?;
        set("path.k", &self.k)?;
        set("path.mode", &self.mode)?;
        set("strip.window", &self.window)?;
        set("verify.trials", &self.trials)?;
        set("verify.resolutions", &self.resolutions)?;
        set("landscape.grid", &self.grid)?;
        let (probes, kmax) = match cmd {
            Some(Command::Hetero | Command::Mph) => ("strip.probes", "strip.k_max"),
            _ => ("torus.probes", "scan.k_max"),
        };
        set(probes, &self.probes)?;
        set(kmax, &self.k_max)?;
        for p in &self.params {
            let (k, v) = p.split_once('=').ok_or_else(|| fk_saddle_cli::ConfigError::Invalid {
                key: "param".into(),
                msg: format!("expected NAME=VALUE, got `{p}`"),
            })?;
            e.set(&format!("model.{}", k.trim()), v, None)?;
        }
        if let Some(c) = command {
            e.set("command", c.name(), None)?;
        }
        Ok(())
    }
}

fn e_command(e: &Entries) -> Option<Command> {
    let name = e.get("command")?;
    Command::ALL.into_iter().find(|c| c.name() == name)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, overrides, text) = match cli.cmd {
        Cmd::Defaults => {
            let mut out = std::io::stdout().lock();
            for (k, d, what) in DEFAULTS {
                if writeln!(out, "{k:<20} {d:<12} {what}").is_err() {
                    break;
                }
            }
            return ExitCode::SUCCESS;
        }
        Cmd::Run { config, overrides } => match std::fs::read_to_string(&config) {
            Ok(t) => (None, overrides, t),
            Err(e) => {
                eprintln!("error: reading {}: {e}", config.display());
                return ExitCode::from(2);
            }
        },
        Cmd::Minimize(o) => (Some(Command::Minimize), o, String::new()),
        Cmd::Gap(o) => (Some(Command::Gap), o, String::new()),
        Cmd::Mpp(o) => (Some(Command::Mpp), o, String::new()),
        Cmd::Hetero(o) => (Some(Command::Hetero), o, String::new()),
        Cmd::Mph(o) => (Some(Command::Mph), o, String::new()),
        Cmd::Multiplicity(o) => (Some(Command::Multiplicity), o, String::new()),
        Cmd::Verify(o) => (Some(Command::Verify), o, String::new()),
        Cmd::Landscape(o) => (Some(Command::Landscape), o, String::new()),
    };
    let cfg = parse_entries(&text).and_then(|mut e| {
        overrides.apply(command, &mut e)?;
        e.resolve()
    });
    let cfg = match cfg {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(2);
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("error: {e:#}");
        return ExitCode::from(2);
    }
    let m = run(&cfg);
    for s in &m.stages {
        match &s.error {
            None => eprintln!("[ok]   {:<16} {:.2}s", s.name, s.seconds),
            Some(e) => eprintln!("[fail] {:<16} {:.2}s  {e}", s.name, s.seconds),
        }
    }
    for (k, v) in &m.scalars {
        println!("{k} = {v:.12e}");
    }
    for f in &m.files {
        eprintln!("wrote {}", f.display());
    }
    if m.success {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
