//! `key = value` run configuration with `[section]` headers.
//!
//! A key inside `[flow]` is addressed as `flow.tol`; the same dotted path may
//! also be written at top level. `model`, `p` and `q` are short forms of
//! `model.name`, `torus.p` and `strip.q`. Lines starting with `#` are comments.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use fk_saddle::model::{BUILTIN_MODELS, MODEL_PARAMS};
use fk_saddle::mpp::MountainPassMode;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("{}unknown key `{key}`", line.map(|l| format!("line {l}: ")).unwrap_or_default())]
    UnknownKey { key: String, line: Option<usize> },
    #[error("{key}: {msg}")]
    Invalid { key: String, msg: String },
}

type Result<T> = std::result::Result<T, ConfigError>;

fn invalid(key: &str, msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        key: key.to_string(),
        msg: msg.into(),
    }
}

/// Every key with its default and meaning. `model.<param>` keys are listed
/// separately in [`MODEL_PARAMS`] and default to the model's own values.
pub const DEFAULTS: &[(&str, &str, &str)] = &[
    (
        "command",
        "minimize",
        "pipeline: minimize, gap, mpp, hetero, mph, multiplicity, verify, landscape",
    ),
    ("seed", "none", "RNG seed; required by gap and verify"),
    (
        "out",
        "none",
        "primary output file (JSON manifest, or CSV for landscape)",
    ),
    ("model.name", "classical-fk", "built-in potential"),
    ("model.dim", "2", "lattice dimension n"),
    ("torus.p", "1,1", "periods of the torus (one per axis)"),
    ("torus.probes", "4", "adjacency probes per gap pair"),
    ("strip.q", "1", "transverse periods of the strip (axes 2..n)"),
    ("strip.window", "auto", "half-width W of the strip window, or auto"),
    ("strip.probes", "4", "adjacency probes for the heteroclinic gap pair"),
    (
        "strip.k_max",
        "0",
        "mph: also scan transverse periods k = 1..k_max when positive",
    ),
    ("flow.dt", "auto", "RK4 step, or auto for the safe step"),
    ("flow.tol", "1e-10", "l2 gradient norm counted as stationary"),
    ("flow.max_steps", "2000000", "step budget per flow"),
    ("flow.t_max", "inf", "time budget per flow"),
    (
        "path.nodes",
        "auto",
        "path nodes N, or auto for 16 prod(p) + 1 capped at 257",
    ),
    ("path.kind", "chi", "initial path: linear or chi"),
    ("path.k", "2", "index k of the chi path"),
    ("path.mode", "node-flow", "deformation: node-flow or heat-flow"),
    (
        "path.jitter",
        "0.001",
        "node-flow start displacement as a fraction of the gap",
    ),
    ("scan.k_max", "6", "multiplicity: periods k = 1..k_max along axis 1"),
    ("verify.trials", "100", "trials per property"),
    (
        "verify.resolutions",
        "none",
        "oracle grids for the two-cell cross-check, e.g. 501,2001",
    ),
    ("landscape.grid", "400", "points per axis of the landscape grid"),
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Minimize,
    Gap,
    Mpp,
    Hetero,
    Mph,
    Multiplicity,
    Verify,
    Landscape,
}

impl Command {
    pub const ALL: [Command; 8] = [
        Command::Minimize,
        Command::Gap,
        Command::Mpp,
        Command::Hetero,
        Command::Mph,
        Command::Multiplicity,
        Command::Verify,
        Command::Landscape,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Minimize => "minimize",
            Command::Gap => "gap",
            Command::Mpp => "mpp",
            Command::Hetero => "hetero",
            Command::Mph => "mph",
            Command::Multiplicity => "multiplicity",
            Command::Verify => "verify",
            Command::Landscape => "landscape",
        }
    }

    fn needs_seed(self) -> bool {
        matches!(self, Command::Gap | Command::Verify)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PathChoice {
    Linear,
    Chi,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Window {
    Auto,
    Fixed(usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub name: String,
    pub dim: usize,
    pub params: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowConfig {
    pub dt: Option<f64>,
    pub tol: f64,
    pub max_steps: usize,
    #[serde(with = "unbounded")]
    pub t_max: f64,
}

/// JSON has no infinity; write it as the string `"inf"`.
mod unbounded {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            Repr::Num(*v).serialize(s)
        } else {
            Repr::Text(if *v > 0.0 { "inf" } else { "-inf" }.into()).serialize(s)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathConfig {
    pub nodes: Option<usize>,
    pub kind: PathChoice,
    pub k: usize,
    pub mode: MountainPassMode,
    pub jitter: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StripConfig {
    pub q: Vec<usize>,
    pub window: Window,
    pub probes: usize,
    pub k_max: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: Command,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub model: ModelConfig,
    pub p: Vec<usize>,
    pub probes: usize,
    pub strip: StripConfig,
    pub flow: FlowConfig,
    pub path: PathConfig,
    pub scan_k_max: usize,
    pub trials: usize,
    pub resolutions: Vec<usize>,
    pub grid: usize,
}

/// Raw `key -> (value, line)` entries before defaults and validation.
#[derive(Clone, Debug, Default)]
pub struct Entries(BTreeMap<String, (String, Option<usize>)>);

fn canonical_key(key: &str) -> &str {
    match key {
        "model" => "model.name",
        "p" => "torus.p",
        "q" => "strip.q",
        other => other,
    }
}

fn known(key: &str) -> bool {
    if DEFAULTS.iter().any(|(k, _, _)| *k == key) {
        return true;
    }
    key.strip_prefix("model.").is_some_and(|p| MODEL_PARAMS.contains(&p))
}

impl Entries {
    /// Record `key = value`; a later value for the same key replaces the earlier one.
    pub fn set(&mut self, key: &str, value: &str, line: Option<usize>) -> Result<()> {
        let key = canonical_key(key.trim());
        if !known(key) {
            return Err(ConfigError::UnknownKey {
                key: key.to_string(),
                line,
            });
        }
        self.0.insert(key.to_string(), (value.trim().to_string(), line));
        Ok(())
    }

    /// Raw value recorded for `key`, if any.
    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(|(v, _)| v.as_str())
    }

    fn value<T>(&self, key: &str, parse: impl Fn(&str) -> Option<T>, what: &str) -> Result<Option<T>> {
        match self.0.get(key) {
            None => Ok(None),
            Some((v, line)) => parse(v).map(Some).ok_or_else(|| {
                let at = line.map(|l| format!(" (line {l})")).unwrap_or_default();
                invalid(key, format!("expected {what}, got `{v}`{at}"))
            }),
        }
    }

    fn or_default<T>(&self, key: &str, parse: impl Fn(&str) -> Option<T>, what: &str) -> Result<T> {
        if let Some(v) = self.value(key, &parse, what)? {
            return Ok(v);
        }
        let d = DEFAULTS
            .iter()
            .find(|(k, _, _)| *k == key)
            .expect("key has a default")
            .1;
        Ok(parse(d).expect("default parses"))
    }

    /// Apply defaults and validate.
    pub fn resolve(&self) -> Result<RunConfig> {
        let command = self.or_default("command", parse_command, "a command name")?;
        let dim = self.or_default("model.dim", parse_usize, "an integer")?;
        if dim == 0 {
            return Err(invalid("model.dim", "dimension must be >= 1"));
        }
        let name = self.get("model.name").unwrap_or("classical-fk").to_string();
        if !BUILTIN_MODELS.contains(&name.as_str()) {
            return Err(invalid(
                "model.name",
                format!("unknown model `{name}`; choose from {}", BUILTIN_MODELS.join(", ")),
            ));
        }
        let mut params = BTreeMap::new();
        for p in MODEL_PARAMS {
            let key = format!("model.{p}");
            if let Some(v) = self.value(&key, parse_f64, "a number")? {
                if !v.is_finite() {
                    return Err(invalid(&key, "must be finite"));
                }
                params.insert(p.to_string(), v);
            }
        }
        let p = match self.value("torus.p", parse_list, "a comma-separated list of integers")? {
            Some(p) => p,
            None => vec![1; dim],
        };
        let q = match self.value("strip.q", parse_list, "a comma-separated list of integers")? {
            Some(q) => q,
            None => vec![1; dim.saturating_sub(1)],
        };
        let seed = self.value("seed", parse_opt_u64, "an integer or none")?.flatten();
        let out = self.get("out").filter(|v| *v != "none").map(PathBuf::from);
        let flow = FlowConfig {
            dt: self.or_default("flow.dt", parse_auto_f64, "a number or auto")?,
            tol: self.or_default("flow.tol", parse_f64, "a number")?,
            max_steps: self.or_default("flow.max_steps", parse_usize, "an integer")?,
            t_max: self.or_default("flow.t_max", parse_f64, "a number or inf")?,
        };
        let path = PathConfig {
            nodes: self.or_default("path.nodes", parse_auto_usize, "an integer or auto")?,
            kind: self.or_default("path.kind", parse_path, "linear or chi")?,
            k: self.or_default("path.k", parse_usize, "an integer")?,
            mode: self.or_default("path.mode", parse_mode, "node-flow or heat-flow")?,
            jitter: self.or_default("path.jitter", parse_f64, "a number")?,
        };
        let strip = StripConfig {
            q,
            window: self.or_default("strip.window", parse_window, "an integer or auto")?,
            probes: self.or_default("strip.probes", parse_usize, "an integer")?,
            k_max: self.or_default("strip.k_max", parse_usize, "an integer")?,
        };
        let cfg = RunConfig {
            command,
            seed,
            out,
            model: ModelConfig { name, dim, params },
            p,
            probes: self.or_default("torus.probes", parse_usize, "an integer")?,
            strip,
            flow,
            path,
            scan_k_max: self.or_default("scan.k_max", parse_usize, "an integer")?,
            trials: self.or_default("verify.trials", parse_usize, "an integer")?,
            resolutions: self.or_default("verify.resolutions", parse_opt_list, "a list of integers or none")?,
            grid: self.or_default("landscape.grid", parse_usize, "an integer")?,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

fn parse_command(s: &str) -> Option<Command> {
    Command::ALL.into_iter().find(|c| c.name() == s)
}

fn parse_usize(s: &str) -> Option<usize> {
    s.parse().ok()
}

fn parse_f64(s: &str) -> Option<f64> {
    s.parse().ok()
}

fn parse_opt_u64(s: &str) -> Option<Option<u64>> {
    if s == "none" {
        return Some(None);
    }
    s.parse().ok().map(Some)
}

fn parse_auto_f64(s: &str) -> Option<Option<f64>> {
    if s == "auto" {
        return Some(None);
    }
    s.parse().ok().map(Some)
}

fn parse_auto_usize(s: &str) -> Option<Option<usize>> {
    if s == "auto" {
        return Some(None);
    }
    s.parse().ok().map(Some)
}

fn parse_list(s: &str) -> Option<Vec<usize>> {
    s.split(',').map(|x| x.trim().parse().ok()).collect()
}

fn parse_opt_list(s: &str) -> Option<Vec<usize>> {
    if s == "none" {
        return Some(Vec::new());
    }
    parse_list(s)
}

fn parse_path(s: &str) -> Option<PathChoice> {
    match s {
        "linear" => Some(PathChoice::Linear),
        "chi" => Some(PathChoice::Chi),
        _ => None,
    }
}

fn parse_mode(s: &str) -> Option<MountainPassMode> {
    match s {
        "node-flow" => Some(MountainPassMode::NodeFlow),
        "heat-flow" => Some(MountainPassMode::HeatFlow),
        _ => None,
    }
}

fn parse_window(s: &str) -> Option<Window> {
    if s == "auto" {
        return Some(Window::Auto);
    }
    s.parse().ok().map(Window::Fixed)
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let n = self.model.dim;
        if self.p.len() != n {
            return Err(invalid(
                "torus.p",
                format!("expected {n} periods, got {}", self.p.len()),
            ));
        }
        if self.p.contains(&0) {
            return Err(invalid("torus.p", "periods must be ≥ 1"));
        }
        if self.strip.q.len() != n.saturating_sub(1) {
            return Err(invalid(
                "strip.q",
                format!("expected {} transverse periods, got {}", n - 1, self.strip.q.len()),
            ));
        }
        if self.strip.q.contains(&0) {
            return Err(invalid("strip.q", "periods must be ≥ 1"));
        }
        if self.command.needs_seed() && self.seed.is_none() {
            return Err(invalid(
                "seed",
                format!("required by the {} stage", self.command.name()),
            ));
        }
        if matches!(self.command, Command::Hetero | Command::Mph) && n < 2 {
            return Err(invalid("model.dim", "heteroclinic stages need n >= 2"));
        }
        if self.command == Command::Landscape && (n != 2 || self.p != [2, 1]) {
            return Err(invalid(
                "torus.p",
                "the landscape is defined for n = 2 and p = 2,1 only",
            ));
        }
        if !(self.flow.tol > 0.0) {
            return Err(invalid("flow.tol", "must be positive"));
        }
        if let Some(dt) = self.flow.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(invalid("flow.dt", "must be positive"));
            }
        }
        if !(self.flow.t_max > 0.0) {
            return Err(invalid("flow.t_max", "must be positive"));
        }
        if self.path.nodes.is_some_and(|m| m < 3) {
            return Err(invalid("path.nodes", "a path needs at least 3 nodes"));
        }
        if self.path.kind == PathChoice::Chi && self.path.k < 2 {
            return Err(invalid("path.k", "the chi path needs k >= 2"));
        }
        if !(0.0..0.5).contains(&self.path.jitter) {
            return Err(invalid("path.jitter", "must lie in [0, 0.5)"));
        }
        if self.probes == 0 {
            return Err(invalid("torus.probes", "need at least one probe"));
        }
        if self.strip.probes == 0 {
            return Err(invalid("strip.probes", "need at least one probe"));
        }
        if self.strip.window == Window::Fixed(0) {
            return Err(invalid("strip.window", "window must be >= 1"));
        }
        if self.command == Command::Multiplicity && self.scan_k_max < 2 {
            return Err(invalid("scan.k_max", "the scan needs k_max >= 2"));
        }
        if let Some(&r) = self
            .resolutions
            .iter()
            .find(|&&r| r < fk_saddle::verify::MIN_RESOLUTION)
        {
            return Err(invalid(
                "verify.resolutions",
                format!("resolution {r} is below {}", fk_saddle::verify::MIN_RESOLUTION),
            ));
        }
        if self.grid < 2 {
            return Err(invalid("landscape.grid", "need at least 2 points per axis"));
        }
        Ok(())
    }
}

/// Parse configuration text into a defaulted, validated [`RunConfig`].
pub fn parse_config(text: &str) -> Result<RunConfig> {
    parse_entries(text)?.resolve()
}

/// Parse configuration text into raw entries without applying defaults.
pub fn parse_entries(text: &str) -> Result<Entries> {
    let mut entries = Entries::default();
    let mut section = String::new();
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let body = raw.trim();
        if body.is_empty() || body.starts_with('#') {
            continue;
        }
        if let Some(rest) = body.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| ConfigError::Parse {
                    line,
                    msg: "unterminated section header".into(),
                })?
                .trim();
            if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                return Err(ConfigError::Parse {
                    line,
                    msg: format!("bad section name `{name}`"),
                });
            }
            section = name.to_string();
            continue;
        }
        let (key, value) = body.split_once('=').ok_or_else(|| ConfigError::Parse {
            line,
            msg: format!("expected key = value, got `{body}`"),
        })?;
        let key = key.trim();
        let value = value.split('#').next().unwrap_or("").trim();
        if key.is_empty() {
            return Err(ConfigError::Parse {
                line,
                msg: "empty key".into(),
            });
        }
        if value.is_empty() {
            return Err(ConfigError::Parse {
                line,
                msg: format!("missing value for `{key}`"),
            });
        }
        let full = if section.is_empty() {
            key.to_string()
        } else {
            format!("{section}.{key}")
        };
        entries.set(&full, value, Some(line))?;
    }
    Ok(entries)
}

struct List<'a>(&'a [usize]);

impl fmt::Display for List<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: Vec<String> = self.0.iter().map(|v| v.to_string()).collect();
        f.write_str(&s.join(","))
    }
}

/// Canonical text of `cfg`: every key written out, so that
/// `parse_config(&print_config(cfg)) == cfg`.
pub fn print_config(cfg: &RunConfig) -> String {
    let auto = |v: Option<String>| v.unwrap_or_else(|| "auto".into());
    let mut s = String::new();
    s.push_str(&format!("command = {}\n", cfg.command.name()));
    s.push_str(&format!(
        "seed = {}\n",
        cfg.seed.map(|v| v.to_string()).unwrap_or_else(|| "none".into())
    ));
    s.push_str(&format!(
        "out = {}\n",
        cfg.out
            .as_ref()
            .map(|p| p.display().to_string())
            .unwrap_or_else(|| "none".into())
    ));
    s.push_str(&format!(
        "\n[model]\nname = {}\ndim = {}\n",
        cfg.model.name, cfg.model.dim
    ));
    for (k, v) in &cfg.model.params {
        s.push_str(&format!("{k} = {v:?}\n"));
    }
    s.push_str(&format!("\n[torus]\np = {}\nprobes = {}\n", List(&cfg.p), cfg.probes));
    let window = match cfg.strip.window {
        Window::Auto => "auto".to_string(),
        Window::Fixed(w) => w.to_string(),
    };
    s.push_str(&format!(
        "\n[strip]\nq = {}\nwindow = {window}\nprobes = {}\nk_max = {}\n",
        List(&cfg.strip.q),
        cfg.strip.probes,
        cfg.strip.k_max
    ));
    s.push_str(&format!(
        "\n[flow]\ndt = {}\ntol = {:?}\nmax_steps = {}\nt_max = {:?}\n",
        auto(cfg.flow.dt.map(|v| format!("{v:?}"))),
        cfg.flow.tol,
        cfg.flow.max_steps,
        cfg.flow.t_max
    ));
    let kind = match cfg.path.kind {
        PathChoice::Linear => "linear",
        PathChoice::Chi => "chi",
    };
    let mode = match cfg.path.mode {
        MountainPassMode::NodeFlow => "node-flow",
        MountainPassMode::HeatFlow => "heat-flow",
    };
    s.push_str(&format!(
        "\n[path]\nnodes = {}\nkind = {kind}\nk = {}\nmode = {mode}\njitter = {:?}\n",
        auto(cfg.path.nodes.map(|v| v.to_string())),
        cfg.path.k,
        cfg.path.jitter
    ));
    s.push_str(&format!("\n[scan]\nk_max = {}\n", cfg.scan_k_max));
    let res = if cfg.resolutions.is_empty() {
        "none".to_string()
    } else {
        List(&cfg.resolutions).to_string()
    };
    s.push_str(&format!("\n[verify]\ntrials = {}\nresolutions = {res}\n", cfg.trials));
    s.push_str(&format!("\n[landscape]\ngrid = {}\n", cfg.grid));
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let c = parse_config("model=classical-fk\np=1,1\n").unwrap();
        assert_eq!(c.command, Command::Minimize);
        assert_eq!(c.p, vec![1, 1]);
        assert_eq!(c.strip.q, vec![1]);
        assert_eq!(c.flow.tol, 1e-10);
        assert_eq!(c.flow.t_max, f64::INFINITY);
        assert_eq!(c.path.nodes, None);
        assert_eq!(c.trials, 100);
    }

    #[test]
    fn zero_period_is_rejected() {
        let e = parse_config("model=classical-fk\np=0,1\n").unwrap_err();
        assert!(e.to_string().contains("periods must be ≥ 1"), "{e}");
        assert!(e.to_string().contains("torus.p"));
    }

    #[test]
    fn unknown_key_is_named() {
        let e = parse_config("model=classical-fk\n[flow]\ndx = 0.1\n").unwrap_err();
        assert_eq!(
            e,
            ConfigError::UnknownKey {
                key: "flow.dx".into(),
                line: Some(3)
            }
        );
        let e = parse_config("dx = 0.1\n").unwrap_err();
        assert!(e.to_string().contains("`dx`") && e.to_string().contains("line 1"));
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let e = parse_config("model=classical-fk\n\n[flow\n").unwrap_err();
        assert!(matches!(e, ConfigError::Parse { line: 3, .. }));
        let e = parse_config("p = 1,1\njust words\n").unwrap_err();
        assert!(matches!(e, ConfigError::Parse { line: 2, .. }));
        let e = parse_config("[flow]\ntol = fast\n").unwrap_err();
        assert!(
            e.to_string().starts_with("flow.tol") && e.to_string().contains("line 2"),
            "{e}"
        );
    }

    #[test]
    fn stochastic_stages_need_a_seed() {
        let e = parse_config("command = verify\n").unwrap_err();
        assert!(e.to_string().starts_with("seed"));
        assert!(parse_config("command = verify\nseed = 3\n").is_ok());
    }

    #[test]
    fn sections_and_dotted_keys_agree() {
        let a = parse_config("[path]\nmode = heat-flow\nk = 4\n").unwrap();
        let b = parse_config("path.mode = heat-flow\npath.k = 4 # comment\n").unwrap();
        assert_eq!(a, b);
        assert_eq!(a.path.mode, MountainPassMode::HeatFlow);
    }
}
