//! Configuration, pipelines and artifacts behind the `fk-saddle` binary.

pub mod config;
pub mod output;
pub mod pipeline;

pub use config::{parse_config, print_config, Command, ConfigError, Entries, RunConfig, DEFAULTS};
pub use output::emit_landscape;
pub use pipeline::{run, RunManifest, StageReport};

/// Environment variable capping the worker count.
pub const THREADS_VAR: &str = "FK_SADDLE_THREADS";

/// Size the global worker pool from [`THREADS_VAR`] when it is set.
pub fn configure_threads() -> anyhow::Result<()> {
    let Ok(v) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .map_err(|_| anyhow::anyhow!("{THREADS_VAR} must be a positive integer, got `{v}`"))?;
    if n == 0 {
        anyhow::bail!("{THREADS_VAR} must be a positive integer, got 0");
    }
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(())
}
