//! CSV artifacts.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::Context;
use fk_saddle::verify::landscape_grid;
use fk_saddle::{GapPair, SitePotential};

pub fn write_text(path: &Path, text: &str) -> anyhow::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// Write the reduced landscape on the `grid x grid` lattice of `[0, 1]^2` as
/// CSV rows `a,b,I` and return the row with the largest `I`.
pub fn emit_landscape(
    s: &dyn SitePotential,
    gap: &GapPair,
    grid: usize,
    out: &Path,
) -> anyhow::Result<(f64, f64, f64)> {
    let rows = landscape_grid(s, gap, grid)?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let file = fs::File::create(out).with_context(|| format!("creating {}", out.display()))?;
    let mut w = BufWriter::new(file);
    writeln!(w, "a,b,I")?;
    for (a, b, v) in &rows {
        writeln!(w, "{a:.16e},{b:.16e},{v:.16e}")?;
    }
    w.flush()?;
    let top = rows
        .iter()
        .copied()
        .reduce(|m, r| if r.2 > m.2 { r } else { m })
        .expect("grid is non-empty");
    Ok(top)
}
