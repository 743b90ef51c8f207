//! Deterministic report writers: CSV at full double precision and JSON with
//! fixed key order.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::Context;
use lamb_core::grid::GridFunction;
use lamb_core::spaces::{AsymptoticState, EnergyState};
use serde::Serialize;

/// 17 significant digits reproduce every f64 exactly.
pub fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

fn open(path: &Path) -> anyhow::Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("cannot create {}", path.display()))?,
    ))
}

/// Writes columns `label,f_1..f_n` for one grid function.
pub fn write_grid_csv(path: &Path, label: &str, g: &GridFunction) -> anyhow::Result<()> {
    let mut w = open(path)?;
    write!(w, "{label}")?;
    for i in 1..=g.dim() {
        write!(w, ",f_{i}")?;
    }
    writeln!(w)?;
    for k in 0..g.len() {
        write!(w, "{}", fmt(g.t(k)))?;
        for v in g.node(k) {
            write!(w, ",{}", fmt(*v))?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Writes several aligned grid functions as column groups under one time axis.
pub fn write_columns_csv(
    path: &Path,
    label: &str,
    groups: &[(&str, &GridFunction)],
) -> anyhow::Result<()> {
    let first = groups[0].1;
    let mut w = open(path)?;
    write!(w, "{label}")?;
    for (name, g) in groups {
        g.compatible(first).map_err(anyhow::Error::new)?;
        if g.dim() == 1 {
            write!(w, ",{name}")?;
        } else {
            for i in 1..=g.dim() {
                write!(w, ",{name}_{i}")?;
            }
        }
    }
    writeln!(w)?;
    for k in 0..first.len() {
        write!(w, "{}", fmt(first.t(k)))?;
        for (_, g) in groups {
            for v in g.node(k) {
                write!(w, ",{}", fmt(*v))?;
            }
        }
        writeln!(w)?;
    }
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut w = open(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    Ok(())
}

#[derive(Serialize)]
pub struct StateLimits {
    pub u0_plus: Vec<f64>,
    pub u0_minus: Vec<f64>,
    pub v0_mean: Vec<f64>,
}

/// Initial data as `u0.csv` / `v0.csv` plus a sidecar limits record.
pub fn write_energy_state(dir: &Path, state: &EnergyState) -> anyhow::Result<()> {
    write_grid_csv(&dir.join("u0.csv"), "x", &state.u0)?;
    write_grid_csv(&dir.join("v0.csv"), "x", &state.v0)?;
    write_json(
        &dir.join("limits.json"),
        &StateLimits {
            u0_plus: state.u0_plus.clone(),
            u0_minus: state.u0_minus.clone(),
            v0_mean: state.v0_mean.clone(),
        },
    )
}

#[derive(Serialize)]
pub struct PsiLimits {
    pub psi0_plus: Vec<f64>,
    pub psi0_minus: Vec<f64>,
    pub psi1_mass: Vec<f64>,
    pub identity_residual: Vec<f64>,
}

/// Asymptotic state as `psi0.csv` / `psi1.csv` plus a sidecar limits record.
pub fn write_asymptotic_state(dir: &Path, psi: &AsymptoticState) -> anyhow::Result<()> {
    write_grid_csv(&dir.join("psi0.csv"), "x", &psi.psi0)?;
    write_grid_csv(&dir.join("psi1.csv"), "x", &psi.psi1)?;
    write_json(
        &dir.join("psi_limits.json"),
        &PsiLimits {
            psi0_plus: psi.psi0_plus.clone(),
            psi0_minus: psi.psi0_minus.clone(),
            psi1_mass: psi.psi1.integral(),
            identity_residual: psi.identity_residual(),
        },
    )
}

/// Reads a `label,f_1..f_n` CSV produced by [`write_grid_csv`].
pub fn read_grid_csv(path: &Path) -> anyhow::Result<GridFunction> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read {}", path.display()))?;
    let mut lines = text.lines();
    let header = lines.next().context("empty CSV")?;
    let n = header.split(',').count() - 1;
    if n == 0 {
        anyhow::bail!("{} has no value columns", path.display());
    }
    let mut ts = Vec::new();
    let mut data = Vec::new();
    for (idx, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let t: f64 = fields
            .next()
            .context("missing time column")?
            .trim()
            .parse()
            .with_context(|| format!("bad number on data row {}", idx + 1))?;
        ts.push(t);
        for f in fields {
            data.push(f.trim().parse::<f64>()?);
        }
    }
    if ts.len() < 2 || data.len() != ts.len() * n {
        anyhow::bail!("{} is ragged or too short", path.display());
    }
    let h = ts[1] - ts[0];
    for w in ts.windows(2) {
        if ((w[1] - w[0]) - h).abs() > 1e-9 * h.abs() {
            anyhow::bail!("{} is not uniformly sampled", path.display());
        }
    }
    Ok(GridFunction::new(ts[0], h, n, data)?)
}

#[derive(serde::Deserialize)]
struct StateLimitsIn {
    u0_plus: Vec<f64>,
    u0_minus: Vec<f64>,
}

/// Reads initial data written by [`write_energy_state`]. The derivative of
/// `u0` is rebuilt by central differences; jump tables are not serialized.
pub fn read_energy_state(dir: &Path) -> anyhow::Result<EnergyState> {
    let u0 = read_grid_csv(&dir.join("u0.csv"))?;
    let v0 = read_grid_csv(&dir.join("v0.csv"))?;
    let limits_path = dir.join("limits.json");
    if limits_path.exists() {
        let text = std::fs::read_to_string(&limits_path)?;
        let lim: StateLimitsIn = serde_json::from_str(&text)?;
        Ok(EnergyState::with_limits(u0, v0, lim.u0_plus, lim.u0_minus)?)
    } else {
        Ok(EnergyState::new(u0, v0)?)
    }
}
