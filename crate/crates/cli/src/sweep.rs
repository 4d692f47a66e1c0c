//! Cartesian-product parameter sweeps.
//!
//! Grid keys are dotted config paths (`scheme.omega`, `measurement.eps`).
//! Every cell is resolved before any run starts, so a bad key or value fails
//! the whole sweep up front. Cells then run in parallel and rows come back in
//! grid order, the first key varying slowest.

use std::io::Write;

use lbes_core::engine::{metrics, simulate, RunMetrics};
use rayon::prelude::*;

use crate::config::{ConfigFile, RunSpec};
use crate::csvio::fmt_real;
use crate::error::CliError;

#[derive(Debug, Clone, PartialEq)]
pub struct GridAxis {
    pub key: String,
    pub values: Vec<String>,
}

impl std::str::FromStr for GridAxis {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        let (key, values) = s
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("grid entry `{s}` is not of the form key=v1,v2,...")))?;
        let key = key.trim();
        let values: Vec<String> = values.split(',').map(|v| v.trim().to_string()).collect();
        if key.is_empty() || values.iter().any(String::is_empty) {
            return Err(CliError::Usage(format!("grid entry `{s}` has an empty key or value")));
        }
        Ok(GridAxis {
            key: key.to_string(),
            values,
        })
    }
}

#[derive(Debug, Clone)]
pub struct Cell {
    pub values: Vec<String>,
    pub spec: RunSpec,
}

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub values: Vec<String>,
    pub metrics: RunMetrics,
    pub aborted_at: Option<f64>,
}

/// A grid value as TOML: numbers, booleans, arrays and quoted strings are
/// taken literally, anything else becomes a bare string.
fn toml_value(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

fn set_path(table: &mut toml::Table, key: &str, value: toml::Value) -> Result<(), CliError> {
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts.pop().unwrap_or(key);
    let mut cur = table;
    for p in parts {
        let entry = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| CliError::Config(format!("grid key `{key}`: `{p}` is not a section")))?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

/// Resolves every grid cell against the base document.
pub fn cells(src: &str, origin: &str, grid: &[GridAxis]) -> Result<Vec<Cell>, CliError> {
    ConfigFile::parse(src, origin)?;
    let base: toml::Table = toml::from_str(src).map_err(|e| CliError::Parse {
        origin: origin.to_string(),
        message: e.to_string(),
    })?;
    for (i, a) in grid.iter().enumerate() {
        if grid[..i].iter().any(|b| b.key == a.key) {
            return Err(CliError::Usage(format!("grid key `{}` given twice", a.key)));
        }
    }
    let total: usize = grid.iter().map(|a| a.values.len()).product();
    let mut out = Vec::with_capacity(total);
    for mut idx in 0..total {
        let mut pick = vec![0; grid.len()];
        for (slot, a) in pick.iter_mut().zip(grid).rev() {
            *slot = idx % a.values.len();
            idx /= a.values.len();
        }
        let mut doc = base.clone();
        let mut values = Vec::with_capacity(grid.len());
        for (a, &k) in grid.iter().zip(&pick) {
            set_path(&mut doc, &a.key, toml_value(&a.values[k]))?;
            values.push(a.values[k].clone());
        }
        let label = grid
            .iter()
            .zip(&values)
            .map(|(a, v)| format!("{}={v}", a.key))
            .collect::<Vec<_>>()
            .join(" ");
        let file: ConfigFile = toml::Value::Table(doc)
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Config(format!("grid cell [{label}]: {}", e.message())))?;
        let spec = file
            .resolve()
            .map_err(|e| CliError::Config(format!("grid cell [{label}]: {e}")))?;
        out.push(Cell { values, spec });
    }
    Ok(out)
}

/// Thread cap from `ES_THREADS`; unset or invalid means rayon's default.
pub fn thread_cap() -> Option<usize> {
    std::env::var("ES_THREADS").ok()?.trim().parse().ok().filter(|&n| n > 0)
}

pub fn run_cell(cell: &Cell) -> Result<SweepRow, CliError> {
    let s = &cell.spec;
    let traj = simulate(&s.scheme, &s.schedule, &s.cost, &s.engine, &s.x0)?;
    let m = metrics(&traj, s.cost.minimizer(), s.band, traj.meta().blowup)?;
    Ok(SweepRow {
        values: cell.values.clone(),
        metrics: m,
        aborted_at: traj.aborted_at(),
    })
}

pub fn run(cells: &[Cell]) -> Result<Vec<SweepRow>, CliError> {
    let go = || cells.par_iter().map(run_cell).collect::<Result<Vec<_>, _>>();
    match thread_cap() {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Usage(format!("ES_THREADS: {e}")))?
            .install(go),
        None => go(),
    }
}

pub fn write_rows<W: Write>(grid: &[GridAxis], rows: &[SweepRow], out: W) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<&str> = grid.iter().map(|a| a.key.as_str()).collect();
    header.extend(["steady_state_error", "convergence_time", "diverged", "max_excursion", "aborted_at"]);
    w.write_record(&header)?;
    for r in rows {
        let mut rec = r.values.clone();
        rec.push(fmt_real(r.metrics.steady_state_error));
        rec.push(r.metrics.convergence_time.map(fmt_real).unwrap_or_default());
        rec.push(r.metrics.diverged.to_string());
        rec.push(fmt_real(r.metrics.max_excursion));
        rec.push(r.aborted_at.map(fmt_real).unwrap_or_default());
        w.write_record(&rec)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}
