//! Subcommand implementations. Each returns the process exit code.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use lbes_core::engine::{metrics, simulate, RunMetrics, Trajectory};

use crate::config::RunSpec;
use crate::csvio::write_trajectory;
use crate::error::{exit, CliError};
use crate::plot::render_svg;
use crate::presets;
use crate::sweep::{self, GridAxis};
use crate::verify::{self, Suite};

/// Where a run configuration comes from.
#[derive(Debug, Clone)]
pub enum Source {
    Path(PathBuf),
    Preset(String),
}

impl Source {
    /// Document text and a label for diagnostics.
    pub fn text(&self) -> Result<(String, String), CliError> {
        match self {
            Source::Path(p) => {
                let src = std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
                Ok((src, p.display().to_string()))
            }
            Source::Preset(name) => Ok((presets::source(name)?.to_string(), format!("preset {name}"))),
        }
    }

    pub fn spec(&self) -> Result<RunSpec, CliError> {
        let (src, origin) = self.text()?;
        RunSpec::parse(&src, &origin)
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub traj: Trajectory,
    pub metrics: RunMetrics,
}

pub fn execute(spec: &RunSpec) -> Result<RunOutcome, CliError> {
    let traj = simulate(&spec.scheme, &spec.schedule, &spec.cost, &spec.engine, &spec.x0)?;
    let metrics = metrics(&traj, spec.cost.minimizer(), spec.band, traj.meta().blowup)?;
    Ok(RunOutcome { traj, metrics })
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path).map(BufWriter::new).map_err(|e| CliError::io(path, e))
}

pub fn summary(spec: &RunSpec, o: &RunOutcome) -> String {
    let m = &o.metrics;
    let conv = m
        .convergence_time
        .map_or_else(|| "none".to_string(), |t| format!("{t:.4} s"));
    let mut s = format!(
        "{}: {} samples, {} steps, final x = {:?}\n  steady-state error {:.6}, max excursion {:.6}, \
         convergence time (band {}) {conv}, diverged {}",
        spec.name,
        o.traj.len(),
        o.traj.steps(),
        o.traj.final_x(),
        m.steady_state_error,
        m.max_excursion,
        spec.band,
        m.diverged
    );
    if let Some(t) = o.traj.aborted_at() {
        s.push_str(&format!("\n  aborted at t = {t:.6} s (blow-up radius {})", o.traj.meta().blowup));
    }
    s
}

pub fn cmd_run(source: &Source, out: Option<&Path>, plot: Option<&Path>) -> Result<i32, CliError> {
    let spec = source.spec()?;
    let outcome = execute(&spec)?;
    let csv_path = out.map_or_else(|| PathBuf::from(format!("{}.csv", spec.name)), Path::to_path_buf);
    let mut w = create(&csv_path)?;
    write_trajectory(&outcome.traj, &mut w)?;
    w.flush().map_err(|e| CliError::io(&csv_path, e))?;
    if let Some(p) = plot {
        let svg = render_svg(&outcome.traj, &spec.name, spec.cost.minimizer());
        std::fs::write(p, svg).map_err(|e| CliError::io(p, e))?;
    }
    println!("{}", summary(&spec, &outcome));
    log::info!("wrote {}", csv_path.display());
    Ok(if outcome.metrics.diverged { exit::DIVERGED } else { exit::OK })
}

pub fn cmd_sweep(source: &Source, grid: &[String], out: &Path) -> Result<i32, CliError> {
    let axes = grid.iter().map(|g| g.parse()).collect::<Result<Vec<GridAxis>, _>>()?;
    let (src, origin) = source.text()?;
    let cells = sweep::cells(&src, &origin, &axes)?;
    log::info!("running {} sweep cells", cells.len());
    let rows = sweep::run(&cells)?;
    let mut w = create(out)?;
    sweep::write_rows(&axes, &rows, &mut w)?;
    w.flush().map_err(|e| CliError::io(out, e))?;
    let diverged = rows.iter().filter(|r| r.metrics.diverged).count();
    println!("{} cells, {diverged} diverged, written to {}", rows.len(), out.display());
    Ok(exit::OK)
}

pub fn cmd_verify(suite: &str) -> Result<i32, CliError> {
    let suite: Suite = suite.parse()?;
    let outcomes = verify::run_suite(suite)?;
    print!("{}", verify::render(&outcomes));
    Ok(if outcomes.iter().all(|o| o.check.passed) {
        exit::OK
    } else {
        exit::CHECK_FAILED
    })
}

pub fn cmd_presets() -> i32 {
    for name in presets::names() {
        println!("{name}");
    }
    exit::OK
}
