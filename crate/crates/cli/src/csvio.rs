//! Trajectory CSV export.
//!
//! Columns are `t, x_1..x_n, h_m, tau, alpha, phase, g_1..g_n`. Reals are
//! written with 17 significant digits so that parsing them back reproduces
//! the recorded values exactly.

use std::io::{Read, Write};

use lbes_core::engine::Trajectory;
use lbes_core::schemes::Phase;

use crate::error::CliError;

/// `{:.16e}`: one digit before the point and 16 after.
pub fn fmt_real(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn header(dim: usize) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    h.extend((1..=dim).map(|i| format!("x_{i}")));
    h.extend(["h_m", "tau", "alpha", "phase"].map(String::from));
    h.extend((1..=dim).map(|i| format!("g_{i}")));
    h
}

pub fn write_trajectory<W: Write>(traj: &Trajectory, out: W) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header(traj.dim()))?;
    let mut row = Vec::with_capacity(2 * traj.dim() + 5);
    for s in traj.samples() {
        row.clear();
        row.push(fmt_real(s.t));
        row.extend(s.x.iter().map(|&v| fmt_real(v)));
        row.push(fmt_real(s.h_m));
        row.push(fmt_real(s.tau));
        row.push(fmt_real(s.alpha));
        row.push(s.phase.name().to_string());
        row.extend(s.g.iter().map(|&v| fmt_real(v)));
        w.write_record(&row)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn trajectory_bytes(traj: &Trajectory) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    write_trajectory(traj, &mut buf)?;
    Ok(buf)
}

/// One parsed CSV row.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub t: f64,
    pub x: Vec<f64>,
    pub h_m: f64,
    pub tau: f64,
    pub alpha: f64,
    pub phase: Phase,
    pub g: Vec<f64>,
}

pub fn read_trajectory<R: Read>(input: R) -> Result<Vec<Row>, CliError> {
    let mut r = csv::Reader::from_reader(input);
    let dim = r.headers()?.iter().filter(|h| h.starts_with("x_")).count();
    let bad = |what: &str| CliError::Config(format!("malformed trajectory csv: {what}"));
    let real = |s: &str| s.parse::<f64>().map_err(|_| bad(s));
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        if rec.len() != 2 * dim + 5 {
            return Err(bad("wrong number of columns"));
        }
        let reals = |a: usize, b: usize| (a..b).map(|i| real(&rec[i])).collect::<Result<Vec<_>, _>>();
        rows.push(Row {
            t: real(&rec[0])?,
            x: reals(1, 1 + dim)?,
            h_m: real(&rec[1 + dim])?,
            tau: real(&rec[2 + dim])?,
            alpha: real(&rec[3 + dim])?,
            phase: rec[4 + dim].parse()?,
            g: reals(5 + dim, 5 + 2 * dim)?,
        });
    }
    Ok(rows)
}


#[cfg(test)]
mod props {
    use super::fmt_real;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn any_finite_real_survives_formatting(v in any::<f64>().prop_filter("finite", |v| v.is_finite())) {
            prop_assert_eq!(fmt_real(v).parse::<f64>().unwrap().to_bits(), v.to_bits());
        }
    }
}
