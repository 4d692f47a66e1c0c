//! TOML run configuration.
//!
//! Every section is optional and defaults to the case study (ρ = 0.25,
//! ω = 20π, x0 = −1, T_s = 1 s, ε = 0.17 s, affine fields). Unknown keys are
//! rejected. Real numbers may be written as multiples of π, e.g.
//! `omega = "2002pi"`.

use std::f64::consts::PI;
use std::fmt;
use std::path::Path;

use lbes_core::costs::CostField;
use lbes_core::engine::{EngineConfig, Method};
use lbes_core::fields::FieldFamily;
use lbes_core::measurement::MeasurementSchedule;
use lbes_core::schemes::{SchemeConfig, SchemeKind, SchemeParams};
use nalgebra::DMatrix;
use serde::de::{self, Deserializer};
use serde::Deserialize;

use crate::error::CliError;

/// A real number written either as a plain number or as `"<k>pi"`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Real(pub f64);

/// Parses `1.5`, `20pi`, `20*pi`, `pi/4` or `-pi`.
pub fn parse_real(s: &str) -> Option<f64> {
    let s = s.trim();
    if let Ok(v) = s.parse::<f64>() {
        return Some(v);
    }
    let lower = s.to_ascii_lowercase();
    let (head, tail) = lower.split_once("pi")?;
    let head = head.trim().trim_end_matches('*').trim();
    let factor = match head {
        "" => 1.0,
        "-" => -1.0,
        h => h.parse::<f64>().ok()?,
    };
    let tail = tail.trim();
    let divisor = if tail.is_empty() {
        1.0
    } else {
        tail.strip_prefix('/')?.trim().parse::<f64>().ok()?
    };
    Some(factor * PI / divisor)
}

impl<'de> Deserialize<'de> for Real {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct Visitor;
        impl de::Visitor<'_> for Visitor {
            type Value = Real;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a number or a multiple of pi such as \"20pi\"")
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Real, E> {
                Ok(Real(v))
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Real, E> {
                Ok(Real(v as f64))
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Real, E> {
                Ok(Real(v as f64))
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<Real, E> {
                parse_real(v)
                    .map(Real)
                    .ok_or_else(|| E::invalid_value(de::Unexpected::Str(v), &self))
            }
        }
        d.deserialize_any(Visitor)
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub name: Option<String>,
    pub x0: Option<Vec<Real>>,
    #[serde(default)]
    pub scheme: SchemeSection,
    #[serde(default)]
    pub fields: FieldsSection,
    #[serde(default)]
    pub measurement: MeasurementSection,
    #[serde(default)]
    pub cost: CostSection,
    #[serde(default)]
    pub engine: EngineSection,
    #[serde(default)]
    pub metrics: MetricsSection,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeSection {
    pub kind: Option<String>,
    pub omega: Option<Real>,
    pub rho: Option<Real>,
    pub rho2: Option<Real>,
    pub eps_prime: Option<Real>,
    pub a: Option<Real>,
    pub b: Option<Real>,
    pub tau0: Option<Real>,
    pub g_init_norm: Option<Real>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldsSection {
    /// `affine` or `trig`.
    pub kind: Option<String>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasurementSection {
    /// `case-study`, `arva-min` or `continuous`.
    pub preset: Option<String>,
    #[serde(rename = "Ts")]
    pub ts: Option<Real>,
    pub eps: Option<Real>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostSection {
    /// `case-study` or `shifted-quadratic`.
    pub kind: Option<String>,
    pub minimizer: Option<Vec<Real>>,
    pub curvature: Option<Vec<Vec<Real>>>,
    pub offset: Option<Real>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EngineSection {
    pub t0: Option<Real>,
    pub t_end: Option<Real>,
    pub steps_per_dither_period: Option<usize>,
    pub method: Option<String>,
    pub sample_stride: Option<usize>,
    pub blowup: Option<Real>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsSection {
    pub band: Option<Real>,
}

/// A fully resolved and validated run.
#[derive(Debug, Clone)]
pub struct RunSpec {
    pub name: String,
    pub scheme: SchemeConfig,
    pub schedule: MeasurementSchedule,
    pub cost: CostField,
    pub engine: EngineConfig,
    pub x0: Vec<f64>,
    pub band: f64,
}

pub const DEFAULT_BAND: f64 = 0.6;
pub const DEFAULT_T_END: f64 = 25.0;

fn reals(v: &[Real]) -> Vec<f64> {
    v.iter().map(|r| r.0).collect()
}

fn or(v: Option<Real>, default: f64) -> f64 {
    v.map_or(default, |r| r.0)
}

impl ConfigFile {
    pub fn parse(src: &str, origin: &str) -> Result<Self, CliError> {
        toml::from_str(src).map_err(|e| CliError::Parse {
            origin: origin.to_string(),
            message: e.to_string(),
        })
    }

    pub fn resolve(&self) -> Result<RunSpec, CliError> {
        let x0 = self.x0.as_deref().map_or(vec![-1.0], reals);
        let dim = x0.len();
        if dim == 0 {
            return Err(CliError::Config("x0 must have at least one component".into()));
        }

        let cost = self.cost.resolve(dim)?;

        let s = &self.scheme;
        let kind: SchemeKind = s.kind.as_deref().unwrap_or("classical-intermittent").parse()?;
        let rho = or(s.rho, 0.25);
        let fields = match self.fields.kind.as_deref().unwrap_or("affine") {
            "affine" => FieldFamily::affine(rho, dim)?,
            "trig" => FieldFamily::trig(rho, dim)?,
            other => {
                return Err(CliError::Config(format!(
                    "unknown fields.kind `{other}`, expected affine or trig"
                )))
            }
        };
        let mut params = SchemeParams::case_study(kind).with_fields(fields);
        params.rho = rho;
        params.omega = or(s.omega, params.omega);
        params.rho2 = or(s.rho2, 1.5 * rho);
        params.eps_prime = or(s.eps_prime, params.eps_prime);
        params.a = or(s.a, params.a);
        params.b = or(s.b, params.b);
        params.tau0 = or(s.tau0, params.tau0);
        params.g_init_norm = s.g_init_norm.map(|r| r.0);
        let scheme = SchemeConfig::new(params)?;

        let schedule = self.measurement.resolve()?;
        if kind.holds_gradient() && schedule.is_continuous() {
            return Err(CliError::Config(format!(
                "scheme `{kind}` detects pulses from the measurement and needs eps < Ts"
            )));
        }

        let e = &self.engine;
        let mut engine = EngineConfig::new(or(e.t0, 0.0), or(e.t_end, DEFAULT_T_END));
        if let Some(k) = e.steps_per_dither_period {
            engine.steps_per_dither_period = k;
        }
        if let Some(k) = e.sample_stride {
            engine.sample_stride = k;
        }
        if let Some(m) = &e.method {
            engine.method = m.parse::<Method>()?;
        }
        engine.blowup = e.blowup.map(|r| r.0);
        engine.validate()?;

        let band = or(self.metrics.band, DEFAULT_BAND);
        if !(band > 0.0) {
            return Err(CliError::Config(format!("metrics.band must be positive, got {band}")));
        }
        if let Some(r) = engine.blowup {
            if !(r > band) {
                return Err(CliError::Config(format!(
                    "engine.blowup ({r}) must exceed metrics.band ({band})"
                )));
            }
        }

        Ok(RunSpec {
            name: self.name.clone().unwrap_or_else(|| "run".into()),
            scheme,
            schedule,
            cost,
            engine,
            x0,
            band,
        })
    }
}

impl MeasurementSection {
    fn resolve(&self) -> Result<MeasurementSchedule, CliError> {
        let (ts, eps) = match self.preset.as_deref() {
            None | Some("case-study") => (1.0, Some(0.17)),
            Some("arva-min") => (1.0, Some(0.07)),
            Some("continuous") => (1.0, None),
            Some(other) => {
                return Err(CliError::Config(format!(
                    "unknown measurement.preset `{other}`, expected case-study, arva-min or continuous"
                )))
            }
        };
        let ts = or(self.ts, ts);
        let eps = self.eps.map(|r| r.0).or(eps).unwrap_or(ts);
        Ok(MeasurementSchedule::new(ts, eps)?)
    }
}

impl CostSection {
    fn resolve(&self, dim: usize) -> Result<CostField, CliError> {
        match self.kind.as_deref().unwrap_or("case-study") {
            "case-study" => {
                if self.minimizer.is_some() || self.curvature.is_some() || self.offset.is_some() {
                    return Err(CliError::Config(
                        "cost.kind = \"case-study\" takes no minimizer, curvature or offset".into(),
                    ));
                }
                Ok(CostField::case_study())
            }
            "shifted-quadratic" => {
                let minimizer = self.minimizer.as_deref().map_or(vec![0.0; dim], reals);
                let n = minimizer.len();
                let curvature = match &self.curvature {
                    None => DMatrix::identity(n, n),
                    Some(rows) => {
                        if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                            return Err(CliError::Config(format!("cost.curvature must be {n}×{n}")));
                        }
                        DMatrix::from_fn(n, n, |i, j| rows[i][j].0)
                    }
                };
                Ok(CostField::shifted_quadratic(minimizer, curvature, or(self.offset, 10.0))?)
            }
            other => Err(CliError::Config(format!(
                "unknown cost.kind `{other}`, expected case-study or shifted-quadratic"
            ))),
        }
    }
}

impl RunSpec {
    pub fn parse(src: &str, origin: &str) -> Result<Self, CliError> {
        ConfigFile::parse(src, origin)?.resolve()
    }

    pub fn from_path(path: &Path) -> Result<Self, CliError> {
        let src = std::fs::read_to_string(path).map_err(|e| CliError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        Self::parse(&src, &path.display().to_string())
    }
}
