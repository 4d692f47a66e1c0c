//! Self-check suites run by `lbes verify`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use lbes_core::costs::CostField;
use lbes_core::engine::{simulate, verify_gradient_scaling, verify_path_equivalence, EngineConfig};
use lbes_core::fields::{assumption4_residual, linspace, FieldFamily};
use lbes_core::measurement::MeasurementSchedule;
use lbes_core::schemes::{SchemeConfig, SchemeKind, SchemeParams};
use lbes_core::signals::{
    gamma_matrix, validate_dither, Check, DitherBank, DitherSignal, Multiplier, DEFAULT_QUAD_POINTS,
};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Dithers,
    Gamma,
    Assumption4,
    PathEquivalence,
    GradientScaling,
    ReferenceOracle,
    All,
}

impl Suite {
    pub const EACH: [Suite; 6] = [
        Suite::Dithers,
        Suite::Gamma,
        Suite::Assumption4,
        Suite::PathEquivalence,
        Suite::GradientScaling,
        Suite::ReferenceOracle,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Dithers => "dithers",
            Suite::Gamma => "gamma",
            Suite::Assumption4 => "assumption4",
            Suite::PathEquivalence => "path-equivalence",
            Suite::GradientScaling => "gradient-scaling",
            Suite::ReferenceOracle => "reference-oracle",
            Suite::All => "all",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        Suite::EACH
            .into_iter()
            .chain([Suite::All])
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Suite::EACH.iter().map(|k| k.name()).chain(["all"]).collect();
                CliError::Usage(format!("unknown suite `{s}`, expected one of {}", names.join(", ")))
            })
    }
}

/// A check tagged with the suite that produced it.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub suite: Suite,
    pub check: Check,
}

pub const GAMMA_TOL: f64 = 1e-8;
pub const RESIDUAL_TOL: f64 = 1e-8;
pub const PATH_TOL: f64 = 1e-6;
pub const PATH_COARSE_TOL: f64 = 1e-3;
pub const REFERENCE_TOL: f64 = 1e-6;
pub const SCALING_RATIO: f64 = 0.75;

fn case_study(kind: SchemeKind) -> Result<SchemeConfig, CliError> {
    Ok(SchemeConfig::new(SchemeParams::case_study(kind))?)
}

fn dithers() -> Result<Vec<Check>, CliError> {
    let two_thirds = Multiplier::new(2, 3)?;
    let table: Vec<f64> = linspace(0.0, 2.0 * PI, 257)
        .into_iter()
        .map(|p| (p - PI).abs() / PI * 2.0 - 1.0)
        .collect();
    let signals = [
        ("cos k=1", DitherSignal::cosine(Multiplier::one())),
        ("sin k=1", DitherSignal::sine(Multiplier::one())),
        ("cos k=2/3", DitherSignal::cosine(two_thirds)),
        ("triangle table k=3", DitherSignal::custom(table, Multiplier::integer(3)?)?),
    ];
    let mut out = Vec::new();
    for (label, d) in signals {
        for c in validate_dither(&d).checks() {
            out.push(Check::new(format!("{label}: {}", c.name), c.passed, c.detail.clone()));
        }
    }
    Ok(out)
}

fn gamma() -> Result<Vec<Check>, CliError> {
    let g = gamma_matrix(&DitherBank::cos_sin(), 20.0 * PI, DEFAULT_QUAD_POINTS)?;
    let g_fast = gamma_matrix(&DitherBank::cos_sin(), 2002.0 * PI, DEFAULT_QUAD_POINTS)?;
    let two = DitherBank::new(vec![
        DitherSignal::cosine(Multiplier::one()),
        DitherSignal::cosine(Multiplier::integer(2)?),
    ])?;
    let g2 = gamma_matrix(&two, 20.0 * PI, DEFAULT_QUAD_POINTS)?;
    let err = (g.get(0, 1) - 0.5).abs();
    Ok(vec![
        Check::new(
            "γ12 = 1/2 for cos/sin",
            err < GAMMA_TOL,
            format!("γ12 = {:.12}, |error| = {err:.2e}", g.get(0, 1)),
        ),
        Check::new(
            "γ antisymmetric",
            g.antisymmetry_defect() < GAMMA_TOL,
            format!("defect {:.2e}", g.antisymmetry_defect()),
        ),
        Check::new(
            "γ independent of ω",
            g.max_abs_diff(&g_fast) < GAMMA_TOL,
            format!("max |γ(20π) − γ(2002π)| = {:.2e}", g.max_abs_diff(&g_fast)),
        ),
        Check::new(
            "γ12 = 0 for cos k=1, cos k=2",
            g2.get(0, 1).abs() < GAMMA_TOL,
            format!("γ12 = {:.2e}", g2.get(0, 1)),
        ),
    ])
}

fn assumption4() -> Result<Vec<Check>, CliError> {
    let rho = 0.25;
    let ys = linspace(-50.0, 50.0, 2001);
    let mut out = Vec::new();
    for (label, fam, bank) in [
        ("affine, n=1", FieldFamily::affine(rho, 1)?, DitherBank::cos_sin()),
        ("trig, n=1", FieldFamily::trig(rho, 1)?, DitherBank::cos_sin()),
        ("affine, n=3", FieldFamily::affine(rho, 3)?, DitherBank::per_axis(3)),
        ("trig, n=3", FieldFamily::trig(rho, 3)?, DitherBank::per_axis(3)),
    ] {
        let g = gamma_matrix(&bank, 20.0 * PI, DEFAULT_QUAD_POINTS)?;
        let r = assumption4_residual(&fam, &g, rho, &ys)?;
        out.push(Check::new(
            format!("Lie-bracket residual, {label}"),
            r.max < RESIDUAL_TOL,
            format!("max residual {:.2e} over y ∈ [−50, 50]", r.max),
        ));
    }
    Ok(out)
}

fn path_equivalence() -> Result<Vec<Check>, CliError> {
    let c = case_study(SchemeKind::Freeze)?;
    let h = CostField::case_study();
    let pulsed = MeasurementSchedule::case_study(0.17)?;
    let fine = EngineConfig::new(0.0, 25.0).with_steps(256).with_stride(1);
    let coarse = fine.clone().with_steps(32);
    let d_fine = verify_path_equivalence(&c, &h, &pulsed, &fine, &[-1.0])?;
    let d_coarse = verify_path_equivalence(&c, &h, &pulsed, &coarse, &[-1.0])?;
    let d_cont = verify_path_equivalence(&c, &h, &MeasurementSchedule::continuous(1.0)?, &fine, &[-1.0])?;
    Ok(vec![
        Check::new(
            "freeze path = continuous path, dt = T/256",
            d_fine < PATH_TOL,
            format!("sup deviation {d_fine:.3e} on t ∈ [0, 25], eps = 0.17"),
        ),
        Check::new(
            "freeze path = continuous path, dt = T/32",
            d_coarse < PATH_COARSE_TOL,
            format!("sup deviation {d_coarse:.3e}"),
        ),
        Check::new(
            "eps = Ts gives the continuous run",
            d_cont == 0.0,
            format!("sup deviation {d_cont:.3e}"),
        ),
    ])
}

fn gradient_scaling() -> Result<Vec<Check>, CliError> {
    let omegas = [20.0 * PI, 80.0 * PI, 320.0 * PI, 1280.0 * PI];
    let table = verify_gradient_scaling(
        &case_study(SchemeKind::GradientHold)?,
        &CostField::case_study(),
        &MeasurementSchedule::case_study(0.17)?,
        &EngineConfig::new(0.0, 1.0),
        &[-1.0],
        &omegas,
    )?;
    let mut out = Vec::new();
    for w in table.windows(2) {
        let ratio = w[1].1 / w[0].1;
        out.push(Check::new(
            format!("error(ω = {:.0}π) / error(ω = {:.0}π)", w[1].0 / PI, w[0].0 / PI),
            ratio <= SCALING_RATIO && w[1].1 < w[0].1,
            format!("{:.3e} / {:.3e} = {ratio:.3}", w[1].1, w[0].1),
        ));
    }
    Ok(out)
}

fn reference_oracle() -> Result<Vec<Check>, CliError> {
    let c = case_study(SchemeKind::LieBracketReference)?;
    let eng = EngineConfig::new(0.0, 10.0).with_steps(100).with_stride(1);
    let traj = simulate(&c, &MeasurementSchedule::case_study(0.1)?, &CostField::case_study(), &eng, &[-1.0])?;
    let exact = |t: f64| 2.0 - 3.0 * (-0.5 * t).exp();
    let worst = traj.samples().map(|s| (s.x[0] - exact(s.t)).abs()).fold(0.0, f64::max);
    let at2 = traj
        .samples()
        .find(|s| s.t == 2.0)
        .map_or(f64::NAN, |s| s.x[0]);
    Ok(vec![
        Check::new(
            "reference law vs 2 − 3e^{−t/2}",
            worst < REFERENCE_TOL,
            format!("max error {worst:.2e} over {} samples, dt = {}", traj.len(), traj.meta().dt),
        ),
        Check::new(
            "x(2) = 0.89636",
            (at2 - 0.89636).abs() < 1e-5,
            format!("x(2) = {at2:.8}"),
        ),
    ])
}

pub fn run_suite(suite: Suite) -> Result<Vec<Outcome>, CliError> {
    let suites: Vec<Suite> = if suite == Suite::All {
        Suite::EACH.to_vec()
    } else {
        vec![suite]
    };
    let mut out = Vec::new();
    for s in suites {
        let checks = match s {
            Suite::Dithers => dithers()?,
            Suite::Gamma => gamma()?,
            Suite::Assumption4 => assumption4()?,
            Suite::PathEquivalence => path_equivalence()?,
            Suite::GradientScaling => gradient_scaling()?,
            Suite::ReferenceOracle => reference_oracle()?,
            Suite::All => unreachable!("expanded above"),
        };
        out.extend(checks.into_iter().map(|check| Outcome { suite: s, check }));
    }
    Ok(out)
}

pub fn render(outcomes: &[Outcome]) -> String {
    let width = outcomes.iter().map(|o| o.check.name.chars().count()).max().unwrap_or(0);
    let mut s = String::new();
    for o in outcomes {
        let pad = width - o.check.name.chars().count();
        s.push_str(&format!(
            "{:<18} {}{}  {}  {}\n",
            o.suite.name(),
            o.check.name,
            " ".repeat(pad),
            if o.check.passed { "PASS" } else { "FAIL" },
            o.check.detail
        ));
    }
    let failed = outcomes.iter().filter(|o| !o.check.passed).count();
    s.push_str(&format!("{} checks, {} failed\n", outcomes.len(), failed));
    s
}
