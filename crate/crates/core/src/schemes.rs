//! Extremum-seeking control laws driven by intermittent cost measurements.
//!
//! All laws share the dithered input-affine form
//! `ẋ = √ω · Σᵢ fᵢ(h_m)·uᵢ(kᵢ·ω·t)` and differ in what they do while the
//! measurement is missing:
//!
//! * `ClassicalContinuous` / `ClassicalIntermittent` keep dithering.
//! * `Freeze` halts both the state and the dither clock `τ`.
//! * `GradientHold` estimates `−ρ∇h` over the last complete dither period of
//!   each pulse and then drives `ẋ = ρ₂·g` until the next pulse.
//! * `AdaptiveAmplitude` additionally scales the dithers by
//!   `α = √((‖g_prev‖ + a)/(‖g_prev‖ + b))`.
//! * `LieBracketReference` is the averaged law `ẋ = −ρ∇h(x)` used as oracle.
//!
//! Controllers only ever see the measured value. Pulse geometry is inferred
//! from `0 → nonzero` transitions detected by the engine.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::costs::{norm, CostField};
use crate::error::{check_dim, config, contract, Error, Result};
use crate::fields::{FieldFamily, FieldKind};
use crate::signals::DitherBank;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SchemeKind {
    ClassicalContinuous,
    ClassicalIntermittent,
    Freeze,
    GradientHold,
    AdaptiveAmplitude,
    LieBracketReference,
}

impl SchemeKind {
    pub const ALL: [SchemeKind; 6] = [
        SchemeKind::ClassicalContinuous,
        SchemeKind::ClassicalIntermittent,
        SchemeKind::Freeze,
        SchemeKind::GradientHold,
        SchemeKind::AdaptiveAmplitude,
        SchemeKind::LieBracketReference,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SchemeKind::ClassicalContinuous => "classical-continuous",
            SchemeKind::ClassicalIntermittent => "classical-intermittent",
            SchemeKind::Freeze => "freeze",
            SchemeKind::GradientHold => "gradient-hold",
            SchemeKind::AdaptiveAmplitude => "adaptive-amplitude",
            SchemeKind::LieBracketReference => "lie-bracket-reference",
        }
    }

    /// Schemes that estimate the gradient during pulses and hold it after.
    pub fn holds_gradient(self) -> bool {
        matches!(self, SchemeKind::GradientHold | SchemeKind::AdaptiveAmplitude)
    }
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SchemeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SchemeKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = SchemeKind::ALL.iter().map(|k| k.name()).collect();
                Error::Config(format!("unknown scheme `{s}`, expected one of {}", names.join(", ")))
            })
    }
}

/// Unvalidated scheme parameters; turn into a [`SchemeConfig`] with
/// [`SchemeConfig::new`].
#[derive(Debug, Clone)]
pub struct SchemeParams {
    pub kind: SchemeKind,
    /// Base dither frequency ω (rad/s).
    pub omega: f64,
    /// Gradient-descent gain ρ (1/s).
    pub rho: f64,
    /// Gain applied to the held estimate (1/s).
    pub rho2: f64,
    /// Known lower bound on the pulse width (s).
    pub eps_prime: f64,
    pub a: f64,
    pub b: f64,
    /// Initial value of the freeze scheme's dither clock (s).
    pub tau0: f64,
    /// Norm used for α on the first pulse; defaults to `b`.
    pub g_init_norm: Option<f64>,
    /// Defaults to the affine family with gain `rho` in one dimension.
    pub fields: Option<FieldFamily>,
    /// Defaults to one cos/sin pair per axis.
    pub dithers: Option<DitherBank>,
}

impl SchemeParams {
    /// The case-study parameter set: ρ = 0.25, ω = 20π, ρ₂ = 1.5ρ,
    /// ε′ = 0.1, a = 10⁻⁵, b = 0.1, affine fields, cos/sin dithers.
    pub fn case_study(kind: SchemeKind) -> Self {
        Self {
            kind,
            omega: 20.0 * PI,
            rho: 0.25,
            rho2: 0.375,
            eps_prime: 0.1,
            a: 1e-5,
            b: 0.1,
            tau0: 0.0,
            g_init_norm: None,
            fields: None,
            dithers: None,
        }
    }

    pub fn with_omega(mut self, omega: f64) -> Self {
        self.omega = omega;
        self
    }

    pub fn with_rho2(mut self, rho2: f64) -> Self {
        self.rho2 = rho2;
        self
    }

    pub fn with_fields(mut self, fields: FieldFamily) -> Self {
        self.fields = Some(fields);
        self
    }

    pub fn with_kind(mut self, kind: SchemeKind) -> Self {
        self.kind = kind;
        self
    }
}

/// Validated, immutable scheme configuration.
#[derive(Debug, Clone)]
pub struct SchemeConfig {
    kind: SchemeKind,
    omega: f64,
    sqrt_omega: f64,
    rho: f64,
    rho2: f64,
    eps_prime: f64,
    a: f64,
    b: f64,
    tau0: f64,
    g_init_norm: f64,
    fields: FieldFamily,
    dithers: DitherBank,
    period: f64,
    hold_periods: u64,
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        config(format!("{name} must be positive, got {v}"))
    }
}

fn builtin_rho(fields: &FieldFamily) -> Option<f64> {
    match fields.kind() {
        FieldKind::Affine { rho } | FieldKind::Trig { rho } => Some(*rho),
        FieldKind::Custom { .. } => None,
    }
}

/// Number of complete dither periods of length `period` inside `eps_prime`.
///
/// A relative slack of 10⁻⁹ absorbs rounding when `eps_prime` is an exact
/// multiple of the period (0.1 s against T = 2π/(20π) s).
pub fn complete_periods(eps_prime: f64, period: f64) -> u64 {
    (eps_prime / period + 1e-9).floor().max(0.0) as u64
}

impl SchemeConfig {
    pub fn new(p: SchemeParams) -> Result<Self> {
        positive("ω", p.omega)?;
        positive("ρ", p.rho)?;
        let fields = match p.fields {
            Some(f) => f,
            None => FieldFamily::affine(p.rho, 1)?,
        };
        if let Some(r) = builtin_rho(&fields) {
            if (r - p.rho).abs() > 1e-12 * p.rho.max(1.0) {
                return config(format!("field family gain {r} differs from scheme ρ = {}", p.rho));
            }
        }
        let dithers = match p.dithers {
            Some(d) => d,
            None => DitherBank::per_axis(fields.dim()),
        };
        if dithers.len() != fields.len() {
            return config(format!(
                "{} dithers for {} fields; each field needs exactly one dither",
                dithers.len(),
                fields.len()
            ));
        }
        if !p.tau0.is_finite() {
            return config("τ₀ must be finite");
        }
        let period = dithers.time_period(p.omega);
        let mut hold_periods = 0;
        if p.kind.holds_gradient() {
            positive("ε′", p.eps_prime)?;
            positive("ρ₂", p.rho2)?;
            hold_periods = complete_periods(p.eps_prime, period);
            if hold_periods == 0 {
                return config(format!(
                    "ω = {} is too low: the dither period T = {period:.6} s does not fit in \
                     ε′ = {} s (need ω ≥ C/ε′ = {:.6})",
                    p.omega,
                    p.eps_prime,
                    dithers.common_period() / p.eps_prime
                ));
            }
        }
        if p.kind == SchemeKind::AdaptiveAmplitude {
            positive("a", p.a)?;
            if !(p.b > p.a && p.b.is_finite()) {
                return config(format!("adaptive amplitude needs b > a, got a = {}, b = {}", p.a, p.b));
            }
        }
        let g_init_norm = p.g_init_norm.unwrap_or(p.b);
        if !(g_init_norm >= 0.0 && g_init_norm.is_finite()) {
            return config(format!("initial gradient norm must be nonnegative, got {g_init_norm}"));
        }
        Ok(Self {
            kind: p.kind,
            omega: p.omega,
            sqrt_omega: p.omega.sqrt(),
            rho: p.rho,
            rho2: p.rho2,
            eps_prime: p.eps_prime,
            a: p.a,
            b: p.b,
            tau0: p.tau0,
            g_init_norm,
            fields,
            dithers,
            period,
            hold_periods,
        })
    }

    pub fn kind(&self) -> SchemeKind {
        self.kind
    }
    pub fn omega(&self) -> f64 {
        self.omega
    }
    pub fn rho(&self) -> f64 {
        self.rho
    }
    pub fn rho2(&self) -> f64 {
        self.rho2
    }
    pub fn eps_prime(&self) -> f64 {
        self.eps_prime
    }
    pub fn a(&self) -> f64 {
        self.a
    }
    pub fn b(&self) -> f64 {
        self.b
    }
    pub fn tau0(&self) -> f64 {
        self.tau0
    }
    pub fn g_init_norm(&self) -> f64 {
        self.g_init_norm
    }
    pub fn fields(&self) -> &FieldFamily {
        &self.fields
    }
    pub fn dithers(&self) -> &DitherBank {
        &self.dithers
    }
    pub fn dim(&self) -> usize {
        self.fields.dim()
    }

    /// Dither period in time, `T = C/ω`.
    pub fn period(&self) -> f64 {
        self.period
    }

    /// `⌊ε′/T⌋`; zero for schemes without a hold phase.
    pub fn hold_periods(&self) -> u64 {
        self.hold_periods
    }

    /// Time spent dithering after a rising edge, `⌊ε′/T⌋·T`.
    pub fn dither_window(&self) -> f64 {
        self.hold_periods as f64 * self.period
    }

    /// The parameters this configuration was built from.
    pub fn params(&self) -> SchemeParams {
        SchemeParams {
            kind: self.kind,
            omega: self.omega,
            rho: self.rho,
            rho2: self.rho2,
            eps_prime: self.eps_prime,
            a: self.a,
            b: self.b,
            tau0: self.tau0,
            g_init_norm: Some(self.g_init_norm),
            fields: Some(self.fields.clone()),
            dithers: Some(self.dithers.clone()),
        }
    }

    /// Same parameters under another scheme kind, revalidated.
    pub fn with_kind(&self, kind: SchemeKind) -> Result<Self> {
        Self::new(self.params().with_kind(kind))
    }

    /// Same parameters at another base frequency, revalidated.
    pub fn with_omega(&self, omega: f64) -> Result<Self> {
        Self::new(self.params().with_omega(omega))
    }

    /// `out = Σᵢ fᵢ(measured)·uᵢ(kᵢ·ω·arg)`, without the √ω factor.
    ///
    /// `u` is scratch space of length `l`.
    #[inline]
    pub fn dither_sum(&self, arg: f64, measured: f64, u: &mut [f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        self.dithers.values_into(self.omega, arg, u);
        for (i, &ui) in u.iter().enumerate() {
            if ui != 0.0 {
                self.fields.accumulate(i, measured, ui, out);
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Phase {
    Dithering,
    Holding,
    WaitingFirstPulse,
}

impl Phase {
    pub fn name(self) -> &'static str {
        match self {
            Phase::Dithering => "dithering",
            Phase::Holding => "holding",
            Phase::WaitingFirstPulse => "waiting",
        }
    }
}

impl FromStr for Phase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dithering" => Ok(Phase::Dithering),
            "holding" => Ok(Phase::Holding),
            "waiting" => Ok(Phase::WaitingFirstPulse),
            other => config(format!("unknown phase `{other}`")),
        }
    }
}

/// Mutable controller state owned by one run.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemeState {
    pub x: Vec<f64>,
    /// Freeze scheme's dither clock.
    pub tau: f64,
    pub phase: Phase,
    /// Time of the rising edge that opened the current pulse.
    pub pulse_start: f64,
    pub dither_elapsed: f64,
    /// Complete dither periods since `pulse_start`.
    pub periods_done: u64,
    pub accumulator: Vec<f64>,
    pub accumulator_prev: Vec<f64>,
    pub g_held: Vec<f64>,
    pub g_prev_norm: f64,
    pub alpha: f64,
    /// Rising edges seen so far.
    pub pulses: u64,
}

impl SchemeState {
    pub fn new(cfg: &SchemeConfig, x0: &[f64], t0: f64) -> Result<Self> {
        check_dim(cfg.dim(), x0.len())?;
        let n = x0.len();
        let phase = if cfg.kind.holds_gradient() {
            Phase::WaitingFirstPulse
        } else {
            Phase::Dithering
        };
        Ok(Self {
            x: x0.to_vec(),
            tau: cfg.tau0,
            phase,
            pulse_start: t0,
            dither_elapsed: 0.0,
            periods_done: 0,
            accumulator: vec![0.0; n],
            accumulator_prev: vec![0.0; n],
            g_held: vec![0.0; n],
            g_prev_norm: cfg.g_init_norm,
            alpha: 1.0,
            pulses: 0,
        })
    }

    /// Argument fed to the dithers: `τ` for the freeze scheme, `t` otherwise.
    pub fn dither_time(&self, cfg: &SchemeConfig, t: f64) -> f64 {
        if cfg.kind == SchemeKind::Freeze {
            self.tau
        } else {
            t
        }
    }
}

/// Windowed estimate of `−ρ∇h` taken over one complete dither period.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientEstimate {
    pub g: Vec<f64>,
    pub at_time: f64,
    pub window: f64,
}

/// `√ω·Σᵢ fᵢ(measured)·uᵢ(kᵢωt)`.
pub fn rhs_classical(cfg: &SchemeConfig, t: f64, x: &[f64], measured: f64) -> Result<Vec<f64>> {
    if !matches!(
        cfg.kind,
        SchemeKind::ClassicalContinuous | SchemeKind::ClassicalIntermittent
    ) {
        return contract(format!("rhs_classical called for {}", cfg.kind));
    }
    check_dim(cfg.dim(), x.len())?;
    Ok(dithered(cfg, t, measured, 1.0))
}

fn dithered(cfg: &SchemeConfig, arg: f64, measured: f64, gain: f64) -> Vec<f64> {
    let mut u = vec![0.0; cfg.dithers.len()];
    let mut out = vec![0.0; cfg.dim()];
    cfg.dither_sum(arg, measured, &mut u, &mut out);
    let s = gain * cfg.sqrt_omega;
    out.iter_mut().for_each(|o| *o *= s);
    out
}

/// `(ẋ, τ̇)` of the freeze scheme: `(0, 0)` without measurement, otherwise
/// the dithered law evaluated at the dither clock `τ` and `τ̇ = 1`.
pub fn rhs_freeze(cfg: &SchemeConfig, state: &SchemeState, measured: f64) -> Result<(Vec<f64>, f64)> {
    if cfg.kind != SchemeKind::Freeze {
        return contract(format!("rhs_freeze called for {}", cfg.kind));
    }
    if measured == 0.0 {
        Ok((vec![0.0; cfg.dim()], 0.0))
    } else {
        Ok((dithered(cfg, state.tau, measured, 1.0), 1.0))
    }
}

/// `(√ω/T)·(1/α)·Σᵢ fᵢ(measured)·uᵢ(kᵢωt)`, the integrand of the estimate.
pub fn g_integrand(cfg: &SchemeConfig, state: &SchemeState, t: f64, measured: f64) -> Vec<f64> {
    dithered(cfg, t, measured, 1.0 / (state.alpha * cfg.period))
}

/// Adds `dt` times the estimate integrand to the running accumulator.
pub fn accumulate_g(state: &mut SchemeState, cfg: &SchemeConfig, t: f64, measured: f64, dt: f64) -> Result<()> {
    if state.phase != Phase::Dithering {
        return contract(format!("accumulate_g called while {}", state.phase.name()));
    }
    if dt == 0.0 {
        return Ok(());
    }
    let inc = g_integrand(cfg, state, t, measured);
    for (a, v) in state.accumulator.iter_mut().zip(inc) {
        *a += dt * v;
    }
    Ok(())
}

/// Closes a dither period: the accumulator becomes the last complete period's
/// integral and restarts from zero.
pub fn complete_dither_period(state: &mut SchemeState) {
    std::mem::swap(&mut state.accumulator_prev, &mut state.accumulator);
    state.accumulator.iter_mut().for_each(|a| *a = 0.0);
    state.periods_done += 1;
}

/// The estimate over the last complete dither period of the current pulse.
pub fn finalize_g(state: &SchemeState, cfg: &SchemeConfig, t: f64) -> Result<GradientEstimate> {
    if state.periods_done == 0 {
        return contract(format!(
            "no complete dither period yet (elapsed {:.6} s < T = {:.6} s)",
            state.dither_elapsed, cfg.period
        ));
    }
    Ok(GradientEstimate {
        g: state.accumulator_prev.clone(),
        at_time: t,
        window: cfg.period,
    })
}

/// Dithered law during the first `⌊ε′/T⌋·T` seconds of a pulse, `ρ₂·g`
/// afterwards, and rest while waiting for the first pulse.
pub fn rhs_gradient_hold(cfg: &SchemeConfig, state: &SchemeState, t: f64, measured: f64) -> Result<Vec<f64>> {
    if cfg.kind != SchemeKind::GradientHold {
        return contract(format!("rhs_gradient_hold called for {}", cfg.kind));
    }
    Ok(hold_law(cfg, state, t, measured, 1.0))
}

fn hold_law(cfg: &SchemeConfig, state: &SchemeState, t: f64, measured: f64, gain: f64) -> Vec<f64> {
    match state.phase {
        Phase::Dithering => dithered(cfg, t, measured, gain),
        Phase::Holding => state.g_held.iter().map(|g| cfg.rho2 * g).collect(),
        Phase::WaitingFirstPulse => vec![0.0; cfg.dim()],
    }
}

/// Dither amplitude `√((‖g_prev‖ + a)/(‖g_prev‖ + b))`.
pub fn alpha(g_prev_norm: f64, a: f64, b: f64) -> Result<f64> {
    if g_prev_norm < 0.0 || g_prev_norm.is_nan() {
        return contract(format!("gradient norm must be nonnegative, got {g_prev_norm}"));
    }
    if !(a > 0.0 && b >= a) {
        return contract(format!("amplitude parameters need 0 < a <= b, got a = {a}, b = {b}"));
    }
    Ok(((g_prev_norm + a) / (g_prev_norm + b)).sqrt())
}

/// Gradient-hold law with dithers scaled by the per-pulse amplitude `α`.
pub fn rhs_adaptive(cfg: &SchemeConfig, state: &SchemeState, t: f64, measured: f64) -> Result<Vec<f64>> {
    if cfg.kind != SchemeKind::AdaptiveAmplitude {
        return contract(format!("rhs_adaptive called for {}", cfg.kind));
    }
    Ok(hold_law(cfg, state, t, measured, state.alpha))
}

/// The averaged law `ẋ = −ρ∇h(x)`.
pub fn rhs_reference(cfg: &SchemeConfig, cost: &CostField, x: &[f64]) -> Result<Vec<f64>> {
    let mut g = cost.grad(x)?;
    g.iter_mut().for_each(|v| *v *= -cfg.rho);
    Ok(g)
}

/// Starts a dithering window at a detected `0 → nonzero` measurement switch.
pub fn on_rising_edge(state: &mut SchemeState, cfg: &SchemeConfig, t: f64) -> Result<()> {
    if !cfg.kind.holds_gradient() {
        return Ok(());
    }
    if cfg.kind == SchemeKind::AdaptiveAmplitude {
        state.g_prev_norm = if state.pulses == 0 {
            cfg.g_init_norm
        } else {
            norm(&state.g_held)
        };
        state.alpha = alpha(state.g_prev_norm, cfg.a, cfg.b)?;
    }
    state.phase = Phase::Dithering;
    state.pulse_start = t;
    state.dither_elapsed = 0.0;
    state.periods_done = 0;
    state.accumulator.iter_mut().for_each(|a| *a = 0.0);
    state.pulses += 1;
    Ok(())
}

/// Freezes the estimate and switches to the hold phase.
pub fn on_dither_deadline(state: &mut SchemeState, cfg: &SchemeConfig, t: f64) -> Result<()> {
    if !cfg.kind.holds_gradient() {
        return contract(format!("{} has no dither deadline", cfg.kind));
    }
    if state.periods_done < cfg.hold_periods {
        return contract(format!(
            "deadline reached after {} of {} dither periods",
            state.periods_done, cfg.hold_periods
        ));
    }
    state.g_held = finalize_g(state, cfg, t)?.g;
    state.phase = Phase::Holding;
    Ok(())
}

/// Absolute time of the next dither-period boundary, if the scheme is inside
/// a dithering window.
pub fn next_period_boundary(state: &SchemeState, cfg: &SchemeConfig) -> Option<f64> {
    if cfg.kind.holds_gradient() && state.phase == Phase::Dithering {
        Some(state.pulse_start + (state.periods_done + 1) as f64 * cfg.period)
    } else {
        None
    }
}

/// Handles a dither-period boundary at time `t`: rolls the accumulator and
/// switches to holding once `⌊ε′/T⌋` periods are complete. Returns whether
/// the phase changed.
pub fn on_period_boundary(state: &mut SchemeState, cfg: &SchemeConfig, t: f64) -> Result<bool> {
    complete_dither_period(state);
    state.dither_elapsed = t - state.pulse_start;
    if state.periods_done >= cfg.hold_periods {
        on_dither_deadline(state, cfg, t)?;
        return Ok(true);
    }
    Ok(false)
}

/// Time derivative of the integrated quantities `(x, accumulator)` at one
/// RK stage. The dither clock is handled by the caller.
///
/// `u` is scratch of length `l`.
#[allow(clippy::too_many_arguments)]
#[inline]
pub fn derivative(
    cfg: &SchemeConfig,
    state: &SchemeState,
    cost: &CostField,
    t: f64,
    tau: f64,
    x: &[f64],
    measured: f64,
    u: &mut [f64],
    dx: &mut [f64],
    dacc: &mut [f64],
) {
    dacc.iter_mut().for_each(|v| *v = 0.0);
    match cfg.kind {
        SchemeKind::ClassicalContinuous | SchemeKind::ClassicalIntermittent => {
            cfg.dither_sum(t, measured, u, dx);
            dx.iter_mut().for_each(|v| *v *= cfg.sqrt_omega);
        }
        SchemeKind::Freeze => {
            if measured == 0.0 {
                dx.iter_mut().for_each(|v| *v = 0.0);
            } else {
                cfg.dither_sum(tau, measured, u, dx);
                dx.iter_mut().for_each(|v| *v *= cfg.sqrt_omega);
            }
        }
        SchemeKind::GradientHold | SchemeKind::AdaptiveAmplitude => match state.phase {
            Phase::Dithering => {
                cfg.dither_sum(t, measured, u, dx);
                let gain = if cfg.kind == SchemeKind::AdaptiveAmplitude {
                    state.alpha
                } else {
                    1.0
                };
                let to_acc = cfg.sqrt_omega / (gain * cfg.period);
                for (a, d) in dacc.iter_mut().zip(dx.iter_mut()) {
                    *a = to_acc * *d;
                    *d *= gain * cfg.sqrt_omega;
                }
            }
            Phase::Holding => {
                for (d, g) in dx.iter_mut().zip(&state.g_held) {
                    *d = cfg.rho2 * g;
                }
            }
            Phase::WaitingFirstPulse => dx.iter_mut().for_each(|v| *v = 0.0),
        },
        SchemeKind::LieBracketReference => {
            cost.grad_into(x, dx);
            dx.iter_mut().for_each(|v| *v *= -cfg.rho);
        }
    }
}
