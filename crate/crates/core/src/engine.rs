//! Fixed-step integration with event-aligned stepping.
//!
//! Steps live on a global grid `t0 + j·dt` and are shortened whenever a
//! measurement edge, a dither-period boundary or `t_end` falls inside them,
//! so the right-hand side is smooth on every step. The measurement branch of
//! a step is read at its midpoint. Controllers see only the measured value;
//! rising edges are detected from `0 → nonzero` switches of that value.
//!
//! While the freeze scheme is transmitting, steps are aligned to the grid
//! `τ0 + j·dt` of its dither clock instead. Its sampled path then coincides
//! with a continuous run started at `t = τ0`, up to the extra splits at edges.

use std::fmt;
use std::str::FromStr;

use crate::costs::{distance, CostField};
use crate::error::{check_dim, config, contract, Error, Result};
use crate::measurement::MeasurementSchedule;
use crate::schemes::{
    derivative, next_period_boundary, on_period_boundary, on_rising_edge, Phase, SchemeConfig, SchemeKind,
    SchemeState,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Rk4,
    Euler,
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rk4" => Ok(Method::Rk4),
            "euler" => Ok(Method::Euler),
            other => config(format!("unknown integration method `{other}`, expected rk4 or euler")),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Rk4 => "rk4",
            Method::Euler => "euler",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EngineConfig {
    pub t0: f64,
    pub t_end: f64,
    /// Nominal step is `T / steps_per_dither_period`, capped at `T_s/100`.
    pub steps_per_dither_period: usize,
    pub method: Method,
    /// Record every k-th grid point (events are always recorded).
    pub sample_stride: usize,
    /// Abort radius around the minimizer; defaults to `10³·(1 + ‖x0 − x*‖)`.
    pub blowup: Option<f64>,
}

impl EngineConfig {
    pub const DEFAULT_STEPS_PER_DITHER_PERIOD: usize = 200;
    pub const DEFAULT_SAMPLE_STRIDE: usize = 10;

    pub fn new(t0: f64, t_end: f64) -> Self {
        Self {
            t0,
            t_end,
            steps_per_dither_period: Self::DEFAULT_STEPS_PER_DITHER_PERIOD,
            method: Method::Rk4,
            sample_stride: Self::DEFAULT_SAMPLE_STRIDE,
            blowup: None,
        }
    }

    pub fn with_steps(mut self, steps: usize) -> Self {
        self.steps_per_dither_period = steps;
        self
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.sample_stride = stride;
        self
    }

    pub fn with_blowup(mut self, blowup: f64) -> Self {
        self.blowup = Some(blowup);
        self
    }

    pub fn with_method(mut self, method: Method) -> Self {
        self.method = method;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t0.is_finite() && self.t_end.is_finite() && self.t_end > self.t0) {
            return config(format!("need t_end > t0, got t0 = {}, t_end = {}", self.t0, self.t_end));
        }
        if self.steps_per_dither_period < 32 {
            return config(format!(
                "steps_per_dither_period must be at least 32, got {}",
                self.steps_per_dither_period
            ));
        }
        if self.sample_stride == 0 {
            return config("sample_stride must be at least 1");
        }
        if let Some(b) = self.blowup {
            if !(b > 0.0) {
                return config(format!("blow-up radius must be positive, got {b}"));
            }
        }
        Ok(())
    }

    /// Nominal step for a scheme and schedule.
    pub fn step(&self, scheme: &SchemeConfig, sched: &MeasurementSchedule) -> f64 {
        (scheme.period() / self.steps_per_dither_period as f64).min(sched.period() / 100.0)
    }
}

/// Everything needed to reproduce a run.
#[derive(Debug, Clone)]
pub struct RunMeta {
    pub scheme: SchemeConfig,
    /// The schedule actually used (continuous for `ClassicalContinuous`).
    pub schedule: MeasurementSchedule,
    pub engine: EngineConfig,
    pub x0: Vec<f64>,
    pub x_star: Vec<f64>,
    pub dt: f64,
    pub blowup: f64,
}

/// State and estimate at the moment a scheme switches to holding.
#[derive(Debug, Clone, PartialEq)]
pub struct HoldSwitch {
    pub time: f64,
    pub x: Vec<f64>,
    pub g: Vec<f64>,
}

/// Recorded samples in columnar form.
#[derive(Debug, Clone)]
pub struct Trajectory {
    dim: usize,
    t: Vec<f64>,
    x: Vec<f64>,
    h_m: Vec<f64>,
    tau: Vec<f64>,
    alpha: Vec<f64>,
    phase: Vec<Phase>,
    g: Vec<f64>,
    hold_switches: Vec<HoldSwitch>,
    aborted_at: Option<f64>,
    steps: u64,
    meta: RunMeta,
}

/// One recorded sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample<'a> {
    pub t: f64,
    pub x: &'a [f64],
    pub h_m: f64,
    pub tau: f64,
    pub alpha: f64,
    pub phase: Phase,
    pub g: &'a [f64],
}

impl Trajectory {
    fn new(meta: RunMeta) -> Self {
        Self {
            dim: meta.x0.len(),
            t: Vec::new(),
            x: Vec::new(),
            h_m: Vec::new(),
            tau: Vec::new(),
            alpha: Vec::new(),
            phase: Vec::new(),
            g: Vec::new(),
            hold_switches: Vec::new(),
            aborted_at: None,
            steps: 0,
            meta,
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn push(&mut self, t: f64, x: &[f64], h_m: f64, tau: f64, alpha: f64, phase: Phase, g: &[f64]) {
        if self.t.last() == Some(&t) {
            // an event recorded twice at the same instant keeps the later state
            self.t.pop();
            self.x.truncate(self.x.len() - self.dim);
            self.h_m.pop();
            self.tau.pop();
            self.alpha.pop();
            self.phase.pop();
            self.g.truncate(self.g.len() - self.dim);
        }
        self.t.push(t);
        self.x.extend_from_slice(x);
        self.h_m.push(h_m);
        self.tau.push(tau);
        self.alpha.push(alpha);
        self.phase.push(phase);
        self.g.extend_from_slice(g);
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn times(&self) -> &[f64] {
        &self.t
    }

    pub fn x(&self, k: usize) -> &[f64] {
        &self.x[k * self.dim..(k + 1) * self.dim]
    }

    pub fn g(&self, k: usize) -> &[f64] {
        &self.g[k * self.dim..(k + 1) * self.dim]
    }

    pub fn h_m(&self) -> &[f64] {
        &self.h_m
    }

    pub fn tau(&self) -> &[f64] {
        &self.tau
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn phases(&self) -> &[Phase] {
        &self.phase
    }

    pub fn sample(&self, k: usize) -> Sample<'_> {
        Sample {
            t: self.t[k],
            x: self.x(k),
            h_m: self.h_m[k],
            tau: self.tau[k],
            alpha: self.alpha[k],
            phase: self.phase[k],
            g: self.g(k),
        }
    }

    pub fn samples(&self) -> impl Iterator<Item = Sample<'_>> + '_ {
        (0..self.len()).map(|k| self.sample(k))
    }

    /// One coordinate of the state across all samples.
    pub fn component(&self, axis: usize) -> Vec<f64> {
        self.x.iter().skip(axis).step_by(self.dim).copied().collect()
    }

    pub fn final_x(&self) -> &[f64] {
        self.x(self.len() - 1)
    }

    pub fn hold_switches(&self) -> &[HoldSwitch] {
        &self.hold_switches
    }

    /// Time at which the run was stopped for leaving the blow-up radius or
    /// producing a non-finite value.
    pub fn aborted_at(&self) -> Option<f64> {
        self.aborted_at
    }

    /// Integration steps taken.
    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn meta(&self) -> &RunMeta {
        &self.meta
    }

    /// Bitwise comparison of every recorded column.
    pub fn same_samples(&self, other: &Trajectory) -> bool {
        fn bits(v: &[f64]) -> impl Iterator<Item = u64> + '_ {
            v.iter().map(|f| f.to_bits())
        }
        self.dim == other.dim
            && bits(&self.t).eq(bits(&other.t))
            && bits(&self.x).eq(bits(&other.x))
            && bits(&self.h_m).eq(bits(&other.h_m))
            && bits(&self.tau).eq(bits(&other.tau))
            && bits(&self.alpha).eq(bits(&other.alpha))
            && bits(&self.g).eq(bits(&other.g))
            && self.phase == other.phase
            && self.aborted_at.map(f64::to_bits) == other.aborted_at.map(f64::to_bits)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunMetrics {
    /// `sup ‖x − x*‖` over the final 20 % of the recorded horizon.
    pub steady_state_error: f64,
    /// First sample time after which `‖x − x*‖ ≤ band` holds until the end.
    pub convergence_time: Option<f64>,
    pub diverged: bool,
    pub max_excursion: f64,
}

/// Next point of the grid `origin + j·dt` strictly after `cur`.
fn grid_next(origin: f64, cur: f64, dt: f64) -> (f64, u64) {
    let j = ((cur - origin) / dt + 1e-6).floor() + 1.0;
    (origin + j * dt, j.max(0.0) as u64)
}

struct Workspace {
    u: Vec<f64>,
    k: [Vec<f64>; 4],
    a: [Vec<f64>; 4],
    xs: Vec<f64>,
}

impl Workspace {
    fn new(n: usize, l: usize) -> Self {
        Self {
            u: vec![0.0; l],
            k: std::array::from_fn(|_| vec![0.0; n]),
            a: std::array::from_fn(|_| vec![0.0; n]),
            xs: vec![0.0; n],
        }
    }
}

struct Step<'a> {
    scheme: &'a SchemeConfig,
    cost: &'a CostField,
    transmitting: bool,
}

impl Step<'_> {
    #[inline]
    #[allow(clippy::too_many_arguments)]
    fn eval(&self, state: &SchemeState, t: f64, tau: f64, x: &[f64], u: &mut [f64], dx: &mut [f64], da: &mut [f64]) {
        let measured = if self.transmitting { self.cost.value(x) } else { 0.0 };
        derivative(self.scheme, state, self.cost, t, tau, x, measured, u, dx, da);
    }

    /// Advances `state.x` and `state.accumulator` by `h`. Stage times are
    /// `t + c·h`, stage dither clocks `tau + c·h`.
    fn advance(&self, method: Method, state: &mut SchemeState, t: f64, tau: f64, h: f64, ws: &mut Workspace) {
        let n = state.x.len();
        match method {
            Method::Euler => {
                let (k, a) = (&mut ws.k[0], &mut ws.a[0]);
                self.eval(state, t, tau, &state.x, &mut ws.u, k, a);
                for i in 0..n {
                    state.x[i] += h * k[i];
                    state.accumulator[i] += h * a[i];
                }
            }
            Method::Rk4 => {
                let half = 0.5 * h;
                let [k1, k2, k3, k4] = &mut ws.k;
                let [a1, a2, a3, a4] = &mut ws.a;
                self.eval(state, t, tau, &state.x, &mut ws.u, k1, a1);
                for i in 0..n {
                    ws.xs[i] = state.x[i] + half * k1[i];
                }
                self.eval(state, t + half, tau + half, &ws.xs, &mut ws.u, k2, a2);
                for i in 0..n {
                    ws.xs[i] = state.x[i] + half * k2[i];
                }
                self.eval(state, t + half, tau + half, &ws.xs, &mut ws.u, k3, a3);
                for i in 0..n {
                    ws.xs[i] = state.x[i] + h * k3[i];
                }
                self.eval(state, t + h, tau + h, &ws.xs, &mut ws.u, k4, a4);
                let sixth = h / 6.0;
                for i in 0..n {
                    state.x[i] += sixth * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
                    state.accumulator[i] += sixth * (a1[i] + 2.0 * a2[i] + 2.0 * a3[i] + a4[i]);
                }
            }
        }
    }
}

fn dither_clock(scheme: &SchemeConfig, state: &SchemeState, t: f64) -> f64 {
    state.dither_time(scheme, t)
}

/// Integrates one run from `eng.t0` to `eng.t_end`.
pub fn simulate(
    scheme: &SchemeConfig,
    sched: &MeasurementSchedule,
    cost: &CostField,
    eng: &EngineConfig,
    x0: &[f64],
) -> Result<Trajectory> {
    eng.validate()?;
    check_dim(scheme.dim(), x0.len())?;
    check_dim(scheme.dim(), cost.dim())?;
    if x0.iter().any(|v| !v.is_finite()) {
        return config("initial state must be finite");
    }
    let kind = scheme.kind();
    let sched = if kind == SchemeKind::ClassicalContinuous && !sched.is_continuous() {
        MeasurementSchedule::continuous(sched.period())?
    } else {
        *sched
    };
    if kind.holds_gradient() && sched.is_continuous() {
        return config(format!(
            "{kind} needs pulsed measurements to detect rising edges; use eps < Ts"
        ));
    }

    let dt = eng.step(scheme, &sched);
    let tol = 1e-6 * dt;
    let x_star = cost.minimizer().to_vec();
    let blowup = eng.blowup.unwrap_or(1e3 * (1.0 + distance(x0, &x_star)));
    let freeze = kind == SchemeKind::Freeze;
    let mut traj = Trajectory::new(RunMeta {
        scheme: scheme.clone(),
        schedule: sched,
        engine: eng.clone(),
        x0: x0.to_vec(),
        x_star: x_star.clone(),
        dt,
        blowup,
    });
    let mut st = SchemeState::new(scheme, x0, eng.t0)?;
    let mut ws = Workspace::new(x0.len(), scheme.dithers().len());
    let transmitting_after = |t: f64| sched.is_transmitting(t + tol);
    let measured = |transmitting: bool, x: &[f64]| if transmitting { cost.value(x) } else { 0.0 };

    let mut t = eng.t0;
    let left = measured(sched.is_transmitting(t - tol), x0);
    let right = measured(transmitting_after(t), x0);
    if left == 0.0 && right != 0.0 {
        on_rising_edge(&mut st, scheme, t)?;
    }
    let record = |traj: &mut Trajectory, st: &SchemeState, t: f64| {
        let h_m = measured(transmitting_after(t), &st.x);
        traj.push(t, &st.x, h_m, dither_clock(scheme, st, t), st.alpha, st.phase, &st.g_held);
    };
    record(&mut traj, &st, t);

    let step = Step {
        scheme,
        cost,
        transmitting: true,
    };
    let mut step = step;
    while t < eng.t_end - tol {
        let tx_now = transmitting_after(t);
        let on_tau_grid = freeze && tx_now;
        let (mut t_new, mut grid_idx, tau_target) = if on_tau_grid {
            let (tau_next, j) = grid_next(scheme.tau0(), st.tau, dt);
            (t + (tau_next - st.tau), Some(j), Some(tau_next))
        } else {
            let (tn, j) = grid_next(eng.t0, t, dt);
            (tn, Some(j), None)
        };

        let mut event = eng.t_end;
        if !sched.is_continuous() {
            event = event.min(sched.next_edge(t).time);
        }
        if let Some(b) = next_period_boundary(&st, scheme) {
            event = event.min(b);
        }
        let mut at_event = false;
        if event < t_new - tol {
            t_new = event;
            grid_idx = None;
            at_event = true;
        } else if event <= t_new + tol {
            t_new = event;
            at_event = true;
        }

        let h_t = t_new - t;
        step.transmitting = sched.is_transmitting(t + 0.5 * h_t);
        let tau_moves = freeze && step.transmitting;
        let (h, tau_new) = match (tau_moves, tau_target, grid_idx) {
            (true, Some(target), Some(_)) => (target - st.tau, target),
            (true, _, _) => (h_t, st.tau + h_t),
            (false, _, _) => (h_t, st.tau),
        };
        let tau_start = if freeze { st.tau } else { t };
        step.advance(eng.method, &mut st, t, tau_start, h, &mut ws);
        st.tau = tau_new;
        t = t_new;
        traj.steps += 1;

        let finite = st.x.iter().chain(&st.accumulator).all(|v| v.is_finite());
        if !finite || distance(&st.x, &x_star) > blowup {
            traj.aborted_at = Some(t);
            record(&mut traj, &st, t);
            log::info!("run aborted at t = {t}: state left the blow-up radius {blowup}");
            return Ok(traj);
        }

        let mut event_fired = at_event;
        if st.phase == Phase::Dithering {
            st.dither_elapsed = t - st.pulse_start;
        }
        if let Some(b) = next_period_boundary(&st, scheme) {
            if (t - b).abs() <= tol && on_period_boundary(&mut st, scheme, t)? {
                traj.hold_switches.push(HoldSwitch {
                    time: t,
                    x: st.x.clone(),
                    g: st.g_held.clone(),
                });
                event_fired = true;
            }
        }
        let left = measured(step.transmitting, &st.x);
        let right = measured(transmitting_after(t), &st.x);
        if left == 0.0 && right != 0.0 {
            on_rising_edge(&mut st, scheme, t)?;
            event_fired = true;
        }

        let due = grid_idx.is_some_and(|j| j % eng.sample_stride as u64 == 0);
        if event_fired || due || t >= eng.t_end - tol {
            record(&mut traj, &st, t);
        }
    }
    Ok(traj)
}

/// Band and divergence metrics of a recorded run.
pub fn metrics(traj: &Trajectory, x_star: &[f64], band: f64, blowup: f64) -> Result<RunMetrics> {
    if traj.is_empty() {
        return contract("metrics of an empty trajectory");
    }
    check_dim(traj.dim(), x_star.len())?;
    if !(band > 0.0 && blowup > band) {
        return contract(format!("need 0 < band < blowup, got band = {band}, blowup = {blowup}"));
    }
    let times = traj.times();
    let (first, last) = (times[0], times[times.len() - 1]);
    let tail_start = first + 0.8 * (last - first);
    let mut steady: f64 = 0.0;
    let mut max_excursion: f64 = 0.0;
    let mut last_outside = None;
    for k in 0..traj.len() {
        let d = distance(traj.x(k), x_star);
        let d = if d.is_nan() { f64::INFINITY } else { d };
        max_excursion = max_excursion.max(d);
        if times[k] >= tail_start {
            steady = steady.max(d);
        }
        if d > band {
            last_outside = Some(k);
        }
    }
    let diverged = traj.aborted_at().is_some() || max_excursion > blowup;
    let convergence_time = if diverged {
        None
    } else {
        match last_outside {
            None => Some(first),
            Some(k) if k + 1 < traj.len() => Some(times[k + 1]),
            Some(_) => None,
        }
    };
    Ok(RunMetrics {
        steady_state_error: steady,
        convergence_time,
        diverged,
        max_excursion,
    })
}

fn hermite(t0: f64, t1: f64, y0: f64, y1: f64, d0: f64, d1: f64, s: f64) -> f64 {
    let h = t1 - t0;
    let u = (s - t0) / h;
    let (u2, u3) = (u * u, u * u * u);
    (2.0 * u3 - 3.0 * u2 + 1.0) * y0
        + (u3 - 2.0 * u2 + u) * h * d0
        + (-2.0 * u3 + 3.0 * u2) * y1
        + (u3 - u2) * h * d1
}

/// Runs the freeze scheme and the continuous scheme with the same
/// parameters and returns `sup_t ‖x_freeze(t) − x_cont(τ(t))‖`.
///
/// The continuous run starts at `t = τ0` and is resampled at the recorded
/// dither clock by cubic Hermite interpolation.
pub fn verify_path_equivalence(
    scheme: &SchemeConfig,
    cost: &CostField,
    sched: &MeasurementSchedule,
    eng: &EngineConfig,
    x0: &[f64],
) -> Result<f64> {
    if scheme.kind() != SchemeKind::Freeze {
        return contract(format!("path equivalence needs a freeze scheme, got {}", scheme.kind()));
    }
    let frozen = simulate(scheme, sched, cost, eng, x0)?;
    if frozen.aborted_at().is_some() {
        return Err(Error::Invariant("freeze run diverged".into()));
    }
    let taus = frozen.tau();
    if taus.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Invariant("dither clock τ decreased".into()));
    }
    let tau_end = taus[taus.len() - 1];
    let deviation_at_start = distance(frozen.x(0), x0);
    if tau_end <= scheme.tau0() {
        return Ok(deviation_at_start);
    }
    let cont_scheme = scheme.with_kind(SchemeKind::ClassicalContinuous)?;
    let cont_eng = EngineConfig {
        t0: scheme.tau0(),
        t_end: tau_end,
        sample_stride: 1,
        ..eng.clone()
    };
    let cont = simulate(&cont_scheme, &MeasurementSchedule::continuous(sched.period())?, cost, &cont_eng, x0)?;
    if cont.aborted_at().is_some() {
        return Err(Error::Invariant("continuous run diverged".into()));
    }
    let ct = cont.times();
    let n = x0.len();
    let mut u = vec![0.0; cont_scheme.dithers().len()];
    let mut rhs = |t: f64, x: &[f64]| {
        let mut out = vec![0.0; n];
        cont_scheme.dither_sum(t, cost.value(x), &mut u, &mut out);
        let s = cont_scheme.omega().sqrt();
        out.iter_mut().for_each(|o| *o *= s);
        out
    };
    let mut sup: f64 = 0.0;
    for k in 0..frozen.len() {
        let s = taus[k];
        let i = ct.partition_point(|&c| c < s);
        let xc: Vec<f64> = if i < ct.len() && ct[i] == s {
            cont.x(i).to_vec()
        } else if i == 0 || i >= ct.len() {
            return Err(Error::Invariant(format!("τ = {s} outside the continuous run")));
        } else {
            let (t0, t1) = (ct[i - 1], ct[i]);
            let (x0s, x1s) = (cont.x(i - 1), cont.x(i));
            let (d0, d1) = (rhs(t0, x0s), rhs(t1, x1s));
            (0..n).map(|a| hermite(t0, t1, x0s[a], x1s[a], d0[a], d1[a], s)).collect()
        };
        sup = sup.max(distance(frozen.x(k), &xc));
    }
    Ok(sup)
}

/// Error `‖g + ρ∇h(x)‖` of the estimate at the first hold switch, for each ω.
pub fn verify_gradient_scaling(
    base: &SchemeConfig,
    cost: &CostField,
    sched: &MeasurementSchedule,
    eng: &EngineConfig,
    x0: &[f64],
    omegas: &[f64],
) -> Result<Vec<(f64, f64)>> {
    if base.kind() != SchemeKind::GradientHold {
        return contract(format!("gradient scaling needs a gradient-hold scheme, got {}", base.kind()));
    }
    let schemes = omegas
        .iter()
        .map(|&w| base.with_omega(w))
        .collect::<Result<Vec<_>>>()?;
    let mut out = Vec::with_capacity(omegas.len());
    for (cfg, &w) in schemes.iter().zip(omegas) {
        let run_eng = EngineConfig {
            t_end: eng.t0 + 2.0 * sched.period() + cfg.dither_window(),
            ..eng.clone()
        };
        let traj = simulate(cfg, sched, cost, &run_eng, x0)?;
        let sw = traj.hold_switches().first().ok_or_else(|| {
            Error::Invariant(format!("no hold switch within {} s at ω = {w}", run_eng.t_end - run_eng.t0))
        })?;
        let grad = cost.grad(&sw.x)?;
        let err = sw
            .g
            .iter()
            .zip(&grad)
            .map(|(g, d)| (g + cfg.rho() * d).powi(2))
            .sum::<f64>()
            .sqrt();
        out.push((w, err));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::FieldFamily;
    use crate::schemes::SchemeParams;
    use std::f64::consts::PI;

    fn scheme(kind: SchemeKind) -> SchemeConfig {
        SchemeConfig::new(SchemeParams::case_study(kind)).unwrap()
    }

    fn sched(eps: f64) -> MeasurementSchedule {
        MeasurementSchedule::case_study(eps).unwrap()
    }

    fn reference_oracle(t: f64) -> f64 {
        2.0 - 3.0 * (-0.5 * t).exp()
    }

    #[test]
    fn reference_system_matches_closed_form() {
        let eng = EngineConfig::new(0.0, 10.0).with_steps(100).with_stride(1);
        let traj = simulate(
            &scheme(SchemeKind::LieBracketReference),
            &sched(0.1),
            &CostField::case_study(),
            &eng,
            &[-1.0],
        )
        .unwrap();
        assert!((traj.meta().dt - 1e-3).abs() < 1e-15);
        let worst = traj
            .samples()
            .map(|s| (s.x[0] - reference_oracle(s.t)).abs())
            .fold(0.0, f64::max);
        assert!(worst < 1e-6, "{worst}");
        let k = traj.times().iter().position(|&t| t == 2.0).unwrap();
        assert!((traj.x(k)[0] - 0.89636).abs() < 1e-5);
    }

    #[test]
    fn trajectory_starts_and_ends_on_the_horizon() {
        let traj = simulate(
            &scheme(SchemeKind::ClassicalIntermittent),
            &sched(0.1),
            &CostField::case_study(),
            &EngineConfig::new(0.0, 3.3),
            &[-1.0],
        )
        .unwrap();
        let t = traj.times();
        assert_eq!(t[0], 0.0);
        assert_eq!(*t.last().unwrap(), 3.3);
        assert!(t.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn edges_appear_as_sample_times() {
        // ε = 0.17 makes the classical scheme diverge before t = 6
        let s = sched(0.1);
        for kind in [SchemeKind::ClassicalIntermittent, SchemeKind::Freeze, SchemeKind::GradientHold] {
            let traj = simulate(
                &scheme(kind),
                &s,
                &CostField::case_study(),
                &EngineConfig::new(0.0, 6.0).with_stride(1000),
                &[-1.0],
            )
            .unwrap();
            for e in s.edges_between(0.0, 6.0) {
                assert!(traj.times().contains(&e.time), "{kind}: missing edge at {}", e.time);
            }
        }
    }

    #[test]
    fn runs_are_deterministic() {
        let run = || {
            simulate(
                &scheme(SchemeKind::AdaptiveAmplitude),
                &sched(0.17),
                &CostField::case_study(),
                &EngineConfig::new(0.0, 5.0),
                &[-1.0],
            )
            .unwrap()
        };
        assert!(run().same_samples(&run()));
    }

    #[test]
    fn halving_the_step_barely_moves_the_final_state() {
        let s = sched(0.1);
        let h = CostField::case_study();
        for kind in [SchemeKind::ClassicalIntermittent, SchemeKind::Freeze, SchemeKind::GradientHold] {
            let c = scheme(kind);
            let coarse = simulate(&c, &s, &h, &EngineConfig::new(0.0, 10.0), &[-1.0]).unwrap();
            let fine = simulate(&c, &s, &h, &EngineConfig::new(0.0, 10.0).with_steps(400), &[-1.0]).unwrap();
            let diff = (coarse.final_x()[0] - fine.final_x()[0]).abs();
            assert!(diff < 1e-4, "{kind}: {diff}");
        }
    }

    #[test]
    fn euler_agrees_with_rk4_to_first_order() {
        let c = scheme(SchemeKind::LieBracketReference);
        let s = sched(0.1);
        let h = CostField::case_study();
        let err = |steps| {
            let eng = EngineConfig::new(0.0, 4.0).with_steps(steps).with_method(Method::Euler);
            let tr = simulate(&c, &s, &h, &eng, &[-1.0]).unwrap();
            (tr.final_x()[0] - reference_oracle(4.0)).abs()
        };
        let (e1, e2) = (err(100), err(200));
        assert!(e1 < 1e-3);
        assert!((e1 / e2 - 2.0).abs() < 0.05, "{e1} {e2}");
    }

    #[test]
    fn metrics_examples() {
        let h = CostField::case_study();
        let c = scheme(SchemeKind::LieBracketReference);
        let at_star = simulate(&c, &sched(0.1), &h, &EngineConfig::new(0.5, 3.0), &[2.0]).unwrap();
        let m = metrics(&at_star, &[2.0], 0.6, 10.0).unwrap();
        assert_eq!(m.steady_state_error, 0.0);
        assert_eq!(m.convergence_time, Some(0.5));
        assert!(!m.diverged);

        let fig2c = simulate(
            &scheme(SchemeKind::ClassicalIntermittent),
            &sched(0.17),
            &h,
            &EngineConfig::new(0.0, 4.0).with_blowup(10.0),
            &[-1.0],
        )
        .unwrap();
        assert!(fig2c.aborted_at().is_some());
        let m = metrics(&fig2c, &[2.0], 0.6, 10.0).unwrap();
        assert!(m.diverged);
        assert!(m.convergence_time.is_none());
        assert!(metrics(&at_star, &[2.0], 0.6, 0.5).is_err());
    }

    #[test]
    fn convergence_time_uses_entry_and_stay() {
        let h = CostField::case_study();
        let traj = simulate(
            &scheme(SchemeKind::LieBracketReference),
            &sched(0.1),
            &h,
            &EngineConfig::new(0.0, 20.0).with_stride(1),
            &[-1.0],
        )
        .unwrap();
        let m = metrics(&traj, &[2.0], 0.6, 100.0).unwrap();
        // 3·e^{−t/2} = 0.6 at t = 2 ln 5
        let expected = 2.0 * 5f64.ln();
        assert!((m.convergence_time.unwrap() - expected).abs() < 2.0 * traj.meta().dt);
        assert!((m.max_excursion - 3.0).abs() < 1e-12);
    }

    #[test]
    fn freeze_path_matches_continuous_path() {
        let h = CostField::case_study();
        let c = scheme(SchemeKind::Freeze);
        let eng = EngineConfig::new(0.0, 10.0).with_steps(256).with_stride(1);
        let dev = verify_path_equivalence(&c, &h, &sched(0.17), &eng, &[-1.0]).unwrap();
        assert!(dev < 1e-6, "{dev}");
        let dev = verify_path_equivalence(&c, &h, &MeasurementSchedule::continuous(1.0).unwrap(), &eng, &[-1.0]).unwrap();
        assert_eq!(dev, 0.0);
        let coarse = EngineConfig::new(0.0, 10.0).with_steps(32).with_stride(1);
        let dev = verify_path_equivalence(&c, &h, &sched(0.17), &coarse, &[-1.0]).unwrap();
        assert!(dev < 1e-3, "{dev}");
    }

    #[test]
    fn gradient_estimate_error_shrinks_with_omega() {
        let c = scheme(SchemeKind::GradientHold);
        let omegas = [20.0 * PI, 80.0 * PI, 320.0 * PI, 1280.0 * PI];
        let table = verify_gradient_scaling(
            &c,
            &CostField::case_study(),
            &sched(0.17),
            &EngineConfig::new(0.0, 1.0),
            &[-1.0],
            &omegas,
        )
        .unwrap();
        for w in table.windows(2) {
            assert!(w[1].1 / w[0].1 <= 0.75, "{table:?}");
        }
    }

    #[test]
    fn first_hold_switch_follows_the_first_rising_edge() {
        let traj = simulate(
            &scheme(SchemeKind::GradientHold),
            &sched(0.17),
            &CostField::case_study(),
            &EngineConfig::new(0.0, 3.0),
            &[-1.0],
        )
        .unwrap();
        let times: Vec<f64> = traj.hold_switches().iter().map(|s| s.time).collect();
        assert_eq!(times.len(), 3);
        for (m, t) in times.iter().enumerate() {
            assert!((t - (m as f64 + 0.1)).abs() < 1e-9, "{times:?}");
        }
    }

    #[test]
    fn gradient_hold_waits_for_the_first_pulse() {
        let traj = simulate(
            &scheme(SchemeKind::GradientHold),
            &sched(0.17),
            &CostField::case_study(),
            &EngineConfig::new(0.5, 1.05).with_stride(1),
            &[-1.0],
        )
        .unwrap();
        for s in traj.samples().filter(|s| s.t < 1.0) {
            assert_eq!(s.phase, Phase::WaitingFirstPulse);
            assert_eq!(s.x, &[-1.0]);
        }
        let k = traj.times().iter().position(|&t| t == 1.0).unwrap();
        assert_eq!(traj.phases()[k], Phase::Dithering);
    }

    #[test]
    fn averaged_closeness_improves_with_omega() {
        let h = CostField::case_study();
        let sup = |omega: f64| {
            let c = scheme(SchemeKind::ClassicalContinuous).with_omega(omega).unwrap();
            let tr = simulate(&c, &sched(1.0), &h, &EngineConfig::new(0.0, 25.0), &[-1.0]).unwrap();
            tr.samples()
                .map(|s| (s.x[0] - reference_oracle(s.t)).abs())
                .fold(0.0, f64::max)
        };
        let d: Vec<f64> = [20.0 * PI, 80.0 * PI, 320.0 * PI].into_iter().map(sup).collect();
        assert!(d[0] > d[1] && d[1] > d[2], "{d:?}");
    }

    #[test]
    fn classical_continuous_ignores_the_pulse_schedule() {
        let h = CostField::case_study();
        let c = scheme(SchemeKind::ClassicalContinuous);
        let eng = EngineConfig::new(0.0, 2.0);
        let a = simulate(&c, &sched(0.1), &h, &eng, &[-1.0]).unwrap();
        let b = simulate(&c, &MeasurementSchedule::continuous(1.0).unwrap(), &h, &eng, &[-1.0]).unwrap();
        assert!(a.same_samples(&b));
        assert!(a.h_m().iter().all(|&v| v != 0.0));
    }

    #[test]
    fn full_periods_inside_pulses_decrease_the_distance() {
        let h = CostField::case_study();
        let c = scheme(SchemeKind::ClassicalIntermittent).with_omega(2002.0 * PI).unwrap();
        let tp = c.period();
        let traj = simulate(&c, &sched(0.17), &h, &EngineConfig::new(0.0, 4.0).with_stride(1), &[-1.0]).unwrap();
        let t = traj.times();
        let mut checked = 0;
        for pulse in 0..4 {
            let start = pulse as f64;
            let mut m = 0;
            loop {
                let (a, b) = (start + m as f64 * tp, start + (m + 1) as f64 * tp);
                if b > start + 0.17 {
                    break;
                }
                let ia = t.partition_point(|&s| s < a - 1e-12);
                let ib = t.partition_point(|&s| s < b - 1e-12);
                assert!((t[ia] - a).abs() < 1e-9 && (t[ib] - b).abs() < 1e-9);
                let (da, db) = ((traj.x(ia)[0] - 2.0).abs(), (traj.x(ib)[0] - 2.0).abs());
                if da > 0.5 {
                    assert!(db < da, "period starting at {a}: {da} -> {db}");
                    checked += 1;
                }
                m += 1;
            }
        }
        assert!(checked > 100, "{checked}");
    }

    #[test]
    fn break_drift_stays_within_the_dither_bound() {
        let h = CostField::case_study();
        let c = scheme(SchemeKind::ClassicalIntermittent);
        let ms = 2.0 * PI; // ‖f₁(0)‖ + ‖f₂(0)‖ = 1, times C = 2π
        let bound = ms / c.omega().sqrt();
        let traj = simulate(&c, &sched(0.1), &h, &EngineConfig::new(0.0, 20.0).with_stride(1), &[-1.0]).unwrap();
        let s = sched(0.1);
        let mut start: Option<f64> = None;
        let mut checked = 0;
        for k in 0..traj.len() {
            let t = traj.times()[k];
            if s.is_transmitting(t + 1e-9) {
                start = None;
                continue;
            }
            let x0 = *start.get_or_insert(traj.x(k)[0]);
            assert!((traj.x(k)[0] - x0).abs() <= bound);
            checked += 1;
        }
        assert!(checked > 10_000);
    }

    #[test]
    fn adaptive_alpha_is_in_range_and_constant_per_pulse() {
        let s = sched(0.17);
        let traj = simulate(
            &scheme(SchemeKind::AdaptiveAmplitude),
            &s,
            &CostField::case_study(),
            &EngineConfig::new(0.0, 20.0),
            &[-1.0],
        )
        .unwrap();
        for w in 0..traj.len() {
            let a = traj.alpha()[w];
            assert!(a > 0.0 && a < 1.0);
        }
        for k in 1..traj.len() {
            let (t0, t1) = (traj.times()[k - 1], traj.times()[k]);
            if (t0 / s.period()).floor() == (t1 / s.period()).floor() && t0.fract() != 0.0 {
                assert_eq!(traj.alpha()[k - 1], traj.alpha()[k], "α changed inside a period at {t1}");
            }
        }
    }

    #[test]
    fn configuration_errors() {
        let h = CostField::case_study();
        let eng = EngineConfig::new(0.0, 1.0);
        let c = scheme(SchemeKind::GradientHold);
        assert!(matches!(simulate(&c, &sched(0.1), &h, &eng, &[0.0, 1.0]), Err(Error::Dimension { .. })));
        assert!(matches!(
            simulate(&c, &MeasurementSchedule::continuous(1.0).unwrap(), &h, &eng, &[0.0]),
            Err(Error::Config(_))
        ));
        assert!(simulate(&c, &sched(0.1), &h, &EngineConfig::new(1.0, 1.0), &[0.0]).is_err());
        assert!(simulate(&c, &sched(0.1), &h, &eng.clone().with_steps(16), &[0.0]).is_err());
    }

    #[test]
    fn two_dimensional_run_converges_under_the_reference_law() {
        let h = CostField::shifted_quadratic(vec![1.0, -1.0], nalgebra::DMatrix::identity(2, 2), 5.0).unwrap();
        let c = SchemeConfig::new(
            SchemeParams::case_study(SchemeKind::ClassicalContinuous)
                .with_omega(200.0 * PI)
                .with_fields(FieldFamily::affine(0.25, 2).unwrap()),
        )
        .unwrap();
        let traj = simulate(&c, &sched(1.0), &h, &EngineConfig::new(0.0, 30.0), &[0.0, 0.0]).unwrap();
        let m = metrics(&traj, &[1.0, -1.0], 0.6, 100.0).unwrap();
        assert!(m.steady_state_error < 0.6, "{m:?}");
    }
}
