//! Dither signals, their common period, and the γ coefficients of the
//! associated Lie-bracket system.
//!
//! Every dither is a 2π-periodic, zero-mean signal bounded by one, evaluated
//! at phase `k·ω·t` where `k` is a positive rational frequency multiplier.
//! The common period of a bank of dithers is computed over exact rationals
//! so that long simulations never accumulate period drift.

use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use num_integer::Integer;

use crate::error::{config, Error, Result};

/// Default number of quadrature points per dither period.
pub const DEFAULT_QUAD_POINTS: usize = 512;

/// Positive rational frequency multiplier `num/den`, always stored reduced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Multiplier {
    num: u64,
    den: u64,
}

impl Multiplier {
    pub fn new(num: u64, den: u64) -> Result<Self> {
        if num == 0 || den == 0 {
            return config(format!(
                "frequency multiplier must be a positive rational, got {num}/{den}"
            ));
        }
        let g = num.gcd(&den);
        Ok(Self {
            num: num / g,
            den: den / g,
        })
    }

    pub fn integer(k: u64) -> Result<Self> {
        Self::new(k, 1)
    }

    pub fn one() -> Self {
        Self { num: 1, den: 1 }
    }

    pub fn numer(&self) -> u64 {
        self.num
    }

    pub fn denom(&self) -> u64 {
        self.den
    }

    pub fn value(&self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

impl fmt::Display for Multiplier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den == 1 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/{}", self.num, self.den)
        }
    }
}

impl FromStr for Multiplier {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parse = |part: &str| {
            part.trim()
                .parse::<u64>()
                .map_err(|_| Error::Config(format!("invalid frequency multiplier `{s}`")))
        };
        match s.split_once('/') {
            Some((n, d)) => Self::new(parse(n)?, parse(d)?),
            None => Self::new(parse(s)?, 1),
        }
    }
}

/// Shape of a dither over one 2π period.
#[derive(Debug, Clone, PartialEq)]
pub enum DitherKind {
    Cosine,
    Sine,
    /// Piecewise-linear table sampled uniformly on the closed interval
    /// [0, 2π]; the first sample sits at phase 0 and the last at 2π.
    Custom(CustomTable),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CustomTable {
    samples: Vec<f64>,
    // running integral of the interpolant at each node
    cumulative: Vec<f64>,
}

impl CustomTable {
    fn new(samples: Vec<f64>) -> Result<Self> {
        if samples.is_empty() {
            return config("custom dither has an empty sample table");
        }
        if samples.len() < 2 {
            return config("custom dither table needs at least two samples (phase 0 and 2π)");
        }
        if let Some(bad) = samples.iter().find(|v| !v.is_finite()) {
            return config(format!("custom dither sample {bad} is not finite"));
        }
        let h = TAU / (samples.len() - 1) as f64;
        let mut cumulative = Vec::with_capacity(samples.len());
        cumulative.push(0.0);
        for w in samples.windows(2) {
            let last = *cumulative.last().unwrap();
            cumulative.push(last + 0.5 * h * (w[0] + w[1]));
        }
        Ok(Self {
            samples,
            cumulative,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    fn segments(&self) -> usize {
        self.samples.len() - 1
    }

    fn period_integral(&self) -> f64 {
        *self.cumulative.last().unwrap()
    }

    /// Locates a phase in [0, 2π) as (segment index, offset within segment).
    fn locate(&self, reduced: f64) -> (usize, f64) {
        let h = TAU / self.segments() as f64;
        let pos = reduced / h;
        let idx = (pos.floor() as usize).min(self.segments() - 1);
        (idx, reduced - idx as f64 * h)
    }

    fn value(&self, reduced: f64) -> f64 {
        let h = TAU / self.segments() as f64;
        let (i, off) = self.locate(reduced);
        let s = off / h;
        self.samples[i] * (1.0 - s) + self.samples[i + 1] * s
    }

    fn integral_to(&self, reduced: f64) -> f64 {
        let h = TAU / self.segments() as f64;
        let (i, off) = self.locate(reduced);
        let slope = (self.samples[i + 1] - self.samples[i]) / h;
        self.cumulative[i] + self.samples[i] * off + 0.5 * slope * off * off
    }
}

/// A single dither `u(k·phase)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DitherSignal {
    kind: DitherKind,
    k: Multiplier,
}

fn reduce_phase(phase: f64) -> (f64, f64) {
    let turns = (phase / TAU).floor();
    let mut reduced = phase - turns * TAU;
    if reduced >= TAU {
        reduced -= TAU;
    }
    if reduced < 0.0 {
        reduced = 0.0;
    }
    (turns, reduced)
}

impl DitherSignal {
    pub fn cosine(k: Multiplier) -> Self {
        Self {
            kind: DitherKind::Cosine,
            k,
        }
    }

    pub fn sine(k: Multiplier) -> Self {
        Self {
            kind: DitherKind::Sine,
            k,
        }
    }

    pub fn custom(samples: Vec<f64>, k: Multiplier) -> Result<Self> {
        Ok(Self {
            kind: DitherKind::Custom(CustomTable::new(samples)?),
            k,
        })
    }

    pub fn kind(&self) -> &DitherKind {
        &self.kind
    }

    pub fn multiplier(&self) -> Multiplier {
        self.k
    }

    /// `u(phase)`; the phase is reduced modulo 2π.
    pub fn value(&self, phase: f64) -> f64 {
        match &self.kind {
            DitherKind::Cosine => phase.cos(),
            DitherKind::Sine => phase.sin(),
            DitherKind::Custom(table) => table.value(reduce_phase(phase).1),
        }
    }

    /// Exact antiderivative `∫₀^phase u(s) ds` of the signal.
    pub fn antiderivative(&self, phase: f64) -> f64 {
        match &self.kind {
            DitherKind::Cosine => phase.sin(),
            DitherKind::Sine => 1.0 - phase.cos(),
            DitherKind::Custom(table) => {
                let (turns, reduced) = reduce_phase(phase);
                turns * table.period_integral() + table.integral_to(reduced)
            }
        }
    }

    /// Dither value at time `t` for base frequency `omega`: `u(k·ω·t)`.
    #[inline]
    pub fn at(&self, omega: f64, t: f64) -> f64 {
        self.value(self.k.value() * omega * t)
    }
}

/// `u(phase)` for a dither.
pub fn dither_value(d: &DitherSignal, phase: f64) -> f64 {
    d.value(phase)
}

/// 2π·LCM(k₁⁻¹, …, k_l⁻¹), evaluated over exact rationals.
///
/// For reduced fractions the LCM is LCM(numerators)/GCD(denominators); the
/// inverse of `p/q` is `q/p`.
pub fn common_period_ratio(ks: &[Multiplier]) -> Result<(u64, u64)> {
    let first = match ks.first() {
        Some(k) => *k,
        None => return config("common period of an empty dither set"),
    };
    let (mut num, mut den) = (first.den, first.num);
    for k in &ks[1..] {
        num = num.lcm(&k.den);
        den = den.gcd(&k.num);
    }
    Ok((num, den))
}

pub fn common_period_of(ks: &[Multiplier]) -> Result<f64> {
    let (num, den) = common_period_ratio(ks)?;
    Ok(TAU * num as f64 / den as f64)
}

/// Ordered set of dithers sharing a common period `C`.
#[derive(Debug, Clone, PartialEq)]
pub struct DitherBank {
    dithers: Vec<DitherSignal>,
    common_period: f64,
}

impl DitherBank {
    pub fn new(dithers: Vec<DitherSignal>) -> Result<Self> {
        if dithers.len() < 2 {
            return config(format!(
                "a dither bank needs at least two dithers, got {}",
                dithers.len()
            ));
        }
        let ks: Vec<Multiplier> = dithers.iter().map(|d| d.k).collect();
        let common_period = common_period_of(&ks)?;
        Ok(Self {
            dithers,
            common_period,
        })
    }

    /// `u₁ = cos`, `u₂ = sin`, both at `k = 1`.
    pub fn cos_sin() -> Self {
        Self::per_axis(1)
    }

    /// One cos/sin pair per axis; axis `m` (1-based) runs at `k = m` so
    /// that the cross-axis γ coefficients vanish.
    pub fn per_axis(n: usize) -> Self {
        let n = n.max(1);
        let mut dithers = Vec::with_capacity(2 * n);
        for m in 1..=n as u64 {
            let k = Multiplier::integer(m).expect("axis index is positive");
            dithers.push(DitherSignal::cosine(k));
            dithers.push(DitherSignal::sine(k));
        }
        Self::new(dithers).expect("per-axis bank is well formed")
    }

    pub fn dithers(&self) -> &[DitherSignal] {
        &self.dithers
    }

    pub fn len(&self) -> usize {
        self.dithers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dithers.is_empty()
    }

    /// Common period `C` in phase units (radians).
    pub fn common_period(&self) -> f64 {
        self.common_period
    }

    /// Common period in seconds, `T = C/ω`.
    pub fn time_period(&self, omega: f64) -> f64 {
        self.common_period / omega
    }

    /// Writes `u_i(k_i·ω·t)` for every dither into `out`.
    #[inline]
    pub fn values_into(&self, omega: f64, t: f64, out: &mut [f64]) {
        for (o, d) in out.iter_mut().zip(&self.dithers) {
            *o = d.at(omega, t);
        }
    }
}

/// `common_period(bank)` as a free function.
pub fn common_period(bank: &DitherBank) -> f64 {
    bank.common_period()
}

/// The l×l matrix of γ coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaMatrix {
    l: usize,
    entries: Vec<f64>,
}

impl GammaMatrix {
    pub fn from_entries(l: usize, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != l * l {
            return config(format!(
                "γ matrix of size {l} needs {} entries, got {}",
                l * l,
                entries.len()
            ));
        }
        Ok(Self { l, entries })
    }

    /// 2×2 matrix with the given γ₁₂ and γ₂₁ = −γ₁₂.
    pub fn pair(g12: f64) -> Self {
        Self {
            l: 2,
            entries: vec![0.0, g12, -g12, 0.0],
        }
    }

    pub fn size(&self) -> usize {
        self.l
    }

    /// γ_ij with 0-based indices.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.l + j]
    }

    pub fn max_abs_diff(&self, other: &GammaMatrix) -> f64 {
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Largest |γ_ij + γ_ji|.
    pub fn antisymmetry_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.l {
            for j in 0..self.l {
                worst = worst.max((self.get(i, j) + self.get(j, i)).abs());
            }
        }
        worst
    }
}

/// γ_ij = (ω/T)∫₀^T u_j(k_jωθ) ∫₀^θ u_i(k_iωτ) dτ dθ with T = C/ω.
///
/// The inner integral is taken from each dither's exact antiderivative; the
/// outer one is a composite trapezoid over the common period with at least
/// `quad_points_per_period` nodes per period of the fastest dither.
pub fn gamma_matrix(
    bank: &DitherBank,
    omega: f64,
    quad_points_per_period: usize,
) -> Result<GammaMatrix> {
    if !(omega > 0.0 && omega.is_finite()) {
        return config(format!("ω must be positive, got {omega}"));
    }
    if quad_points_per_period < 64 {
        return config(format!(
            "at least 64 quadrature points per period are required, got {quad_points_per_period}"
        ));
    }
    let l = bank.len();
    let c = bank.common_period();
    let period = c / omega;
    let k_max = bank
        .dithers()
        .iter()
        .map(|d| d.multiplier().value())
        .fold(0.0, f64::max);
    let own_periods = (c * k_max / TAU - 1e-9).ceil().max(1.0);
    let nodes = quad_points_per_period * own_periods as usize;
    let h = period / nodes as f64;

    let mut values = vec![0.0; l];
    let mut inner = vec![0.0; l];
    let mut sums = vec![0.0; l * l];
    for m in 0..=nodes {
        let theta = m as f64 * h;
        let w = if m == 0 || m == nodes { 0.5 } else { 1.0 };
        for (idx, d) in bank.dithers().iter().enumerate() {
            let rate = d.multiplier().value() * omega;
            values[idx] = d.value(rate * theta);
            inner[idx] = d.antiderivative(rate * theta) / rate;
        }
        for i in 0..l {
            for j in 0..l {
                sums[i * l + j] += w * values[j] * inner[i];
            }
        }
    }
    let scale = omega / period * h;
    let entries = sums.into_iter().map(|s| s * scale).collect();
    GammaMatrix::from_entries(l, entries)
}

/// One line of a validation report.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DitherReport {
    pub bounded: Check,
    pub periodic: Check,
    pub zero_mean: Check,
    /// Mean value over one period.
    pub mean: f64,
}

impl DitherReport {
    pub fn passed(&self) -> bool {
        self.bounded.passed && self.periodic.passed && self.zero_mean.passed
    }

    pub fn checks(&self) -> [&Check; 3] {
        [&self.bounded, &self.periodic, &self.zero_mean]
    }
}

const BUILTIN_MEAN_TOL: f64 = 1e-9;
const CUSTOM_MEAN_TOL: f64 = 1e-6;

/// Checks the bound, periodicity and zero-mean requirements on a dither.
pub fn validate_dither(d: &DitherSignal) -> DitherReport {
    let n = DEFAULT_QUAD_POINTS;
    let h = TAU / n as f64;
    let phases = (0..n).map(|m| m as f64 * h);

    let (max_abs, integral, endpoint_gap, tol) = match d.kind() {
        DitherKind::Custom(table) => {
            let max_abs = table.samples().iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            let s = table.samples();
            let gap = (s[0] - s[s.len() - 1]).abs();
            (max_abs, table.period_integral(), gap, CUSTOM_MEAN_TOL)
        }
        _ => {
            let max_abs = phases.clone().fold(0.0_f64, |m, p| m.max(d.value(p).abs()));
            // periodic trapezoid: endpoints merge into one node
            let integral = h * phases.clone().map(|p| d.value(p)).sum::<f64>();
            let gap = phases
                .map(|p| (d.value(p + TAU) - d.value(p)).abs())
                .fold(0.0, f64::max);
            (max_abs, integral, gap, BUILTIN_MEAN_TOL)
        }
    };

    let bounded = Check::new(
        "bounded by 1",
        max_abs <= 1.0 + 1e-12,
        format!("max |u| = {max_abs:.6e}"),
    );
    let periodic = Check::new(
        "2π-periodic",
        endpoint_gap <= 1e-9,
        format!("max |u(φ+2π) − u(φ)| = {endpoint_gap:.3e}"),
    );
    let zero_mean = Check::new(
        "zero mean",
        integral.abs() <= tol,
        format!("|∫u| = {:.3e} (tolerance {tol:.0e})", integral.abs()),
    );
    DitherReport {
        bounded,
        periodic,
        zero_mean,
        mean: integral / TAU,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn k(n: u64, d: u64) -> Multiplier {
        Multiplier::new(n, d).unwrap()
    }

    fn bank(pairs: &[(DitherKind, Multiplier)]) -> DitherBank {
        let ds = pairs
            .iter()
            .map(|(kind, m)| match kind {
                DitherKind::Cosine => DitherSignal::cosine(*m),
                DitherKind::Sine => DitherSignal::sine(*m),
                DitherKind::Custom(t) => DitherSignal::custom(t.samples().to_vec(), *m).unwrap(),
            })
            .collect();
        DitherBank::new(ds).unwrap()
    }

    /// Exact LCM of positive rationals by brute force over multiples: the
    /// smallest positive rational that is an integer multiple of each input.
    fn brute_rational_lcm(xs: &[(u64, u64)]) -> (u64, u64) {
        // all candidates share the common denominator D = product of dens
        let d: u64 = xs.iter().map(|x| x.1).product();
        let scaled: Vec<u64> = xs.iter().map(|(n, den)| n * (d / den)).collect();
        let mut m = 1;
        loop {
            if scaled.iter().all(|s| m % s == 0) {
                let g = m.gcd(&d);
                return (m / g, d / g);
            }
            m += 1;
        }
    }

    #[test]
    fn dither_values() {
        let c = DitherSignal::cosine(Multiplier::one());
        let s = DitherSignal::sine(Multiplier::one());
        assert_eq!(dither_value(&c, 0.0), 1.0);
        assert!(dither_value(&s, PI).abs() < 1e-12);
        assert!((dither_value(&c, TAU + 0.3) - 0.3_f64.cos()).abs() < 1e-12);
    }

    #[test]
    fn empty_custom_table_is_rejected() {
        assert!(matches!(
            DitherSignal::custom(vec![], Multiplier::one()),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn multiplier_parsing_and_rejection() {
        assert_eq!("2/3".parse::<Multiplier>().unwrap(), k(2, 3));
        assert_eq!("4/6".parse::<Multiplier>().unwrap(), k(2, 3));
        assert_eq!("5".parse::<Multiplier>().unwrap(), k(5, 1));
        assert!("0".parse::<Multiplier>().is_err());
        assert!("1/0".parse::<Multiplier>().is_err());
        assert!("-1".parse::<Multiplier>().is_err());
    }

    #[test]
    fn common_period_examples() {
        let cases = [
            (vec![k(1, 1), k(1, 1)], 1.0),
            (vec![k(1, 1), k(2, 1)], 1.0),
            (vec![k(2, 3), k(1, 1)], 3.0),
        ];
        for (ks, expected_turns) in cases {
            // oracle: brute-force LCM of the inverses
            let inverses: Vec<(u64, u64)> = ks.iter().map(|m| (m.denom(), m.numer())).collect();
            let (n, d) = brute_rational_lcm(&inverses);
            assert_eq!(n as f64 / d as f64, expected_turns);
            assert_eq!(common_period_ratio(&ks).unwrap(), (n, d));
            let c = common_period_of(&ks).unwrap();
            assert!((c - TAU * expected_turns).abs() < 1e-12);
        }
    }

    #[test]
    fn bank_requires_two_dithers() {
        let one = vec![DitherSignal::cosine(Multiplier::one())];
        assert!(DitherBank::new(one).is_err());
    }

    #[test]
    fn gamma_cos_sin_pair() {
        let g = gamma_matrix(&DitherBank::cos_sin(), 20.0 * PI, DEFAULT_QUAD_POINTS).unwrap();
        assert!((g.get(0, 1) - 0.5).abs() < 1e-8, "γ12 = {}", g.get(0, 1));
        assert!((g.get(1, 0) + 0.5).abs() < 1e-8);

        let sc = bank(&[
            (DitherKind::Sine, Multiplier::one()),
            (DitherKind::Cosine, Multiplier::one()),
        ]);
        let g = gamma_matrix(&sc, 20.0 * PI, DEFAULT_QUAD_POINTS).unwrap();
        assert!((g.get(0, 1) + 0.5).abs() < 1e-8, "γ12 = {}", g.get(0, 1));
    }

    #[test]
    fn gamma_mismatched_frequencies_vanish() {
        let b = bank(&[
            (DitherKind::Cosine, k(1, 1)),
            (DitherKind::Sine, k(2, 1)),
        ]);
        let g = gamma_matrix(&b, 20.0 * PI, DEFAULT_QUAD_POINTS).unwrap();
        assert!(g.get(0, 1).abs() < 1e-8);
    }

    #[test]
    fn gamma_rejects_bad_inputs() {
        let b = DitherBank::cos_sin();
        assert!(gamma_matrix(&b, 0.0, 512).is_err());
        assert!(gamma_matrix(&b, 1.0, 32).is_err());
    }

    #[test]
    fn gamma_omega_invariance_and_convergence() {
        let banks = [
            DitherBank::cos_sin(),
            DitherBank::per_axis(3),
            bank(&[
                (DitherKind::Cosine, k(2, 3)),
                (DitherKind::Sine, k(1, 1)),
                (DitherKind::Cosine, k(1, 1)),
            ]),
        ];
        for b in &banks {
            let lo = gamma_matrix(b, 20.0 * PI, 512).unwrap();
            let hi = gamma_matrix(b, 2002.0 * PI, 512).unwrap();
            assert!(lo.max_abs_diff(&hi) < 1e-8);
            assert!(lo.antisymmetry_defect() < 1e-8);
            let coarse = gamma_matrix(b, 20.0 * PI, 256).unwrap();
            let fine = gamma_matrix(b, 20.0 * PI, 512).unwrap();
            assert!(coarse.max_abs_diff(&fine) < 1e-6);
        }
    }

    #[test]
    fn custom_table_interpolates_and_integrates() {
        let n = 64;
        let samples: Vec<f64> = (0..=n).map(|j| (TAU * j as f64 / n as f64).sin()).collect();
        let d = DitherSignal::custom(samples, Multiplier::one()).unwrap();
        // node values are exact
        let h = TAU / n as f64;
        assert!((d.value(3.0 * h) - (3.0 * h).sin()).abs() < 1e-12);
        // interpolation error of a linear interpolant is bounded by h²/8
        assert!((d.value(0.5) - 0.5_f64.sin()).abs() < h * h / 8.0 + 1e-12);
        // antiderivative continues across periods
        let one_turn = d.antiderivative(TAU);
        assert!(one_turn.abs() < 1e-12);
        assert!((d.antiderivative(TAU + 1.0) - d.antiderivative(1.0)).abs() < 1e-12);
    }

    #[test]
    fn validation_reports() {
        assert!(validate_dither(&DitherSignal::cosine(Multiplier::one())).passed());
        assert!(validate_dither(&DitherSignal::sine(k(3, 2))).passed());

        let constant = DitherSignal::custom(vec![1.0; 33], Multiplier::one()).unwrap();
        let r = validate_dither(&constant);
        assert!(!r.zero_mean.passed);
        assert!(r.bounded.passed && r.periodic.passed);
        assert!((r.mean - 1.0).abs() < 1e-12);

        let n = 200;
        let half_sine: Vec<f64> = (0..=n)
            .map(|j| 0.5 * (TAU * j as f64 / n as f64).sin())
            .collect();
        // oracle: trapezoid quadrature of the tabulated sine
        let h = TAU / n as f64;
        let oracle: f64 = half_sine.windows(2).map(|w| 0.5 * h * (w[0] + w[1])).sum();
        assert!(oracle.abs() < 1e-6);
        let r = validate_dither(&DitherSignal::custom(half_sine, Multiplier::one()).unwrap());
        assert!(r.passed(), "{r:?}");

        let ramp: Vec<f64> = (0..=10).map(|j| -1.0 + 0.2 * j as f64).collect();
        let r = validate_dither(&DitherSignal::custom(ramp, Multiplier::one()).unwrap());
        assert!(!r.periodic.passed);

        let loud = DitherSignal::custom(vec![0.0, 2.0, 0.0, -2.0, 0.0], Multiplier::one()).unwrap();
        assert!(!validate_dither(&loud).bounded.passed);
    }
}
