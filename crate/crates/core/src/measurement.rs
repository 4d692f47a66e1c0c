//! Intermittent cost measurement: `h_m(t, x) = h(x)` while
//! `mod(t, T_s) ∈ [0, ε)`, and exactly `0` otherwise.
//!
//! Only the simulation engine sees the schedule. Controllers receive the
//! measured value and nothing else.

use crate::costs::CostField;
use crate::error::{config, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasurementSchedule {
    period: f64,
    width: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeKind {
    /// Measurement begins.
    Rising,
    /// Measurement ends.
    Falling,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeEvent {
    pub time: f64,
    pub kind: EdgeKind,
}

impl MeasurementSchedule {
    pub fn new(period: f64, width: f64) -> Result<Self> {
        if !(period > 0.0 && period.is_finite()) {
            return config(format!("transmission period Ts must be positive, got {period}"));
        }
        if !(width > 0.0 && width <= period) {
            return config(format!(
                "pulse width must satisfy 0 < eps <= Ts, got eps = {width}, Ts = {period}"
            ));
        }
        Ok(Self { period, width })
    }

    /// `T_s = 1 s` with the given pulse width (0.1 s or 0.17 s in the case study).
    pub fn case_study(width: f64) -> Result<Self> {
        Self::new(1.0, width)
    }

    /// Shortest pulse allowed for avalanche beacons: 70 ms every second.
    pub fn arva_min() -> Self {
        Self {
            period: 1.0,
            width: 0.07,
        }
    }

    /// `ε = T_s`: the cost is always measured.
    pub fn continuous(period: f64) -> Result<Self> {
        Self::new(period, period)
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn is_continuous(&self) -> bool {
        self.width >= self.period
    }

    /// `t − T_s·⌊t/T_s⌋`, valid for negative `t`.
    pub fn phase(&self, t: f64) -> f64 {
        t - self.period * (t / self.period).floor()
    }

    pub fn is_transmitting(&self, t: f64) -> bool {
        self.is_continuous() || self.phase(t) < self.width
    }

    pub fn measure(&self, cost: &CostField, t: f64, x: &[f64]) -> Result<f64> {
        if self.is_transmitting(t) {
            cost.eval(x)
        } else {
            Ok(0.0)
        }
    }

    /// Earliest edge strictly after `t`.
    pub fn next_edge(&self, t: f64) -> EdgeEvent {
        let tol = 4.0 * f64::EPSILON * t.abs().max(self.period);
        let base = (t / self.period).floor();
        let mut best: Option<EdgeEvent> = None;
        for offset in -1..=2 {
            let k = base + offset as f64;
            let rising = EdgeEvent {
                time: k * self.period,
                kind: EdgeKind::Rising,
            };
            let falling = EdgeEvent {
                time: k * self.period + self.width,
                kind: EdgeKind::Falling,
            };
            let candidates: &[EdgeEvent] = if self.is_continuous() {
                &[rising][..]
            } else {
                &[rising, falling][..]
            };
            for &e in candidates {
                if e.time > t + tol && best.is_none_or(|b| e.time < b.time) {
                    best = Some(e);
                }
            }
        }
        best.expect("an edge always exists within two periods")
    }

    /// All edges in `(t0, t1]`, in order.
    pub fn edges_between(&self, t0: f64, t1: f64) -> Vec<EdgeEvent> {
        let mut out = Vec::new();
        let mut t = t0;
        loop {
            let e = self.next_edge(t);
            if e.time > t1 {
                break;
            }
            out.push(e);
            t = e.time;
        }
        out
    }
}

/// `h_m(t, x)` as a free function.
pub fn measure(sched: &MeasurementSchedule, cost: &CostField, t: f64, x: &[f64]) -> Result<f64> {
    sched.measure(cost, t, x)
}
