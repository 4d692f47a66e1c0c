//! Lie-bracket extremum seeking under intermittent cost measurements.
//!
//! The crate is organised bottom-up: [`signals`] (dithers and the γ matrix),
//! [`costs`] and [`fields`] (the objective and the input vector fields),
//! [`measurement`] (the pulsed measurement channel), [`schemes`] (control
//! laws) and [`engine`] (event-aligned integration and run metrics).

// NaN-rejecting guards read as `!(v > 0.0)`; index loops mirror the formulas.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod costs;
pub mod engine;
pub mod error;
pub mod fields;
pub mod measurement;
pub mod schemes;
pub mod signals;

pub use costs::CostField;
pub use engine::{simulate, EngineConfig, Method, RunMetrics, Trajectory};
pub use error::{Error, Result};
pub use fields::FieldFamily;
pub use measurement::MeasurementSchedule;
pub use schemes::{Phase, SchemeConfig, SchemeKind, SchemeParams};
pub use signals::{DitherBank, DitherSignal, GammaMatrix, Multiplier};
