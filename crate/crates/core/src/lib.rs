//! Adaptive estimation and confidence intervals for the minimizer and the
//! minimum of a convex function observed under white noise or in a
//! fixed-design regression, with water-filling benchmarks for the
//! function-specific difficulty of both problems.

pub mod benchmarks;
pub mod error;
pub mod functions;
pub mod harness;
pub mod noise;
pub mod regression;
pub mod stats;
pub mod whitenoise;

pub use error::{Error, Result};
pub use functions::{ConvexFunction, ExtremumTruth, FunctionSpec};
pub use stats::Probability;

use serde::{Deserialize, Serialize};

/// A confidence interval.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntervalEstimate {
    pub lo: f64,
    pub hi: f64,
    pub alpha: Probability,
}

impl IntervalEstimate {
    pub fn length(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }
}

/// Observation model.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    #[serde(alias = "white_noise")]
    Whitenoise,
    Regression,
}

/// Diagnostic trace of either procedure.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Trace {
    Whitenoise(whitenoise::LocalizationTrace),
    Regression(regression::RegressionTrace),
}

/// Everything one run of the procedures produces.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProcedureResult {
    pub model: Model,
    pub j_hat: u32,
    pub i_hat: i64,
    /// White noise: the depth cap was hit. Regression: the stopping rule never fired.
    pub forced: bool,
    pub z_hat: f64,
    pub ci_z: IntervalEstimate,
    pub m_hat: f64,
    pub ci_m: IntervalEstimate,
    pub trace: Trace,
}
