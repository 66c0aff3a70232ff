use nalgebra::DVector;
use serde::{Deserialize, Serialize};

/// Outcome of a trial step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepClass {
    /// Accepted with the step on the radius cap.
    AcceptDelta,
    /// Accepted through the ratio test `lambda / ||s|| <= sigma`.
    AcceptSigma,
    Contract,
    Expand,
}

impl StepClass {
    pub fn is_accept(self) -> bool {
        matches!(self, StepClass::AcceptDelta | StepClass::AcceptSigma)
    }
}

/// Classifies a trial step from its decrease ratio and multiplier.
pub fn classify_step(
    rho_k: f64,
    rho: f64,
    lambda: f64,
    s_norm: f64,
    sigma: f64,
    big_delta: f64,
    tau_eq: f64,
) -> StepClass {
    if !(rho_k >= rho) {
        return StepClass::Contract;
    }
    if (s_norm - big_delta).abs() <= tau_eq * big_delta {
        return StepClass::AcceptDelta;
    }
    // a multiplier tying `sigma * ||s||` to rounding is not an expansion
    if s_norm < big_delta && lambda <= sigma * s_norm * (1.0 + tau_eq) {
        return StepClass::AcceptSigma;
    }
    StepClass::Expand
}

/// State after an accepted step.
#[derive(Debug, Clone, PartialEq)]
pub struct AcceptedState {
    pub x: DVector<f64>,
    pub big_delta: f64,
    pub delta: f64,
    pub sigma: f64,
}

pub fn accept_update(
    x: &DVector<f64>,
    s: &DVector<f64>,
    lambda: f64,
    delta: f64,
    big_delta: f64,
    sigma: f64,
    gamma_e: f64,
) -> AcceptedState {
    let s_norm = s.norm();
    let big = big_delta.max(gamma_e * s_norm);
    AcceptedState {
        x: x + s,
        big_delta: big,
        delta: big.min(delta.max(gamma_e * s_norm)),
        sigma: sigma.max(lambda / s_norm),
    }
}

/// New radius after an expansion; `sigma` and `x` stay put.
pub fn expand_update(lambda: f64, sigma: f64, big_delta: f64) -> f64 {
    big_delta.min(lambda / sigma)
}
