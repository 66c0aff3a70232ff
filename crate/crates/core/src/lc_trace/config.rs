use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::subproblem::SolverOptions;

/// Numerical tolerances used by the driver and the subproblem solvers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Relative tolerance for comparing step norms.
    pub tau_eq: f64,
    pub tau_feas: f64,
    pub tau_kkt: f64,
    pub tau_tie: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            tau_eq: 1e-9,
            tau_feas: 1e-9,
            tau_kkt: 1e-8,
            tau_tie: 1e-9,
        }
    }
}

/// Parameters of the first-order trust-region driver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Acceptance threshold on `(f(x) - f(x + s)) / ||s||^3`.
    pub rho: f64,
    pub gamma_c: f64,
    pub gamma_e: f64,
    pub gamma_lambda: f64,
    /// Termination threshold on `chi`.
    pub epsilon: f64,
    pub delta0: f64,
    #[serde(rename = "Delta0")]
    pub big_delta0: f64,
    pub sigma0_user: f64,
    pub max_iterations: usize,
    /// Upper estimate of the eventual cap on the radius bound; defaults to `10 * Delta0`.
    pub delta_cap_estimate: Option<f64>,
    /// Model-decrease constant used only in analysis bounds.
    pub kappa: f64,
    pub tolerances: Tolerances,
    pub face_cap: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            rho: 0.1,
            gamma_c: 0.5,
            gamma_e: 2.0,
            gamma_lambda: 2.0,
            epsilon: 1e-4,
            delta0: 1.0,
            big_delta0: 1.0,
            sigma0_user: 1.0,
            max_iterations: 1000,
            delta_cap_estimate: None,
            kappa: 1.0 / 6.0,
            tolerances: Tolerances::default(),
            face_cap: 12,
        }
    }
}

impl SolverConfig {
    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn with_max_iterations(mut self, n: usize) -> Self {
        self.max_iterations = n;
        self
    }

    pub fn delta_cap(&self) -> f64 {
        self.delta_cap_estimate.unwrap_or(10.0 * self.big_delta0)
    }

    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions {
            face_cap: self.face_cap,
            tau_feas: self.tolerances.tau_feas,
            tau_kkt: self.tolerances.tau_kkt,
            tau_tie: self.tolerances.tau_tie,
            keep_candidates: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.to_string()));
        let open_unit = |v: f64| v > 0.0 && v < 1.0;
        if !open_unit(self.rho) {
            return bad("rho must lie in (0, 1)");
        }
        if !open_unit(self.gamma_c) {
            return bad("gamma_c must lie in (0, 1)");
        }
        if !(self.gamma_e > 1.0) || !(self.gamma_lambda > 1.0) {
            return bad("gamma_e and gamma_lambda must exceed 1");
        }
        if !(self.epsilon > 0.0) {
            return bad("epsilon must be positive");
        }
        if !(self.delta0 > 0.0 && self.delta0 <= self.big_delta0 && self.big_delta0.is_finite()) {
            return bad("radii must satisfy 0 < delta0 <= Delta0 < inf");
        }
        if !(self.sigma0_user > 0.0) {
            return bad("sigma0 must be positive");
        }
        if !(self.kappa > 0.0 && self.kappa <= 1.0) {
            return bad("kappa must lie in (0, 1]");
        }
        if self.delta_cap() < self.big_delta0 {
            return bad("the radius cap estimate must be at least Delta0");
        }
        let t = &self.tolerances;
        if [t.tau_eq, t.tau_feas, t.tau_kkt, t.tau_tie]
            .iter()
            .any(|v| !(*v >= 0.0))
        {
            return bad("tolerances must be non-negative");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_is_valid() {
        SolverConfig::default().validate().unwrap();
    }

    #[test]
    fn rejects_out_of_range_parameters() {
        let base = SolverConfig::default();
        for cfg in [
            SolverConfig { rho: 1.0, ..base },
            SolverConfig { gamma_c: 1.5, ..base },
            SolverConfig {
                gamma_lambda: 1.0,
                ..base
            },
            SolverConfig { delta0: 2.0, ..base },
            SolverConfig { epsilon: 0.0, ..base },
        ] {
            assert!(matches!(cfg.validate(), Err(Error::InvalidConfig(_))));
        }
    }
}
