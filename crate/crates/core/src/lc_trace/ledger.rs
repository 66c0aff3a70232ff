use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::config::SolverConfig;
use crate::error::{Error, Result};
use crate::problem::Estimates;

/// Analysis constants of a run, fixed once the first multiplier is known.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantsLedger {
    pub epsilon: f64,
    pub lambda0: f64,
    pub sigma_lower: f64,
    pub sigma_upper: f64,
    /// Initial ratio bound actually used: `max(sigma0_user, sigma_lower)`.
    pub sigma0: f64,
    pub c_min: f64,
    pub lambda_max: f64,
    pub g_max_bound: f64,
    pub delta_cap_estimate: f64,
    pub h_tilde: f64,
    pub l_tilde: f64,
    pub kappa: f64,
    pub sigma_max_bound: f64,
    /// Relative change of `lambda_max` between the provisional and final ratio bound.
    pub fixed_point_residual: f64,
    pub estimates: Estimates,
    pub notes: BTreeMap<String, String>,
}

impl ConstantsLedger {
    /// `max(lambda0, lambda_max)`, the ceiling on every multiplier.
    pub fn lambda_ceiling(&self) -> f64 {
        self.lambda0.max(self.lambda_max)
    }
}

/// `epsilon / (c_min + max(lambda_max, lambda0))`.
pub fn sigma_lower(epsilon: f64, c_min: f64, lambda_max: f64, lambda0: f64) -> f64 {
    epsilon / (c_min + lambda_max.max(lambda0))
}

/// Twice the radius cap estimate.
pub fn sigma_upper(delta_cap: f64) -> f64 {
    2.0 * delta_cap
}

/// Multiplier ceiling for a given lower ratio bound.
pub fn lambda_max(est: &Estimates, rho: f64, gamma_lambda: f64, sigma_lower: f64, delta_cap: f64) -> f64 {
    let first = est.g_lip + 2.0 * est.h_max + (rho + sigma_lower) * delta_cap + (sigma_lower * est.g_max).sqrt();
    let second = gamma_lambda * (est.g_lip + est.h_max + rho * delta_cap);
    first.max(second)
}

/// Ceiling on the ratio `lambda / ||s||` over a run.
pub fn sigma_max_bound(cfg: &SolverConfig, est: &Estimates, sigma0: f64, sigma_upper: f64) -> f64 {
    let curvature = (cfg.gamma_lambda / cfg.gamma_c) * (est.h_lip + 2.0 * cfg.rho) / (2.0 * cfg.kappa);
    sigma0.max(sigma_upper).max(curvature)
}

/// Resolves the mutual dependence of the lower ratio bound and the multiplier
/// ceiling with one substitution pass and fixes every other constant.
pub fn finalize_ledger(cfg: &SolverConfig, est: &Estimates, lambda0: f64) -> Result<ConstantsLedger> {
    cfg.validate()?;
    if !(lambda0 >= 0.0 && lambda0.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "initial multiplier must be finite and non-negative, got {lambda0}"
        )));
    }
    let dcap = cfg.delta_cap();
    let lm = |sigma: f64| lambda_max(est, cfg.rho, cfg.gamma_lambda, sigma, dcap);
    let g_bound = |lmax: f64| (est.h_max + lambda0.max(lmax)) * dcap;
    let c_min_of = |lmax: f64| est.h_max + g_bound(lmax) + est.g_max;

    let lm_start = lm(0.0);
    let provisional = cfg.epsilon / (c_min_of(lm_start) + lambda0);
    let lm_provisional = lm(provisional);
    let sigma_lo = sigma_lower(cfg.epsilon, c_min_of(lm_provisional), lm_provisional, lambda0);
    if !(sigma_lo > 0.0 && sigma_lo.is_finite()) {
        return Err(Error::InvalidConfig("non-positive ratio bound denominator".into()));
    }
    let lmax = lm(sigma_lo);
    let g_max_bound = g_bound(lmax);
    let c_min = c_min_of(lmax);
    let sigma_up = sigma_upper(dcap);
    let sigma0 = cfg.sigma0_user.max(sigma_lo);
    let sigma_max = sigma_max_bound(cfg, est, sigma0, sigma_up);

    let mut notes = BTreeMap::new();
    let mut note = |k: &str, v: &str| {
        notes.insert(k.to_string(), v.to_string());
    };
    note(
        "sigma_lower",
        "epsilon / (c_min + max(lambda_max, lambda0)) evaluated with lambda_max at the provisional ratio bound",
    );
    note("sigma_upper", "2 * delta_cap_estimate");
    note(
        "sigma0",
        "max(sigma0_user, sigma_lower), set after the first subproblem solve",
    );
    note("c_min", "H_max + g_max_bound + g_max");
    note("g_max_bound", "(H_max + max(lambda0, lambda_max)) * delta_cap_estimate");
    note("lambda_max", "max(g_lip + 2 H_max + (rho + sigma_lower) D + sqrt(sigma_lower g_max), gamma_lambda (g_lip + H_max + rho D)), D = delta_cap_estimate, final sigma_lower");
    note(
        "delta_cap_estimate",
        if cfg.delta_cap_estimate.is_some() {
            "user supplied"
        } else {
            "10 * Delta0"
        },
    );
    note("h_tilde", "max(H_lip, H_max)");
    note("l_tilde", "max(g_lip, g_max)");
    note("kappa", "configured model-decrease constant, analysis only");
    note(
        "sigma_max_bound",
        "max(sigma0, sigma_upper, (gamma_lambda / gamma_c) (H_lip + 2 rho) / (2 kappa))",
    );
    note("lambda0", "multiplier of the first subproblem solve");

    Ok(ConstantsLedger {
        epsilon: cfg.epsilon,
        lambda0,
        sigma_lower: sigma_lo,
        sigma_upper: sigma_up,
        sigma0,
        c_min,
        lambda_max: lmax,
        g_max_bound,
        delta_cap_estimate: dcap,
        h_tilde: est.h_lip.max(est.h_max),
        l_tilde: est.g_lip.max(est.g_max),
        kappa: cfg.kappa,
        sigma_max_bound: sigma_max,
        fixed_point_residual: (lm_provisional - lmax).abs() / lmax,
        estimates: *est,
        notes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn est() -> Estimates {
        Estimates {
            g_max: 3.0,
            h_max: 2.0,
            g_lip: 2.0,
            h_lip: 1.5,
            f_min: -10.0,
        }
    }

    #[test]
    fn formula_examples() {
        assert_eq!(sigma_lower(1e-2, 10.0, 5.0, 0.0), 1e-2 / 15.0);
        assert_eq!(sigma_upper(3.0), 6.0);
    }

    #[test]
    fn ledger_is_self_consistent() {
        let cfg = SolverConfig::default().with_epsilon(1e-3);
        for lambda0 in [0.0, 0.7, 250.0] {
            let l = finalize_ledger(&cfg, &est(), lambda0).unwrap();
            assert_eq!(l.sigma_upper, 2.0 * l.delta_cap_estimate);
            assert_eq!(l.c_min, l.estimates.h_max + l.g_max_bound + l.estimates.g_max);
            assert_eq!(
                l.lambda_max,
                lambda_max(&l.estimates, cfg.rho, cfg.gamma_lambda, l.sigma_lower, 10.0)
            );
            // the final constants can only loosen the provisional denominator
            assert!(l.sigma_lower <= sigma_lower(cfg.epsilon, l.c_min, l.lambda_max, lambda0));
            assert!(l.fixed_point_residual < 0.05);
            assert!(l.sigma0 >= l.sigma_lower);
            assert!(l.sigma_max_bound >= l.sigma0.max(l.sigma_upper));
        }
    }

    #[test]
    fn user_cap_overrides_default() {
        let cfg = SolverConfig {
            delta_cap_estimate: Some(3.0),
            ..SolverConfig::default()
        };
        let l = finalize_ledger(&cfg, &est(), 0.0).unwrap();
        assert_eq!(l.sigma_upper, 6.0);
    }
}
