use serde::{Deserialize, Serialize};

use crate::lc_trace::{ConstantsLedger, SolverConfig};

/// Values the budget formulas were evaluated with.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BudgetInputs {
    pub f0: f64,
    pub f_min: f64,
    pub rho: f64,
    pub h_lip: f64,
    pub sigma_max: f64,
    pub big_delta0: f64,
    pub delta_hat: f64,
    pub gamma_c: f64,
    pub gamma_lambda: f64,
    pub sigma_lower: f64,
    pub c_min: f64,
    pub lambda_max: f64,
    pub lambda0: f64,
    pub h_max: f64,
    pub g_lip: f64,
    pub epsilon: f64,
}

/// Worst-case subproblem counts of the first-order method.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexityBudget {
    /// Accepted steps through the ratio test.
    pub k_sigma: u64,
    /// Accepted steps on the radius cap.
    pub k_delta: u64,
    /// Contractions between two accepted steps.
    pub k_c: u64,
    /// Subproblem solves inside one contraction.
    pub k_c1: u64,
    pub k_total: u64,
    pub inputs: BudgetInputs,
}

/// Ceiling of a non-negative real, saturating; negatives and NaN map to 0.
fn ceil_count(x: f64) -> u64 {
    if !(x > 0.0) {
        0
    } else if x >= u64::MAX as f64 {
        u64::MAX
    } else {
        x.ceil() as u64
    }
}

fn inputs(ledger: &ConstantsLedger, cfg: &SolverConfig, f0: f64, epsilon: f64) -> BudgetInputs {
    BudgetInputs {
        f0,
        f_min: ledger.estimates.f_min,
        rho: cfg.rho,
        h_lip: ledger.estimates.h_lip,
        sigma_max: ledger.sigma_max_bound,
        big_delta0: cfg.big_delta0,
        delta_hat: ledger.delta_cap_estimate,
        gamma_c: cfg.gamma_c,
        gamma_lambda: cfg.gamma_lambda,
        sigma_lower: ledger.sigma_lower,
        c_min: ledger.c_min,
        lambda_max: ledger.lambda_max,
        lambda0: ledger.lambda0,
        h_max: ledger.estimates.h_max,
        g_lip: ledger.estimates.g_lip,
        epsilon,
    }
}

fn k_c1_of(p: &BudgetInputs) -> u64 {
    let ceiling = p.c_min + p.lambda_max.max(p.lambda0);
    let arg = ceiling * (p.h_max + p.g_lip + p.rho * p.delta_hat) / (p.sigma_lower * p.epsilon);
    ceil_count(arg.ln() / p.gamma_lambda.ln())
}

/// Solves needed by one contraction at the ledger's own tolerance.
pub fn k_c1(ledger: &ConstantsLedger, cfg: &SolverConfig) -> u64 {
    k_c1_of(&inputs(ledger, cfg, ledger.estimates.f_min, ledger.epsilon))
}

/// Evaluates every budget at tolerance `epsilon` with the run's constants.
///
/// `epsilon` may differ from the tolerance the ledger was built for; the
/// ratio bounds and multiplier ceilings stay those of the run.
pub fn evaluate_budgets(ledger: &ConstantsLedger, cfg: &SolverConfig, f0: f64, epsilon: f64) -> ComplexityBudget {
    let p = inputs(ledger, cfg, f0, epsilon);
    let gap = (p.f0 - p.f_min).max(0.0);
    let k_sigma = ceil_count(gap * (p.h_lip + p.sigma_max).powf(1.5) / p.rho * epsilon.powf(-1.5));
    let k_delta = ceil_count(gap / (p.rho * p.big_delta0.powi(3)));
    let ceiling = p.c_min + p.lambda_max.max(p.lambda0);
    let escalations = 2.0 + ((p.sigma_max / p.sigma_lower).ln() / p.gamma_lambda.ln()).max(0.0);
    let halvings = ((p.delta_hat * ceiling / epsilon).ln() / (1.0 / p.gamma_c).ln()).max(0.0);
    let k_c = 1u64.saturating_add(ceil_count(escalations * halvings));
    let k_c1 = k_c1_of(&p);
    let k_total = 1u64.saturating_add(
        k_sigma
            .saturating_add(k_delta)
            .saturating_mul(1u64.saturating_add(k_c.saturating_mul(k_c1))),
    );
    ComplexityBudget {
        k_sigma,
        k_delta,
        k_c,
        k_c1,
        k_total,
        inputs: p,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lc_trace::finalize_ledger;
    use crate::problem::Estimates;

    fn ledger(eps: f64) -> (ConstantsLedger, SolverConfig) {
        let cfg = SolverConfig::default().with_epsilon(eps);
        let est = Estimates {
            g_max: 2.0,
            h_max: 1.0,
            g_lip: 1.0,
            h_lip: 0.5,
            f_min: -1.0,
        };
        (finalize_ledger(&cfg, &est, 0.3).unwrap(), cfg)
    }

    #[test]
    fn counts_match_hand_substitution() {
        let (mut l, mut cfg) = ledger(1.0);
        // f0 - f_min = 1, rho = 0.1, H_lip + sigma_max = 1, eps = 1
        l.estimates.f_min = 0.0;
        l.estimates.h_lip = 0.25;
        l.sigma_max_bound = 0.75;
        cfg.rho = 0.1;
        cfg.big_delta0 = 1.0;
        let b = evaluate_budgets(&l, &cfg, 1.0, 1.0);
        assert_eq!(b.k_sigma, 10);
        assert_eq!(b.k_delta, 10);
        assert_eq!(b.k_total, 1 + 20 * (1 + b.k_c * b.k_c1));
    }

    #[test]
    fn budget_shrinks_as_tolerance_grows() {
        let (l, cfg) = ledger(1e-4);
        let mut last = u64::MAX;
        for eps in [1e-4, 1e-3, 1e-2, 1e-1, 1.0] {
            let b = evaluate_budgets(&l, &cfg, 3.0, eps);
            assert!(b.k_total <= last);
            last = b.k_total;
        }
    }

    #[test]
    fn saturates_instead_of_overflowing() {
        let (l, cfg) = ledger(1e-4);
        let b = evaluate_budgets(&l, &cfg, 1e300, 1e-300);
        assert_eq!(b.k_total, u64::MAX);
        assert_eq!(ceil_count(f64::NAN), 0);
        assert_eq!(ceil_count(-3.0), 0);
    }
}
