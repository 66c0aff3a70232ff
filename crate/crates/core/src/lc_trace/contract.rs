use super::config::SolverConfig;
use super::ledger::ConstantsLedger;
use crate::error::{Error, Result};
use crate::oracle::k_c1;
use crate::problem::Polyhedron;
use crate::subproblem::{solve_qk_lambda_with, QuadraticModel, RegularizedOutcome, SubproblemSolution};
use crate::trace::{ContractBranch, ContractRecord};

/// Inputs describing the rejected iteration.
#[derive(Debug, Clone, Copy)]
pub struct ContractInput {
    pub s_norm: f64,
    pub lambda: f64,
    pub big_delta: f64,
    pub chi: f64,
}

#[derive(Debug, Clone)]
pub struct ContractOutcome {
    pub delta_next: f64,
    /// Step and multiplier that realize `delta_next`, when it equals their norm.
    pub cached: Option<SubproblemSolution>,
    pub record: ContractRecord,
    /// Worst optimality residual among the regularized solves.
    pub kkt_max: f64,
}

/// Upper limit on regularized solves inside one contraction.
pub fn contract_cap(ledger: &ConstantsLedger, cfg: &SolverConfig) -> usize {
    let kc1 = k_c1(ledger, cfg);
    (kc1.saturating_mul(4)).clamp(64, 100_000) as usize
}

/// Shrinks the radius after a rejected step.
///
/// The returned radius is always below `input.s_norm`, which never exceeds
/// the current radius. The escalation loop keeps growing the multiplier until
/// the regularized step is strictly shorter than the rejected one, since the
/// regularized minimizer can be longer than a ball-constrained one when rows
/// are active.
pub fn contract(
    model: &QuadraticModel,
    shifted: &Polyhedron,
    input: ContractInput,
    ledger: &ConstantsLedger,
    cfg: &SolverConfig,
) -> Result<ContractOutcome> {
    let cap = contract_cap(ledger, cfg);
    let opts = cfg.solver_options();
    let tau = cfg.tolerances.tau_eq;
    let gl = cfg.gamma_lambda;
    let mut solves = 0usize;
    let mut kkt_max = 0.0_f64;
    let mut solve = |lambda: f64| -> Result<Option<SubproblemSolution>> {
        if solves >= cap {
            return Err(Error::ContractCap { cap });
        }
        solves += 1;
        match solve_qk_lambda_with(model, shifted, lambda, &opts)? {
            RegularizedOutcome::Solved(sol) => {
                kkt_max = kkt_max.max(sol.kkt.max());
                Ok(Some(sol))
            }
            RegularizedOutcome::Unbounded { .. } => Ok(None),
        }
    };

    let sk = input.s_norm;
    let shorter = |norm: f64| norm < sk * (1.0 - tau);

    let mut lambda_bar = input.lambda + ledger.sigma_lower * input.big_delta;
    let mut unbounded_escalations = 0;
    let s_bar = loop {
        match solve(lambda_bar)? {
            Some(sol) => break sol,
            None => {
                lambda_bar *= gl;
                unbounded_escalations += 1;
            }
        }
    };
    let s_bar_norm = s_bar.norm();
    let mut lambdas_tried = Vec::new();
    let mut norms = Vec::new();

    let (branch, delta_next, cached) = if shorter(s_bar_norm) && input.lambda < ledger.sigma_lower * sk {
        let lambda = lambda_bar + ledger.estimates.h_max + (ledger.sigma_lower * input.chi.max(0.0)).sqrt();
        let sol = solve(lambda)?.ok_or(Error::Unbounded { lambda })?;
        lambdas_tried.push(lambda);
        norms.push(sol.norm());
        if lambda <= ledger.sigma_upper * sol.norm() {
            (ContractBranch::ShiftAccepted, sol.norm(), Some(sol))
        } else {
            (ContractBranch::ShiftRejected, s_bar_norm, Some(s_bar))
        }
    } else {
        let same = (s_bar_norm - sk).abs() <= tau * sk;
        let mut lambda = if same || input.lambda <= 0.0 {
            gl * lambda_bar
        } else {
            gl * input.lambda
        };
        let mut sol = loop {
            let out = solve(lambda)?;
            lambdas_tried.push(lambda);
            match out {
                Some(sol) => {
                    norms.push(sol.norm());
                    break sol;
                }
                None => {
                    norms.push(f64::INFINITY);
                    lambda *= gl;
                }
            }
        };
        while !shorter(sol.norm()) {
            lambda *= gl;
            sol = solve(lambda)?.ok_or(Error::Unbounded { lambda })?;
            lambdas_tried.push(lambda);
            norms.push(sol.norm());
        }
        if sol.norm() >= cfg.gamma_c * sk {
            (ContractBranch::Escalated, sol.norm(), Some(sol))
        } else {
            (ContractBranch::Floor, cfg.gamma_c * sk, None)
        }
    };

    // norms of unbounded attempts are not representable in JSON
    let norms = norms
        .into_iter()
        .map(|v| if v.is_finite() { v } else { -1.0 })
        .collect();
    Ok(ContractOutcome {
        delta_next,
        record: ContractRecord {
            branch,
            lambda_bar,
            s_bar_norm,
            lambdas_tried,
            norms,
            unbounded_escalations,
            delta_next,
            cached: cached.is_some(),
            solves,
        },
        cached,
        kkt_max,
    })
}
