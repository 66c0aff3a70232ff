//! Offline replay of a trace against the invariants the method guarantees.
//!
//! Every invariant is evaluated from the trace alone: the header carries the
//! problem and configuration, the ledger carries the analysis constants.

use serde::Serialize;

use crate::lc_trace::{classify_step, StepClass};
use crate::problem::TAU_FEAS;
use crate::second_order::reduction_check;
use crate::trace::{Algorithm, IterationRecord, StepKind, Termination, Trace};

/// Relative tolerance: a check `lhs <= rhs` fails when `lhs - rhs > CHECK_TOL * (1 + |scale|)`.
pub const CHECK_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvariantOutcome {
    pub id: &'static str,
    pub title: &'static str,
    /// Non-fatal invariants are reported but never fail the replay.
    pub fatal: bool,
    pub checked: usize,
    /// Smallest `rhs - lhs` seen; negative means the bound was crossed.
    pub worst_margin: Option<f64>,
    /// Record indices that violate the invariant.
    pub violations: Vec<usize>,
}

impl InvariantOutcome {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    fn new(id: &'static str, title: &'static str) -> Self {
        Self {
            id,
            title,
            fatal: true,
            checked: 0,
            worst_margin: None,
            violations: Vec::new(),
        }
    }

    fn margin(&mut self, margin: f64) {
        self.checked += 1;
        let m = if margin.is_nan() { f64::NEG_INFINITY } else { margin };
        self.worst_margin = Some(self.worst_margin.map_or(m, |w| w.min(m)));
    }

    /// `lhs <= rhs` up to the tolerance.
    fn le(&mut self, k: usize, lhs: f64, rhs: f64, scale: f64) {
        let margin = rhs - lhs;
        self.margin(margin);
        if !(margin >= -CHECK_TOL * (1.0 + scale.abs())) {
            self.violations.push(k);
        }
    }

    /// `lhs < rhs` exactly.
    fn lt(&mut self, k: usize, lhs: f64, rhs: f64) {
        let margin = rhs - lhs;
        self.margin(margin);
        if !(margin > 0.0) {
            self.violations.push(k);
        }
    }

    fn holds(&mut self, k: usize, ok: bool) {
        self.margin(if ok { 0.0 } else { -1.0 });
        if !ok {
            self.violations.push(k);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub invariants: Vec<InvariantOutcome>,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.invariants.iter().all(|i| !i.fatal || i.passed())
    }

    pub fn failures(&self) -> impl Iterator<Item = &InvariantOutcome> {
        self.invariants.iter().filter(|i| i.fatal && !i.passed())
    }

    pub fn get(&self, id: &str) -> Option<&InvariantOutcome> {
        self.invariants.iter().find(|i| i.id == id)
    }
}

fn classified(r: &IterationRecord) -> Option<StepClass> {
    (r.step_kind == StepKind::FirstOrder).then_some(r.step_class).flatten()
}

fn is_curvature(r: &IterationRecord) -> bool {
    matches!(r.step_kind, StepKind::Curvature | StepKind::ClampedCurvature)
}

/// Replays every invariant over the trace.
pub fn check_trace(trace: &Trace) -> CheckReport {
    let cfg = &trace.header.config;
    let ledger = &trace.ledger;
    let recs = &trace.records;
    let tau_eq = cfg.tolerances.tau_eq;

    let mut decrease = InvariantOutcome::new(
        "lemma-3.3",
        "Lemma 3.3: model decrease dominates the regularized curvature",
    );
    let mut contract = InvariantOutcome::new("lemma-3.4", "Lemma 3.4: a contraction strictly shrinks the radius");
    let mut ordering = InvariantOutcome::new(
        "lemma-3.5",
        "Lemma 3.5-3.6: radius ordering and growth on accept or expand",
    );
    let mut expand = InvariantOutcome::new("lemma-3.7", "Lemma 3.7: no expansion after a contraction or expansion");
    let mut lbg = InvariantOutcome::new("lemma-LBG", "Lemma LBG: multiplier below max(lambda0, lambda_max)");
    let mut lx = InvariantOutcome::new("lemma-LXksk", "Lemma LXksk: chi_k <= (C_min + lambda_k) ||s_k||");
    let mut sigma = InvariantOutcome::new("lemma-3.18", "Lemma 3.18: ratio bound below sigma_max");
    let mut step_lb = InvariantOutcome::new("lemma-3.19", "Lemma 3.19: ratio-accepted steps are long enough");
    let mut monotone = InvariantOutcome::new("monotone", "objective never increases; accepted steps gain rho ||s||^3");
    let mut predicate = InvariantOutcome::new("accept-predicate", "recorded step class matches the acceptance rules");
    let mut motion = InvariantOutcome::new(
        "step-consistency",
        "iterates move by the recorded step exactly when accepted",
    );
    let mut feasible = InvariantOutcome::new("feasibility", "every iterate satisfies A x <= b");
    let mut kkt = InvariantOutcome::new("kkt", "subproblem optimality residuals below tau_kkt");
    let mut cap = InvariantOutcome::new("delta-cap-estimate", "radius cap stays below the estimated bound");
    cap.fatal = false;
    let mut reduction = InvariantOutcome::new(
        "reduction",
        "per-iteration reduction bound on curvature and ratio-accepted iterates",
    );
    let mut curvature = InvariantOutcome::new(
        "curvature-decrease",
        "unclamped curvature steps gain 2 psi^3 / (3 H~^2)",
    );
    let mut termination = InvariantOutcome::new("termination", "termination reason agrees with the final state");

    let problem = trace.header.problem().ok();
    let ceiling = ledger.lambda_ceiling();
    let sigma_max = ledger.sigma_max_bound;
    let hs = (ledger.estimates.h_lip + sigma_max).sqrt();

    for (k, r) in recs.iter().enumerate() {
        let next = recs.get(k + 1);
        let solved = r.step_kind == StepKind::FirstOrder || r.step_kind == StepKind::Terminal;

        if solved {
            // -g^T s - 1/2 s^T H s >= 1/2 s^T H s + lambda ||s||^2
            let rhs = 0.5 * r.s_h_s + r.lambda * r.s_norm * r.s_norm;
            decrease.le(k, rhs, r.model_decrease, r.model_decrease.abs() + rhs.abs());
            ordering.le(k, r.s_norm, r.delta, r.delta);
            lbg.le(k, r.lambda, ceiling, ceiling);
            if k >= 1 {
                let rhs = (ledger.c_min + r.lambda) * r.s_norm;
                lx.le(k, r.chi, rhs, rhs);
            }
        }
        kkt.le(k, r.kkt_max.max(r.kkt.max()), cfg.tolerances.tau_kkt, 0.0);
        ordering.le(k, r.delta, r.big_delta, r.big_delta);
        sigma.le(k, r.sigma, sigma_max, sigma_max);
        cap.le(k, r.big_delta, ledger.delta_cap_estimate, ledger.delta_cap_estimate);

        if let Some(p) = &problem {
            if r.x.len() == p.dimension() {
                let x = nalgebra::DVector::from_column_slice(&r.x);
                let worst = p.polyhedron.slack(&x).iter().fold(f64::INFINITY, |a, &b| a.min(b));
                let scale = p.polyhedron.b.amax();
                let margin = if worst.is_finite() { worst } else { 0.0 };
                feasible.margin(margin);
                if p.polyhedron.first_violation(&x).is_some() || margin < -TAU_FEAS * (1.0 + scale) {
                    feasible.violations.push(k);
                }
            } else {
                feasible.holds(k, false);
            }
        } else {
            // the embedded problem did not parse
            feasible.holds(k, false);
        }

        let Some(next) = next else { continue };
        ordering.le(k, r.big_delta, next.big_delta, next.big_delta);
        monotone.le(k, next.f, r.f, r.f);
        let moved: f64 =
            r.x.iter()
                .zip(&next.x)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt();
        let xscale = 1.0 + r.x.iter().fold(0.0_f64, |a, b| a.max(b.abs()));

        if is_curvature(r) {
            let to: Vec<f64> = r.x.iter().zip(&r.s).map(|(a, b)| a + b).collect();
            let off: f64 = to.iter().zip(&next.x).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            motion.le(k, off, 0.0, xscale);
        }

        let Some(class) = classified(r) else { continue };
        match class {
            StepClass::Contract => {
                contract.lt(k, next.delta, r.delta);
                motion.le(k, moved, 0.0, xscale);
            }
            StepClass::Expand => {
                ordering.le(k, r.delta, next.delta, r.delta);
                motion.le(k, moved, 0.0, xscale);
            }
            StepClass::AcceptDelta | StepClass::AcceptSigma => {
                ordering.le(k, r.delta, next.delta, r.delta);
                let gain = cfg.rho * r.s_norm.powi(3);
                monotone.le(k, gain, r.f - next.f, r.f);
                let to: Vec<f64> = r.x.iter().zip(&r.s).map(|(a, b)| a + b).collect();
                let off: f64 = to.iter().zip(&next.x).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                motion.le(k, off, 0.0, xscale);
            }
        }
        if class == StepClass::AcceptSigma {
            step_lb.le(k, next.chi.max(0.0).sqrt() / hs, r.s_norm, r.s_norm);
        }
        if matches!(class, StepClass::Contract | StepClass::Expand) {
            if let Some(c) = classified(next) {
                expand.holds(k + 1, c != StepClass::Expand);
            }
        }
        match (r.rho, r.f_trial) {
            (Some(rho_k), Some(f_trial)) => {
                let replay = (r.f - f_trial) / r.s_norm.powi(3);
                let same_ratio = (replay - rho_k).abs() <= CHECK_TOL * (1.0 + rho_k.abs()) || replay == rho_k;
                let again = classify_step(rho_k, cfg.rho, r.lambda, r.s_norm, r.sigma, r.big_delta, tau_eq);
                predicate.holds(k, same_ratio && again == class);
            }
            _ => predicate.holds(k, false),
        }
    }

    if trace.header.algorithm == Algorithm::SecondOrder {
        let rep = reduction_check(trace);
        for e in rep.entries.iter().filter(|e| !e.clamped) {
            reduction.margin(e.margin);
        }
        reduction.violations = rep.violations.clone();
        curvature.violations = rep.curvature_violations.clone();
        curvature.checked = rep.entries.iter().filter(|e| e.curvature && !e.clamped).count();
    }

    match (&trace.summary, recs.last()) {
        (Some(s), Some(last)) => {
            let k = recs.len() - 1;
            let ok = match &s.termination {
                Termination::FirstOrderStationary => last.chi <= trace.header.eps_g,
                Termination::SecondOrderStationary => {
                    last.chi <= trace.header.eps_g
                        && matches!((s.final_psi, trace.header.eps_h), (Some(p), Some(e)) if p <= e)
                }
                Termination::IterationCap => s.iterations >= cfg.max_iterations,
                Termination::Failed { .. } => false,
            };
            termination.holds(k, ok && last.step_kind == StepKind::Terminal);
        }
        _ => termination.holds(0, false),
    }

    CheckReport {
        invariants: vec![
            decrease,
            contract,
            ordering,
            expand,
            lbg,
            lx,
            sigma,
            step_lb,
            monotone,
            predicate,
            motion,
            feasible,
            kkt,
            cap,
            reduction,
            curvature,
            termination,
        ],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lc_trace::{run_first_order, SolverConfig};
    use crate::suite::{default_suite, random_quartic};

    fn contracting_trace() -> Trace {
        for seed in 0..16 {
            let inst = random_quartic(seed, 2).unwrap();
            let out = run_first_order(&inst, SolverConfig::default().with_epsilon(1e-4)).unwrap();
            if out
                .trace
                .records
                .iter()
                .any(|r| r.step_class == Some(StepClass::Contract))
            {
                return out.trace;
            }
        }
        panic!("no contraction in the sampled instances");
    }

    #[test]
    fn fresh_traces_pass() {
        for inst in default_suite().unwrap() {
            let out = run_first_order(&inst, SolverConfig::default().with_epsilon(1e-4)).unwrap();
            let report = check_trace(&out.trace);
            let failed: Vec<_> = report.failures().map(|f| (f.id, f.violations.clone())).collect();
            assert!(report.passed(), "{}: {failed:?}", inst.name);
        }
    }

    #[test]
    fn radius_growth_inside_contraction_is_caught() {
        let mut trace = contracting_trace();
        let k = trace
            .records
            .iter()
            .position(|r| r.step_class == Some(StepClass::Contract))
            .unwrap();
        trace.records[k + 1].delta = trace.records[k].delta * 1.5;
        let report = check_trace(&trace);
        assert_eq!(report.get("lemma-3.4").unwrap().violations, vec![k]);
        assert!(!report.passed());
    }

    #[test]
    fn multiplier_above_ceiling_is_caught() {
        let mut trace = contracting_trace();
        trace.records[1].lambda = 2.0 * trace.ledger.lambda_ceiling() + 1.0;
        let report = check_trace(&trace);
        assert!(report.get("lemma-LBG").unwrap().violations.contains(&1));
    }

    #[test]
    fn consecutive_expansions_are_caught() {
        let mut trace = contracting_trace();
        let k = trace
            .records
            .iter()
            .position(|r| r.step_class == Some(StepClass::Contract))
            .unwrap();
        trace.records[k].step_class = Some(StepClass::Expand);
        trace.records[k + 1].step_class = Some(StepClass::Expand);
        let report = check_trace(&trace);
        assert!(report.get("lemma-3.7").unwrap().violations.contains(&(k + 1)));
        assert!(!report.get("accept-predicate").unwrap().passed());
    }
}
