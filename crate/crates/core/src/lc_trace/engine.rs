use std::collections::BTreeMap;
use std::time::Instant;

use nalgebra::DVector;

use super::config::SolverConfig;
use super::contract::{contract, ContractInput};
use super::ledger::{finalize_ledger, ConstantsLedger};
use super::steps::{accept_update, classify_step, expand_update, StepClass};
use crate::error::{Error, Result};
use crate::problem::{shifted_constraints, Evaluation, Polyhedron, ProblemInstance};
use crate::stationarity::{chi_from_gradient, psi_from_derivatives, Measure};
use crate::subproblem::{solve_qk_with, QuadraticModel, SolverOptions, SubproblemSolution};
use crate::trace::{
    Algorithm, IterationRecord, StepKind, Termination, Trace, TraceHeader, TraceSummary, SCHEMA_VERSION,
};

/// Result of a complete run.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub x: DVector<f64>,
    pub termination: Termination,
    pub trace: Trace,
}

impl RunOutcome {
    pub fn converged(&self) -> bool {
        matches!(
            self.termination,
            Termination::FirstOrderStationary | Termination::SecondOrderStationary
        )
    }
}

/// Stepwise driver for the first-order method.
///
/// The second-order method drives the same engine one iteration at a time and
/// moves it with curvature steps in between.
pub struct FirstOrderEngine<'a> {
    instance: &'a ProblemInstance,
    cfg: SolverConfig,
    opts: SolverOptions,
    ledger: ConstantsLedger,
    x: DVector<f64>,
    eval: Evaluation,
    shifted: Polyhedron,
    model: QuadraticModel,
    delta: f64,
    big_delta: f64,
    sigma: f64,
    sol: SubproblemSolution,
    cached_step: bool,
    chi: Option<Measure>,
    /// Solves and residuals accrued since the last record was emitted.
    pending_solves: usize,
    pending_kkt: f64,
    records: Vec<IterationRecord>,
    clock: Instant,
}

impl<'a> FirstOrderEngine<'a> {
    /// Solves the first subproblem and fixes the analysis constants.
    pub fn new(instance: &'a ProblemInstance, cfg: SolverConfig) -> Result<Self> {
        cfg.validate()?;
        let opts = cfg.solver_options();
        let x = instance.start.clone();
        let eval = instance.objective.evaluate(&x)?;
        let shifted = shifted_constraints(&instance.polyhedron, &x)?;
        let model = QuadraticModel::new(eval.f, eval.g.clone(), eval.h.clone())?;
        let sol = solve_qk_with(&model, &shifted, cfg.delta0, &opts)?;
        let ledger = finalize_ledger(&cfg, &instance.estimates, sol.lambda_tr)?;
        Ok(Self {
            instance,
            opts,
            sigma: ledger.sigma0,
            ledger,
            x,
            eval,
            shifted,
            model,
            delta: cfg.delta0,
            big_delta: cfg.big_delta0,
            pending_kkt: sol.kkt.max(),
            sol,
            cfg,
            cached_step: false,
            chi: None,
            pending_solves: 1,
            records: Vec::new(),
            clock: Instant::now(),
        })
    }

    pub fn ledger(&self) -> &ConstantsLedger {
        &self.ledger
    }

    pub fn config(&self) -> &SolverConfig {
        &self.cfg
    }

    pub fn x(&self) -> &DVector<f64> {
        &self.x
    }

    pub fn f(&self) -> f64 {
        self.eval.f
    }

    pub fn gradient(&self) -> &DVector<f64> {
        &self.eval.g
    }

    pub fn hessian(&self) -> &nalgebra::DMatrix<f64> {
        &self.eval.h
    }

    pub fn records(&self) -> &[IterationRecord] {
        &self.records
    }

    pub fn iterations(&self) -> usize {
        self.records.len()
    }

    /// First-order measure at the current point, computed once per point.
    pub fn chi(&mut self) -> Result<f64> {
        if self.chi.is_none() {
            let m = chi_from_gradient(&self.eval.g, &self.shifted, &self.opts)?;
            self.pending_kkt = self.pending_kkt.max(m.solution.kkt.max());
            self.chi = Some(m);
        }
        Ok(self.chi.as_ref().unwrap().value)
    }

    /// Second-order measure and its direction at the current point.
    pub fn psi(&mut self) -> Result<Measure> {
        let m = psi_from_derivatives(&self.eval.g, &self.eval.h, &self.shifted, &self.opts)?;
        self.pending_kkt = self.pending_kkt.max(m.solution.kkt.max());
        Ok(m)
    }

    pub fn polyhedron(&self) -> &Polyhedron {
        &self.instance.polyhedron
    }

    fn set_point(&mut self, x: DVector<f64>) -> Result<()> {
        self.eval = self.instance.objective.evaluate(&x)?;
        self.shifted = shifted_constraints(&self.instance.polyhedron, &x)?;
        self.model = QuadraticModel::new(self.eval.f, self.eval.g.clone(), self.eval.h.clone())?;
        self.x = x;
        self.chi = None;
        Ok(())
    }

    fn resolve(&mut self) -> Result<()> {
        self.sol = solve_qk_with(&self.model, &self.shifted, self.delta, &self.opts)?;
        self.pending_solves += 1;
        self.pending_kkt = self.pending_kkt.max(self.sol.kkt.max());
        self.cached_step = false;
        Ok(())
    }

    /// Snapshot of the current state as a record without a step outcome.
    fn snapshot(&mut self, kind: StepKind, started: Instant) -> IterationRecord {
        let s = &self.sol.s;
        let g_dot_s = self.eval.g.dot(s);
        let s_h_s = s.dot(&(&self.eval.h * s));
        let model_decrease = -(g_dot_s + 0.5 * s_h_s);
        let rec = IterationRecord {
            k: self.records.len(),
            step_kind: kind,
            x: self.x.iter().copied().collect(),
            f: self.eval.f,
            delta: self.delta,
            big_delta: self.big_delta,
            sigma: self.sigma,
            chi: self.chi.as_ref().map_or(f64::NAN, |m| m.value),
            psi: None,
            s: s.iter().copied().collect(),
            s_norm: s.norm(),
            lambda: self.sol.lambda_tr,
            f_trial: None,
            rho: None,
            step_class: None,
            model_decrease,
            g_dot_s,
            s_h_s,
            path_assumption_case: g_dot_s >= 0.0 && s_h_s <= 0.0,
            kkt: self.sol.kkt,
            kkt_max: self.pending_kkt,
            tie: self.sol.tie(),
            cached_step: self.cached_step,
            contract: None,
            curvature: None,
            subproblem_solves: self.pending_solves,
            wall_clock_s: started.elapsed().as_secs_f64(),
        };
        self.pending_solves = 0;
        self.pending_kkt = 0.0;
        rec
    }

    /// Runs one iteration from the current state and records it.
    pub fn step(&mut self) -> Result<StepClass> {
        let started = Instant::now();
        self.chi()?;
        let s = self.sol.s.clone();
        let s_norm = s.norm();
        let lambda = self.sol.lambda_tr;
        if !(s_norm > 0.0) {
            return Err(Error::InvalidInstance(
                "trial step vanished away from a stationary point".into(),
            ));
        }
        let f_trial = self.instance.objective.value(&(&self.x + &s))?;
        let rho_k = (self.eval.f - f_trial) / s_norm.powi(3);
        let class = classify_step(
            rho_k,
            self.cfg.rho,
            lambda,
            s_norm,
            self.sigma,
            self.big_delta,
            self.cfg.tolerances.tau_eq,
        );
        let mut rec = self.snapshot(StepKind::FirstOrder, started);
        rec.f_trial = Some(f_trial);
        rec.rho = Some(rho_k);
        rec.step_class = Some(class);

        match class {
            StepClass::AcceptDelta | StepClass::AcceptSigma => {
                let st = accept_update(
                    &self.x,
                    &s,
                    lambda,
                    self.delta,
                    self.big_delta,
                    self.sigma,
                    self.cfg.gamma_e,
                );
                self.big_delta = st.big_delta;
                self.delta = st.delta;
                self.sigma = st.sigma;
                self.set_point(st.x)?;
                self.resolve()?;
            }
            StepClass::Expand => {
                self.delta = expand_update(lambda, self.sigma, self.big_delta);
                self.resolve()?;
            }
            StepClass::Contract => {
                let chi = self.chi.as_ref().map_or(0.0, |m| m.value);
                let input = ContractInput {
                    s_norm,
                    lambda,
                    big_delta: self.big_delta,
                    chi,
                };
                let out = contract(&self.model, &self.shifted, input, &self.ledger, &self.cfg)?;
                self.pending_solves += out.record.solves;
                self.pending_kkt = self.pending_kkt.max(out.kkt_max);
                self.delta = out.delta_next;
                rec.contract = Some(out.record);
                match out.cached {
                    Some(sol) => {
                        self.sol = sol;
                        self.cached_step = true;
                    }
                    None => self.resolve()?,
                }
                let ratio = self.sol.lambda_tr / self.sol.norm();
                if ratio.is_finite() {
                    self.sigma = self.sigma.max(ratio);
                }
            }
        }
        // solves made while updating belong to this iteration
        rec.subproblem_solves += self.pending_solves;
        rec.kkt_max = rec.kkt_max.max(self.pending_kkt);
        self.pending_solves = 0;
        self.pending_kkt = 0.0;
        rec.wall_clock_s = started.elapsed().as_secs_f64();
        self.records.push(rec);
        Ok(class)
    }

    /// Moves to `x` along a direction chosen outside the engine and records the move.
    ///
    /// The radius, its cap and the ratio bound are kept; the subproblem is
    /// re-solved at the new point.
    pub fn curvature_move(&mut self, mut rec: IterationRecord, x: DVector<f64>) -> Result<()> {
        let started = Instant::now();
        self.set_point(x)?;
        self.resolve()?;
        rec.subproblem_solves += self.pending_solves;
        rec.kkt_max = rec.kkt_max.max(self.pending_kkt);
        self.pending_solves = 0;
        self.pending_kkt = 0.0;
        rec.wall_clock_s += started.elapsed().as_secs_f64();
        self.records.push(rec);
        Ok(())
    }

    /// A record of the current state for a curvature step, to be completed by the caller.
    pub fn curvature_record(&mut self, kind: StepKind, started: Instant) -> IterationRecord {
        self.snapshot(kind, started)
    }

    /// Appends the terminal record and assembles the trace.
    pub fn finish(
        mut self,
        algorithm: Algorithm,
        termination: Termination,
        eps_h: Option<f64>,
        h_tilde: Option<f64>,
        final_psi: Option<f64>,
    ) -> RunOutcome {
        let started = Instant::now();
        if self.chi.is_none() {
            // a failure may leave the measure unevaluated; record NaN-free zero in that case
            if self.chi().is_err() {
                self.chi = None;
            }
        }
        let mut terminal = self.snapshot(StepKind::Terminal, started);
        if terminal.chi.is_nan() {
            terminal.chi = -1.0;
        }
        terminal.psi = final_psi;
        self.records.push(terminal);

        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        let mut ties = 0;
        let mut clamps = 0;
        let mut solves = 0;
        let mut kappa: Option<f64> = None;
        let mut tagged = 0;
        let mut max_big_delta = 0.0_f64;
        for r in &self.records {
            let key = match (r.step_kind, r.step_class) {
                (StepKind::FirstOrder, Some(c)) => serde_json::to_value(c).unwrap().as_str().unwrap().to_string(),
                (kind, _) => serde_json::to_value(kind).unwrap().as_str().unwrap().to_string(),
            };
            *counts.entry(key).or_default() += 1;
            ties += r.tie as usize;
            clamps += (r.step_kind == StepKind::ClampedCurvature) as usize;
            solves += r.subproblem_solves;
            max_big_delta = max_big_delta.max(r.big_delta);
            if r.step_kind == StepKind::FirstOrder && r.path_assumption_case {
                tagged += 1;
                let denom = r.lambda * r.s_norm * r.s_norm;
                if denom > 0.0 {
                    let k = r.model_decrease / denom;
                    kappa = Some(kappa.map_or(k, |v: f64| v.min(k)));
                }
            }
        }
        let last = self.records.last().unwrap();
        let summary = TraceSummary {
            termination: termination.clone(),
            iterations: self.records.len() - 1,
            counts,
            final_x: last.x.clone(),
            final_f: last.f,
            final_chi: last.chi,
            final_psi,
            subproblem_solves: solves,
            ties,
            clamps,
            max_big_delta,
            delta_cap_exceeded: max_big_delta > self.ledger.delta_cap_estimate,
            empirical_kappa: kappa,
            path_assumption_cases: tagged,
            wall_clock_s: self.clock.elapsed().as_secs_f64(),
        };
        let header = TraceHeader {
            schema_version: SCHEMA_VERSION,
            algorithm,
            instance_name: self.instance.name.clone(),
            instance: self.instance.to_json_value(),
            config: self.cfg,
            eps_g: self.cfg.epsilon,
            eps_h,
            h_tilde,
        };
        RunOutcome {
            x: self.x.clone(),
            termination,
            trace: Trace {
                header,
                ledger: self.ledger,
                records: self.records,
                summary: Some(summary),
            },
        }
    }
}

/// Runs the first-order method until `chi <= epsilon` or the iteration cap.
///
/// Errors raised before the first iteration are returned directly; later
/// failures end the run with a `Failed` termination and the partial trace.
pub fn run_first_order(instance: &ProblemInstance, cfg: SolverConfig) -> Result<RunOutcome> {
    let mut engine = FirstOrderEngine::new(instance, cfg)?;
    let termination = loop {
        let chi = match engine.chi() {
            Ok(v) => v,
            Err(e) => break Termination::Failed { message: e.to_string() },
        };
        if chi <= cfg.epsilon {
            break Termination::FirstOrderStationary;
        }
        if engine.iterations() >= cfg.max_iterations {
            break Termination::IterationCap;
        }
        if let Err(e) = engine.step() {
            break Termination::Failed { message: e.to_string() };
        }
    };
    Ok(engine.finish(Algorithm::FirstOrder, termination, None, None, None))
}
