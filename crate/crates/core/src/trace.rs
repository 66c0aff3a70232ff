//! Line-delimited JSON run traces.
//!
//! A trace is a header line, a ledger line, one line per iteration and a
//! closing summary line. Every line carries a `type` tag. Wall-clock fields
//! are the only nondeterministic content and can be stripped for comparison.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::lc_trace::{ConstantsLedger, SolverConfig, StepClass};
use crate::problem::ProblemInstance;
use crate::subproblem::KktResiduals;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    FirstOrder,
    SecondOrder,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepKind {
    FirstOrder,
    Curvature,
    ClampedCurvature,
    /// Final state after termination; no step is taken from it.
    Terminal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum Termination {
    FirstOrderStationary,
    SecondOrderStationary,
    IterationCap,
    Failed { message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub schema_version: u32,
    pub algorithm: Algorithm,
    pub instance_name: String,
    /// The full problem, so that a trace can be checked on its own.
    pub instance: Value,
    pub config: SolverConfig,
    pub eps_g: f64,
    pub eps_h: Option<f64>,
    pub h_tilde: Option<f64>,
}

impl TraceHeader {
    pub fn problem(&self) -> Result<ProblemInstance> {
        ProblemInstance::from_json_str(&self.instance.to_string())
    }
}

/// Which way the contraction routine returned.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContractBranch {
    /// Shifted multiplier gave an acceptable ratio; radius is its step norm.
    ShiftAccepted,
    /// Shifted multiplier overshot the ratio ceiling; fall back to the probe step.
    ShiftRejected,
    /// Geometric escalation produced a step no shorter than the floor.
    Escalated,
    /// Geometric escalation overshot; radius is the contraction floor.
    Floor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractRecord {
    pub branch: ContractBranch,
    /// Probe multiplier after any escalation for unboundedness.
    pub lambda_bar: f64,
    pub s_bar_norm: f64,
    /// Multipliers tried after the probe, in order.
    pub lambdas_tried: Vec<f64>,
    pub norms: Vec<f64>,
    /// Probe escalations forced by an unbounded regularized problem.
    pub unbounded_escalations: usize,
    pub delta_next: f64,
    /// Whether the returned radius came with a reusable step.
    pub cached: bool,
    pub solves: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvatureRecord {
    pub psi: f64,
    pub direction: Vec<f64>,
    pub nominal_t: f64,
    pub t: f64,
    /// Largest feasible stretch along the direction; `None` when unbounded.
    pub max_stretch: Option<f64>,
    pub clamped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub k: usize,
    pub step_kind: StepKind,
    pub x: Vec<f64>,
    pub f: f64,
    pub delta: f64,
    #[serde(rename = "Delta")]
    pub big_delta: f64,
    pub sigma: f64,
    pub chi: f64,
    pub psi: Option<f64>,
    pub s: Vec<f64>,
    pub s_norm: f64,
    pub lambda: f64,
    pub f_trial: Option<f64>,
    pub rho: Option<f64>,
    pub step_class: Option<StepClass>,
    /// `f_k - q_k(s_k)`.
    pub model_decrease: f64,
    pub g_dot_s: f64,
    pub s_h_s: f64,
    /// `g^T s >= 0` and `s^T H s <= 0`: the model decrease rests on an unverified path assumption.
    pub path_assumption_case: bool,
    pub kkt: KktResiduals,
    /// Worst residual over every subproblem solved during this iteration.
    pub kkt_max: f64,
    pub tie: bool,
    /// The step was reused from the previous contraction instead of re-solved.
    pub cached_step: bool,
    pub contract: Option<ContractRecord>,
    pub curvature: Option<CurvatureRecord>,
    pub subproblem_solves: usize,
    pub wall_clock_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceSummary {
    pub termination: Termination,
    pub iterations: usize,
    pub counts: BTreeMap<String, usize>,
    pub final_x: Vec<f64>,
    pub final_f: f64,
    pub final_chi: f64,
    pub final_psi: Option<f64>,
    pub subproblem_solves: usize,
    pub ties: usize,
    pub clamps: usize,
    pub max_big_delta: f64,
    pub delta_cap_exceeded: bool,
    /// Smallest `(f_k - q_k(s_k)) / (lambda_k ||s_k||^2)` over tagged iterations.
    pub empirical_kappa: Option<f64>,
    pub path_assumption_cases: usize,
    pub wall_clock_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum Line {
    Header(TraceHeader),
    Ledger(ConstantsLedger),
    Iteration(IterationRecord),
    Summary(TraceSummary),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub header: TraceHeader,
    pub ledger: ConstantsLedger,
    pub records: Vec<IterationRecord>,
    pub summary: Option<TraceSummary>,
}

impl Trace {
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        let mut push = |line: Line| {
            out.push_str(&serde_json::to_string(&line).expect("trace line serializes"));
            out.push('\n');
        };
        push(Line::Header(self.header.clone()));
        push(Line::Ledger(self.ledger.clone()));
        for r in &self.records {
            push(Line::Iteration(r.clone()));
        }
        if let Some(s) = &self.summary {
            push(Line::Summary(s.clone()));
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self> {
        let mut header = None;
        let mut ledger = None;
        let mut records = Vec::new();
        let mut summary = None;
        for (no, raw) in text.lines().enumerate() {
            if raw.trim().is_empty() {
                continue;
            }
            let value: Value = serde_json::from_str(raw).map_err(|e| Error::Parse {
                field: format!("line {}", no + 1),
                message: e.to_string(),
            })?;
            if no == 0 {
                let found = value
                    .get("schema_version")
                    .and_then(Value::as_u64)
                    .ok_or_else(|| Error::Parse {
                        field: "line 1.schema_version".into(),
                        message: "missing or not an integer".into(),
                    })?;
                if found != SCHEMA_VERSION as u64 {
                    return Err(Error::SchemaVersion {
                        expected: SCHEMA_VERSION,
                        found: found.min(u32::MAX as u64) as u32,
                    });
                }
            }
            let line: Line = serde_json::from_value(value).map_err(|e| Error::Parse {
                field: format!("line {}", no + 1),
                message: e.to_string(),
            })?;
            match line {
                Line::Header(h) => header = Some(h),
                Line::Ledger(l) => ledger = Some(l),
                Line::Iteration(r) => records.push(r),
                Line::Summary(s) => summary = Some(s),
            }
        }
        let missing = |what: &str| Error::Parse {
            field: what.into(),
            message: "record missing from trace".into(),
        };
        Ok(Self {
            header: header.ok_or_else(|| missing("header"))?,
            ledger: ledger.ok_or_else(|| missing("ledger"))?,
            records,
            summary,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_jsonl())?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_jsonl(&std::fs::read_to_string(path)?)
    }

    /// A copy with every wall-clock field zeroed.
    pub fn without_wall_clock(&self) -> Self {
        let mut t = self.clone();
        for r in &mut t.records {
            r.wall_clock_s = 0.0;
        }
        if let Some(s) = &mut t.summary {
            s.wall_clock_s = 0.0;
        }
        t
    }
}
