//! Exact global solvers for the trust-region subproblem over a polyhedron and
//! for its regularized form without the ball.
//!
//! Both work by enumerating every face of the shifted polyhedron, collecting
//! all stationary points of the model restricted to that face, and keeping the
//! best candidate that satisfies the remaining rows. The cost is exponential
//! in the number of rows, which is capped.

mod faces;
mod kkt;
mod trs;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

pub use kkt::{kkt_residual, KktResiduals};
pub use trs::{solve_equality_trs, TrsPoint, MAX_BISECTIONS};

use crate::error::{Error, Result};
use crate::linalg::lex_cmp;
use crate::problem::Polyhedron;

/// `q(s) = f0 + g^T s + 1/2 s^T H s`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticModel {
    pub f0: f64,
    pub g: DVector<f64>,
    pub h: DMatrix<f64>,
}

impl QuadraticModel {
    pub fn new(f0: f64, g: DVector<f64>, h: DMatrix<f64>) -> Result<Self> {
        if h.nrows() != g.len() || h.ncols() != g.len() {
            return Err(Error::DimensionMismatch {
                expected: g.len(),
                found: h.nrows(),
            });
        }
        let h = 0.5 * (&h + h.transpose());
        Ok(Self { f0, g, h })
    }

    pub fn dimension(&self) -> usize {
        self.g.len()
    }

    pub fn value(&self, s: &DVector<f64>) -> f64 {
        self.f0 + self.g.dot(s) + 0.5 * s.dot(&(&self.h * s))
    }

    /// The same model with `lambda / 2 * ||s||^2` added.
    pub fn regularized(&self, lambda: f64) -> Self {
        let n = self.dimension();
        Self {
            f0: self.f0,
            g: self.g.clone(),
            h: &self.h + DMatrix::identity(n, n) * lambda,
        }
    }
}

/// One stationary point found during face enumeration.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceCandidate {
    pub active_set: Vec<usize>,
    pub ball_active: bool,
    pub s: DVector<f64>,
    /// Model value without the constant term.
    pub q_value: f64,
    /// Sphere multiplier from the secular equation (zero off the sphere).
    pub lambda_tr: f64,
}

/// Tuning knobs shared by both subproblem solvers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub face_cap: usize,
    pub tau_feas: f64,
    pub tau_kkt: f64,
    pub tau_tie: f64,
    /// Keep every feasible candidate on the returned solution.
    pub keep_candidates: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            face_cap: 12,
            tau_feas: 1e-9,
            tau_kkt: 1e-8,
            tau_tie: 1e-9,
            keep_candidates: false,
        }
    }
}

/// A global minimizer with its multipliers.
#[derive(Debug, Clone, PartialEq)]
pub struct SubproblemSolution {
    pub s: DVector<f64>,
    /// Ball multiplier, or the regularization weight for the regularized problem.
    pub lambda_tr: f64,
    pub lambda_lin: DVector<f64>,
    pub active_set: Vec<usize>,
    /// `q(s)` including the constant term.
    pub q_value: f64,
    pub kkt: KktResiduals,
    /// Other distinct minimizers whose value ties with `s` within `tau_tie`.
    pub tied_alternatives: Vec<DVector<f64>>,
    pub candidates_considered: usize,
    pub candidates: Option<Vec<FaceCandidate>>,
}

impl SubproblemSolution {
    pub fn tie(&self) -> bool {
        !self.tied_alternatives.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.s.norm()
    }
}

/// Result of the regularized solve.
#[derive(Debug, Clone, PartialEq)]
pub enum RegularizedOutcome {
    Solved(SubproblemSolution),
    /// The model decreases without bound; `curvature` is the most negative
    /// value of `1/2 d^T (H + lambda I) d` over unit recession directions.
    Unbounded {
        curvature: f64,
    },
}

impl RegularizedOutcome {
    pub fn solution(self) -> Option<SubproblemSolution> {
        match self {
            RegularizedOutcome::Solved(s) => Some(s),
            RegularizedOutcome::Unbounded { .. } => None,
        }
    }
}

fn check_shapes(model: &QuadraticModel, poly: &Polyhedron) -> Result<()> {
    if poly.dimension() != model.dimension() {
        return Err(Error::DimensionMismatch {
            expected: model.dimension(),
            found: poly.dimension(),
        });
    }
    Ok(())
}

/// Minimizes `q` over `{||s|| <= delta} ∩ {A s <= b}`.
pub fn solve_qk(model: &QuadraticModel, shifted_poly: &Polyhedron, delta: f64) -> Result<SubproblemSolution> {
    solve_qk_with(model, shifted_poly, delta, &SolverOptions::default())
}

pub fn solve_qk_with(
    model: &QuadraticModel,
    shifted_poly: &Polyhedron,
    delta: f64,
    opts: &SolverOptions,
) -> Result<SubproblemSolution> {
    check_shapes(model, shifted_poly)?;
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "trust-region radius must be positive, got {delta}"
        )));
    }
    let (cands, considered) = faces::enumerate(
        &model.g,
        &model.h,
        shifted_poly,
        Some(delta),
        opts.face_cap,
        opts.tau_feas,
    )?;
    let (best, ties) = select(&cands, opts.tau_tie).ok_or(Error::NoFeasibleCandidate)?;
    let s = cands[best].s.clone();
    let (lambda_tr, lambda_lin) = kkt::recover_multipliers(&model.g, &model.h, shifted_poly, &s, Some(delta));
    Ok(assemble(
        model,
        shifted_poly,
        s,
        lambda_tr,
        lambda_lin,
        delta,
        ties,
        considered,
        cands,
        opts,
    ))
}

/// Minimizes `q(s) + lambda/2 ||s||^2` over `{A s <= b}`.
///
/// Negative `lambda` is accepted. Unboundedness is reported, not raised.
pub fn solve_qk_lambda(model: &QuadraticModel, shifted_poly: &Polyhedron, lambda: f64) -> Result<RegularizedOutcome> {
    solve_qk_lambda_with(model, shifted_poly, lambda, &SolverOptions::default())
}

pub fn solve_qk_lambda_with(
    model: &QuadraticModel,
    shifted_poly: &Polyhedron,
    lambda: f64,
    opts: &SolverOptions,
) -> Result<RegularizedOutcome> {
    check_shapes(model, shifted_poly)?;
    let reg = model.regularized(lambda);
    let n = model.dimension();
    let cone = Polyhedron {
        a: shifted_poly.a.clone(),
        b: DVector::zeros(shifted_poly.rows()),
    };
    let zero = DVector::zeros(n);
    let cone_min = |h: &DMatrix<f64>| -> Result<f64> {
        let (c, _) = faces::enumerate(&zero, h, &cone, Some(1.0), opts.face_cap, opts.tau_feas)?;
        Ok(c.iter().map(|c| c.q_value).fold(0.0, f64::min))
    };
    let has_recession = cone_min(&(-DMatrix::identity(n, n)))? < -0.25;
    let curvature = if has_recession { cone_min(&reg.h)? } else { 0.0 };
    let curv_tol = 1e-10 * reg.h.norm().max(1.0);
    if curvature < -curv_tol {
        return Ok(RegularizedOutcome::Unbounded { curvature });
    }
    let (cands, considered) = faces::enumerate(&reg.g, &reg.h, shifted_poly, None, opts.face_cap, opts.tau_feas)?;
    let Some((best, ties)) = select(&cands, opts.tau_tie) else {
        if has_recession {
            return Ok(RegularizedOutcome::Unbounded { curvature });
        }
        return Err(Error::NoFeasibleCandidate);
    };
    if has_recession && curvature <= curv_tol {
        // flat recession directions: unbounded exactly when a far larger ball does better
        let q_star = cands[best].q_value;
        let far = 1e4 * (1.0 + cands[best].s.norm());
        let (wide, _) = faces::enumerate(&reg.g, &reg.h, shifted_poly, Some(far), opts.face_cap, opts.tau_feas)?;
        let q_far = wide.iter().map(|c| c.q_value).fold(f64::INFINITY, f64::min);
        if q_far < q_star - 1e-9 * (1.0 + q_star.abs()) {
            return Ok(RegularizedOutcome::Unbounded { curvature });
        }
    }
    let s = cands[best].s.clone();
    let (_, lambda_lin) = kkt::recover_multipliers(&reg.g, &reg.h, shifted_poly, &s, None);
    let delta = s.norm();
    let mut sol = assemble(
        model,
        shifted_poly,
        s,
        lambda,
        lambda_lin,
        delta,
        ties,
        considered,
        cands,
        opts,
    );
    sol.q_value = model.value(&sol.s);
    Ok(RegularizedOutcome::Solved(sol))
}

/// Index of the preferred candidate and the distinct points tied with it.
fn select(cands: &[FaceCandidate], tau_tie: f64) -> Option<(usize, Vec<DVector<f64>>)> {
    let q_min = cands.iter().map(|c| c.q_value).fold(f64::INFINITY, f64::min);
    if !q_min.is_finite() {
        return None;
    }
    let band = tau_tie * q_min.abs().max(1.0);
    let tied: Vec<usize> = (0..cands.len()).filter(|&i| cands[i].q_value <= q_min + band).collect();
    let best = *tied.iter().min_by(|&&i, &&j| {
        let (a, b) = (&cands[i].s, &cands[j].s);
        let (na, nb) = (a.norm(), b.norm());
        if (na - nb).abs() <= 1e-12 * na.max(nb).max(1.0) {
            lex_cmp(a, b)
        } else {
            na.total_cmp(&nb)
        }
    })?;
    let chosen = &cands[best].s;
    let same = |a: &DVector<f64>, b: &DVector<f64>| (a - b).norm() <= 1e-9 * a.norm().max(1.0);
    let mut alternatives: Vec<DVector<f64>> = Vec::new();
    for &i in &tied {
        let s = &cands[i].s;
        if !same(s, chosen) && !alternatives.iter().any(|a| same(a, s)) {
            alternatives.push(s.clone());
        }
    }
    alternatives.sort_by(lex_cmp);
    Some((best, alternatives))
}

#[allow(clippy::too_many_arguments)]
fn assemble(
    model: &QuadraticModel,
    poly: &Polyhedron,
    s: DVector<f64>,
    lambda_tr: f64,
    lambda_lin: DVector<f64>,
    delta: f64,
    tied_alternatives: Vec<DVector<f64>>,
    candidates_considered: usize,
    cands: Vec<FaceCandidate>,
    opts: &SolverOptions,
) -> SubproblemSolution {
    let kkt = kkt::residuals(&s, lambda_tr, &lambda_lin, model, poly, delta);
    let slack = poly.slack(&s);
    let active_set = (0..poly.rows())
        .filter(|&i| slack[i] <= 1e-9 * (1.0 + poly.b[i].abs()))
        .collect();
    SubproblemSolution {
        q_value: model.value(&s),
        s,
        lambda_tr,
        lambda_lin,
        active_set,
        kkt,
        tied_alternatives,
        candidates_considered,
        candidates: opts.keep_candidates.then_some(cands),
    }
}
