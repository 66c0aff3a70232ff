//! First- and second-order stationarity measures.
//!
//! `chi(x) = -min { grad f(x)^T s : x + s in P, ||s|| <= 1 }` measures how far a
//! point is from first-order stationarity. `psi(x)` is the negated minimum of
//! the Hessian quadratic form `d^T H d` over feasible unit directions that do
//! not ascend to first order. Both reuse the exact subproblem solver.

use nalgebra::{DMatrix, DVector};

use crate::error::Result;
use crate::problem::{shifted_constraints, Polyhedron, ProblemInstance};
use crate::subproblem::{solve_qk_with, QuadraticModel, SolverOptions, SubproblemSolution};

/// Gradients below this norm are treated as zero when forming the non-ascent row.
pub const GRADIENT_FLOOR: f64 = 1e-12;

/// A measure value, its minimizing direction, and the solve that produced it.
#[derive(Debug, Clone)]
pub struct Measure {
    pub value: f64,
    pub witness: DVector<f64>,
    pub solution: SubproblemSolution,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StationarityReport {
    pub chi: f64,
    pub chi_witness: DVector<f64>,
    pub psi: f64,
    pub psi_witness: DVector<f64>,
    pub computed_at: DVector<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Stationarity {
    pub first_order: bool,
    pub second_order: bool,
}

/// `chi` for gradient `g` over the steps allowed by `shifted`.
pub fn chi_from_gradient(g: &DVector<f64>, shifted: &Polyhedron, opts: &SolverOptions) -> Result<Measure> {
    let n = g.len();
    let model = QuadraticModel::new(0.0, g.clone(), DMatrix::zeros(n, n))?;
    let solution = solve_qk_with(&model, shifted, 1.0, opts)?;
    Ok(Measure {
        value: 0.0 - solution.q_value,
        witness: solution.s.clone(),
        solution,
    })
}

/// `psi` for gradient `g` and Hessian `h` over the steps allowed by `shifted`.
pub fn psi_from_derivatives(
    g: &DVector<f64>,
    h: &DMatrix<f64>,
    shifted: &Polyhedron,
    opts: &SolverOptions,
) -> Result<Measure> {
    let n = g.len();
    let poly = if g.norm() > GRADIENT_FLOOR {
        shifted.with_row(g, 0.0)
    } else {
        shifted.clone()
    };
    // the solver minimizes 1/2 d^T M d, so M = 2 H gives d^T H d
    let model = QuadraticModel::new(0.0, DVector::zeros(n), 2.0 * h)?;
    let mut solution = solve_qk_with(&model, &poly, 1.0, opts)?;
    // report multipliers against the caller's rows only
    if poly.rows() > shifted.rows() {
        solution.lambda_lin = solution.lambda_lin.rows(0, shifted.rows()).clone_owned();
    }
    Ok(Measure {
        value: 0.0 - solution.q_value,
        witness: solution.s.clone(),
        solution,
    })
}

/// First-order measure at a feasible point.
pub fn chi(instance: &ProblemInstance, x: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
    let eval = instance.objective.evaluate(x)?;
    let shifted = shifted_constraints(&instance.polyhedron, x)?;
    let m = chi_from_gradient(&eval.g, &shifted, &SolverOptions::default())?;
    Ok((m.value, m.witness))
}

/// Second-order measure at a feasible point.
pub fn psi(instance: &ProblemInstance, x: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
    let eval = instance.objective.evaluate(x)?;
    let shifted = shifted_constraints(&instance.polyhedron, x)?;
    let m = psi_from_derivatives(&eval.g, &eval.h, &shifted, &SolverOptions::default())?;
    Ok((m.value, m.witness))
}

/// Both measures at once.
pub fn report(instance: &ProblemInstance, x: &DVector<f64>) -> Result<StationarityReport> {
    let (chi, chi_witness) = chi(instance, x)?;
    let (psi, psi_witness) = psi(instance, x)?;
    Ok(StationarityReport {
        chi,
        chi_witness,
        psi,
        psi_witness,
        computed_at: x.clone(),
    })
}

pub fn is_approx_stationary(report: &StationarityReport, eps_g: f64, eps_h: f64) -> Stationarity {
    let first_order = report.chi <= eps_g;
    Stationarity {
        first_order,
        second_order: first_order && report.psi <= eps_h,
    }
}
