//! Brute-force and analytic oracles used to verify the solvers, plus the
//! worst-case budget formulas.

mod budget;
mod grid;

pub use budget::{evaluate_budgets, k_c1, BudgetInputs, ComplexityBudget};
pub use grid::{
    grid_minimize, FnRegion, GridObjective, GridRegion, GridResult, LipschitzObjective, PolyBall, QuadraticObjective,
    MAX_GRID_DIMENSION,
};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::problem::{ObjectiveModel, Polyhedron};
use crate::subproblem::QuadraticModel;

/// Default central-difference step.
pub const FD_STEP: f64 = 1e-5;

/// Membership slack used by the grid oracles.
const GRID_TOL: f64 = 1e-9;

/// Grid minimum of `model` over `shifted ∩ {||s|| <= delta}`, including `f0`.
pub fn grid_subproblem(
    model: &QuadraticModel,
    shifted: &Polyhedron,
    delta: f64,
    resolution: f64,
) -> Result<GridResult> {
    let obj = QuadraticObjective::from_model(model);
    let region = PolyBall {
        poly: shifted,
        radius: delta,
        tol: GRID_TOL,
    };
    let mut r = grid_minimize(&obj, &region, model.dimension(), delta, resolution)?;
    r.value += model.f0;
    Ok(r)
}

/// Grid minimum of `g^T s` over feasible unit steps; its negation approximates `chi`.
pub fn grid_chi(g: &DVector<f64>, shifted: &Polyhedron, resolution: f64) -> Result<GridResult> {
    let n = g.len();
    let model = QuadraticModel::new(0.0, g.clone(), DMatrix::zeros(n, n))?;
    grid_subproblem(&model, shifted, 1.0, resolution)
}

/// Grid minimum of `d^T H d` over feasible non-ascent unit directions; its
/// negation approximates `psi`.
pub fn grid_psi(g: &DVector<f64>, h: &DMatrix<f64>, shifted: &Polyhedron, resolution: f64) -> Result<GridResult> {
    let poly = if g.norm() > crate::stationarity::GRADIENT_FLOOR {
        shifted.with_row(g, 0.0)
    } else {
        shifted.clone()
    };
    let model = QuadraticModel::new(0.0, DVector::zeros(g.len()), 2.0 * h)?;
    grid_subproblem(&model, &poly, 1.0, resolution)
}

/// Smallest sampled value of `g^T y + 1/2 y^T H y` on the sphere `||y|| = radius`.
pub fn sphere_sample_min(h: &DMatrix<f64>, g: &DVector<f64>, radius: f64, samples: usize, seed: u64) -> f64 {
    let n = g.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = f64::INFINITY;
    let mut taken = 0;
    while taken < samples {
        let y: DVector<f64> = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        let norm = y.norm();
        if !(1e-3..=1.0).contains(&norm) {
            continue;
        }
        taken += 1;
        let y: DVector<f64> = y * (radius / norm);
        best = best.min(g.dot(&y) + 0.5 * y.dot(&(h * &y)));
    }
    best
}

/// Largest relative error between analytic and central-difference first and
/// second derivatives over `points`.
///
/// Errors are scaled by `max(1, |analytic|)` entrywise.
pub fn finite_difference_check(model: &ObjectiveModel, points: &[DVector<f64>], step: f64) -> Result<f64> {
    let mut worst = 0.0_f64;
    let rel = |exact: f64, approx: f64| (exact - approx).abs() / exact.abs().max(1.0);
    for x in points {
        let e = model.evaluate(x)?;
        for i in 0..x.len() {
            let mut plus = x.clone();
            let mut minus = x.clone();
            plus[i] += step;
            minus[i] -= step;
            let fd = (model.value(&plus)? - model.value(&minus)?) / (2.0 * step);
            worst = worst.max(rel(e.g[i], fd));
            let gp = model.evaluate(&plus)?.g;
            let gm = model.evaluate(&minus)?.g;
            for j in 0..x.len() {
                worst = worst.max(rel(e.h[(j, i)], (gp[j] - gm[j]) / (2.0 * step)));
            }
        }
    }
    Ok(worst)
}

/// Least-squares slope of `ln(count)` against `ln(1/epsilon)`.
///
/// Counts below one are treated as one.
pub fn scaling_fit(data: &[(f64, f64)]) -> Result<f64> {
    let mut eps: Vec<f64> = data.iter().map(|d| d.0).collect();
    eps.sort_by(f64::total_cmp);
    eps.dedup();
    if eps.len() < 3 {
        return Err(Error::InvalidConfig(
            "scaling fit needs at least three distinct tolerances".into(),
        ));
    }
    if data.iter().any(|&(e, _)| !(e > 0.0)) {
        return Err(Error::InvalidConfig("tolerances must be positive".into()));
    }
    let xs: Vec<f64> = data.iter().map(|&(e, _)| -e.ln()).collect();
    let ys: Vec<f64> = data.iter().map(|&(_, c)| c.max(1.0).ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    Ok(sxy / sxx)
}
