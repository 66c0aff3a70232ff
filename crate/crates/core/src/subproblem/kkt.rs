//! Multiplier recovery and first-order optimality residuals.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{QuadraticModel, SubproblemSolution};
use crate::linalg::nnls;
use crate::problem::Polyhedron;

/// Residuals of the optimality conditions at a subproblem solution.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct KktResiduals {
    /// `||g + (H + lambda I) s + A^T lambda_lin||`.
    pub stationarity: f64,
    /// Worst `|lambda_lin_i * slack_i|`, or the worst negative multiplier.
    pub comp_lin: f64,
    /// `|lambda * (delta^2 - ||s||^2)|`.
    pub comp_tr: f64,
}

impl KktResiduals {
    pub fn max(&self) -> f64 {
        self.stationarity.max(self.comp_lin).max(self.comp_tr)
    }
}

/// Recomputes the residuals of `solution` from scratch.
///
/// For solutions of the regularized problem pass `delta = ||s||`, which makes
/// the pair optimal for the ball of that radius.
pub fn kkt_residual(
    solution: &SubproblemSolution,
    model: &QuadraticModel,
    shifted_poly: &Polyhedron,
    delta: f64,
) -> KktResiduals {
    residuals(
        &solution.s,
        solution.lambda_tr,
        &solution.lambda_lin,
        model,
        shifted_poly,
        delta,
    )
}

pub(crate) fn residuals(
    s: &DVector<f64>,
    lambda_tr: f64,
    lambda_lin: &DVector<f64>,
    model: &QuadraticModel,
    poly: &Polyhedron,
    delta: f64,
) -> KktResiduals {
    let mut grad = &model.g + &model.h * s + lambda_tr * s;
    if poly.rows() > 0 {
        grad += poly.a.transpose() * lambda_lin;
    }
    let slack = poly.slack(s);
    let comp_lin = lambda_lin
        .iter()
        .zip(slack.iter())
        .map(|(l, sl)| (l * sl).abs().max(-l))
        .fold(0.0, f64::max);
    KktResiduals {
        stationarity: grad.norm(),
        comp_lin,
        comp_tr: (lambda_tr * (delta * delta - s.norm_squared())).abs(),
    }
}

/// Non-negative multipliers for the rows and ball that are active at `s`.
///
/// `h` already includes any regularization. Returns `(lambda_tr, lambda_lin)`;
/// `lambda_tr` is zero when `delta` is `None`.
pub(crate) fn recover_multipliers(
    g: &DVector<f64>,
    h: &DMatrix<f64>,
    poly: &Polyhedron,
    s: &DVector<f64>,
    delta: Option<f64>,
) -> (f64, DVector<f64>) {
    let n = s.len();
    let m = poly.rows();
    let slack = poly.slack(s);
    let s_norm = s.norm();
    let mut columns: Vec<DVector<f64>> = Vec::new();
    let mut rows_used = Vec::new();
    for i in 0..m {
        let row = poly.a.row(i).transpose();
        let norm = row.norm();
        let tol = 1e-9 * (1.0 + (poly.b[i] / norm).abs() + s_norm);
        if slack[i] / norm <= tol {
            columns.push(row / norm);
            rows_used.push((i, norm));
        }
    }
    let ball = delta.is_some_and(|d| s_norm > 0.0 && s_norm >= d * (1.0 - 1e-9));
    if ball {
        columns.push(s.clone());
    }
    let mut lambda_lin = DVector::zeros(m);
    if columns.is_empty() {
        return (0.0, lambda_lin);
    }
    let mat = DMatrix::from_fn(n, columns.len(), |r, c| columns[c][r]);
    let target = -(g + h * s);
    let z = nnls(&mat, &target);
    for (c, &(i, norm)) in rows_used.iter().enumerate() {
        lambda_lin[i] = z[c] / norm;
    }
    let lambda_tr = if ball { z[columns.len() - 1] } else { 0.0 };
    (lambda_tr, lambda_lin)
}
