//! Enumeration of stationary candidates over the faces of a polyhedron.

use nalgebra::{DMatrix, DVector};

use super::trs::Spectrum;
use super::FaceCandidate;
use crate::error::{Error, Result};
use crate::linalg::affine_face;
use crate::problem::Polyhedron;

/// Rows scaled to unit norm, used for rank decisions.
pub(crate) struct NormalizedRows {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
}

impl NormalizedRows {
    pub(crate) fn new(poly: &Polyhedron) -> Self {
        let mut a = poly.a.clone();
        let mut b = poly.b.clone();
        for i in 0..a.nrows() {
            let norm = a.row(i).norm();
            if norm > 0.0 {
                a.row_mut(i).scale_mut(1.0 / norm);
                b[i] /= norm;
            }
        }
        Self { a, b }
    }
}

/// Collects every stationary point of `g^T s + 1/2 s^T H s` over each face of
/// `poly`, inside and on the ball of radius `delta` when one is given. Only
/// candidates feasible within `tau_feas` are returned.
pub(crate) fn enumerate(
    g: &DVector<f64>,
    h: &DMatrix<f64>,
    poly: &Polyhedron,
    delta: Option<f64>,
    face_cap: usize,
    tau_feas: f64,
) -> Result<(Vec<FaceCandidate>, usize)> {
    let n = g.len();
    let m = poly.rows();
    if m > face_cap {
        return Err(Error::FaceBudgetExceeded { rows: m, cap: face_cap });
    }
    let rows = NormalizedRows::new(poly);
    let mut out = Vec::new();
    let mut considered = 0;
    for mask in 0u32..(1u32 << m) {
        let size = mask.count_ones() as usize;
        if size > n {
            continue;
        }
        let active: Vec<usize> = (0..m).filter(|i| mask & (1 << i) != 0).collect();
        let a_i = rows.a.select_rows(&active);
        let b_i = rows.b.select_rows(&active);
        let Some(face) = affine_face(&a_i, &b_i, n) else {
            continue;
        };
        let p = &face.point;
        let z = &face.basis;
        let radius = match delta {
            Some(d) => {
                let gap = d * d - p.norm_squared();
                if gap < -2.0 * tau_feas * d {
                    continue;
                }
                Some(gap.max(0.0).sqrt())
            }
            None => None,
        };
        let mut local: Vec<(DVector<f64>, bool, f64)> = Vec::new();
        if z.ncols() == 0 || radius.is_some_and(|r| r <= 1e-12 * delta.unwrap_or(1.0)) {
            local.push((p.clone(), radius.is_some(), 0.0));
        } else {
            let h_r = z.transpose() * h * z;
            let g_r = z.transpose() * (g + h * p);
            let spectrum = Spectrum::new(&h_r, &g_r)?;
            if let Some(y) = spectrum.interior_point() {
                if radius.is_none_or(|r| y.norm() <= r * (1.0 + 1e-12)) {
                    local.push((p + z * y, false, 0.0));
                }
            }
            if let Some(r) = radius {
                for pt in spectrum.sphere_points(r)? {
                    local.push((p + z * pt.y, true, pt.multiplier));
                }
            }
        }
        for (s, ball_active, lambda_tr) in local {
            considered += 1;
            if !is_feasible(poly, &s, delta, tau_feas) {
                continue;
            }
            let q_value = g.dot(&s) + 0.5 * s.dot(&(h * &s));
            out.push(FaceCandidate {
                active_set: active.clone(),
                ball_active,
                s,
                q_value,
                lambda_tr,
            });
        }
    }
    Ok((out, considered))
}

pub(crate) fn is_feasible(poly: &Polyhedron, s: &DVector<f64>, delta: Option<f64>, tau_feas: f64) -> bool {
    if !s.iter().all(|v| v.is_finite()) {
        return false;
    }
    if let Some(d) = delta {
        if s.norm() > d + tau_feas {
            return false;
        }
    }
    poly.slack(s).iter().all(|v| *v >= -tau_feas)
}
