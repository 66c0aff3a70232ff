//! Small dense linear-algebra helpers shared by the solvers and oracles.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Symmetric eigendecomposition with eigenvalues sorted ascending.
pub fn sym_eigen(h: &DMatrix<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let n = h.nrows();
    if n == 0 {
        return Ok((DVector::zeros(0), DMatrix::zeros(0, 0)));
    }
    if h.iter().any(|v| !v.is_finite()) {
        return Err(Error::Eigensolver("matrix has non-finite entries".into()));
    }
    let sym = 0.5 * (h + h.transpose());
    let eig = sym
        .clone()
        .try_symmetric_eigen(f64::EPSILON, 10_000)
        .ok_or_else(|| Error::Eigensolver("symmetric QR iteration did not converge".into()))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let mut v = eig.eigenvectors.column(src).clone_owned();
        // fix the sign so results do not depend on solver internals
        if let Some(pivot) = v.iter().copied().find(|c| c.abs() > 1e-12) {
            if pivot < 0.0 {
                v.neg_mut();
            }
        }
        vectors.set_column(dst, &v);
    }
    Ok((values, vectors))
}

/// Spectral norm of a symmetric matrix.
pub fn sym_norm2(h: &DMatrix<f64>) -> f64 {
    match sym_eigen(h) {
        Ok((vals, _)) => vals.iter().fold(0.0_f64, |m, v| m.max(v.abs())),
        Err(_) => h.norm(),
    }
}

/// Affine parametrization `{p + Z y}` of `{s : rows s = rhs}`.
#[derive(Debug, Clone)]
pub struct AffineFace {
    /// Minimum-norm point of the face.
    pub point: DVector<f64>,
    /// Orthonormal basis of the null space of `rows`, one column per direction.
    pub basis: DMatrix<f64>,
}

/// Parametrizes the face `rows s = rhs` when `rows` has full row rank.
///
/// Returns `None` for linearly dependent rows.
pub fn affine_face(rows: &DMatrix<f64>, rhs: &DVector<f64>, n: usize) -> Option<AffineFace> {
    let r = rows.nrows();
    if r == 0 {
        return Some(AffineFace {
            point: DVector::zeros(n),
            basis: DMatrix::identity(n, n),
        });
    }
    if r > n {
        return None;
    }
    let mut padded = DMatrix::zeros(n, n);
    padded.rows_mut(0, r).copy_from(rows);
    let svd = padded.svd(true, true);
    let u = svd.u.as_ref()?;
    let v_t = svd.v_t.as_ref()?;
    let sigma_max = svd.singular_values.max();
    let tol = 1e-10 * sigma_max.max(1.0);
    let mut range = Vec::new();
    let mut null = Vec::new();
    for i in 0..n {
        if svd.singular_values[i] > tol {
            range.push(i);
        } else {
            null.push(i);
        }
    }
    if range.len() < r {
        return None;
    }
    let mut rhs_padded = DVector::zeros(n);
    rhs_padded.rows_mut(0, r).copy_from(rhs);
    let mut point = DVector::zeros(n);
    for &i in &range {
        let coef = u.column(i).dot(&rhs_padded) / svd.singular_values[i];
        point += coef * v_t.row(i).transpose();
    }
    let mut basis = DMatrix::zeros(n, null.len());
    for (c, &i) in null.iter().enumerate() {
        basis.set_column(c, &v_t.row(i).transpose());
    }
    Some(AffineFace { point, basis })
}

/// Least squares `min ||M z - d||` subject to `z >= 0` (Lawson and Hanson).
pub fn nnls(m: &DMatrix<f64>, d: &DVector<f64>) -> DVector<f64> {
    let k = m.ncols();
    let mut z = DVector::zeros(k);
    if k == 0 {
        return z;
    }
    let mut passive = vec![false; k];
    let scale = m.norm().max(1.0) * d.norm().max(1.0);
    let tol = 1e-14 * scale;
    for _ in 0..(3 * k + 30) {
        let w = m.transpose() * (d - m * &z);
        let candidate = (0..k)
            .filter(|&j| !passive[j] && w[j] > tol)
            .max_by(|&a, &b| w[a].total_cmp(&w[b]));
        let Some(j) = candidate else { break };
        passive[j] = true;
        loop {
            let idx: Vec<usize> = (0..k).filter(|&i| passive[i]).collect();
            let sub = m.select_columns(&idx);
            let sol = lstsq(&sub, d);
            if sol.iter().all(|v| *v > 0.0) {
                for (c, &i) in idx.iter().enumerate() {
                    z[i] = sol[c];
                }
                break;
            }
            // step back toward feasibility and drop the blocking variables
            let mut alpha = 1.0_f64;
            for (c, &i) in idx.iter().enumerate() {
                if sol[c] <= 0.0 {
                    let denom = z[i] - sol[c];
                    if denom > 0.0 {
                        alpha = alpha.min(z[i] / denom);
                    }
                }
            }
            for (c, &i) in idx.iter().enumerate() {
                z[i] += alpha * (sol[c] - z[i]);
                if z[i] <= 1e-15 * scale {
                    z[i] = 0.0;
                    passive[i] = false;
                }
            }
            if !passive.iter().any(|p| *p) {
                break;
            }
        }
    }
    z
}

/// Minimum-norm least-squares solution.
pub fn lstsq(m: &DMatrix<f64>, d: &DVector<f64>) -> DVector<f64> {
    if m.ncols() == 0 {
        return DVector::zeros(0);
    }
    let svd = m.clone().svd(true, true);
    let tol = 1e-13 * svd.singular_values.max().max(1e-300);
    svd.solve(d, tol).unwrap_or_else(|_| DVector::zeros(m.ncols()))
}

/// Lexicographic comparison of equal-length vectors.
pub fn lex_cmp(a: &DVector<f64>, b: &DVector<f64>) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b.iter()) {
        match x.total_cmp(y) {
            std::cmp::Ordering::Equal => continue,
            o => return o,
        }
    }
    std::cmp::Ordering::Equal
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dvector;

    #[test]
    fn eigen_sorted_and_reconstructs() {
        let h = DMatrix::from_row_slice(3, 3, &[2.0, 1.0, 0.0, 1.0, -1.0, 0.5, 0.0, 0.5, 3.0]);
        let (vals, vecs) = sym_eigen(&h).unwrap();
        assert!(vals[0] <= vals[1] && vals[1] <= vals[2]);
        let rebuilt = &vecs * DMatrix::from_diagonal(&vals) * vecs.transpose();
        assert!((rebuilt - h).norm() < 1e-12);
    }

    #[test]
    fn face_of_single_row() {
        let rows = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let f = affine_face(&rows, &dvector![2.0], 2).unwrap();
        assert!((f.point.clone() - dvector![1.0, 1.0]).norm() < 1e-14);
        assert_eq!(f.basis.ncols(), 1);
        assert!((rows * &f.basis).norm() < 1e-14);
    }

    #[test]
    fn dependent_rows_are_rejected() {
        let rows = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 2.0, 2.0]);
        assert!(affine_face(&rows, &dvector![1.0, 2.0], 2).is_none());
    }

    #[test]
    fn nnls_clips_negative_directions() {
        let m = DMatrix::identity(2, 2);
        let z = nnls(&m, &dvector![1.0, -2.0]);
        assert!((z - dvector![1.0, 0.0]).norm() < 1e-14);
    }

    #[test]
    fn nnls_recovers_exact_nonnegative_solution() {
        let m = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 1.0, 1.0, 0.0, 2.0]);
        let truth = dvector![0.5, 1.5];
        let z = nnls(&m, &(&m * &truth));
        assert!((z - truth).norm() < 1e-12);
    }
}
