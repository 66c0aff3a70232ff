//! Stationary points of `g^T y + 1/2 y^T H y` inside and on a sphere.
//!
//! Everything is computed in the eigenbasis of `H`. Sphere points solve
//! `(H + lambda I) y = -g`, `||y|| = radius`, found by isolating every root of
//! the secular function `phi(lambda) = sum gamma_i^2 / (mu_i + lambda)^2 - radius^2`
//! between consecutive poles, plus the eigenvector points of the hard case.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::sym_eigen;

/// Bisection steps allowed per root.
pub const MAX_BISECTIONS: usize = 200;

/// A stationary point of the reduced problem.
#[derive(Debug, Clone, PartialEq)]
pub struct TrsPoint {
    pub y: DVector<f64>,
    /// Multiplier of the sphere constraint; zero for interior points.
    pub multiplier: f64,
    pub on_sphere: bool,
}

/// Eigen-structure of a reduced problem, with near-equal eigenvalues grouped.
#[derive(Debug, Clone)]
pub(crate) struct Spectrum {
    values: DVector<f64>,
    vectors: DMatrix<f64>,
    gamma: DVector<f64>,
    groups: Vec<Group>,
    mu_tol: f64,
}

#[derive(Debug, Clone)]
struct Group {
    mu: f64,
    members: Vec<usize>,
    /// `||gamma||` restricted to the group; zero when below the noise floor.
    weight: f64,
}

impl Spectrum {
    pub(crate) fn new(h: &DMatrix<f64>, g: &DVector<f64>) -> Result<Self> {
        let (values, vectors) = sym_eigen(h)?;
        let gamma = vectors.transpose() * g;
        let d = values.len();
        let scale = values.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
        let mu_tol = 1e-11 * scale;
        let group_tol = 1e-10 * scale;
        let gamma_tol = 1e-12 * g.norm().max(1.0);
        let mut groups: Vec<Group> = Vec::new();
        for i in 0..d {
            match groups.last_mut() {
                Some(last) if values[i] - values[*last.members.last().unwrap()] <= group_tol => last.members.push(i),
                _ => groups.push(Group {
                    mu: 0.0,
                    members: vec![i],
                    weight: 0.0,
                }),
            }
        }
        for grp in &mut groups {
            grp.mu = grp.members.iter().map(|&i| values[i]).sum::<f64>() / grp.members.len() as f64;
            let w = grp.members.iter().map(|&i| gamma[i] * gamma[i]).sum::<f64>().sqrt();
            grp.weight = if w > gamma_tol { w } else { 0.0 };
        }
        Ok(Self {
            values,
            vectors,
            gamma,
            groups,
            mu_tol,
        })
    }

    pub(crate) fn min_eigenvalue(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    fn poles(&self) -> impl Iterator<Item = &Group> {
        self.groups.iter().filter(|g| g.weight > 0.0)
    }

    fn phi(&self, lambda: f64, radius: f64) -> f64 {
        self.poles().map(|g| (g.weight / (g.mu + lambda)).powi(2)).sum::<f64>() - radius * radius
    }

    fn dphi(&self, lambda: f64) -> f64 {
        -2.0 * self
            .poles()
            .map(|g| g.weight * g.weight / (g.mu + lambda).powi(3))
            .sum::<f64>()
    }

    /// `-(H + lambda I)^+ g` restricted to the pole groups, optionally skipping one group.
    fn shifted_solve(&self, lambda: f64, skip: Option<usize>) -> DVector<f64> {
        let mut y = DVector::zeros(self.values.len());
        for (gi, grp) in self.groups.iter().enumerate() {
            if grp.weight == 0.0 || Some(gi) == skip {
                continue;
            }
            let denom = grp.mu + lambda;
            for &i in &grp.members {
                y -= (self.gamma[i] / denom) * self.vectors.column(i);
            }
        }
        y
    }

    /// Minimum-norm solution of `H y = -g` when `H` is positive semidefinite
    /// and the system is consistent.
    pub(crate) fn interior_point(&self) -> Option<DVector<f64>> {
        if self.min_eigenvalue() < -self.mu_tol {
            return None;
        }
        let mut y = DVector::zeros(self.values.len());
        for grp in &self.groups {
            if grp.mu.abs() <= self.mu_tol {
                if grp.weight > 0.0 {
                    return None;
                }
                continue;
            }
            for &i in &grp.members {
                y -= (self.gamma[i] / grp.mu) * self.vectors.column(i);
            }
        }
        Some(y)
    }

    /// Every stationary point on the sphere `||y|| = radius`.
    pub(crate) fn sphere_points(&self, radius: f64) -> Result<Vec<TrsPoint>> {
        let mut out = Vec::new();
        let d = self.values.len();
        if d == 0 || radius <= 0.0 {
            return Ok(out);
        }
        let poles: Vec<(usize, f64)> = self
            .groups
            .iter()
            .enumerate()
            .filter(|(_, g)| g.weight > 0.0)
            .map(|(i, g)| (i, g.mu))
            .collect();
        let total_weight = self.poles().map(|g| g.weight * g.weight).sum::<f64>().sqrt();
        let mut roots = Vec::new();
        if !poles.is_empty() {
            let reach = total_weight / radius;
            let lowest = poles[0].1;
            let highest = poles[poles.len() - 1].1;
            // right of every pole: phi decreases from +inf to -radius^2
            roots.push(bisect(-lowest, -lowest + reach, true, |l| self.phi(l, radius))?);
            // left of every pole: phi increases from -radius^2 to +inf
            roots.push(bisect(-highest - reach, -highest, false, |l| self.phi(l, radius))?);
            // between neighbouring poles phi is convex and blows up at both ends
            for w in poles.windows(2) {
                let (lo, hi) = (-w[1].1, -w[0].1);
                let argmin = bisect(lo, hi, false, |l| self.dphi(l))?;
                let floor = self.phi(argmin, radius);
                if floor < 0.0 {
                    roots.push(bisect(lo, argmin, true, |l| self.phi(l, radius))?);
                    roots.push(bisect(argmin, hi, false, |l| self.phi(l, radius))?);
                } else if floor <= 1e-12 * radius * radius {
                    roots.push(argmin);
                }
            }
        }
        for lambda in roots {
            out.push(TrsPoint {
                y: self.shifted_solve(lambda, None),
                multiplier: lambda,
                on_sphere: true,
            });
        }
        // hard case: lambda = -mu on an eigenspace that g does not touch
        for (gi, grp) in self.groups.iter().enumerate() {
            if grp.weight > 0.0 {
                continue;
            }
            let lambda = -grp.mu;
            let base = self.shifted_solve(lambda, Some(gi));
            let gap = radius * radius - base.norm_squared();
            if gap < -1e-12 * radius * radius {
                continue;
            }
            let t = gap.max(0.0).sqrt();
            if t <= 1e-14 * radius {
                out.push(TrsPoint {
                    y: base,
                    multiplier: lambda,
                    on_sphere: true,
                });
                continue;
            }
            for &i in &grp.members {
                let v = self.vectors.column(i);
                for sign in [1.0, -1.0] {
                    out.push(TrsPoint {
                        y: &base + sign * t * v,
                        multiplier: lambda,
                        on_sphere: true,
                    });
                }
            }
        }
        Ok(out)
    }
}

/// Bisection for a sign change of a monotone function on `(lo, hi)`.
///
/// `positive_at_lo` says which sign the function takes near `lo`. The end
/// points themselves are never evaluated, so they may be poles.
fn bisect(mut lo: f64, mut hi: f64, positive_at_lo: bool, f: impl Fn(f64) -> f64) -> Result<f64> {
    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            return Ok(mid);
        }
        let v = f(mid);
        if v == 0.0 {
            return Ok(mid);
        }
        if (v > 0.0) == positive_at_lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::RootFinder {
        iterations: MAX_BISECTIONS,
    })
}

/// All stationary points of `g^T y + 1/2 y^T H y` on the sphere `||y|| = radius`,
/// followed by the interior stationary point when `H` is positive semidefinite
/// and its minimum-norm Newton point lies inside the ball.
pub fn solve_equality_trs(h: &DMatrix<f64>, g: &DVector<f64>, radius: f64) -> Result<Vec<TrsPoint>> {
    if !(radius > 0.0) {
        return Err(Error::InvalidConfig(format!("radius must be positive, got {radius}")));
    }
    if h.nrows() != g.len() || h.ncols() != g.len() {
        return Err(Error::DimensionMismatch {
            expected: g.len(),
            found: h.nrows(),
        });
    }
    let spec = Spectrum::new(h, g)?;
    let mut out = spec.sphere_points(radius)?;
    if let Some(y) = spec.interior_point() {
        if y.norm() <= radius {
            out.push(TrsPoint {
                y,
                multiplier: 0.0,
                on_sphere: false,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dvector;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn q(h: &DMatrix<f64>, g: &DVector<f64>, y: &DVector<f64>) -> f64 {
        g.dot(y) + 0.5 * y.dot(&(h * y))
    }

    #[test]
    fn one_dimensional_boundary_points() {
        let h = DMatrix::from_element(1, 1, 1.0);
        let g = dvector![-2.0];
        let pts = solve_equality_trs(&h, &g, 1.0).unwrap();
        let mut sphere: Vec<_> = pts.iter().filter(|p| p.on_sphere).collect();
        sphere.sort_by(|a, b| a.y[0].total_cmp(&b.y[0]));
        assert_eq!(sphere.len(), 2);
        assert!((sphere[0].y[0] + 1.0).abs() < 1e-12 && (sphere[0].multiplier + 3.0).abs() < 1e-12);
        assert!((sphere[1].y[0] - 1.0).abs() < 1e-12 && (sphere[1].multiplier - 1.0).abs() < 1e-12);
        // the Newton point y = 2 lies outside the ball
        assert!(pts.iter().all(|p| p.on_sphere));
        let best = pts
            .iter()
            .min_by(|a, b| q(&h, &g, &a.y).total_cmp(&q(&h, &g, &b.y)))
            .unwrap();
        assert!((best.y[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn hard_case_uses_eigenvectors() {
        let h = DMatrix::from_diagonal(&dvector![-1.0, 1.0]);
        let g = dvector![0.0, 0.0];
        let pts = solve_equality_trs(&h, &g, 1.0).unwrap();
        let best_val = pts.iter().map(|p| q(&h, &g, &p.y)).fold(f64::INFINITY, f64::min);
        let minimizers: Vec<_> = pts
            .iter()
            .filter(|p| (q(&h, &g, &p.y) - best_val).abs() < 1e-12)
            .collect();
        assert_eq!(minimizers.len(), 2);
        for p in minimizers {
            assert!((p.y[0].abs() - 1.0).abs() < 1e-12 && p.y[1].abs() < 1e-12);
            assert!((p.multiplier - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn every_point_is_stationary() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let mut h = DMatrix::from_fn(3, 3, |_, _| rng.random_range(-2.0..2.0));
            h = 0.5 * (&h + h.transpose());
            let g = DVector::from_fn(3, |_, _| rng.random_range(-1.0..1.0));
            for p in solve_equality_trs(&h, &g, 1.0).unwrap() {
                let r = &g + &h * &p.y + p.multiplier * &p.y;
                assert!(r.norm() < 1e-8, "residual {}", r.norm());
                if p.on_sphere {
                    assert!((p.y.norm() - 1.0).abs() < 1e-8);
                }
            }
        }
    }
}
