use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::sym_norm2;
use crate::problem::Polyhedron;
use crate::subproblem::QuadraticModel;

/// Largest dimension the grid oracle accepts.
pub const MAX_GRID_DIMENSION: usize = 4;

/// Boxes holding at most this many grid points are scanned point by point.
const LEAF_POINTS: u64 = 512;

/// An objective the grid oracle can minimize.
pub trait GridObjective {
    fn value(&self, x: &[f64]) -> f64;
    /// A lower bound on the objective over the box `center +- half`.
    fn lower_bound(&self, center: &[f64], half: &[f64]) -> f64;
    /// Lipschitz constant on the box `[-radius, radius]^n`.
    fn lipschitz(&self, radius: f64) -> f64;
}

/// Membership test for the grid oracle.
pub trait GridRegion {
    fn contains(&self, x: &[f64]) -> bool;
    /// `false` only if the box `center +- half` holds no member.
    fn may_intersect(&self, _center: &[f64], _half: &[f64]) -> bool {
        true
    }
}

/// `g^T s + 1/2 s^T H s`.
#[derive(Debug, Clone)]
pub struct QuadraticObjective {
    pub g: DVector<f64>,
    pub h: DMatrix<f64>,
}

impl QuadraticObjective {
    pub fn new(g: DVector<f64>, h: DMatrix<f64>) -> Self {
        let h = 0.5 * (&h + h.transpose());
        Self { g, h }
    }

    /// The model without its constant term.
    pub fn from_model(model: &QuadraticModel) -> Self {
        Self::new(model.g.clone(), model.h.clone())
    }
}

impl GridObjective for QuadraticObjective {
    fn value(&self, x: &[f64]) -> f64 {
        let n = x.len();
        let mut v = 0.0;
        for i in 0..n {
            let hx: f64 = x.iter().enumerate().map(|(j, xj)| self.h[(i, j)] * xj).sum();
            v += x[i] * (self.g[i] + 0.5 * hx);
        }
        v
    }

    fn lower_bound(&self, c: &[f64], half: &[f64]) -> f64 {
        // q(c + d) = q(c) + (g + H c)^T d + 1/2 d^T H d
        let n = c.len();
        let mut lb = self.value(c);
        for i in 0..n {
            let grad = self.g[i] + c.iter().enumerate().map(|(j, cj)| self.h[(i, j)] * cj).sum::<f64>();
            lb -= grad.abs() * half[i];
            for j in 0..n {
                lb -= 0.5 * self.h[(i, j)].abs() * half[i] * half[j];
            }
        }
        lb
    }

    fn lipschitz(&self, radius: f64) -> f64 {
        let n = self.g.len() as f64;
        self.g.norm() + sym_norm2(&self.h) * radius * n.sqrt()
    }
}

/// Any evaluator with a known Lipschitz constant.
pub struct LipschitzObjective<F> {
    pub f: F,
    pub lipschitz: f64,
}

impl<F: Fn(&[f64]) -> f64> GridObjective for LipschitzObjective<F> {
    fn value(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }

    fn lower_bound(&self, c: &[f64], half: &[f64]) -> f64 {
        (self.f)(c) - self.lipschitz * half.iter().map(|h| h * h).sum::<f64>().sqrt()
    }

    fn lipschitz(&self, _radius: f64) -> f64 {
        self.lipschitz
    }
}

/// `{s : A s <= b + tol} ∩ {||s|| <= radius + tol}`.
#[derive(Debug, Clone)]
pub struct PolyBall<'a> {
    pub poly: &'a Polyhedron,
    pub radius: f64,
    pub tol: f64,
}

impl GridRegion for PolyBall<'_> {
    fn contains(&self, x: &[f64]) -> bool {
        let norm2: f64 = x.iter().map(|v| v * v).sum();
        if norm2.sqrt() > self.radius + self.tol {
            return false;
        }
        (0..self.poly.rows()).all(|i| {
            let ax: f64 = x.iter().enumerate().map(|(j, v)| self.poly.a[(i, j)] * v).sum();
            ax <= self.poly.b[i] + self.tol
        })
    }

    fn may_intersect(&self, c: &[f64], half: &[f64]) -> bool {
        let gap2: f64 = c.iter().zip(half).map(|(c, h)| (c.abs() - h).max(0.0).powi(2)).sum();
        if gap2.sqrt() > self.radius + self.tol {
            return false;
        }
        (0..self.poly.rows()).all(|i| {
            let lo: f64 = (0..c.len())
                .map(|j| self.poly.a[(i, j)] * c[j] - self.poly.a[(i, j)].abs() * half[j])
                .sum();
            lo <= self.poly.b[i] + self.tol
        })
    }
}

/// A closure used as a membership test, without pruning.
pub struct FnRegion<F>(pub F);

impl<F: Fn(&[f64]) -> bool> GridRegion for FnRegion<F> {
    fn contains(&self, x: &[f64]) -> bool {
        (self.0)(x)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridResult {
    /// Best grid value, `+inf` when no grid point is a member.
    pub value: f64,
    pub point: Option<DVector<f64>>,
    /// `Lip * resolution * sqrt(n)`; the continuous minimum lies within this of `value`
    /// when a member grid point sits within `resolution * sqrt(n)` of a minimizer.
    pub accuracy: f64,
    pub evaluations: u64,
}

/// Minimum over the grid `resolution * Z^n` restricted to `[-radius, radius]^n`
/// and the region.
///
/// The result equals the exhaustive grid minimum; boxes whose lower bound
/// cannot beat the incumbent, or that miss the region, are skipped.
pub fn grid_minimize(
    objective: &impl GridObjective,
    region: &impl GridRegion,
    dimension: usize,
    radius: f64,
    resolution: f64,
) -> Result<GridResult> {
    if dimension == 0 || dimension > MAX_GRID_DIMENSION {
        return Err(Error::InvalidConfig(format!(
            "grid oracle supports dimensions 1..={MAX_GRID_DIMENSION}, got {dimension}"
        )));
    }
    if !(resolution > 0.0) || !(radius >= 0.0) || !radius.is_finite() {
        return Err(Error::InvalidConfig(
            "grid needs a positive resolution and finite radius".into(),
        ));
    }
    let steps = (radius / resolution + 1e-9).floor() as i64;
    let mut search = Search {
        objective,
        region,
        resolution,
        best: f64::INFINITY,
        point: None,
        evaluations: 0,
        x: vec![0.0; dimension],
    };
    search.visit(&vec![-steps; dimension], &vec![steps; dimension]);
    Ok(GridResult {
        value: search.best,
        point: search.point.map(DVector::from_vec),
        accuracy: objective.lipschitz(radius) * resolution * (dimension as f64).sqrt(),
        evaluations: search.evaluations,
    })
}

struct Search<'a, O, R> {
    objective: &'a O,
    region: &'a R,
    resolution: f64,
    best: f64,
    point: Option<Vec<f64>>,
    evaluations: u64,
    x: Vec<f64>,
}

impl<O: GridObjective, R: GridRegion> Search<'_, O, R> {
    fn geometry(&self, lo: &[i64], hi: &[i64]) -> (Vec<f64>, Vec<f64>) {
        let c = lo
            .iter()
            .zip(hi)
            .map(|(l, h)| 0.5 * (l + h) as f64 * self.resolution)
            .collect();
        let half = lo
            .iter()
            .zip(hi)
            .map(|(l, h)| 0.5 * (h - l) as f64 * self.resolution)
            .collect();
        (c, half)
    }

    fn bound(&self, lo: &[i64], hi: &[i64]) -> Option<f64> {
        let (c, half) = self.geometry(lo, hi);
        if !self.region.may_intersect(&c, &half) {
            return None;
        }
        let lb = self.objective.lower_bound(&c, &half);
        (lb < self.best).then_some(lb)
    }

    fn visit(&mut self, lo: &[i64], hi: &[i64]) {
        if self.bound(lo, hi).is_none() {
            return;
        }
        let count: u64 = lo.iter().zip(hi).map(|(l, h)| (h - l + 1) as u64).product();
        if count <= LEAF_POINTS {
            self.scan(lo, hi, 0);
            return;
        }
        let axis = (0..lo.len())
            .max_by_key(|&d| (hi[d] - lo[d], std::cmp::Reverse(d)))
            .unwrap();
        let mid = lo[axis] + (hi[axis] - lo[axis]) / 2;
        let mut left_hi = hi.to_vec();
        left_hi[axis] = mid;
        let mut right_lo = lo.to_vec();
        right_lo[axis] = mid + 1;
        // descend into the more promising half first
        let lb_left = self.bound(lo, &left_hi).unwrap_or(f64::INFINITY);
        let lb_right = self.bound(&right_lo, hi).unwrap_or(f64::INFINITY);
        if lb_left <= lb_right {
            self.visit(lo, &left_hi);
            self.visit(&right_lo, hi);
        } else {
            self.visit(&right_lo, hi);
            self.visit(lo, &left_hi);
        }
    }

    fn scan(&mut self, lo: &[i64], hi: &[i64], axis: usize) {
        if axis == lo.len() {
            self.evaluations += 1;
            if self.region.contains(&self.x) {
                let v = self.objective.value(&self.x);
                let better =
                    v < self.best || (v == self.best && self.point.as_ref().is_some_and(|p| lex_less(&self.x, p)));
                if better {
                    self.best = v;
                    self.point = Some(self.x.clone());
                }
            }
            return;
        }
        for i in lo[axis]..=hi[axis] {
            self.x[axis] = i as f64 * self.resolution;
            self.scan(lo, hi, axis + 1);
        }
    }
}

fn lex_less(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).find(|(x, y)| x != y).is_some_and(|(x, y)| x < y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{dmatrix, dvector};

    fn exhaustive(obj: &impl GridObjective, region: &impl GridRegion, n: usize, radius: f64, res: f64) -> f64 {
        let steps = (radius / res + 1e-9).floor() as i64;
        let mut best = f64::INFINITY;
        let total = (2 * steps + 1).pow(n as u32);
        for idx in 0..total {
            let mut rem = idx;
            let x: Vec<f64> = (0..n)
                .map(|_| {
                    let i = rem % (2 * steps + 1) - steps;
                    rem /= 2 * steps + 1;
                    i as f64 * res
                })
                .collect();
            if region.contains(&x) {
                best = best.min(obj.value(&x));
            }
        }
        best
    }

    #[test]
    fn square_on_interval() {
        let poly = Polyhedron::unconstrained(1);
        let obj = QuadraticObjective::new(dvector![0.0], dmatrix![2.0]);
        let r = grid_minimize(
            &obj,
            &PolyBall {
                poly: &poly,
                radius: 1.0,
                tol: 1e-12,
            },
            1,
            1.0,
            1e-3,
        )
        .unwrap();
        assert!(r.value.abs() <= 1e-6);
        assert_eq!(r.point.unwrap()[0], 0.0);
    }

    #[test]
    fn pruned_search_matches_exhaustive_scan() {
        let poly = Polyhedron::new(dmatrix![1.0, 1.0; -1.0, 0.5], dvector![0.3, 0.4]).unwrap();
        let obj = QuadraticObjective::new(dvector![0.5, -1.0], dmatrix![-1.0, 0.4; 0.4, 0.7]);
        let region = PolyBall {
            poly: &poly,
            radius: 1.5,
            tol: 1e-12,
        };
        let fast = grid_minimize(&obj, &region, 2, 1.5, 0.01).unwrap();
        let slow = exhaustive(&obj, &region, 2, 1.5, 0.01);
        assert_eq!(fast.value, slow);
        assert!(fast.evaluations < 301 * 301);
    }

    #[test]
    fn empty_region_and_dimension_guard() {
        let poly = Polyhedron::new(dmatrix![1.0], dvector![-5.0]).unwrap();
        let obj = QuadraticObjective::new(dvector![1.0], dmatrix![0.0]);
        let r = grid_minimize(
            &obj,
            &PolyBall {
                poly: &poly,
                radius: 1.0,
                tol: 0.0,
            },
            1,
            1.0,
            0.1,
        )
        .unwrap();
        assert_eq!(r.value, f64::INFINITY);
        assert!(r.point.is_none());
        let region = FnRegion(|_: &[f64]| true);
        assert!(grid_minimize(&obj, &region, 5, 1.0, 0.1).is_err());
        assert!(grid_minimize(&obj, &region, 1, 1.0, 0.0).is_err());
    }

    #[test]
    fn lipschitz_objective_bound_is_valid() {
        let obj = LipschitzObjective {
            f: |x: &[f64]| (3.0 * x[0]).sin(),
            lipschitz: 3.0,
        };
        let region = FnRegion(|_: &[f64]| true);
        let r = grid_minimize(&obj, &region, 1, 2.0, 1e-3).unwrap();
        assert!((r.value + 1.0).abs() < 1e-5);
    }
}
