//! Named test problems and seeded random polynomial instances.

use nalgebra::{dmatrix, dvector, DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::problem::{Estimates, Monomial, ObjectiveModel, Polyhedron, ProblemInstance};

/// Conservative constants for `objective` on the box `|x_i| <= radius`.
///
/// The gradient Lipschitz constant is the Hessian bound; the Hessian
/// Lipschitz constant is floored so that quadratics get a positive value.
pub fn estimate_on_box(objective: &ObjectiveModel, radius: f64) -> Estimates {
    let b = objective.bounds_on_box(radius);
    Estimates {
        g_max: b.g_max.max(1e-3),
        h_max: b.h_max.max(1e-3),
        g_lip: b.h_max.max(1e-3),
        h_lip: b.h_lip.max(1e-3),
        f_min: -b.f_abs_max,
    }
}

fn instance(
    name: &str,
    objective: ObjectiveModel,
    poly: Polyhedron,
    radius: f64,
    start: DVector<f64>,
) -> Result<ProblemInstance> {
    let est = estimate_on_box(&objective, radius);
    ProblemInstance::new(name, objective, poly, est, start)
}

/// `-x^2 / 2` on `[0, 10]`.
pub fn remark_instance(start: f64) -> Result<ProblemInstance> {
    let objective = ObjectiveModel::new(1, vec![Monomial::new(-0.5, vec![2])])?;
    let est = Estimates {
        g_max: 10.0,
        h_max: 1.0,
        g_lip: 1.0,
        h_lip: 1.0,
        f_min: -50.0,
    };
    ProblemInstance::new(
        "remark",
        objective,
        Polyhedron::box_bounds(1, 0.0, 10.0),
        est,
        dvector![start],
    )
}

/// `(x1^2 - x2^2) / 2` on `[-1, 1]^2`, started on the stable axis.
pub fn box_saddle() -> Result<ProblemInstance> {
    let objective = ObjectiveModel::new(2, vec![Monomial::new(0.5, vec![2, 0]), Monomial::new(-0.5, vec![0, 2])])?;
    let est = Estimates {
        g_max: 2f64.sqrt(),
        h_max: 1.0,
        g_lip: 1.0,
        h_lip: 1.0,
        f_min: -0.5,
    };
    ProblemInstance::new(
        "box-saddle",
        objective,
        Polyhedron::box_bounds(2, -1.0, 1.0),
        est,
        dvector![0.5, 0.0],
    )
}

/// The triangle `s1 <= 5, s2 >= 0, s2 - 3 s1 <= -12`.
pub fn triangle() -> Polyhedron {
    Polyhedron::new(dmatrix![1.0, 0.0; 0.0, -1.0; -3.0, 1.0], dvector![5.0, 0.0, -12.0]).expect("nonzero rows")
}

/// `x1^2 - x2^2` over the triangle; both vertices `(4, 0)` and `(5, 3)` are global minimizers.
pub fn triangle_instance() -> Result<ProblemInstance> {
    let objective = ObjectiveModel::new(2, vec![Monomial::new(1.0, vec![2, 0]), Monomial::new(-1.0, vec![0, 2])])?;
    instance("triangle", objective, triangle(), 5.0, dvector![4.6, 0.5])
}

fn quadratic(q: DMatrix<f64>, c: DVector<f64>) -> ObjectiveModel {
    ObjectiveModel::quadratic(0.0, &c, &q)
}

/// Fixed instances covering interior, boundary, vertex and saddle behavior.
pub fn named_instances() -> Result<Vec<ProblemInstance>> {
    let mut out = vec![remark_instance(0.1)?, box_saddle()?, triangle_instance()?];
    out.push(instance(
        "bowl-interior",
        quadratic(dmatrix![2.0, 0.5; 0.5, 1.0], dvector![-0.4, 0.3]),
        Polyhedron::box_bounds(2, -2.0, 2.0),
        2.0,
        dvector![1.5, -1.5],
    )?);
    out.push(instance(
        "bowl-corner",
        quadratic(dmatrix![1.0, 0.0; 0.0, 3.0], dvector![-4.0, -9.0]),
        Polyhedron::box_bounds(2, -1.0, 1.0),
        1.0,
        dvector![-0.5, -0.5],
    )?);
    let rosen = ObjectiveModel::new(
        2,
        vec![
            Monomial::new(10.0, vec![0, 2]),
            Monomial::new(-20.0, vec![2, 1]),
            Monomial::new(10.0, vec![4, 0]),
            Monomial::new(1.0, vec![2, 0]),
            Monomial::new(-2.0, vec![1, 0]),
            Monomial::new(1.0, vec![0, 0]),
        ],
    )?;
    out.push(instance(
        "banana",
        rosen,
        Polyhedron::box_bounds(2, -1.5, 1.5),
        1.5,
        dvector![-1.2, 1.0],
    )?);
    let well = ObjectiveModel::new(
        2,
        vec![
            Monomial::new(1.0, vec![4, 0]),
            Monomial::new(-2.0, vec![2, 0]),
            Monomial::new(1.0, vec![0, 2]),
            Monomial::new(0.5, vec![1, 1]),
        ],
    )?;
    let half_box = Polyhedron::box_bounds(2, -2.0, 2.0).with_row(&dvector![1.0, 1.0], 1.0);
    out.push(instance("double-well", well, half_box, 2.0, dvector![0.1, 0.2])?);
    let simplex = Polyhedron::new(
        dmatrix![-1.0, 0.0, 0.0; 0.0, -1.0, 0.0; 0.0, 0.0, -1.0; 1.0, 1.0, 1.0],
        dvector![0.0, 0.0, 0.0, 1.0],
    )
    .expect("nonzero rows");
    out.push(instance(
        "simplex-saddle",
        quadratic(
            dmatrix![2.0, 0.0, 0.0; 0.0, 2.0, 0.0; 0.0, 0.0, -2.0],
            dvector![0.3, -0.2, 0.1],
        ),
        simplex,
        1.0,
        dvector![0.2, 0.2, 0.2],
    )?);
    Ok(out)
}

/// A random polynomial of degree at most four on a box cut by up to two
/// random half-spaces, with a strictly feasible start.
pub fn random_quartic(seed: u64, n: usize) -> Result<ProblemInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let radius = 2.0;
    let mut terms = Vec::new();
    // a positive quartic part keeps the problem well scaled
    for i in 0..n {
        let mut e = vec![0; n];
        e[i] = 4;
        terms.push(Monomial::new(rng.random_range(0.1..0.5), e));
    }
    for _ in 0..3 * n {
        let mut e = vec![0; n];
        let degree = rng.random_range(1..=3);
        for _ in 0..degree {
            e[rng.random_range(0..n)] += 1;
        }
        terms.push(Monomial::new(rng.random_range(-1.0..1.0), e));
    }
    let objective = ObjectiveModel::new(n, terms)?;
    let start = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
    let mut poly = Polyhedron::box_bounds(n, -radius, radius);
    for _ in 0..rng.random_range(0..=2) {
        let a = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        if a.norm() < 0.2 {
            continue;
        }
        let rhs = a.dot(&start) + rng.random_range(0.05..0.5);
        poly = poly.with_row(&a, rhs);
    }
    instance(&format!("quartic-{n}d-{seed}"), objective, poly, radius, start)
}

/// Named instances followed by sixteen random quartics.
pub fn default_suite() -> Result<Vec<ProblemInstance>> {
    let mut out = named_instances()?;
    for seed in 0..16 {
        out.push(random_quartic(seed, 2 + (seed as usize % 2))?);
    }
    Ok(out)
}

/// Instances of the default suite whose objective is not convex.
pub fn nonconvex_suite() -> Result<Vec<ProblemInstance>> {
    let names = [
        "remark",
        "box-saddle",
        "triangle",
        "banana",
        "double-well",
        "simplex-saddle",
    ];
    let mut out: Vec<ProblemInstance> = named_instances()?
        .into_iter()
        .filter(|i| names.contains(&i.name.as_str()))
        .collect();
    for seed in 0..4 {
        out.push(random_quartic(100 + seed, 2)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_instances_are_valid_and_reproducible() {
        let a = default_suite().unwrap();
        let b = default_suite().unwrap();
        assert_eq!(a, b);
        assert!(a.len() >= 20);
        for inst in &a {
            assert!(inst.polyhedron.contains(&inst.start), "{}", inst.name);
            assert!(inst.polyhedron.rows() <= 12);
        }
    }

    #[test]
    fn estimates_bound_the_objective() {
        for inst in default_suite().unwrap() {
            let f0 = inst.objective.value(&inst.start).unwrap();
            assert!(f0 >= inst.estimates.f_min, "{}", inst.name);
        }
    }
}
