use std::path::Path;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use lctrace::lc_trace::SolverConfig;
use lctrace::oracle::{grid_chi, grid_psi, grid_subproblem, GridResult, MAX_GRID_DIMENSION};
use lctrace::problem::{shifted_constraints, ProblemInstance};
use lctrace::stationarity::{chi_from_gradient, psi_from_derivatives};
use lctrace::subproblem::{solve_qk_with, QuadraticModel};
use lctrace::{Error, Result};

use crate::{EXIT_ERROR, EXIT_OK};

/// Half-width of the box around the start that random points are drawn from.
const SAMPLE_BOX: f64 = 1.0;
const SAMPLE_TRIES: usize = 100_000;

/// Outcome of one exact-versus-grid comparison. Both quantities are minima,
/// so the exact value must not exceed the grid value and the grid may be
/// worse by at most its reported accuracy.
struct Comparison {
    what: &'static str,
    exact: f64,
    grid: f64,
    accuracy: f64,
}

impl Comparison {
    fn new(what: &'static str, exact: f64, grid: &GridResult) -> Self {
        Self {
            what,
            exact,
            grid: grid.value,
            accuracy: grid.accuracy,
        }
    }

    fn ok(&self) -> bool {
        let tol = 1e-9 * (1.0 + self.exact.abs());
        self.exact <= self.grid + tol && self.grid - self.exact <= self.accuracy + tol
    }
}

fn compare_at(instance: &ProblemInstance, x: &DVector<f64>, delta: f64, resolution: f64) -> Result<Vec<Comparison>> {
    let opts = SolverConfig::default().solver_options();
    let ev = instance.objective.evaluate(x)?;
    let shifted = shifted_constraints(&instance.polyhedron, x)?;
    let model = QuadraticModel::new(ev.f, ev.g.clone(), ev.h.clone())?;

    let sol = solve_qk_with(&model, &shifted, delta, &opts)?;
    let chi = chi_from_gradient(&ev.g, &shifted, &opts)?;
    let psi = psi_from_derivatives(&ev.g, &ev.h, &shifted, &opts)?;
    Ok(vec![
        Comparison::new(
            "subproblem",
            sol.q_value,
            &grid_subproblem(&model, &shifted, delta, resolution)?,
        ),
        // the grid oracles return the minima whose negations are the measures
        Comparison::new("-chi", 0.0 - chi.value, &grid_chi(&ev.g, &shifted, resolution)?),
        Comparison::new("-psi", 0.0 - psi.value, &grid_psi(&ev.g, &ev.h, &shifted, resolution)?),
    ])
}

fn random_points(instance: &ProblemInstance, count: usize, seed: u64) -> Vec<DVector<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = instance.dimension();
    let mut out = Vec::with_capacity(count);
    for _ in 0..SAMPLE_TRIES {
        if out.len() == count {
            break;
        }
        let x = DVector::from_fn(n, |i, _| instance.start[i] + rng.random_range(-SAMPLE_BOX..=SAMPLE_BOX));
        if instance.polyhedron.contains(&x) {
            out.push(x);
        }
    }
    out
}

pub fn run(instance: &ProblemInstance, resolution: f64, delta: f64, points: usize, seed: u64) -> Result<bool> {
    let n = instance.dimension();
    if n > MAX_GRID_DIMENSION {
        return Err(Error::InvalidInstance(format!(
            "grid verification supports dimension at most {MAX_GRID_DIMENSION}, got {n}"
        )));
    }
    if !(resolution > 0.0 && delta > 0.0) {
        return Err(Error::InvalidConfig("resolution and delta must be positive".into()));
    }
    let mut xs = vec![instance.start.clone()];
    let sampled = random_points(instance, points, seed);
    if sampled.len() < points {
        eprintln!(
            "warning: found only {} of {points} random feasible points",
            sampled.len()
        );
    }
    xs.extend(sampled);

    let mut all_ok = true;
    for (i, x) in xs.iter().enumerate() {
        let label = if i == 0 {
            "start".to_string()
        } else {
            format!("point {i}")
        };
        for c in compare_at(instance, x, delta, resolution)? {
            let ok = c.ok();
            all_ok &= ok;
            println!(
                "{} {label:<9} {:<10} exact={:.9e} grid={:.9e} gap={:.2e} accuracy={:.2e}",
                if ok { "PASS" } else { "FAIL" },
                c.what,
                c.exact,
                c.grid,
                c.grid - c.exact,
                c.accuracy
            );
        }
    }
    Ok(all_ok)
}

pub fn cmd_verify(path: &Path, resolution: f64, delta: f64, points: usize, seed: u64) -> u8 {
    let result = crate::load_instance(path).and_then(|inst| run(&inst, resolution, delta, points, seed));
    match result {
        Ok(true) => {
            println!("verify passed");
            EXIT_OK
        }
        Ok(false) => {
            println!("verify failed");
            EXIT_ERROR
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}
