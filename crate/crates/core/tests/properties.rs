use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use lctrace::lc_trace::{accept_update, classify_step, expand_update, finalize_ledger, SolverConfig, StepClass};
use lctrace::oracle::{evaluate_budgets, grid_subproblem};
use lctrace::problem::{Estimates, Polyhedron};
use lctrace::stationarity::{chi_from_gradient, psi_from_derivatives};
use lctrace::subproblem::{solve_qk, solve_qk_lambda, QuadraticModel, RegularizedOutcome, SolverOptions};

fn sym(n: usize, entries: &[f64]) -> DMatrix<f64> {
    let m = DMatrix::from_fn(n, n, |i, j| entries[i * 3 + j]);
    0.5 * (&m + m.transpose())
}

/// Random model and polyhedron containing the origin strictly.
fn instance() -> impl Strategy<Value = (QuadraticModel, Polyhedron, f64)> {
    (
        1usize..=3,
        0usize..=4,
        prop::collection::vec(-2.0..2.0f64, 9),
        prop::collection::vec(-1.0..1.0f64, 3),
        prop::collection::vec(-1.0..1.0f64, 12),
        prop::collection::vec(0.05..1.0f64, 4),
        0.3..3.0f64,
    )
        .prop_filter_map("zero row", |(n, m, h, g, a, b, delta)| {
            let model = QuadraticModel::new(0.0, DVector::from_fn(n, |i, _| g[i]), sym(n, &h)).ok()?;
            let a = DMatrix::from_fn(m, n, |i, j| a[i * 3 + j]);
            let poly = Polyhedron::new(a, DVector::from_fn(m, |i, _| b[i])).ok()?;
            Some((model, poly, delta))
        })
}

fn feasible_samples(poly: &Polyhedron, n: usize, delta: f64, seed: u64, count: usize) -> Vec<DVector<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    let mut tries = 0;
    while out.len() < count && tries < 50 * count {
        tries += 1;
        let y = DVector::from_fn(n, |_, _| rng.random_range(-delta..delta));
        if y.norm() <= delta && poly.contains(&y) {
            out.push(y);
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn subproblem_solution_is_feasible_and_globally_minimal((model, poly, delta) in instance(), seed in 0u64..1000) {
        let sol = solve_qk(&model, &poly, delta).unwrap();
        prop_assert!(sol.s.norm() <= delta * (1.0 + 1e-9));
        prop_assert!((&poly.a * &sol.s - &poly.b).iter().all(|v| *v <= 1e-9));
        prop_assert!(sol.kkt.max() <= 1e-8);
        prop_assert!(sol.lambda_tr >= 0.0 && sol.lambda_lin.iter().all(|l| *l >= 0.0));
        for y in feasible_samples(&poly, model.dimension(), delta, seed, 200) {
            prop_assert!(sol.q_value <= model.value(&y) + 1e-10);
        }
    }

    #[test]
    fn regularized_step_norm_is_nonincreasing((model, poly, _) in instance(), l1 in 0.0..5.0f64, dl in 0.01..5.0f64) {
        let solve = |l: f64| match solve_qk_lambda(&model, &poly, l).unwrap() {
            RegularizedOutcome::Solved(s) => Some(s),
            RegularizedOutcome::Unbounded { .. } => None,
        };
        let lo = solve(l1);
        let hi = solve(l1 + dl);
        if let (Some(lo), Some(hi)) = (&lo, &hi) {
            prop_assert!(hi.norm() <= lo.norm() * (1.0 + 1e-9) + 1e-12);
        }
        // a bounded problem stays bounded when the weight grows
        if lo.is_some() {
            prop_assert!(hi.is_some());
        }
    }

    #[test]
    fn measures_are_nonnegative_and_scale_with_the_gradient((model, poly, _) in instance(), c in 0.1..10.0f64) {
        let opts = SolverOptions::default();
        let chi = chi_from_gradient(&model.g, &poly, &opts).unwrap();
        let scaled = chi_from_gradient(&(&model.g * c), &poly, &opts).unwrap();
        prop_assert!(chi.value >= 0.0);
        prop_assert!((scaled.value - c * chi.value).abs() <= 1e-9 * (1.0 + scaled.value));
        let psi = psi_from_derivatives(&model.g, &model.h, &poly, &opts).unwrap();
        prop_assert!(psi.value >= 0.0);
        prop_assert!(psi.witness.norm() <= 1.0 + 1e-9);
    }

    #[test]
    fn radius_updates_respect_the_ordering(
        delta in 0.01..5.0f64,
        extra in 0.0..5.0f64,
        frac in 0.0..1.0f64,
        lambda in 0.0..50.0f64,
        sigma in 1e-6..10.0f64,
        rho_k in -1.0..1.0f64,
    ) {
        let big = delta + extra;
        let s_norm = (frac * delta).max(1e-9);
        let x = DVector::from_element(2, 0.0);
        let s = DVector::from_vec(vec![s_norm, 0.0]);
        match classify_step(rho_k, 0.1, lambda, s_norm, sigma, big, 1e-9) {
            StepClass::AcceptDelta | StepClass::AcceptSigma => {
                let st = accept_update(&x, &s, lambda, delta, big, sigma, 2.0);
                prop_assert!(st.delta >= delta && st.delta <= st.big_delta && st.big_delta >= big);
                prop_assert!(st.sigma >= sigma);
            }
            StepClass::Expand => {
                // expansions happen with the ball active
                let next = expand_update(lambda, sigma, big);
                prop_assert!(next <= big);
                prop_assert!(next >= s_norm.min(big) * (1.0 - 1e-12));
            }
            StepClass::Contract => prop_assert!(rho_k < 0.1),
        }
    }

    #[test]
    fn ledger_and_budgets_are_consistent(
        g_max in 0.1..100.0f64,
        h_max in 0.1..100.0f64,
        h_lip in 0.01..10.0f64,
        lambda0 in 0.0..100.0f64,
        eps_exp in 1.0..6.0f64,
    ) {
        let eps = 10f64.powf(-eps_exp);
        let est = Estimates { g_max, h_max, g_lip: h_max, h_lip, f_min: -10.0 };
        let cfg = SolverConfig::default().with_epsilon(eps);
        let l = finalize_ledger(&cfg, &est, lambda0).unwrap();
        prop_assert!(l.sigma_lower > 0.0);
        prop_assert!(l.sigma_lower <= eps / (l.c_min + l.lambda_max.max(lambda0)) * (1.0 + 1e-12));
        prop_assert!(l.sigma0 >= l.sigma_lower);
        let mut last = u64::MAX;
        for e in [eps, 10.0 * eps, 100.0 * eps] {
            let b = evaluate_budgets(&l, &cfg, 5.0, e);
            prop_assert!(b.k_total <= last);
            prop_assert_eq!(b.k_total, 1u64.saturating_add(
                b.k_sigma.saturating_add(b.k_delta).saturating_mul(1u64.saturating_add(b.k_c.saturating_mul(b.k_c1)))));
            last = b.k_total;
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn finer_grids_stay_within_the_reported_accuracy((model, poly, delta) in instance()) {
        prop_assume!(model.dimension() <= 2);
        let coarse = grid_subproblem(&model, &poly, delta, 0.02).unwrap();
        let fine = grid_subproblem(&model, &poly, delta, 0.01).unwrap();
        prop_assert!(fine.value <= coarse.value + coarse.accuracy);
        let exact = solve_qk(&model, &poly, delta).unwrap();
        prop_assert!(exact.q_value <= fine.value + 1e-10);
    }
}
