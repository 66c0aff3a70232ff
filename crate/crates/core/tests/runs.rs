use proptest::prelude::*;

use lctrace::check::check_trace;
use lctrace::lc_trace::{run_first_order, SolverConfig, StepClass};
use lctrace::second_order::{run_second_order, SecondOrderConfig};
use lctrace::suite::{default_suite, random_quartic, triangle_instance};
use lctrace::trace::{StepKind, Termination, Trace};
use lctrace::Error;

#[test]
fn runs_are_deterministic() {
    for inst in default_suite().unwrap().into_iter().take(8) {
        let cfg = SolverConfig::default().with_epsilon(1e-5);
        let a = run_first_order(&inst, cfg)
            .unwrap()
            .trace
            .without_wall_clock()
            .to_jsonl();
        let b = run_first_order(&inst, cfg)
            .unwrap()
            .trace
            .without_wall_clock()
            .to_jsonl();
        assert_eq!(a, b, "{}", inst.name);
    }
}

#[test]
fn traces_survive_serialization() {
    let out = run_second_order(&random_quartic(3, 3).unwrap(), SecondOrderConfig::new(1e-5, 1e-3)).unwrap();
    let text = out.trace.to_jsonl();
    let back = Trace::from_jsonl(&text).unwrap();
    assert_eq!(back, out.trace);
    assert!(check_trace(&back).passed());
}

#[test]
fn unknown_schema_is_refused() {
    let out = run_first_order(&triangle_instance().unwrap(), SolverConfig::default()).unwrap();
    let text = out
        .trace
        .to_jsonl()
        .replacen("\"schema_version\":1", "\"schema_version\":7", 1);
    match Trace::from_jsonl(&text) {
        Err(Error::SchemaVersion { expected: 1, found: 7 }) => {}
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn zero_iteration_cap_stops_at_the_start() {
    let inst = random_quartic(1, 2).unwrap();
    let out = run_first_order(&inst, SolverConfig::default().with_max_iterations(0)).unwrap();
    assert_eq!(out.termination, Termination::IterationCap);
    assert_eq!(out.trace.records.len(), 1);
    assert_eq!(out.x, inst.start);
    assert!(check_trace(&out.trace).passed());
}

#[test]
fn the_triangle_start_reaches_a_tied_vertex() {
    let out = run_first_order(
        &triangle_instance().unwrap(),
        SolverConfig::default().with_epsilon(1e-8),
    )
    .unwrap();
    assert_eq!(out.termination, Termination::FirstOrderStationary);
    let f = out.trace.summary.as_ref().unwrap().final_f;
    assert!((f - 16.0).abs() < 1e-9);
}

#[test]
fn contractions_always_shrink_and_are_followed_by_non_expansions() {
    let mut seen = 0;
    for seed in 0..16 {
        let out = run_first_order(
            &random_quartic(seed, 2).unwrap(),
            SolverConfig::default().with_epsilon(1e-6),
        )
        .unwrap();
        let recs = &out.trace.records;
        for w in recs.windows(2) {
            if w[0].step_class == Some(StepClass::Contract) {
                seen += 1;
                assert!(w[1].delta < w[0].delta);
                assert_ne!(w[1].step_class, Some(StepClass::Expand));
            }
        }
    }
    assert!(seen > 0);
}

#[test]
fn summary_counts_match_records() {
    let out = run_second_order(&random_quartic(5, 3).unwrap(), SecondOrderConfig::new(1e-6, 1e-4)).unwrap();
    let s = out.trace.summary.as_ref().unwrap();
    assert_eq!(s.iterations + 1, out.trace.records.len());
    assert_eq!(s.counts.values().sum::<usize>(), out.trace.records.len());
    assert_eq!(
        s.subproblem_solves,
        out.trace.records.iter().map(|r| r.subproblem_solves).sum::<usize>()
    );
    assert_eq!(out.trace.records.last().unwrap().step_kind, StepKind::Terminal);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn random_runs_pass_the_replay(seed in 1000u64..100_000, n in 1usize..=3, eps_exp in 2.0..7.0f64) {
        let inst = random_quartic(seed, n).unwrap();
        let eps = 10f64.powf(-eps_exp);
        let first = run_first_order(&inst, SolverConfig::default().with_epsilon(eps)).unwrap();
        prop_assert_eq!(&first.termination, &Termination::FirstOrderStationary);
        let report = check_trace(&first.trace);
        prop_assert!(report.passed(), "{:?}", report.failures().map(|f| f.id).collect::<Vec<_>>());
        let second = run_second_order(&inst, SecondOrderConfig::new(eps, 1e-3)).unwrap();
        prop_assert_eq!(&second.termination, &Termination::SecondOrderStationary);
        let report = check_trace(&second.trace);
        prop_assert!(report.passed(), "{:?}", report.failures().map(|f| f.id).collect::<Vec<_>>());
        // objective never increases along either run
        for t in [&first.trace, &second.trace] {
            for w in t.records.windows(2) {
                prop_assert!(w[1].f <= w[0].f + 1e-12 * (1.0 + w[0].f.abs()));
            }
        }
    }
}
