use bethe_core::bp::{self, BpOptions};
use bethe_core::io::{self, AnyModel};
use bethe_core::solver::{self, SolverOptions};
use bethe_core::{fptas, model, oracle, MessageSet, Model, SeededRng};
use proptest::prelude::*;

fn small_model(seed: u64, n: usize, p: f64) -> Model {
    let mut rng = SeededRng::new(seed);
    let g = model::random_graph(n, p, &mut rng).unwrap();
    model::random_potentials(g, 3.0, &mut rng).unwrap()
}

#[test]
fn file_round_trip_gives_identical_runs() {
    let m = model::ising(model::grid_graph(5, true).unwrap(), 2.0, 11).unwrap();
    let back = match io::read_any(&io::model_to_json(&m)).unwrap() {
        AnyModel::Binary(b) => b,
        AnyModel::Categorical(_) => panic!("expected binary"),
    };
    let opts = SolverOptions {
        track: vec![0, 7],
        ..Default::default()
    };
    let a = solver::solve(&m, &opts).unwrap();
    let b = solver::solve(&back, &opts).unwrap();
    assert_eq!(a.trace, b.trace);
    assert_eq!(a.y, b.y);
}

#[test]
fn solvers_agree_on_a_tree() {
    let m = model::random_tree_model(9, 5).unwrap();
    let exact = oracle::exact_marginals(&m).unwrap();
    let opts = SolverOptions {
        epsilon: 1e-8,
        ..Default::default()
    };
    let a = solver::require_converged(solver::solve(&m, &opts).unwrap()).unwrap();
    let b = solver::require_converged(fptas::solve_quantized(&m, &opts, 52).unwrap()).unwrap();
    let bp_opts = BpOptions {
        epsilon: 1e-10,
        ..Default::default()
    };
    let c = bp::run_bp(&m, MessageSet::ones(m.graph()), &bp_opts).unwrap();
    assert!(c.converged);
    for v in 0..m.node_count() {
        let p = exact.node_marginals[v][1];
        for y in [a.y[v], b.y[v], c.y[v]] {
            assert!((y - p).abs() < 1e-6, "node {v}: {y} vs {p}");
        }
    }
}

#[test]
fn exhausted_budget_keeps_the_trace() {
    let m = model::hardcore(model::grid_graph(10, true).unwrap(), 2.0, 1e-3).unwrap();
    let opts = SolverOptions {
        max_iters: 5,
        ..Default::default()
    };
    let r = solver::solve(&m, &opts).unwrap();
    assert!(!r.converged);
    assert_eq!(r.trace.records().len(), 5);
    match solver::require_converged(r) {
        Err(bethe_core::Error::BudgetExhausted { iterations, trace }) => {
            assert_eq!(iterations, 5);
            assert_eq!(trace.records().len(), 5);
        }
        other => panic!("unexpected {other:?}"),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn converged_runs_are_sound(seed in any::<u64>(), n in 2usize..7, p in 0.2f64..0.9) {
        let m = small_model(seed, n, p);
        let opts = SolverOptions { epsilon: 1e-5, max_iters: 20_000, ..Default::default() };
        let r = solver::solve(&m, &opts).unwrap();
        prop_assert!(r.y.values().iter().all(|&y| y > 0.0 && y < 1.0));
        if r.converged {
            let residual = bp::fixed_point_residual(&m, &r.messages);
            prop_assert!(residual <= opts.epsilon);
            prop_assert_eq!(residual, r.residual);
        }
    }

    #[test]
    fn trees_converge_to_exact_marginals(seed in any::<u64>(), n in 2usize..10) {
        let m = model::random_tree_model(n, seed).unwrap();
        let opts = SolverOptions { epsilon: 1e-7, ..Default::default() };
        let r = solver::solve(&m, &opts).unwrap();
        prop_assert!(r.converged);
        let exact = oracle::exact_marginals(&m).unwrap();
        for v in 0..n {
            prop_assert!((r.y[v] - exact.node_marginals[v][1]).abs() < 1e-5);
        }
    }

    #[test]
    fn quantized_iterates_stay_on_the_grid(seed in any::<u64>(), k in 8u32..40) {
        let m = small_model(seed, 5, 0.5);
        let opts = SolverOptions { max_iters: 40, ..Default::default() };
        match fptas::solve_quantized(&m, &opts, k) {
            Ok(r) => prop_assert!(r.y.values().iter().all(|&y| fptas::is_representable(y, k))),
            Err(e) => prop_assert_eq!(e.kind(), "QuantizedPairwiseFailure"),
        }
    }
}
