mod common;

use std::time::Duration;

use common::*;
use dualmatch::primal::{exact_solve, ExactConfig, ExactResult};
use dualmatch::solver::{solve, SolveConfig, SolveMode};

#[test]
fn propagation_oracle_agrees_with_brute_force() {
    let mut r = rng(11);
    for _ in 0..60 {
        let (inst, rows) = random_instance(&mut r, 14, 6);
        let bf = brute_force(inst.costs(), &rows).map(|b| b.0);
        let pr = propagation_oracle(inst.costs(), &rows, Duration::from_secs(10)).map(|b| b.0);
        assert_eq!(bf, pr);
    }
}

#[test]
fn exact_solver_matches_brute_force() {
    let mut r = rng(12);
    for _ in 0..40 {
        let (inst, rows) = random_instance(&mut r, 16, 8);
        let bf = brute_force(inst.costs(), &rows).unwrap();
        match exact_solve(&inst, &ExactConfig::default()) {
            ExactResult::Optimal { x, objective } => {
                assert!((objective - bf.0).abs() < 1e-9);
                assert!(inst.is_feasible(&x));
            }
            other => panic!("{other:?}"),
        }
    }
}

#[test]
fn shape_instances_match_oracle() {
    for (ps, prog) in [tetra_program(), octa_program()] {
        let rows = rows_of(&prog.instance);
        let (opt, _) = propagation_oracle(prog.instance.costs(), &rows, Duration::from_secs(120)).unwrap();
        for mode in [SolveMode::MmaOnly, SolveMode::Hybrid] {
            let out = solve(&prog.instance, &SolveConfig { mode, ..SolveConfig::default() }).unwrap();
            let report = out.report.unwrap();
            assert!(report.certified);
            assert!((report.primal_objective - opt).abs() < 1e-6, "{} vs {opt}", report.primal_objective);
            assert!(out.best_dual <= opt + 1e-9);
        }
        let _ = ps;
    }
}
