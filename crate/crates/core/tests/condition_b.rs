mod common;

use common::*;
use ista_core::operators::DenseOperator;
use ista_core::prox::{Penalty, Weights};
use ista_core::solvers::{Problem, Solver, StepSizeRule, StopReason, StoppingRule};
use ista_core::vecops;

fn count(p: &Problem, rule: StepSizeRule, delta: f64) -> (usize, StopReason) {
    let k = p.operator();
    let out = Solver::new(p, rule)
        .stopping(StoppingRule {
            max_iters: 100_000,
            gap_tol: 0.0,
            step_tol: 1e-10,
        })
        .run_with(None, |ev| {
            let (Some(next), Some(s)) = (ev.next_iterate, ev.entry.step_size) else {
                return;
            };
            let d = vecops::sub(next, ev.iterate);
            let kd = k.apply(&d).unwrap();
            assert!(
                s * vecops::norm_sq(&kd) <= 2.0 * (1.0 - delta) * vecops::norm_sq(&d),
                "step {} accepted s = {s} violating the condition",
                ev.entry.n
            );
        })
        .unwrap();
    (out.iterations, out.stop_reason)
}

#[test]
fn condition_b_is_never_violated_and_can_be_faster() {
    // diagonal decay: the sparse solution lives on weakly scaled coordinates
    let d: Vec<f64> = (0..8).map(|k| 0.6f64.powi(k)).collect();
    let k = DenseOperator::diagonal(&d).unwrap();
    let truth = [0.0, 0.0, 0.0, 2.0, 0.0, -1.5, 0.0, 0.0];
    let f = k.apply(&truth).unwrap();
    let p = Problem::new(k, f, Penalty::WeightedL1(Weights::constant(8, 1e-3).unwrap())).unwrap();
    let ns = norm_sq(&p);
    let delta = 0.1;
    let (baseline, reason) = count(&p, StepSizeRule::Constant(1.0 / ns), delta);
    assert_eq!(reason, StopReason::StepTolerance);
    let (accelerated, reason) = count(
        &p,
        StepSizeRule::ConditionB {
            lower: 1.0 / ns,
            delta,
            initial: 1.0 / ns,
        },
        delta,
    );
    assert_eq!(reason, StopReason::StepTolerance);
    assert!(accelerated < baseline, "{accelerated} vs {baseline}");
}

#[test]
fn condition_b_on_random_instances() {
    for seed in 0..5u64 {
        let p = sparse_instance(1300 + seed, 15, 10, 0.05);
        let ns = norm_sq(&p);
        let delta = 0.2;
        count(
            &p,
            StepSizeRule::ConditionB {
                lower: 0.5 / ns,
                delta,
                initial: 1.0 / ns,
            },
            delta,
        );
    }
}
