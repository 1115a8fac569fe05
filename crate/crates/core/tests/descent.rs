mod common;

use common::*;
use ista_core::oracle::oracle_minimizer;
use ista_core::prox::Penalty;
use ista_core::solvers::{Solver, StepSizeRule, StoppingRule};
use ista_core::vecops;

const SLACK: f64 = 1e-10;

fn rules(ns: f64) -> Vec<StepSizeRule> {
    vec![
        StepSizeRule::Constant(1.0 / ns),
        StepSizeRule::Constant(1.9 / ns),
        StepSizeRule::Bounded {
            lower: 0.2 / ns,
            upper: 1.8 / ns,
            cycle: vec![0.2 / ns, 1.8 / ns, 1.0 / ns],
        },
    ]
}

#[test]
fn descent_inequality_on_random_instances() {
    for seed in 0..20u64 {
        let mut r = rng(1000 + seed);
        let rows = r_range(&mut r, 4, 32);
        let cols = r_range(&mut r, 2, 32);
        let p = sparse_instance(seed, rows, cols, 0.05);
        let ns = norm_sq(&p);
        for rule in rules(ns) {
            let out = Solver::new(&p, rule.clone())
                .operator_norm_sq(ns)
                .stopping(StoppingRule {
                    max_iters: 300,
                    ..Default::default()
                })
                .run_with(None, |ev| {
                    let (Some(next), Some(s), Some(d)) =
                        (ev.next_iterate, ev.entry.step_size, ev.entry.descent)
                    else {
                        return;
                    };
                    // D ≥ ‖v − u‖²/s
                    let gap = vecops::dist(next, ev.iterate);
                    assert!(d >= gap * gap / s - SLACK, "seed {seed}: D = {d} < {}", gap * gap / s);
                })
                .unwrap();
            let delta = out.bounds.delta;
            for pair in out.trace.entries.windows(2) {
                let d = pair[0].descent.unwrap();
                let margin = pair[0].objective - delta * d - pair[1].objective;
                assert!(margin >= -SLACK, "seed {seed} {rule:?}: margin {margin}");
                assert!(pair[1].objective <= pair[0].objective + SLACK);
            }
        }
    }
}

fn r_range(r: &mut rand_chacha::ChaCha8Rng, lo: usize, hi: usize) -> usize {
    use rand::Rng;
    r.random_range(lo..=hi)
}

#[test]
fn variational_inequality_and_monotone_distance() {
    for seed in 0..6u64 {
        let p = sparse_instance(200 + seed, 10, 6, 0.1);
        let u_star = oracle_minimizer(&p).unwrap();
        let ns = norm_sq(&p);
        let s = 1.5 / ns;
        let penalty = p.penalty().clone();
        Solver::new(&p, StepSizeRule::Constant(s))
            .operator_norm_sq(ns)
            .stopping(StoppingRule {
                max_iters: 400,
                ..Default::default()
            })
            .reference(&u_star)
            .unwrap()
            .run_with(None, |ev| {
                let Some(v) = ev.next_iterate else { return };
                let u = ev.iterate;
                let grad = p.gradient(u).unwrap();
                // Φ(u*) − Φ(v) + ⟨F'(u), u* − v⟩ ≥ ⟨u − v, u* − v⟩/s
                let lhs = penalty.value(&u_star) - penalty.value(v)
                    + vecops::dot(&grad, &vecops::sub(&u_star, v));
                let rhs = vecops::dot(&vecops::sub(u, v), &vecops::sub(&u_star, v)) / s;
                assert!(lhs >= rhs - SLACK, "seed {seed}: {lhs} < {rhs}");
                assert!(vecops::dist(v, &u_star) <= vecops::dist(u, &u_star) + SLACK);
                let gap = ev.entry.gap.unwrap();
                assert!(gap >= -1e-12, "negative gap {gap}");
            })
            .unwrap();
    }
}

#[test]
fn deterministic_trajectories() {
    let p = sparse_instance(7, 20, 15, 0.05);
    let run = || {
        Solver::new(&p, StepSizeRule::Constant(0.5))
            .stopping(StoppingRule {
                max_iters: 200,
                ..Default::default()
            })
            .run(None)
            .unwrap()
    };
    let (a, b) = (run(), run());
    assert_eq!(a.state.iterate, b.state.iterate);
    assert_eq!(a.trace, b.trace);
    assert!(matches!(p.penalty(), Penalty::WeightedL1(_)));
}
