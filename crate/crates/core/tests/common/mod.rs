#![allow(dead_code)]

use ista_core::operators::DenseOperator;
use ista_core::prox::{Penalty, Weights};
use ista_core::solvers::{Problem, Solver, StepSizeRule, StoppingRule};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_vec(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect()
}

/// Entries N(0, 1/rows), so columns have roughly unit norm.
pub fn gaussian_operator(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DenseOperator {
    let entries = gaussian_vec(rng, rows * cols, 1.0 / (rows as f64).sqrt());
    DenseOperator::new(rows, cols, entries).unwrap()
}

/// Sparse ground truth plus noise, weighted ℓ¹ penalty with weights in
/// `[alpha, 2·alpha]`.
pub fn sparse_instance(seed: u64, rows: usize, cols: usize, alpha: f64) -> Problem {
    let mut r = rng(seed);
    let k = gaussian_operator(&mut r, rows, cols);
    let mut truth = vec![0.0; cols];
    for _ in 0..(cols / 3).max(1) {
        let i = r.random_range(0..cols);
        truth[i] = r.random_range(-2.0..2.0);
    }
    let mut f = k.apply(&truth).unwrap();
    for (fi, e) in f.iter_mut().zip(gaussian_vec(&mut r, rows, 0.05)) {
        *fi += e;
    }
    let weights: Vec<f64> = (0..cols).map(|_| alpha * r.random_range(1.0..2.0)).collect();
    Problem::new(k, f, Penalty::WeightedL1(Weights::new(weights).unwrap())).unwrap()
}

pub fn with_penalty(problem: &Problem, penalty: Penalty) -> Problem {
    Problem::new(problem.operator().clone(), problem.data().to_vec(), penalty).unwrap()
}

pub fn norm_sq(problem: &Problem) -> f64 {
    problem.operator().operator_norm_sq(1e-13).unwrap()
}

/// Long run at `s = 1/‖K‖²` with a tight step tolerance.
pub fn long_run(problem: &Problem, iters: usize) -> Vec<f64> {
    let ns = norm_sq(problem);
    Solver::new(problem, StepSizeRule::Constant(1.0 / ns))
        .operator_norm_sq(ns)
        .stopping(StoppingRule {
            max_iters: iters,
            gap_tol: 0.0,
            step_tol: 1e-15,
        })
        .run(None)
        .unwrap()
        .state
        .iterate
}
