//! Exact minimizers of small weighted ℓ¹ problems by enumerating sign
//! patterns. Used as an independent reference for the iterative solvers.
//!
//! A point `u` is optimal iff `w = −K*(Ku − f)` satisfies `w_k = α_k sign(u_k)`
//! on the support and `|w_k| ≤ α_k` elsewhere. For a fixed pattern
//! `σ ∈ {−1, 0, +1}ⁿ` the first condition is the linear system
//! `K_S*K_S x = K_S*f − α_S σ_S`.

use nalgebra::{Cholesky, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::prox::Penalty;
use crate::solvers::Problem;
use crate::vecops;

/// Largest column count the enumeration accepts by default (`3¹²` patterns).
pub const MAX_ORACLE_COLS: usize = 12;
/// Relative slack on the off-support dual constraint.
pub const DUAL_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleReport {
    pub minimizer: Vec<f64>,
    pub objective: f64,
    pub patterns_checked: u64,
    /// Supports whose Gram matrix was not positive definite.
    pub singular_supports: u64,
    pub consistent_patterns: u64,
}

pub fn oracle_minimizer(problem: &Problem) -> Result<Vec<f64>> {
    Ok(oracle_enumerate(problem, MAX_ORACLE_COLS)?.minimizer)
}

pub fn oracle_enumerate(problem: &Problem, max_cols: usize) -> Result<OracleReport> {
    let Penalty::WeightedL1(weights) = problem.penalty() else {
        return Err(Error::PenaltyMismatch(format!(
            "the enumeration oracle needs a weighted_l1 penalty, found {}",
            problem.penalty().kind()
        )));
    };
    let n = problem.truncation_dim();
    if n > max_cols {
        return Err(Error::EnumerationBudget {
            subsets: 3u128.saturating_pow(n as u32),
            budget: 3u128.pow(max_cols as u32),
        });
    }
    let op = problem.operator();
    let alpha = weights.as_slice();
    let ktf = op.adjoint_apply(problem.data())?;

    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut checked = 0u64;
    let mut singular = 0u64;
    let mut consistent = 0u64;

    for mask in 0u32..(1u32 << n) {
        let support: Vec<usize> = (0..n).filter(|k| mask & (1 << k) != 0).collect();
        let chol = if support.is_empty() {
            None
        } else {
            match Cholesky::new(op.gram_submatrix(&support)) {
                Some(c) => Some(c),
                None => {
                    singular += 1;
                    checked += 1u64 << support.len();
                    continue;
                }
            }
        };
        for signs in 0u32..(1u32 << support.len()) {
            checked += 1;
            let mut u = vec![0.0; n];
            if let Some(chol) = &chol {
                let rhs = DVector::from_iterator(
                    support.len(),
                    support.iter().enumerate().map(|(i, &k)| {
                        let s = if signs & (1 << i) != 0 { -1.0 } else { 1.0 };
                        ktf[k] - alpha[k] * s
                    }),
                );
                let x = chol.solve(&rhs);
                let mut ok = true;
                for (i, &k) in support.iter().enumerate() {
                    let s = if signs & (1 << i) != 0 { -1.0 } else { 1.0 };
                    if vecops::sign(x[i]) != s {
                        ok = false;
                        break;
                    }
                    u[k] = x[i];
                }
                if !ok {
                    continue;
                }
            }
            if !dual_feasible(problem, &u, alpha)? {
                continue;
            }
            consistent += 1;
            let obj = problem.objective(&u)?;
            if best.as_ref().is_none_or(|(b, _)| obj < *b) {
                best = Some((obj, u));
            }
        }
    }
    let (objective, minimizer) = best.ok_or_else(|| {
        Error::InsufficientData("no sign pattern satisfies the optimality conditions".into())
    })?;
    Ok(OracleReport {
        minimizer,
        objective,
        patterns_checked: checked,
        singular_supports: singular,
        consistent_patterns: consistent,
    })
}

fn dual_feasible(problem: &Problem, u: &[f64], alpha: &[f64]) -> Result<bool> {
    let w = problem.dual_vector(u)?;
    Ok(u.iter()
        .zip(&w)
        .zip(alpha)
        .all(|((x, wk), a)| *x != 0.0 || wk.abs() <= a * (1.0 + DUAL_SLACK)))
}

/// Re-solves the stationarity system on the support and signs of an
/// approximate minimizer `u`. Returns `None` when the system is singular or
/// the solution changes sign pattern or violates the dual constraint.
pub fn polish(problem: &Problem, u: &[f64]) -> Result<Option<Vec<f64>>> {
    let Penalty::WeightedL1(weights) = problem.penalty() else {
        return Err(Error::PenaltyMismatch(format!(
            "polishing needs a weighted_l1 penalty, found {}",
            problem.penalty().kind()
        )));
    };
    let alpha = weights.as_slice();
    let support = vecops::support(u);
    let mut out = vec![0.0; u.len()];
    if !support.is_empty() {
        let op = problem.operator();
        let Some(chol) = Cholesky::new(op.gram_submatrix(&support)) else {
            return Ok(None);
        };
        let ktf = op.adjoint_apply(problem.data())?;
        let rhs = DVector::from_iterator(
            support.len(),
            support.iter().map(|&k| ktf[k] - alpha[k] * vecops::sign(u[k])),
        );
        let x = chol.solve(&rhs);
        for (i, &k) in support.iter().enumerate() {
            if vecops::sign(x[i]) != vecops::sign(u[k]) {
                return Ok(None);
            }
            out[k] = x[i];
        }
    }
    if !dual_feasible(problem, &out, alpha)? {
        return Ok(None);
    }
    Ok(Some(out))
}
