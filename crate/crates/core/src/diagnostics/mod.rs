//! Convergence quantities evaluated against a (near-)minimizer `u*`:
//! the Bregman-like distance `R`, the Taylor distance `T`, support and
//! active-set analysis, rate certificates and empirical rate fits.

pub mod certificates;
pub mod checks;
pub mod rates;
pub mod trace;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::prox::Penalty;
use crate::serde_ext;
use crate::solvers::Problem;
use crate::vecops;

/// Relative tolerance deciding `|w*_k| = α_k` in floating point.
pub const ACTIVE_TOLERANCE: f64 = 1e-8;

/// Cached evaluations at a reference minimizer.
#[derive(Debug, Clone, PartialEq)]
pub struct Reference {
    pub minimizer: Vec<f64>,
    pub objective: f64,
    /// `F'(u*)`.
    pub gradient: Vec<f64>,
    /// `Φ(u*)`.
    pub penalty_value: f64,
}

impl Reference {
    pub fn new(problem: &Problem, u_star: &[f64]) -> Result<Self> {
        let gradient = problem.gradient(u_star)?;
        let penalty_value = problem.penalty().value(u_star);
        if !penalty_value.is_finite() {
            return Err(Error::InvalidArgument(
                "reference point lies outside the domain of the penalty".into(),
            ));
        }
        Ok(Self {
            minimizer: u_star.to_vec(),
            objective: problem.objective(u_star)?,
            gradient,
            penalty_value,
        })
    }

    /// `R(v) = ⟨F'(u*), v − u*⟩ + Φ(v) − Φ(u*)`.
    pub fn bregman(&self, problem: &Problem, v: &[f64]) -> Result<f64> {
        check_len(problem, v)?;
        let phi = problem.penalty().value(v);
        if phi.is_infinite() {
            return Ok(f64::INFINITY);
        }
        Ok(vecops::dot(&self.gradient, &vecops::sub(v, &self.minimizer)) + phi - self.penalty_value)
    }

    /// `T(v) = ‖K(v − u*)‖²/2`.
    pub fn taylor(&self, problem: &Problem, v: &[f64]) -> Result<f64> {
        check_len(problem, v)?;
        let kd = problem.operator().apply(&vecops::sub(v, &self.minimizer))?;
        Ok(0.5 * vecops::norm_sq(&kd))
    }
}

fn check_len(problem: &Problem, v: &[f64]) -> Result<()> {
    if v.len() != problem.truncation_dim() {
        return Err(Error::DimensionMismatch {
            context: "point length vs operator columns",
            expected: problem.truncation_dim(),
            found: v.len(),
        });
    }
    Ok(())
}

pub fn bregman_r(problem: &Problem, u_star: &[f64], v: &[f64]) -> Result<f64> {
    Reference::new(problem, u_star)?.bregman(problem, v)
}

pub fn taylor_t(problem: &Problem, u_star: &[f64], v: &[f64]) -> Result<f64> {
    Reference::new(problem, u_star)?.taylor(problem, v)
}

/// Fixed-point residual `‖u − J_1(u − F'(u))‖`, zero exactly at minimizers.
pub fn optimality_residual(problem: &Problem, u: &[f64]) -> Result<f64> {
    let grad = problem.gradient(u)?;
    let v = problem.penalty().prox(&vecops::sub(u, &grad), 1.0)?;
    Ok(vecops::dist(u, &v))
}

/// Active set and dual quantities of a weighted ℓ¹ minimizer.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SupportAnalysis {
    /// `w* = −K*(Ku* − f)`.
    pub w_star: Vec<f64>,
    /// `I = {k : |w*_k| ≥ α_k(1 − tol)}`, the complement of `U_dual`.
    pub active_set: Vec<usize>,
    /// `sup_{k∉I} |w*_k|/α_k`, zero when `I` is everything.
    pub rho: f64,
    /// Every zero coefficient has a strictly inactive dual constraint.
    pub strict_pattern: bool,
    /// `{k : u*_k ≠ 0}`, the complement of `U_support`.
    pub support: Vec<usize>,
    pub subspace_dim: usize,
    pub active_tolerance: f64,
    pub residual: f64,
}

/// Requires `optimality_residual(u*) ≤ tol`.
pub fn support_analysis(problem: &Problem, u_star: &[f64], tol: f64) -> Result<SupportAnalysis> {
    let Penalty::WeightedL1(weights) = problem.penalty() else {
        return Err(Error::PenaltyMismatch(format!(
            "support analysis needs a weighted_l1 penalty, found {}",
            problem.penalty().kind()
        )));
    };
    let residual = optimality_residual(problem, u_star)?;
    if residual > tol {
        return Err(Error::NotOptimal {
            residual,
            tolerance: tol,
        });
    }
    let w_star = problem.dual_vector(u_star)?;
    let alpha = weights.as_slice();
    let mut active_set = Vec::new();
    let mut rho: f64 = 0.0;
    for (k, (w, a)) in w_star.iter().zip(alpha).enumerate() {
        if w.abs() >= a * (1.0 - ACTIVE_TOLERANCE) {
            active_set.push(k);
        } else {
            rho = rho.max(w.abs() / a);
        }
    }
    let support = vecops::support(u_star);
    let strict_pattern = active_set.iter().all(|k| u_star[*k] != 0.0);
    Ok(SupportAnalysis {
        subspace_dim: active_set.len(),
        w_star,
        active_set,
        rho,
        strict_pattern,
        support,
        active_tolerance: ACTIVE_TOLERANCE,
        residual,
    })
}

/// Optimality data for a minimizer over the weighted ℓ¹-ball.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BallAnalysis {
    pub w_star: Vec<f64>,
    /// `W = ‖α⁻¹w*‖_∞`.
    pub weighted_dual_norm: f64,
    /// `I = {k : |w*_k|/α_k ≥ W(1 − tol)}`.
    pub active_set: Vec<usize>,
    /// `sup_{k∉I} |w*_k|/(α_k W)`.
    pub rho: f64,
    /// `Σ_{k∈I} α_k|u*_k|`.
    pub active_mass: f64,
    pub radius: f64,
    /// `sign(u*_k) = sign(w*_k)` wherever `u*_k ≠ 0`.
    pub sign_agreement: bool,
    /// Support of `u*` lies inside `I`.
    pub support_in_active_set: bool,
    pub residual: f64,
}

pub fn ball_analysis(problem: &Problem, u_star: &[f64], tol: f64) -> Result<BallAnalysis> {
    let Penalty::L1Ball { weights, radius } = problem.penalty() else {
        return Err(Error::PenaltyMismatch(format!(
            "ball analysis needs an l1_ball_indicator penalty, found {}",
            problem.penalty().kind()
        )));
    };
    let residual = optimality_residual(problem, u_star)?;
    if residual > tol {
        return Err(Error::NotOptimal {
            residual,
            tolerance: tol,
        });
    }
    let w_star = problem.dual_vector(u_star)?;
    let alpha = weights.as_slice();
    let ratios: Vec<f64> = w_star.iter().zip(alpha).map(|(w, a)| w.abs() / a).collect();
    let big_w = ratios.iter().fold(0.0f64, |m, r| m.max(*r));
    let mut active_set = Vec::new();
    let mut rho: f64 = 0.0;
    for (k, r) in ratios.iter().enumerate() {
        if big_w > 0.0 && *r >= big_w * (1.0 - ACTIVE_TOLERANCE) {
            active_set.push(k);
        } else if big_w > 0.0 {
            rho = rho.max(r / big_w);
        }
    }
    let mut active_mass = 0.0;
    for k in &active_set {
        active_mass += alpha[*k] * u_star[*k].abs();
    }
    let sign_agreement = u_star
        .iter()
        .zip(&w_star)
        .all(|(u, w)| *u == 0.0 || vecops::sign(*u) == vecops::sign(*w));
    let support_in_active_set = vecops::support(u_star)
        .iter()
        .all(|k| active_set.binary_search(k).is_ok());
    Ok(BallAnalysis {
        w_star,
        weighted_dual_norm: big_w,
        active_set,
        rho,
        active_mass,
        radius: *radius,
        sign_agreement,
        support_in_active_set,
        residual,
    })
}

/// Subgradient conditions for joint sparsity: `|w_k|_* ≤ α_k` for every
/// block and `⟨w_k, u_k⟩ = α_k|u_k|` (which pins `w_k` to `α_k ∂|u_k|`).
/// Returns the largest violation.
pub fn asplund_residual(problem: &Problem, u: &[f64]) -> Result<f64> {
    let Penalty::Joint { weights, norm } = problem.penalty() else {
        return Err(Error::PenaltyMismatch(format!(
            "Asplund conditions need a joint penalty, found {}",
            problem.penalty().kind()
        )));
    };
    let w = problem.dual_vector(u)?;
    let dual = norm.q.dual();
    let mut worst: f64 = 0.0;
    for ((a, wb), ub) in weights
        .as_slice()
        .iter()
        .zip(w.chunks(norm.block_size))
        .zip(u.chunks(norm.block_size))
    {
        worst = worst.max(dual.norm(wb) - a);
        worst = worst.max((a * norm.q.norm(ub) - vecops::dot(wb, ub)).abs());
    }
    Ok(worst)
}

/// Descent check along a trace: `obj(uⁿ⁺¹) ≤ obj(uⁿ) − δ·D` and
/// `D ≥ ‖uⁿ⁺¹ − uⁿ‖²/sₙ`, both with slack. Returns the worst margins.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DescentMargins {
    /// `min_n obj(uⁿ) − δD − obj(uⁿ⁺¹)`; non-negative up to rounding.
    #[serde(serialize_with = "serde_ext::f64")]
    pub descent: f64,
    /// `min_n D` ; non-negative up to rounding.
    #[serde(serialize_with = "serde_ext::f64")]
    pub bregman_like: f64,
}

pub fn descent_margins(trace: &trace::IterationTrace, delta: f64) -> DescentMargins {
    let mut descent = f64::INFINITY;
    let mut bregman_like = f64::INFINITY;
    for pair in trace.entries.windows(2) {
        if let Some(d) = pair[0].descent {
            descent = descent.min(pair[0].objective - delta * d - pair[1].objective);
            bregman_like = bregman_like.min(d);
        }
    }
    DescentMargins {
        descent,
        bregman_like,
    }
}
