//! Proximity operators: weighted soft-thresholding, block thresholding for
//! joint sparsity, and Euclidean projection onto a weighted ℓ¹-ball.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::vecops;

/// Positive weight sequence `α` with a uniform lower bound `α̲ > 0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Weights {
    alpha: Vec<f64>,
    lower_bound: f64,
}

impl Weights {
    /// Lower bound is taken as the minimum entry.
    pub fn new(alpha: Vec<f64>) -> Result<Self> {
        let lower = alpha.iter().copied().fold(f64::INFINITY, f64::min);
        Self::with_lower_bound(alpha, lower)
    }

    pub fn with_lower_bound(alpha: Vec<f64>, lower_bound: f64) -> Result<Self> {
        if alpha.is_empty() {
            return Err(Error::InvalidArgument("weights must be non-empty".into()));
        }
        if !(lower_bound > 0.0) || !lower_bound.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "weight lower bound must be positive and finite, got {lower_bound}"
            )));
        }
        if let Some((k, a)) = alpha
            .iter()
            .enumerate()
            .find(|(_, a)| !a.is_finite() || **a < lower_bound)
        {
            return Err(Error::InvalidArgument(format!(
                "weight alpha[{k}] = {a} is below the lower bound {lower_bound}"
            )));
        }
        Ok(Self { alpha, lower_bound })
    }

    pub fn constant(len: usize, value: f64) -> Result<Self> {
        Self::new(vec![value; len])
    }

    pub fn len(&self) -> usize {
        self.alpha.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alpha.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.alpha
    }

    pub fn lower_bound(&self) -> f64 {
        self.lower_bound
    }

    pub fn scaled(&self, s: f64) -> Vec<f64> {
        self.alpha.iter().map(|a| s * a).collect()
    }
}

/// Exponent of the per-block norm `|·| = ‖·‖_q` on `ℝᴺ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum NormExponent {
    One,
    Two,
    Infinity,
}

impl NormExponent {
    pub fn dual(self) -> Self {
        match self {
            Self::One => Self::Infinity,
            Self::Two => Self::Two,
            Self::Infinity => Self::One,
        }
    }

    pub fn norm(self, x: &[f64]) -> f64 {
        match self {
            Self::One => x.iter().map(|v| v.abs()).sum(),
            Self::Two => vecops::norm(x),
            Self::Infinity => vecops::norm_inf(x),
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        match text.trim() {
            "1" => Ok(Self::One),
            "2" => Ok(Self::Two),
            "inf" | "infinity" | "∞" => Ok(Self::Infinity),
            other => Err(Error::InvalidArgument(format!(
                "unsupported block norm exponent {other:?}; expected 1, 2 or inf"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BlockNorm {
    pub q: NormExponent,
    pub block_size: usize,
}

impl BlockNorm {
    pub fn new(q: NormExponent, block_size: usize) -> Result<Self> {
        if block_size == 0 {
            return Err(Error::InvalidArgument("block size must be at least 1".into()));
        }
        Ok(Self { q, block_size })
    }
}

/// Convex penalty `Φ`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Penalty {
    /// `Σ α_k |u_k|`.
    WeightedL1(Weights),
    /// `Σ α_k |u_k|_q` over consecutive blocks of `block_size` entries.
    Joint { weights: Weights, norm: BlockNorm },
    /// Indicator of `{u : Σ α_k |u_k| ≤ radius}`.
    L1Ball { weights: Weights, radius: f64 },
}

/// Slack on the ball constraint before the indicator reports `+∞`.
pub const BALL_FEASIBILITY_SLACK: f64 = 1e-12;

impl Penalty {
    pub fn weights(&self) -> &Weights {
        match self {
            Self::WeightedL1(w) => w,
            Self::Joint { weights, .. } => weights,
            Self::L1Ball { weights, .. } => weights,
        }
    }

    /// Length of the coefficient vector this penalty acts on.
    pub fn dim(&self) -> usize {
        match self {
            Self::WeightedL1(w) | Self::L1Ball { weights: w, .. } => w.len(),
            Self::Joint { weights, norm } => weights.len() * norm.block_size,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Self::WeightedL1(_) => "weighted_l1",
            Self::Joint { .. } => "joint",
            Self::L1Ball { .. } => "l1_ball_indicator",
        }
    }

    /// `Φ(u)`; `+∞` for points outside the ball.
    pub fn value(&self, u: &[f64]) -> f64 {
        debug_assert_eq!(u.len(), self.dim());
        match self {
            Self::WeightedL1(w) => weighted_l1(w.as_slice(), u),
            Self::Joint { weights, norm } => {
                let mut acc = 0.0;
                for (a, block) in weights.as_slice().iter().zip(u.chunks(norm.block_size)) {
                    acc += a * norm.q.norm(block);
                }
                acc
            }
            Self::L1Ball { weights, radius } => {
                if weighted_l1(weights.as_slice(), u) <= radius * (1.0 + BALL_FEASIBILITY_SLACK) {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
        }
    }

    /// `J_s(w) = argmin_v ‖v − w‖²/2 + sΦ(v)`.
    pub fn prox(&self, w: &[f64], s: f64) -> Result<Vec<f64>> {
        if w.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                context: "prox input vs penalty dimension",
                expected: self.dim(),
                found: w.len(),
            });
        }
        if !(s > 0.0) {
            return Err(Error::InvalidArgument(format!("prox step must be positive, got {s}")));
        }
        match self {
            Self::WeightedL1(weights) => soft_threshold(w, &weights.scaled(s)),
            Self::Joint { weights, norm } => block_threshold(w, &weights.scaled(s), *norm),
            Self::L1Ball { weights, radius } => project_weighted_l1_ball(w, weights, *radius),
        }
    }
}

fn weighted_l1(alpha: &[f64], u: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (a, x) in alpha.iter().zip(u) {
        acc += a * x.abs();
    }
    acc
}

fn check_thresholds(len: usize, thresholds: &[f64], context: &'static str) -> Result<()> {
    if thresholds.len() != len {
        return Err(Error::DimensionMismatch {
            context,
            expected: len,
            found: thresholds.len(),
        });
    }
    if let Some((k, t)) = thresholds.iter().enumerate().find(|(_, t)| !(**t >= 0.0)) {
        return Err(Error::InvalidArgument(format!(
            "threshold[{k}] = {t} must be non-negative"
        )));
    }
    Ok(())
}

/// Componentwise `sign(w_k)·max(|w_k| − t_k, 0)`, with exact zeros whenever
/// `|w_k| ≤ t_k`.
pub fn soft_threshold(w: &[f64], thresholds: &[f64]) -> Result<Vec<f64>> {
    check_thresholds(w.len(), thresholds, "soft_threshold thresholds vs input")?;
    Ok(w.iter()
        .zip(thresholds)
        .map(|(&x, &t)| shrink(x, t))
        .collect())
}

#[inline]
fn shrink(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

/// Projection of `x` onto `{y : |y|_* ≤ t}` where `|·|_*` is the dual of `‖·‖_q`.
pub fn project_dual_ball(x: &[f64], t: f64, q: NormExponent) -> Vec<f64> {
    match q.dual() {
        NormExponent::Infinity => x.iter().map(|v| v.clamp(-t, t)).collect(),
        NormExponent::Two => {
            let n = vecops::norm(x);
            if n <= t {
                x.to_vec()
            } else {
                let scale = t / n;
                x.iter().map(|v| v * scale).collect()
            }
        }
        NormExponent::One => {
            if t == 0.0 {
                vec![0.0; x.len()]
            } else {
                let ones = Weights {
                    alpha: vec![1.0; x.len()],
                    lower_bound: 1.0,
                };
                project_weighted_l1_ball(x, &ones, t).expect("radius is positive")
            }
        }
    }
}

/// Blockwise `x − Π_{|·|_* ≤ t}(x)`, the proximity map of `t·‖·‖_q` on each
/// block. With `block_size = 1` every `q` reduces to scalar soft-thresholding.
pub fn block_threshold(w: &[f64], thresholds: &[f64], norm: BlockNorm) -> Result<Vec<f64>> {
    let n = norm.block_size;
    if n == 0 || !w.len().is_multiple_of(n) {
        return Err(Error::InvalidArgument(format!(
            "input length {} is not a multiple of block size {n}",
            w.len()
        )));
    }
    check_thresholds(w.len() / n, thresholds, "block_threshold thresholds vs blocks")?;
    if n == 1 {
        return soft_threshold(w, thresholds);
    }
    let mut out = Vec::with_capacity(w.len());
    for (block, &t) in w.chunks(n).zip(thresholds) {
        match norm.q {
            NormExponent::One => out.extend(block.iter().map(|&x| shrink(x, t))),
            NormExponent::Two => {
                let bn = vecops::norm(block);
                if bn <= t {
                    out.extend(std::iter::repeat_n(0.0, n));
                } else {
                    let scale = 1.0 - t / bn;
                    out.extend(block.iter().map(|x| x * scale));
                }
            }
            NormExponent::Infinity => {
                let p = project_dual_ball(block, t, norm.q);
                out.extend(block.iter().zip(&p).map(|(x, y)| x - y));
            }
        }
    }
    Ok(out)
}

/// Euclidean projection onto `{v : Σ α_k |v_k| ≤ radius}`.
///
/// Infeasible points map to `sign(u_k)·max(|u_k| − τα_k, 0)` where `τ` is
/// found exactly by sorting the breakpoints `|u_k|/α_k`.
pub fn project_weighted_l1_ball(u: &[f64], weights: &Weights, radius: f64) -> Result<Vec<f64>> {
    if !(radius > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "ball radius must be positive, got {radius}"
        )));
    }
    if u.len() != weights.len() {
        return Err(Error::DimensionMismatch {
            context: "ball projection input vs weights",
            expected: weights.len(),
            found: u.len(),
        });
    }
    let alpha = weights.as_slice();
    if weighted_l1(alpha, u) <= radius {
        return Ok(u.to_vec());
    }
    let tau = ball_threshold(u, alpha, radius);
    Ok(u.iter()
        .zip(alpha)
        .map(|(&x, &a)| shrink(x, tau * a))
        .collect())
}

/// Root `τ > 0` of `Σ α_k max(|u_k| − τα_k, 0) = radius` for infeasible `u`.
fn ball_threshold(u: &[f64], alpha: &[f64], radius: f64) -> f64 {
    let mut order: Vec<usize> = (0..u.len()).filter(|&k| u[k] != 0.0).collect();
    order.sort_by(|&i, &j| {
        let bi = u[i].abs() / alpha[i];
        let bj = u[j].abs() / alpha[j];
        bj.total_cmp(&bi).then(i.cmp(&j))
    });
    let mut mass = 0.0; // Σ α_k |u_k| over the active prefix
    let mut curvature = 0.0; // Σ α_k² over the active prefix
    let mut tau = 0.0;
    for &k in &order {
        let breakpoint = u[k].abs() / alpha[k];
        let next_mass = mass + alpha[k] * u[k].abs();
        let next_curv = curvature + alpha[k] * alpha[k];
        let candidate = (next_mass - radius) / next_curv;
        if candidate < breakpoint {
            mass = next_mass;
            curvature = next_curv;
            tau = candidate;
        } else {
            break;
        }
    }
    tau.max(0.0)
}

/// One proximal gradient step `J_s(u − s·grad)`.
pub fn prox_step(u: &[f64], grad: &[f64], s: f64, penalty: &Penalty) -> Result<Vec<f64>> {
    if u.len() != grad.len() {
        return Err(Error::DimensionMismatch {
            context: "prox_step gradient vs iterate",
            expected: u.len(),
            found: grad.len(),
        });
    }
    penalty.prox(&vecops::sub_scaled(u, s, grad), s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn ones(n: usize) -> Weights {
        Weights::constant(n, 1.0).unwrap()
    }

    /// Bisection on τ for the weighted ball projection; test oracle only.
    fn ball_projection_bisection(u: &[f64], alpha: &[f64], radius: f64) -> Vec<f64> {
        let mass = |tau: f64| -> f64 {
            u.iter()
                .zip(alpha)
                .map(|(x, a)| a * (x.abs() - tau * a).max(0.0))
                .sum()
        };
        if mass(0.0) <= radius {
            return u.to_vec();
        }
        let (mut lo, mut hi) = (0.0, 1.0);
        while mass(hi) > radius {
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mass(mid) > radius {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let tau = 0.5 * (lo + hi);
        u.iter()
            .zip(alpha)
            .map(|(x, a)| x.signum() * (x.abs() - tau * a).max(0.0))
            .collect()
    }

    #[test]
    fn soft_threshold_examples() {
        assert_eq!(soft_threshold(&[0.3], &[0.5]).unwrap(), vec![0.0]);
        assert_eq!(
            soft_threshold(&[-2.0, 0.25, 3.0], &[1.0, 1.0, 1.0]).unwrap(),
            vec![-1.0, 0.0, 2.0]
        );
        assert_eq!(soft_threshold(&[1.5], &[0.0]).unwrap(), vec![1.5]);
        // tie goes to zero, and the zero is exact
        let out = soft_threshold(&[0.5, -0.5], &[0.5, 0.5]).unwrap();
        assert!(out.iter().all(|x| *x == 0.0 && x.is_sign_positive()));
    }

    #[test]
    fn soft_threshold_errors() {
        assert!(soft_threshold(&[1.0, 2.0], &[1.0]).is_err());
        assert!(soft_threshold(&[1.0], &[-0.1]).is_err());
    }

    #[test]
    fn block_threshold_examples() {
        let two = BlockNorm::new(NormExponent::Two, 2).unwrap();
        assert_eq!(block_threshold(&[3.0, 4.0], &[5.0], two).unwrap(), vec![0.0, 0.0]);
        assert_eq!(block_threshold(&[3.0, 4.0], &[2.5], two).unwrap(), vec![1.5, 2.0]);

        let inf = BlockNorm::new(NormExponent::Infinity, 2).unwrap();
        let out = block_threshold(&[2.0, 1.0], &[1.0], inf).unwrap();
        // oracle: projection of (2,1) on the unit ℓ¹ ball by bisection
        let p = ball_projection_bisection(&[2.0, 1.0], &[1.0, 1.0], 1.0);
        assert_abs_diff_eq!(out[0], 2.0 - p[0], epsilon = 1e-12);
        assert_abs_diff_eq!(out[1], 1.0 - p[1], epsilon = 1e-12);
        assert_abs_diff_eq!(out[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(out[1], 1.0, epsilon = 1e-12);

        let one = BlockNorm::new(NormExponent::One, 3).unwrap();
        let w = [0.4, -2.0, 1.1];
        assert_eq!(
            block_threshold(&w, &[0.5], one).unwrap(),
            soft_threshold(&w, &[0.5, 0.5, 0.5]).unwrap()
        );
    }

    #[test]
    fn block_threshold_single_entry_blocks_match_soft_threshold() {
        let w = [0.7, -1.9, 0.05, 3.2];
        let t = [0.5, 1.0, 0.1, 0.0];
        let flat = soft_threshold(&w, &t).unwrap();
        for q in [NormExponent::One, NormExponent::Two, NormExponent::Infinity] {
            let n = BlockNorm::new(q, 1).unwrap();
            assert_eq!(block_threshold(&w, &t, n).unwrap(), flat);
        }
    }

    #[test]
    fn block_threshold_errors() {
        let two = BlockNorm::new(NormExponent::Two, 2).unwrap();
        assert!(block_threshold(&[1.0, 2.0, 3.0], &[1.0], two).is_err());
        assert!(block_threshold(&[1.0, 2.0], &[1.0, 1.0], two).is_err());
        assert!(block_threshold(&[1.0, 2.0], &[-1.0], two).is_err());
        assert!(NormExponent::parse("3").is_err());
        assert!(BlockNorm::new(NormExponent::Two, 0).is_err());
    }

    #[test]
    fn ball_projection_examples() {
        let w = ones(2);
        assert_eq!(project_weighted_l1_ball(&[0.2, 0.3], &w, 1.0).unwrap(), vec![0.2, 0.3]);
        assert_eq!(project_weighted_l1_ball(&[2.0, 0.0], &w, 1.0).unwrap(), vec![1.0, 0.0]);

        let w = Weights::new(vec![1.0, 2.0]).unwrap();
        let got = project_weighted_l1_ball(&[1.5, 1.0], &w, 1.0).unwrap();
        let oracle = ball_projection_bisection(&[1.5, 1.0], &[1.0, 2.0], 1.0);
        for (g, o) in got.iter().zip(&oracle) {
            assert_abs_diff_eq!(g, o, epsilon = 1e-8);
        }
        assert_eq!(project_weighted_l1_ball(&[0.0, 0.0], &w, 1.0).unwrap(), vec![0.0, 0.0]);
        assert!(project_weighted_l1_ball(&[1.0, 1.0], &w, 0.0).is_err());
        assert!(project_weighted_l1_ball(&[1.0], &w, 1.0).is_err());
    }

    #[test]
    fn weights_validation() {
        assert!(Weights::new(vec![]).is_err());
        assert!(Weights::new(vec![1.0, 0.0]).is_err());
        assert!(Weights::with_lower_bound(vec![1.0, 0.5], 0.6).is_err());
        let w = Weights::with_lower_bound(vec![1.0, 0.7], 0.5).unwrap();
        assert_eq!(w.lower_bound(), 0.5);
    }

    #[test]
    fn prox_step_dispatch() {
        let w = Weights::new(vec![0.1, 0.2]).unwrap();
        let u = [1.0, -2.0];
        let out = prox_step(&u, &[0.0, 0.0], 2.0, &Penalty::WeightedL1(w.clone())).unwrap();
        assert_abs_diff_eq!(out[0], 0.8, epsilon = 1e-15);
        assert_abs_diff_eq!(out[1], -1.6, epsilon = 1e-15);

        let ball = Penalty::L1Ball { weights: w.clone(), radius: 1.0 };
        let inside = prox_step(&[1.0, 1.0], &[0.5, 0.5], 1.0, &ball).unwrap();
        assert_eq!(inside, vec![0.5, 0.5]);
        // the indicator prox ignores s
        let a = prox_step(&[9.0, 3.0], &[0.0, 0.0], 0.1, &ball).unwrap();
        let b = prox_step(&[9.0, 3.0], &[0.0, 0.0], 10.0, &ball).unwrap();
        assert_eq!(a, b);

        let norm = BlockNorm::new(NormExponent::Two, 2).unwrap();
        let joint = Penalty::Joint {
            weights: Weights::new(vec![0.5]).unwrap(),
            norm,
        };
        let got = prox_step(&[3.0, 4.0], &[1.0, 1.0], 0.5, &joint).unwrap();
        let expect = block_threshold(&[2.5, 3.5], &[0.25], norm).unwrap();
        assert_eq!(got, expect);

        assert!(prox_step(&u, &[0.0], 1.0, &Penalty::WeightedL1(w.clone())).is_err());
        assert!(prox_step(&u, &[0.0, 0.0], 0.0, &Penalty::WeightedL1(w)).is_err());
    }

    fn vec_strategy(n: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-5.0f64..5.0, n)
    }

    proptest! {
        #[test]
        fn ball_projection_is_feasible_and_tight(
            u in vec_strategy(6),
            alpha in prop::collection::vec(0.2f64..3.0, 6),
            radius in 0.1f64..4.0,
        ) {
            let w = Weights::new(alpha.clone()).unwrap();
            let v = project_weighted_l1_ball(&u, &w, radius).unwrap();
            let mass = weighted_l1(&alpha, &v);
            prop_assert!(mass <= radius + 1e-10);
            if weighted_l1(&alpha, &u) > radius {
                prop_assert!((mass - radius).abs() <= 1e-10);
            }
            let oracle = ball_projection_bisection(&u, &alpha, radius);
            for (a, b) in v.iter().zip(&oracle) {
                prop_assert!((a - b).abs() <= 1e-8);
            }
        }

        #[test]
        fn zero_threshold_is_identity(w in vec_strategy(5)) {
            prop_assert_eq!(soft_threshold(&w, &[0.0; 5]).unwrap(), w);
        }
    }
}
