//! The generalized gradient projection method `uⁿ⁺¹ = J_{sₙ}(uⁿ − sₙF'(uⁿ))`
//! for `F(u) = ‖Ku − f‖²/2` and a convex penalty `Φ`.
//!
//! With a weighted ℓ¹ penalty this is iterative soft-thresholding, with a
//! block penalty it is joint-sparsity thresholding, and with the indicator of
//! a weighted ℓ¹-ball it is the projected gradient method.

use serde::Serialize;

use crate::diagnostics::trace::{IterationTrace, TraceEntry};
use crate::diagnostics::Reference;
use crate::error::{Error, Result};
use crate::operators::DenseOperator;
use crate::prox::Penalty;
use crate::vecops;

/// Relative tolerance used when estimating `‖K‖²` for step-size validation.
pub const NORM_TOLERANCE: f64 = 1e-12;

/// `min ‖Ku − f‖²/2 + Φ(u)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    operator: DenseOperator,
    data: Vec<f64>,
    penalty: Penalty,
}

impl Problem {
    pub fn new(operator: DenseOperator, data: Vec<f64>, penalty: Penalty) -> Result<Self> {
        if data.len() != operator.rows() {
            return Err(Error::DimensionMismatch {
                context: "data length vs operator rows",
                expected: operator.rows(),
                found: data.len(),
            });
        }
        if penalty.dim() != operator.cols() {
            return Err(Error::DimensionMismatch {
                context: "penalty dimension vs operator columns",
                expected: operator.cols(),
                found: penalty.dim(),
            });
        }
        if !vecops::all_finite(&data) {
            return Err(Error::InvalidArgument("data contains non-finite values".into()));
        }
        if let Penalty::L1Ball { radius, .. } = &penalty {
            if !(*radius > 0.0) || !radius.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "ball radius must be positive, got {radius}"
                )));
            }
        }
        Ok(Self {
            operator,
            data,
            penalty,
        })
    }

    pub fn operator(&self) -> &DenseOperator {
        &self.operator
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn penalty(&self) -> &Penalty {
        &self.penalty
    }

    /// Truncation dimension `N` of ℓ².
    pub fn truncation_dim(&self) -> usize {
        self.operator.cols()
    }

    fn check(&self, u: &[f64]) -> Result<()> {
        if u.len() != self.operator.cols() {
            return Err(Error::DimensionMismatch {
                context: "iterate length vs operator columns",
                expected: self.operator.cols(),
                found: u.len(),
            });
        }
        Ok(())
    }

    /// `Ku − f`.
    pub fn residual(&self, u: &[f64]) -> Result<Vec<f64>> {
        self.check(u)?;
        Ok(vecops::sub(&self.operator.apply(u)?, &self.data))
    }

    /// `F(u) = ‖Ku − f‖²/2`.
    pub fn smooth_part(&self, u: &[f64]) -> Result<f64> {
        Ok(0.5 * vecops::norm_sq(&self.residual(u)?))
    }

    /// `(F + Φ)(u)`, `+∞` outside the domain of `Φ`.
    pub fn objective(&self, u: &[f64]) -> Result<f64> {
        let smooth = self.smooth_part(u)?;
        Ok(smooth + self.penalty.value(u))
    }

    /// `F'(u) = K*(Ku − f)`.
    pub fn gradient(&self, u: &[f64]) -> Result<Vec<f64>> {
        let r = self.residual(u)?;
        self.operator.adjoint_apply(&r)
    }

    /// `w = −K*(Ku − f)`.
    pub fn dual_vector(&self, u: &[f64]) -> Result<Vec<f64>> {
        Ok(self.gradient(u)?.iter().map(|g| -g).collect())
    }
}

/// Step-size rule.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum StepSizeRule {
    /// `sₙ = s` with `0 < s < 2/‖K‖²`.
    Constant(f64),
    /// `sₙ` cycles through `cycle`, all within `lower ≤ sₙ ≤ upper < 2/‖K‖²`.
    /// An empty cycle means `sₙ = upper`.
    Bounded {
        lower: f64,
        upper: f64,
        cycle: Vec<f64>,
    },
    /// A-posteriori acceptance `sₙ‖K(uⁿ⁺¹ − uⁿ)‖² ≤ 2(1−δ)‖uⁿ⁺¹ − uⁿ‖²`.
    /// Trials start at `initial`, then at 1.5× the last accepted step, and
    /// halve on rejection down to `lower`.
    ConditionB {
        lower: f64,
        delta: f64,
        initial: f64,
    },
}

pub const CONDITION_B_GROWTH: f64 = 1.5;
pub const CONDITION_B_BACKOFF: f64 = 0.5;

impl StepSizeRule {
    /// The constant step `1/‖K‖²`.
    pub fn inverse_norm(op_norm_sq: f64) -> Self {
        Self::Constant(1.0 / op_norm_sq)
    }

    /// Validates the rule against `‖K‖²`.
    pub fn prepare(&self, op_norm_sq: f64) -> Result<StepController> {
        if !(op_norm_sq >= 0.0) || !op_norm_sq.is_finite() {
            return Err(Error::StepSize(format!("invalid operator norm {op_norm_sq}")));
        }
        let cap = if op_norm_sq == 0.0 {
            f64::INFINITY
        } else {
            2.0 / op_norm_sq
        };
        let bounds = match self {
            Self::Constant(s) => {
                if !(*s > 0.0 && *s < cap) {
                    return Err(Error::StepSize(format!(
                        "constant step {s} must lie in (0, 2/‖K‖²) = (0, {cap})"
                    )));
                }
                StepBounds {
                    lower: *s,
                    upper: *s,
                    delta: 1.0 - s * op_norm_sq / 2.0,
                }
            }
            Self::Bounded {
                lower,
                upper,
                cycle,
            } => {
                if !(*lower > 0.0 && lower <= upper && *upper < cap) {
                    return Err(Error::StepSize(format!(
                        "bounds must satisfy 0 < {lower} <= {upper} < 2/‖K‖² = {cap}"
                    )));
                }
                if let Some(s) = cycle.iter().find(|s| !(**s >= *lower && **s <= *upper)) {
                    return Err(Error::StepSize(format!(
                        "cycle entry {s} outside [{lower}, {upper}]"
                    )));
                }
                StepBounds {
                    lower: *lower,
                    upper: *upper,
                    delta: 1.0 - upper * op_norm_sq / 2.0,
                }
            }
            Self::ConditionB {
                lower,
                delta,
                initial,
            } => {
                if !(*lower > 0.0) || !(*delta > 0.0 && *delta < 1.0) || !(initial >= lower) {
                    return Err(Error::StepSize(format!(
                        "condition (B) needs lower > 0, delta in (0,1), initial >= lower; got {lower}, {delta}, {initial}"
                    )));
                }
                // the floor must satisfy the acceptance test for every direction
                if lower * op_norm_sq * (1.0 + 1e-9) > 2.0 * (1.0 - delta) {
                    return Err(Error::StepSize(format!(
                        "lower step {lower} must not exceed 2(1-delta)/‖K‖² = {}",
                        2.0 * (1.0 - delta) / op_norm_sq
                    )));
                }
                StepBounds {
                    lower: *lower,
                    upper: f64::INFINITY,
                    delta: *delta,
                }
            }
        };
        Ok(StepController {
            rule: self.clone(),
            op_norm_sq,
            bounds,
        })
    }
}

/// `s̲`, `s̄` and the descent constant `δ` implied by a validated rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepBounds {
    pub lower: f64,
    #[serde(serialize_with = "crate::serde_ext::f64")]
    pub upper: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepController {
    rule: StepSizeRule,
    op_norm_sq: f64,
    bounds: StepBounds,
}

impl StepController {
    pub fn rule(&self) -> &StepSizeRule {
        &self.rule
    }

    pub fn bounds(&self) -> StepBounds {
        self.bounds
    }

    pub fn op_norm_sq(&self) -> f64 {
        self.op_norm_sq
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StoppingRule {
    pub max_iters: usize,
    /// Stop once `r_n ≤ gap_tol`; only active with a reference minimizer.
    pub gap_tol: f64,
    /// Stop once `‖uⁿ⁺¹ − uⁿ‖ ≤ step_tol`.
    pub step_tol: f64,
}

impl Default for StoppingRule {
    fn default() -> Self {
        Self {
            max_iters: 100_000,
            gap_tol: 0.0,
            step_tol: 1e-10,
        }
    }
}

impl StoppingRule {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::InvalidArgument("max_iters must be at least 1".into()));
        }
        if !(self.gap_tol >= 0.0) || !(self.step_tol >= 0.0) {
            return Err(Error::InvalidArgument(
                "stopping tolerances must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum StopReason {
    StepTolerance,
    GapTolerance,
    MaxIterations,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub iterate: Vec<f64>,
    pub step_index: usize,
    /// Last accepted step size; zero before the first step.
    pub last_step_size: f64,
    /// `K·iterate − f`.
    pub residual: Vec<f64>,
}

impl SolverState {
    pub fn new(problem: &Problem, u0: &[f64]) -> Result<Self> {
        let residual = problem.residual(u0)?;
        if !problem.penalty().value(u0).is_finite() {
            return Err(Error::InfeasibleStart);
        }
        Ok(Self {
            iterate: u0.to_vec(),
            step_index: 0,
            last_step_size: 0.0,
            residual,
        })
    }

    pub fn objective(&self, problem: &Problem) -> f64 {
        0.5 * vecops::norm_sq(&self.residual) + problem.penalty().value(&self.iterate)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub next: SolverState,
    pub step_size: f64,
    /// `D_{sₙ}(uⁿ) = Φ(uⁿ) − Φ(uⁿ⁺¹) + ⟨F'(uⁿ), uⁿ − uⁿ⁺¹⟩`.
    pub descent: f64,
    /// Number of proximal evaluations, including rejected trials.
    pub trials: usize,
}

/// One iteration of the generalized gradient projection method.
pub fn step(problem: &Problem, state: &SolverState, controller: &StepController) -> Result<StepResult> {
    let op = problem.operator();
    let u = &state.iterate;
    let grad = op.adjoint_apply(&state.residual)?;
    let n = state.step_index;

    let trial = |s: f64| -> Result<(Vec<f64>, Vec<f64>)> {
        let v = problem.penalty().prox(&vecops::sub_scaled(u, s, &grad), s)?;
        let d = vecops::sub(&v, u);
        Ok((v, d))
    };

    let (s, v, trials) = match &controller.rule {
        StepSizeRule::Constant(s) => {
            let (v, _) = trial(*s)?;
            (*s, v, 1)
        }
        StepSizeRule::Bounded { upper, cycle, .. } => {
            let s = if cycle.is_empty() {
                *upper
            } else {
                cycle[n % cycle.len()]
            };
            let (v, _) = trial(s)?;
            (s, v, 1)
        }
        StepSizeRule::ConditionB {
            lower,
            delta,
            initial,
        } => {
            let mut s = if state.last_step_size > 0.0 {
                state.last_step_size * CONDITION_B_GROWTH
            } else {
                *initial
            };
            let mut trials = 0;
            loop {
                if s <= *lower {
                    s = *lower;
                }
                let (v, d) = trial(s)?;
                trials += 1;
                if s == *lower || condition_b_holds(op, &d, s, *delta)? {
                    break (s, v, trials);
                }
                s *= CONDITION_B_BACKOFF;
            }
        }
    };

    if !vecops::all_finite(&v) {
        return Err(Error::NonFinite {
            step: n,
            detail: format!("iterate {:?} with step size {s} produced {:?}", u, v),
        });
    }
    let residual = problem.residual(&v)?;
    let penalty = problem.penalty();
    let descent = penalty.value(u) - penalty.value(&v) + vecops::dot(&grad, &vecops::sub(u, &v));
    Ok(StepResult {
        next: SolverState {
            iterate: v,
            step_index: n + 1,
            last_step_size: s,
            residual,
        },
        step_size: s,
        descent,
        trials,
    })
}

/// `s‖Kd‖² ≤ 2(1−δ)‖d‖²`.
pub fn condition_b_holds(op: &DenseOperator, d: &[f64], s: f64, delta: f64) -> Result<bool> {
    let kd = op.apply(d)?;
    Ok(s * vecops::norm_sq(&kd) <= 2.0 * (1.0 - delta) * vecops::norm_sq(d))
}

/// What the per-iteration callback sees.
#[derive(Debug)]
pub struct IterationEvent<'a> {
    pub entry: &'a TraceEntry,
    pub iterate: &'a [f64],
    /// `None` on the final entry.
    pub next_iterate: Option<&'a [f64]>,
    pub trials: usize,
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub state: SolverState,
    pub trace: IterationTrace,
    pub stop_reason: StopReason,
    /// Accepted iterations.
    pub iterations: usize,
    /// Proximal evaluations including rejected step-size trials.
    pub trials: usize,
    pub bounds: StepBounds,
    pub op_norm_sq: f64,
}

/// Configurable solver run.
#[derive(Debug, Clone)]
pub struct Solver<'p> {
    problem: &'p Problem,
    rule: StepSizeRule,
    stop: StoppingRule,
    reference: Option<Reference>,
    op_norm_sq: Option<f64>,
}

impl<'p> Solver<'p> {
    pub fn new(problem: &'p Problem, rule: StepSizeRule) -> Self {
        Self {
            problem,
            rule,
            stop: StoppingRule::default(),
            reference: None,
            op_norm_sq: None,
        }
    }

    pub fn stopping(mut self, stop: StoppingRule) -> Self {
        self.stop = stop;
        self
    }

    /// Supplies a (near-)minimizer so the trace records `r_n`, `R`, `T` and
    /// distances.
    pub fn reference(mut self, u_star: &[f64]) -> Result<Self> {
        self.reference = Some(Reference::new(self.problem, u_star)?);
        Ok(self)
    }

    /// Uses a known `‖K‖²` instead of estimating it.
    pub fn operator_norm_sq(mut self, value: f64) -> Self {
        self.op_norm_sq = Some(value);
        self
    }

    pub fn run(&self, u0: Option<&[f64]>) -> Result<SolveOutcome> {
        self.run_with(u0, |_| {})
    }

    pub fn run_with<F>(&self, u0: Option<&[f64]>, mut sink: F) -> Result<SolveOutcome>
    where
        F: FnMut(&IterationEvent<'_>),
    {
        self.stop.validate()?;
        let problem = self.problem;
        let op_norm_sq = match self.op_norm_sq {
            Some(v) => v,
            None => problem.operator().operator_norm_sq(NORM_TOLERANCE)?,
        };
        let controller = self.rule.prepare(op_norm_sq)?;
        let zero = vec![0.0; problem.truncation_dim()];
        let mut state = SolverState::new(problem, u0.unwrap_or(&zero))?;
        let mut trace = IterationTrace::default();
        let mut trials = 0;

        let stop_reason = loop {
            if state.step_index >= self.stop.max_iters {
                break StopReason::MaxIterations;
            }
            let result = step(problem, &state, &controller)?;
            trials += result.trials;
            let entry = self.entry(&state, Some(result.step_size), Some(result.descent))?;
            sink(&IterationEvent {
                entry: &entry,
                iterate: &state.iterate,
                next_iterate: Some(&result.next.iterate),
                trials: result.trials,
            });
            trace.push(entry);
            let moved = vecops::dist(&state.iterate, &result.next.iterate);
            state = result.next;
            if moved <= self.stop.step_tol {
                break StopReason::StepTolerance;
            }
            if let Some(r) = &self.reference {
                if self.stop.gap_tol > 0.0 && state.objective(problem) - r.objective <= self.stop.gap_tol {
                    break StopReason::GapTolerance;
                }
            }
        };
        let last = self.entry(&state, None, None)?;
        sink(&IterationEvent {
            entry: &last,
            iterate: &state.iterate,
            next_iterate: None,
            trials: 0,
        });
        trace.push(last);

        Ok(SolveOutcome {
            iterations: state.step_index,
            state,
            trace,
            stop_reason,
            trials,
            bounds: controller.bounds(),
            op_norm_sq,
        })
    }

    fn entry(&self, state: &SolverState, step_size: Option<f64>, descent: Option<f64>) -> Result<TraceEntry> {
        let objective = state.objective(self.problem);
        let u = &state.iterate;
        let (gap, bregman, taylor, distance_to_ref) = match &self.reference {
            Some(r) => (
                Some(objective - r.objective),
                Some(r.bregman(self.problem, u)?),
                Some(r.taylor(self.problem, u)?),
                Some(vecops::dist(u, &r.minimizer)),
            ),
            None => (None, None, None, None),
        };
        Ok(TraceEntry {
            n: state.step_index,
            step_size,
            objective,
            gap,
            descent,
            bregman,
            taylor,
            distance_to_ref,
            support: vecops::support(u),
        })
    }
}

/// Iterative soft-thresholding for a weighted ℓ¹ penalty.
pub fn solve(
    problem: &Problem,
    u0: Option<&[f64]>,
    rule: &StepSizeRule,
    stop: &StoppingRule,
) -> Result<SolveOutcome> {
    require_penalty(problem, "weighted_l1")?;
    Solver::new(problem, rule.clone()).stopping(*stop).run(u0)
}

/// Block thresholding for joint sparsity penalties.
pub fn solve_joint(
    problem: &Problem,
    u0: Option<&[f64]>,
    rule: &StepSizeRule,
    stop: &StoppingRule,
) -> Result<SolveOutcome> {
    require_penalty(problem, "joint")?;
    Solver::new(problem, rule.clone()).stopping(*stop).run(u0)
}

/// Result of the projected gradient method on a weighted ℓ¹-ball.
#[derive(Debug, Clone)]
pub struct BallSolve {
    pub outcome: SolveOutcome,
    /// `‖α⁻¹w‖_∞` at the final iterate, `w = −K*(Ku − f)`.
    pub weighted_dual_norm: f64,
    /// Whether `w ≠ 0` at the final iterate, i.e. the data is plausibly not
    /// reachable from inside the ball.
    pub data_outside_range: bool,
}

/// Projected gradient method for `min_{u ∈ Ω} ‖Ku − f‖²/2`.
pub fn solve_ball(
    problem: &Problem,
    u0: Option<&[f64]>,
    rule: &StepSizeRule,
    stop: &StoppingRule,
) -> Result<BallSolve> {
    require_penalty(problem, "l1_ball_indicator")?;
    let outcome = Solver::new(problem, rule.clone()).stopping(*stop).run(u0)?;
    let w = problem.dual_vector(&outcome.state.iterate)?;
    let alpha = problem.penalty().weights().as_slice();
    let weighted_dual_norm = w
        .iter()
        .zip(alpha)
        .fold(0.0f64, |m, (x, a)| m.max(x.abs() / a));
    let scale = vecops::norm(problem.data()).max(1.0);
    Ok(BallSolve {
        data_outside_range: weighted_dual_norm > 1e-10 * scale,
        weighted_dual_norm,
        outcome,
    })
}

fn require_penalty(problem: &Problem, kind: &str) -> Result<()> {
    if problem.penalty().kind() != kind {
        return Err(Error::PenaltyMismatch(format!(
            "expected a {kind} penalty, found {}",
            problem.penalty().kind()
        )));
    }
    Ok(())
}
