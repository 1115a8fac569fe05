//! Turns a configuration into a problem and a validated step-size rule.

use ista_core::io::{load_matrix, load_vector};
use ista_core::operators::DenseOperator;
use ista_core::prox::{BlockNorm, NormExponent, Penalty, Weights};
use ista_core::solvers::{Problem, StepBounds, StepSizeRule, NORM_TOLERANCE};
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::config::{DataSpec, ExperimentConfig, OperatorSpec, PenaltyKind, RuleKind, StepUnits};
use crate::error::CliError;

#[derive(Debug, Clone)]
pub struct Instance {
    pub problem: Problem,
    pub op_norm_sq: f64,
    pub rule: StepSizeRule,
    pub bounds: StepBounds,
    /// Generating coefficients, when the data was synthesized.
    pub truth: Option<Vec<f64>>,
}

/// Operator and data draw from separate ChaCha8 streams of the same seed, so
/// changing the data spec never changes the operator.
fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

pub fn build(cfg: &ExperimentConfig) -> Result<Instance, CliError> {
    let seed = cfg.seed.unwrap_or(0);
    let op = operator(cfg, &cfg.operator, &mut stream(seed, 0), "operator")?;
    let (data, truth) = data(cfg, &op, &mut stream(seed, 1))?;
    let pen = penalty(cfg, op.cols())?;
    let problem = Problem::new(op, data, pen).map_err(|e| CliError::Validation(e.to_string()))?;
    let op_norm_sq = problem
        .operator()
        .operator_norm_sq(NORM_TOLERANCE)
        .map_err(CliError::runtime)?;
    let rule = step_rule(cfg, op_norm_sq)?;
    let bounds = rule
        .prepare(op_norm_sq)
        .map_err(|e| CliError::field("step", e.to_string()))?
        .bounds();
    Ok(Instance {
        problem,
        op_norm_sq,
        rule,
        bounds,
        truth,
    })
}

pub fn operator(
    cfg: &ExperimentConfig,
    spec: &OperatorSpec,
    rng: &mut ChaCha8Rng,
    field: &str,
) -> Result<DenseOperator, CliError> {
    let invalid = |e: ista_core::error::Error| CliError::field(field, e.to_string());
    match spec {
        OperatorSpec::Identity { size } => Ok(DenseOperator::identity(*size)),
        OperatorSpec::Diagonal { values } => DenseOperator::diagonal(values).map_err(invalid),
        OperatorSpec::DiagonalDecay { size, rate, scale } => {
            let d: Vec<f64> = (0..*size).map(|k| scale * rate.powi(k as i32)).collect();
            DenseOperator::diagonal(&d).map_err(invalid)
        }
        OperatorSpec::RandomGaussian { rows, cols } => {
            let scale = 1.0 / (*rows as f64).sqrt();
            let entries = (0..rows * cols)
                .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
                .collect();
            DenseOperator::new(*rows, *cols, entries).map_err(invalid)
        }
        OperatorSpec::DuplicateColumn { base, column, copies } => {
            let base = operator(cfg, base, rng, &format!("{field}.base"))?;
            if *column >= base.cols() {
                return Err(CliError::field(
                    &format!("{field}.column"),
                    format!("{column} out of range for {} columns", base.cols()),
                ));
            }
            let rows: Vec<Vec<f64>> = (0..base.rows())
                .map(|i| {
                    let mut row = base.row(i).to_vec();
                    let v = row[*column];
                    row.extend(std::iter::repeat_n(v, *copies));
                    row
                })
                .collect();
            DenseOperator::from_rows(&rows).map_err(invalid)
        }
        OperatorSpec::File { path } => load_matrix(&cfg.resolve(path)).map_err(invalid),
    }
}

fn data(
    cfg: &ExperimentConfig,
    op: &DenseOperator,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<f64>, Option<Vec<f64>>), CliError> {
    let invalid = |e: ista_core::error::Error| CliError::field("data", e.to_string());
    let synthesize = |c: Vec<f64>, noise: f64, rng: &mut ChaCha8Rng| {
        let mut f = op.apply(&c).map_err(invalid)?;
        if noise > 0.0 {
            for fi in &mut f {
                *fi += noise * rng.sample::<f64, _>(StandardNormal);
            }
        }
        Ok((f, Some(c)))
    };
    match &cfg.data {
        DataSpec::Values { values } => Ok((values.clone(), None)),
        DataSpec::File { path } => Ok((load_vector(&cfg.resolve(path)).map_err(invalid)?, None)),
        DataSpec::Signal { coefficients, noise } => synthesize(coefficients.clone(), *noise, rng),
        DataSpec::SparseSignal {
            nonzeros,
            amplitude,
            noise,
        } => {
            let n = op.cols();
            if *nonzeros > n {
                return Err(CliError::field(
                    "data.nonzeros",
                    format!("{nonzeros} exceeds the {n} columns"),
                ));
            }
            let mut positions = index::sample(rng, n, *nonzeros).into_vec();
            positions.sort_unstable();
            let mut c = vec![0.0; n];
            for k in positions {
                let magnitude = amplitude * rng.random_range(0.5..1.5);
                c[k] = if rng.random_bool(0.5) { magnitude } else { -magnitude };
            }
            synthesize(c, *noise, rng)
        }
    }
}

fn penalty(cfg: &ExperimentConfig, cols: usize) -> Result<Penalty, CliError> {
    let p = &cfg.penalty;
    let len = match (p.kind, p.block_size) {
        (PenaltyKind::Joint, Some(b)) => {
            if !cols.is_multiple_of(b) {
                return Err(CliError::field(
                    "penalty.block_size",
                    format!("{b} does not divide the {cols} columns"),
                ));
            }
            cols / b
        }
        _ => cols,
    };
    let alpha = match (p.alpha, &p.weights, &p.weights_file) {
        (Some(a), _, _) => vec![a; len],
        (_, Some(w), _) => w.clone(),
        (_, _, Some(path)) => load_vector(&cfg.resolve(path))
            .map_err(|e| CliError::field("penalty.weights_file", e.to_string()))?,
        _ => unreachable!("validated"),
    };
    if alpha.len() != len {
        return Err(CliError::field(
            "penalty.weights",
            format!("expected {len} weights, found {}", alpha.len()),
        ));
    }
    let weights = Weights::new(alpha).map_err(|e| CliError::field("penalty.weights", e.to_string()))?;
    Ok(match p.kind {
        PenaltyKind::WeightedL1 => Penalty::WeightedL1(weights),
        PenaltyKind::Joint => {
            let q = NormExponent::parse(p.q.as_deref().unwrap_or_default())
                .map_err(|e| CliError::field("penalty.q", e.to_string()))?;
            let norm = BlockNorm::new(q, p.block_size.unwrap_or(1))
                .map_err(|e| CliError::field("penalty.block_size", e.to_string()))?;
            Penalty::Joint { weights, norm }
        }
        PenaltyKind::L1Ball => Penalty::L1Ball {
            weights,
            radius: p.radius.unwrap_or(1.0),
        },
    })
}

pub fn step_rule(cfg: &ExperimentConfig, op_norm_sq: f64) -> Result<StepSizeRule, CliError> {
    let st = &cfg.step;
    let unit = match st.units {
        StepUnits::Absolute => 1.0,
        StepUnits::InverseNorm if op_norm_sq > 0.0 => 1.0 / op_norm_sq,
        StepUnits::InverseNorm => {
            return Err(CliError::field(
                "step.units",
                "K = 0; give absolute step sizes".into(),
            ))
        }
    };
    let get = |v: Option<f64>| v.map(|x| x * unit);
    Ok(match st.rule {
        RuleKind::Constant => StepSizeRule::Constant(get(st.s).unwrap_or(unit)),
        RuleKind::Bounded => StepSizeRule::Bounded {
            lower: get(st.lower).unwrap_or_default(),
            upper: get(st.upper).unwrap_or_default(),
            cycle: st.cycle.iter().map(|x| x * unit).collect(),
        },
        RuleKind::ConditionB => {
            let lower = get(st.lower).unwrap_or_default();
            StepSizeRule::ConditionB {
                lower,
                delta: st.delta.unwrap_or_default(),
                initial: get(st.initial).unwrap_or(lower),
            }
        }
    })
}

/// Whether the configured rule is exactly `s = 1/‖K‖²`.
pub fn is_inverse_norm_step(cfg: &ExperimentConfig, rule: &StepSizeRule, op_norm_sq: f64) -> bool {
    match rule {
        StepSizeRule::Constant(s) => match cfg.step.units {
            StepUnits::InverseNorm => cfg.step.s.unwrap_or(1.0) == 1.0,
            StepUnits::Absolute => *s * op_norm_sq == 1.0,
        },
        _ => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(extra: &str) -> ExperimentConfig {
        ExperimentConfig::parse(&format!(
            r#"
            config_version = 1
            seed = 11
            [operator]
            kind = "random-gaussian"
            rows = 5
            cols = 4
            [data]
            kind = "sparse-signal"
            nonzeros = 2
            noise = 0.1
            [penalty]
            kind = "weighted-l1"
            alpha = 0.1
            {extra}
            "#
        ))
        .unwrap()
    }

    #[test]
    fn generation_is_deterministic_and_seed_dependent() {
        let a = build(&cfg("")).unwrap();
        let b = build(&cfg("")).unwrap();
        assert_eq!(a.problem, b.problem);
        let mut other = cfg("");
        other.seed = Some(12);
        assert_ne!(build(&other).unwrap().problem.data(), a.problem.data());
        assert_eq!(a.truth.unwrap().iter().filter(|x| **x != 0.0).count(), 2);
    }

    #[test]
    fn steps_scale_with_the_norm() {
        let i = build(&cfg("[step]\nrule = \"constant\"\ns = 1.5")).unwrap();
        assert_eq!(i.rule, StepSizeRule::Constant(1.5 / i.op_norm_sq));
        let err = build(&cfg("[step]\ns = 2.5")).unwrap_err();
        assert_eq!(err.exit_code(), 1);
        assert!(err.to_string().contains("step"), "{err}");
    }

    #[test]
    fn duplicate_column_copies_the_column() {
        let mut c = cfg("");
        c.operator = OperatorSpec::DuplicateColumn {
            base: Box::new(OperatorSpec::Diagonal {
                values: vec![1.0, 2.0],
            }),
            column: 1,
            copies: 2,
        };
        c.data = DataSpec::Values { values: vec![1.0, 1.0] };
        let i = build(&c).unwrap();
        let k = i.problem.operator();
        assert_eq!(k.cols(), 4);
        assert_eq!(k.column(3), vec![0.0, 2.0]);
        assert_eq!(k.column(2), k.column(1));
    }
}
