//! Experiment configuration, read from TOML.
//!
//! ```toml
//! config_version = 1
//! name = "gaussian-8x6"
//! seed = 7
//!
//! [operator]
//! kind = "random-gaussian"
//! rows = 8
//! cols = 6
//!
//! [data]
//! kind = "sparse-signal"
//! nonzeros = 2
//! noise = 0.05
//!
//! [penalty]
//! kind = "weighted-l1"
//! alpha = 0.1
//!
//! [step]
//! rule = "constant"
//! s = 1.0            # in units of 1/‖K‖² unless units = "absolute"
//! ```

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::CliError;

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub config_version: u32,
    /// Names the artifact directory; defaults to the config file stem.
    pub name: Option<String>,
    /// Required whenever the operator or the data is random.
    pub seed: Option<u64>,
    pub operator: OperatorSpec,
    pub data: DataSpec,
    pub penalty: PenaltySpec,
    #[serde(default)]
    pub step: StepSpec,
    #[serde(default)]
    pub stopping: StoppingSpec,
    #[serde(default)]
    pub oracle: OracleSpec,
    #[serde(default)]
    pub certificates: CertificateSpec,
    #[serde(default)]
    pub output: OutputSpec,
    /// Directory that relative file paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum OperatorSpec {
    Identity {
        size: usize,
    },
    Diagonal {
        values: Vec<f64>,
    },
    /// `diag(scale·rateᵏ)`, `k = 0..size`.
    DiagonalDecay {
        size: usize,
        rate: f64,
        #[serde(default = "one")]
        scale: f64,
    },
    /// Entries i.i.d. `N(0, 1/rows)`.
    RandomGaussian {
        rows: usize,
        cols: usize,
    },
    /// `base` with `copies` extra copies of column `column` appended.
    DuplicateColumn {
        base: Box<OperatorSpec>,
        #[serde(default)]
        column: usize,
        #[serde(default = "one_usize")]
        copies: usize,
    },
    File {
        path: PathBuf,
    },
}

impl OperatorSpec {
    pub fn is_random(&self) -> bool {
        match self {
            Self::RandomGaussian { .. } => true,
            Self::DuplicateColumn { base, .. } => base.is_random(),
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DataSpec {
    Values {
        values: Vec<f64>,
    },
    File {
        path: PathBuf,
    },
    /// `f = K·c + noise·ε` for given coefficients `c`.
    Signal {
        coefficients: Vec<f64>,
        #[serde(default)]
        noise: f64,
    },
    /// Like `signal`, with `nonzeros` random positions and magnitudes in
    /// `amplitude·[0.5, 1.5)` of random sign.
    SparseSignal {
        nonzeros: usize,
        #[serde(default = "one")]
        amplitude: f64,
        #[serde(default)]
        noise: f64,
    },
}

impl DataSpec {
    pub fn is_random(&self) -> bool {
        match self {
            Self::Signal { noise, .. } => *noise != 0.0,
            Self::SparseSignal { .. } => true,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PenaltyKind {
    WeightedL1,
    Joint,
    L1Ball,
}

/// Weights come from exactly one of `alpha` (constant), `weights` or
/// `weights_file`. `joint` also needs `q` and `block_size`, `l1-ball` needs
/// `radius`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PenaltySpec {
    pub kind: PenaltyKind,
    pub alpha: Option<f64>,
    pub weights: Option<Vec<f64>>,
    pub weights_file: Option<PathBuf>,
    /// `"1"`, `"2"` or `"inf"`.
    pub q: Option<String>,
    pub block_size: Option<usize>,
    pub radius: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepUnits {
    /// Multiples of `1/‖K‖²`.
    #[default]
    InverseNorm,
    Absolute,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RuleKind {
    #[default]
    Constant,
    Bounded,
    ConditionB,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepSpec {
    #[serde(default)]
    pub rule: RuleKind,
    #[serde(default)]
    pub units: StepUnits,
    /// Constant step.
    pub s: Option<f64>,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    #[serde(default)]
    pub cycle: Vec<f64>,
    pub delta: Option<f64>,
    pub initial: Option<f64>,
}

impl Default for StepSpec {
    fn default() -> Self {
        Self {
            rule: RuleKind::Constant,
            units: StepUnits::InverseNorm,
            s: None,
            lower: None,
            upper: None,
            cycle: Vec::new(),
            delta: None,
            initial: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StoppingSpec {
    pub max_iters: usize,
    pub step_tol: f64,
    pub gap_tol: f64,
}

impl Default for StoppingSpec {
    fn default() -> Self {
        Self {
            max_iters: 100_000,
            step_tol: 1e-10,
            gap_tol: 0.0,
        }
    }
}

/// How the reference minimizer is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleSpec {
    /// Sign-pattern enumeration; weighted ℓ¹ with at most 12 columns only.
    pub enabled: bool,
    /// Fallback: a long run with `s = 1/‖K‖²`, polished when possible.
    pub reference_iters: usize,
    pub reference_step_tol: f64,
}

impl Default for OracleSpec {
    fn default() -> Self {
        Self {
            enabled: true,
            reference_iters: 1_000_000,
            reference_step_tol: 1e-14,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CertificateSpec {
    pub fbi: bool,
    pub compact: bool,
    pub strict_pattern: bool,
    /// Tolerance for optimality and for membership of the active set.
    pub tolerance: f64,
    /// Largest `k` in the spectral report; capped at the column count.
    pub k_max: usize,
    /// Allowed excess of the fitted rate over a certificate.
    pub rate_slack: f64,
    /// Order of the FBI scan reported by `spectral`.
    pub fbi_order: usize,
}

impl Default for CertificateSpec {
    fn default() -> Self {
        Self {
            fbi: true,
            compact: true,
            strict_pattern: true,
            tolerance: 1e-9,
            k_max: 16,
            rate_slack: 1e-6,
            fbi_order: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSpec {
    /// Root for artifacts; `--out-dir` takes precedence. Defaults to `out`.
    pub dir: Option<PathBuf>,
}

fn one() -> f64 {
    1.0
}

fn one_usize() -> usize {
    1
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        if cfg.name.is_none() {
            cfg.name = path.file_stem().map(|s| s.to_string_lossy().into_owned());
        }
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Validation(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn name(&self) -> &str {
        self.name.as_deref().unwrap_or("experiment")
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }

    /// Checks that do not need the operator; dimension checks happen when
    /// the problem is built.
    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |field: &str, msg: String| Err(CliError::field(field, msg));
        if self.config_version != CONFIG_VERSION {
            return bad(
                "config_version",
                format!("unsupported version {}, expected {CONFIG_VERSION}", self.config_version),
            );
        }
        if let Some(name) = &self.name {
            if name.is_empty() || name.contains(['/', '\\']) || name == "." || name == ".." {
                return bad("name", format!("{name:?} is not a valid directory name"));
            }
        }
        if (self.operator.is_random() || self.data.is_random()) && self.seed.is_none() {
            return bad("seed", "random generators need a seed".into());
        }
        validate_operator(&self.operator, "operator")?;
        match &self.data {
            DataSpec::Signal { noise, .. } | DataSpec::SparseSignal { noise, .. } if !(*noise >= 0.0) => {
                return bad("data.noise", format!("must be non-negative, got {noise}"));
            }
            DataSpec::SparseSignal { amplitude, .. } if !(amplitude.is_finite() && *amplitude > 0.0) => {
                return bad("data.amplitude", format!("must be positive, got {amplitude}"));
            }
            _ => {}
        }
        self.validate_penalty()?;
        self.validate_step()?;
        let st = &self.stopping;
        if st.max_iters == 0 {
            return bad("stopping.max_iters", "must be at least 1".into());
        }
        if !(st.step_tol >= 0.0) || !(st.gap_tol >= 0.0) {
            return bad("stopping", "tolerances must be non-negative".into());
        }
        if self.oracle.reference_iters == 0 {
            return bad("oracle.reference_iters", "must be at least 1".into());
        }
        let c = &self.certificates;
        if !(c.tolerance > 0.0) {
            return bad("certificates.tolerance", "must be positive".into());
        }
        if !(c.rate_slack >= 0.0) {
            return bad("certificates.rate_slack", "must be non-negative".into());
        }
        if c.k_max == 0 || c.fbi_order == 0 {
            return bad("certificates", "k_max and fbi_order must be at least 1".into());
        }
        Ok(())
    }

    fn validate_penalty(&self) -> Result<(), CliError> {
        let p = &self.penalty;
        let set = [p.alpha.is_some(), p.weights.is_some(), p.weights_file.is_some()]
            .iter()
            .filter(|b| **b)
            .count();
        if set != 1 {
            return Err(CliError::field(
                "penalty",
                "set exactly one of alpha, weights, weights_file".into(),
            ));
        }
        let joint = p.kind == PenaltyKind::Joint;
        let ball = p.kind == PenaltyKind::L1Ball;
        for (field, present, wanted) in [
            ("penalty.q", p.q.is_some(), joint),
            ("penalty.block_size", p.block_size.is_some(), joint),
            ("penalty.radius", p.radius.is_some(), ball),
        ] {
            if present != wanted {
                let msg = if wanted { "is required" } else { "is not used" };
                return Err(CliError::field(field, format!("{msg} for {:?} penalties", p.kind)));
            }
        }
        if p.block_size == Some(0) {
            return Err(CliError::field("penalty.block_size", "must be at least 1".into()));
        }
        if let Some(r) = p.radius {
            if !(r.is_finite() && r > 0.0) {
                return Err(CliError::field("penalty.radius", format!("must be positive, got {r}")));
            }
        }
        Ok(())
    }

    fn validate_step(&self) -> Result<(), CliError> {
        let st = &self.step;
        let positive = |field: &str, v: Option<f64>| match v {
            Some(x) if !(x.is_finite() && x > 0.0) => {
                Err(CliError::field(field, format!("must be positive, got {x}")))
            }
            _ => Ok(()),
        };
        positive("step.s", st.s)?;
        positive("step.lower", st.lower)?;
        positive("step.upper", st.upper)?;
        positive("step.initial", st.initial)?;
        let unused = |field: &str, present: bool| {
            if present {
                Err(CliError::field(field, format!("not used by the {:?} rule", st.rule)))
            } else {
                Ok(())
            }
        };
        match st.rule {
            RuleKind::Constant => {
                unused("step.lower", st.lower.is_some())?;
                unused("step.upper", st.upper.is_some())?;
                unused("step.delta", st.delta.is_some())?;
                unused("step.initial", st.initial.is_some())?;
                unused("step.cycle", !st.cycle.is_empty())?;
            }
            RuleKind::Bounded => {
                unused("step.s", st.s.is_some())?;
                unused("step.delta", st.delta.is_some())?;
                unused("step.initial", st.initial.is_some())?;
                if st.lower.is_none() || st.upper.is_none() {
                    return Err(CliError::field("step", "bounded rule needs lower and upper".into()));
                }
            }
            RuleKind::ConditionB => {
                unused("step.s", st.s.is_some())?;
                unused("step.upper", st.upper.is_some())?;
                unused("step.cycle", !st.cycle.is_empty())?;
                if st.lower.is_none() || st.delta.is_none() {
                    return Err(CliError::field(
                        "step",
                        "condition-b rule needs lower and delta".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

fn validate_operator(spec: &OperatorSpec, field: &str) -> Result<(), CliError> {
    let err = |msg: String| Err(CliError::field(field, msg));
    match spec {
        OperatorSpec::Identity { size } if *size == 0 => err("size must be at least 1".into()),
        OperatorSpec::Diagonal { values } if values.is_empty() => err("values must not be empty".into()),
        OperatorSpec::DiagonalDecay { size, rate, scale } => {
            if *size == 0 {
                err("size must be at least 1".into())
            } else if !(rate.is_finite() && *rate > 0.0) || !(scale.is_finite() && *scale > 0.0) {
                err(format!("rate and scale must be positive, got {rate} and {scale}"))
            } else {
                Ok(())
            }
        }
        OperatorSpec::RandomGaussian { rows, cols } if *rows == 0 || *cols == 0 => {
            err("rows and cols must be at least 1".into())
        }
        OperatorSpec::DuplicateColumn { base, copies, .. } => {
            if *copies == 0 {
                return err("copies must be at least 1".into());
            }
            validate_operator(base, &format!("{field}.base"))
        }
        _ => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
        config_version = 1
        [operator]
        kind = "identity"
        size = 3
        [data]
        kind = "values"
        values = [1.0, 0.4, -2.0]
        [penalty]
        kind = "weighted-l1"
        alpha = 0.5
    "#;

    #[test]
    fn minimal_config_uses_defaults() {
        let cfg = ExperimentConfig::parse(MINIMAL).unwrap();
        assert_eq!(cfg.step, StepSpec::default());
        assert_eq!(cfg.stopping.max_iters, 100_000);
        assert!(cfg.oracle.enabled);
        assert_eq!(cfg.penalty.alpha, Some(0.5));
    }

    #[test]
    fn version_is_checked() {
        let text = MINIMAL.replace("config_version = 1", "config_version = 2");
        let err = ExperimentConfig::parse(&text).unwrap_err();
        assert!(err.to_string().contains("config_version"), "{err}");
    }

    #[test]
    fn random_sources_need_a_seed() {
        let text = MINIMAL.replace(
            "kind = \"identity\"\n        size = 3",
            "kind = \"random-gaussian\"\n        rows = 4\n        cols = 3",
        );
        let err = ExperimentConfig::parse(&text).unwrap_err();
        assert!(err.to_string().contains("seed"), "{err}");
        let seeded = format!("seed = 1\n{text}");
        ExperimentConfig::parse(&seeded).unwrap();
    }

    #[test]
    fn nested_duplicate_column() {
        let text = r#"
            config_version = 1
            seed = 3
            [operator]
            kind = "duplicate-column"
            column = 1
            base = { kind = "random-gaussian", rows = 6, cols = 4 }
            [data]
            kind = "signal"
            coefficients = [0.0, 1.0, 0.0, 0.0, 0.0]
            [penalty]
            kind = "weighted-l1"
            alpha = 0.1
        "#;
        let cfg = ExperimentConfig::parse(text).unwrap();
        assert!(cfg.operator.is_random());
    }

    #[test]
    fn field_errors_name_the_field() {
        let text = format!("{MINIMAL}\n[step]\nrule = \"bounded\"\nlower = 0.5\n");
        let err = ExperimentConfig::parse(&text).unwrap_err();
        assert!(err.to_string().contains("step"), "{err}");
        let text = MINIMAL.replace("alpha = 0.5", "alpha = 0.5\nweights = [1.0, 1.0, 1.0]");
        let err = ExperimentConfig::parse(&text).unwrap_err();
        assert!(err.to_string().contains("penalty"), "{err}");
        let text = format!("{MINIMAL}\n[stopping]\nmax_iter = 3\n");
        assert!(ExperimentConfig::parse(&text).is_err());
    }
}
