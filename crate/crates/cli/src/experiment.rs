//! Orchestration of the four subcommands and their artifacts.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use ista_core::diagnostics::certificates::{
    certificate_compact, certificate_fbi, certificate_strict_pattern, CertificateKind, RateCertificate,
};
use ista_core::diagnostics::rates::{fit_rate, sublinear_check, RateFit, SublinearReport};
use ista_core::diagnostics::{
    ball_analysis, descent_margins, optimality_residual, support_analysis, BallAnalysis,
    DescentMargins, SupportAnalysis,
};
use ista_core::io::write_vector;
use ista_core::operators::{FbiOptions, FbiReport, SpectralReport};
use ista_core::oracle::{oracle_enumerate, polish, OracleReport, MAX_ORACLE_COLS};
use ista_core::prox::Penalty;
use ista_core::serde_ext;
use ista_core::solvers::{StepBounds, StepSizeRule, StopReason, Solver, StoppingRule};
use ista_core::vecops;
use serde::Serialize;

use crate::build::{build, is_inverse_norm_step, Instance};
use crate::config::ExperimentConfig;
use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Run,
    Certify,
    Oracle,
    Spectral,
}

/// What a finished command reports back to the caller.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub name: String,
    pub dir: PathBuf,
    /// False when a fitted rate exceeds a certificate.
    pub certificate_respected: bool,
    pub message: String,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        if self.certificate_respected {
            0
        } else {
            3
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ProblemInfo {
    pub penalty: &'static str,
    pub rows: usize,
    pub cols: usize,
    pub operator_norm_sq: f64,
    pub rule: StepSizeRule,
    pub step_bounds: StepBounds,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReferenceInfo {
    /// `oracle`, `long-run` or `long-run+polish`.
    pub source: &'static str,
    pub objective: f64,
    pub optimality_residual: f64,
    pub iterations: Option<usize>,
    pub oracle: Option<OracleStats>,
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleStats {
    pub patterns_checked: u64,
    pub singular_supports: u64,
    pub consistent_patterns: u64,
}

impl From<&OracleReport> for OracleStats {
    fn from(r: &OracleReport) -> Self {
        Self {
            patterns_checked: r.patterns_checked,
            singular_supports: r.singular_supports,
            consistent_patterns: r.consistent_patterns,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Skipped {
    pub kind: CertificateKind,
    pub reason: String,
}

#[derive(Debug, Clone, Serialize)]
#[serde(untagged)]
pub enum Analysis {
    Support(SupportAnalysis),
    Ball(BallAnalysis),
}

#[derive(Debug, Clone, Serialize)]
pub struct CertificateReport {
    pub name: String,
    pub problem: ProblemInfo,
    pub reference: ReferenceInfo,
    pub analysis: Option<Analysis>,
    pub certificates: Vec<RateCertificate>,
    pub skipped: Vec<Skipped>,
    pub fit: Option<RateFit>,
    pub fit_error: Option<String>,
    pub sublinear: Option<SublinearReport>,
    pub descent: Option<DescentMargins>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CertificateCheck {
    pub kind: CertificateKind,
    pub lambda: f64,
    #[serde(serialize_with = "serde_ext::opt_f64")]
    pub c_bound: Option<f64>,
    /// `λ̂ ≤ λ + slack`; absent without a fitted rate.
    pub respected: Option<bool>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub name: String,
    pub penalty: &'static str,
    pub iterations: usize,
    pub trials: usize,
    pub stop_reason: StopReason,
    pub final_objective: f64,
    pub reference_source: &'static str,
    pub lambda_hat: Option<f64>,
    pub r_squared: Option<f64>,
    pub certificates: Vec<CertificateCheck>,
    pub certificate_respected: bool,
    pub oracle_distance: Option<f64>,
    pub sublinear_passes: Option<bool>,
    #[serde(serialize_with = "serde_ext::opt_f64")]
    pub descent_margin: Option<f64>,
}

pub fn execute(cfg: &ExperimentConfig, command: Command, out_root: &Path) -> Result<Outcome, CliError> {
    let inst = build(cfg)?;
    let dir = out_root.join(cfg.name());
    fs::create_dir_all(&dir).map_err(|e| output_err(&dir, e))?;
    match command {
        Command::Run => run(cfg, &inst, dir),
        Command::Certify => certify(cfg, &inst, dir),
        Command::Oracle => oracle(cfg, &inst, dir),
        Command::Spectral => spectral(cfg, &inst, dir),
    }
}

/// Loads, builds and runs one experiment.
pub fn run_experiment(cfg: &ExperimentConfig, out_root: &Path) -> Result<Outcome, CliError> {
    execute(cfg, Command::Run, out_root)
}

fn problem_info(cfg: &ExperimentConfig, inst: &Instance) -> ProblemInfo {
    let k = inst.problem.operator();
    ProblemInfo {
        penalty: inst.problem.penalty().kind(),
        rows: k.rows(),
        cols: k.cols(),
        operator_norm_sq: inst.op_norm_sq,
        rule: inst.rule.clone(),
        step_bounds: inst.bounds,
        seed: cfg.seed,
    }
}

fn use_oracle(cfg: &ExperimentConfig, inst: &Instance) -> bool {
    cfg.oracle.enabled
        && matches!(inst.problem.penalty(), Penalty::WeightedL1(_))
        && inst.problem.truncation_dim() <= MAX_ORACLE_COLS
}

/// The minimizer the diagnostics are measured against: the enumeration
/// oracle when it applies, otherwise a long run at `s = 1/‖K‖²`, polished on
/// its support when the penalty allows.
pub fn reference(cfg: &ExperimentConfig, inst: &Instance) -> Result<(Vec<f64>, ReferenceInfo), CliError> {
    let p = &inst.problem;
    let info = |source, u: &[f64], iterations, oracle| -> Result<ReferenceInfo, CliError> {
        Ok(ReferenceInfo {
            source,
            objective: p.objective(u).map_err(CliError::runtime)?,
            optimality_residual: optimality_residual(p, u).map_err(CliError::runtime)?,
            iterations,
            oracle,
        })
    };
    if use_oracle(cfg, inst) {
        let report = oracle_enumerate(p, MAX_ORACLE_COLS).map_err(CliError::runtime)?;
        let i = info("oracle", &report.minimizer, None, Some(OracleStats::from(&report)))?;
        return Ok((report.minimizer, i));
    }
    let s = if inst.op_norm_sq > 0.0 {
        1.0 / inst.op_norm_sq
    } else {
        1.0
    };
    let long = Solver::new(p, StepSizeRule::Constant(s))
        .operator_norm_sq(inst.op_norm_sq)
        .stopping(StoppingRule {
            max_iters: cfg.oracle.reference_iters,
            gap_tol: 0.0,
            step_tol: cfg.oracle.reference_step_tol,
        })
        .run(None)
        .map_err(CliError::runtime)?;
    let u = long.state.iterate;
    if let Penalty::WeightedL1(_) = p.penalty() {
        if let Some(polished) = polish(p, &u).map_err(CliError::runtime)? {
            let before = optimality_residual(p, &u).map_err(CliError::runtime)?;
            let after = optimality_residual(p, &polished).map_err(CliError::runtime)?;
            if after <= before {
                let i = info("long-run+polish", &polished, Some(long.iterations), None)?;
                return Ok((polished, i));
            }
        }
    }
    let i = info("long-run", &u, Some(long.iterations), None)?;
    Ok((u, i))
}

struct Certificates {
    analysis: Option<Analysis>,
    list: Vec<RateCertificate>,
    skipped: Vec<Skipped>,
}

fn certificates(cfg: &ExperimentConfig, inst: &Instance, u_star: &[f64]) -> Result<Certificates, CliError> {
    let p = &inst.problem;
    let opts = &cfg.certificates;
    let tol = opts.tolerance;
    let mut out = Certificates {
        analysis: None,
        list: Vec::new(),
        skipped: Vec::new(),
    };
    let mut skip = |kind, reason: String| out.skipped.push(Skipped { kind, reason });

    let (active, strict) = match p.penalty() {
        Penalty::WeightedL1(_) => match support_analysis(p, u_star, tol) {
            Ok(a) => {
                let r = (a.active_set.clone(), Some(a.clone()));
                out.analysis = Some(Analysis::Support(a));
                r
            }
            Err(e) => {
                skip(CertificateKind::FbiBregmanTaylor, e.to_string());
                (Vec::new(), None)
            }
        },
        Penalty::L1Ball { .. } => match ball_analysis(p, u_star, tol) {
            Ok(a) => {
                let r = (a.active_set.clone(), None);
                out.analysis = Some(Analysis::Ball(a));
                r
            }
            Err(e) => {
                skip(CertificateKind::FbiBregmanTaylor, e.to_string());
                (Vec::new(), None)
            }
        },
        Penalty::Joint { .. } => {
            skip(
                CertificateKind::FbiBregmanTaylor,
                "no closed-form certificate is implemented for joint penalties".into(),
            );
            return Ok(out);
        }
    };

    if opts.fbi && out.analysis.is_some() {
        // injectivity is only needed on the active set
        let fbi = if active.is_empty() {
            Ok(FbiReport {
                order: 1,
                records: Vec::new(),
                passes: true,
                threshold: FbiOptions::order(1).threshold,
            })
        } else {
            p.operator().fbi_check(&FbiOptions::supports(vec![active]))
        };
        let zero = vec![0.0; p.truncation_dim()];
        let cert = fbi.and_then(|fbi| {
            let m = p.objective(&zero)?;
            certificate_fbi(p, u_star, &fbi, m, &inst.bounds, inst.op_norm_sq, tol)
        });
        match cert {
            Ok(c) => out.list.push(c),
            Err(e) => skip(CertificateKind::FbiBregmanTaylor, e.to_string()),
        }
    }

    if let Penalty::WeightedL1(weights) = p.penalty() {
        if opts.compact {
            if is_inverse_norm_step(cfg, &inst.rule, inst.op_norm_sq) {
                let k_max = opts.k_max.min(p.truncation_dim());
                let cert = p
                    .operator()
                    .spectral_report(k_max, 1e-12)
                    .and_then(|spec| certificate_compact(&spec, weights, vecops::norm(p.data()), inst.op_norm_sq));
                match cert {
                    Ok(c) => out.list.push(c),
                    Err(e) => skip(CertificateKind::CompactExplicit, e.to_string()),
                }
            } else {
                skip(
                    CertificateKind::CompactExplicit,
                    "needs the constant step s = 1/‖K‖²".into(),
                );
            }
        }
        if opts.strict_pattern {
            match &strict {
                Some(a) if a.strict_pattern => {
                    match certificate_strict_pattern(p, a, &inst.bounds, inst.op_norm_sq) {
                        Ok(c) => out.list.push(c),
                        Err(e) => skip(CertificateKind::StrictPatternContraction, e.to_string()),
                    }
                }
                Some(_) => skip(
                    CertificateKind::StrictPatternContraction,
                    "the minimizer has no strict sparsity pattern".into(),
                ),
                None => {}
            }
        }
    }
    Ok(out)
}

fn run(cfg: &ExperimentConfig, inst: &Instance, dir: PathBuf) -> Result<Outcome, CliError> {
    let p = &inst.problem;
    let (u_star, ref_info) = reference(cfg, inst)?;
    let st = cfg.stopping;
    let out = Solver::new(p, inst.rule.clone())
        .operator_norm_sq(inst.op_norm_sq)
        .stopping(StoppingRule {
            max_iters: st.max_iters,
            gap_tol: st.gap_tol,
            step_tol: st.step_tol,
        })
        .reference(&u_star)
        .map_err(CliError::runtime)?
        .run(None)
        .map_err(CliError::runtime)?;

    let (fit, fit_error) = match fit_rate(&out.trace, None) {
        Ok(f) => (Some(f), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let sublinear = sublinear_check(&out.trace, out.bounds.delta, out.bounds.lower, None).ok();
    let descent = (out.iterations > 0).then(|| descent_margins(&out.trace, out.bounds.delta));
    let certs = certificates(cfg, inst, &u_star)?;

    let slack = cfg.certificates.rate_slack;
    let checks: Vec<CertificateCheck> = certs
        .list
        .iter()
        .map(|c| CertificateCheck {
            kind: c.kind,
            lambda: c.lambda,
            c_bound: c.c_bound,
            respected: fit.as_ref().map(|f| c.respects(f.lambda, slack)),
        })
        .collect();
    let respected = checks.iter().all(|c| c.respected != Some(false));
    let oracle_distance =
        (ref_info.source == "oracle").then(|| vecops::dist(&out.state.iterate, &u_star));

    let summary = Summary {
        name: cfg.name().to_string(),
        penalty: p.penalty().kind(),
        iterations: out.iterations,
        trials: out.trials,
        stop_reason: out.stop_reason,
        final_objective: out.state.objective(p),
        reference_source: ref_info.source,
        lambda_hat: fit.as_ref().map(|f| f.lambda),
        r_squared: fit.as_ref().map(|f| f.r_squared),
        certificates: checks,
        certificate_respected: respected,
        oracle_distance,
        sublinear_passes: sublinear.as_ref().map(|s| s.passes),
        descent_margin: descent.map(|d| d.descent),
    };
    let report = CertificateReport {
        name: cfg.name().to_string(),
        problem: problem_info(cfg, inst),
        reference: ref_info,
        analysis: certs.analysis,
        certificates: certs.list,
        skipped: certs.skipped,
        fit,
        fit_error,
        sublinear,
        descent,
    };

    let trace_path = dir.join("trace.csv");
    let file = File::create(&trace_path).map_err(|e| output_err(&trace_path, e))?;
    out.trace
        .write_csv(BufWriter::new(file))
        .map_err(|e| CliError::Runtime(format!("{}: {e}", trace_path.display())))?;
    write_vec(&dir.join("solution.csv"), &out.state.iterate)?;
    write_vec(&dir.join("reference.csv"), &u_star)?;
    write_json(&dir.join("report.json"), &report)?;
    write_json(&dir.join("summary.json"), &summary)?;

    let lambda = summary
        .lambda_hat
        .map_or_else(|| "n/a".to_string(), |l| format!("{l:.6}"));
    Ok(Outcome {
        name: summary.name.clone(),
        dir,
        certificate_respected: respected,
        message: format!(
            "{} iterations ({:?}), lambda_hat {lambda}, {} certificate(s), respected: {respected}",
            summary.iterations,
            summary.stop_reason,
            summary.certificates.len()
        ),
    })
}

fn certify(cfg: &ExperimentConfig, inst: &Instance, dir: PathBuf) -> Result<Outcome, CliError> {
    let (u_star, ref_info) = reference(cfg, inst)?;
    let certs = certificates(cfg, inst, &u_star)?;
    let n = certs.list.len();
    let report = CertificateReport {
        name: cfg.name().to_string(),
        problem: problem_info(cfg, inst),
        reference: ref_info,
        analysis: certs.analysis,
        certificates: certs.list,
        skipped: certs.skipped,
        fit: None,
        fit_error: None,
        sublinear: None,
        descent: None,
    };
    write_vec(&dir.join("reference.csv"), &u_star)?;
    write_json(&dir.join("report.json"), &report)?;
    Ok(Outcome {
        name: cfg.name().to_string(),
        dir,
        certificate_respected: true,
        message: format!("{n} certificate(s), {} skipped", report.skipped.len()),
    })
}

fn oracle(cfg: &ExperimentConfig, inst: &Instance, dir: PathBuf) -> Result<Outcome, CliError> {
    let p = &inst.problem;
    if !matches!(p.penalty(), Penalty::WeightedL1(_)) {
        return Err(CliError::field(
            "penalty.kind",
            "the enumeration oracle needs a weighted-l1 penalty".into(),
        ));
    }
    if p.truncation_dim() > MAX_ORACLE_COLS {
        return Err(CliError::field(
            "operator",
            format!("{} columns exceed the oracle limit of {MAX_ORACLE_COLS}", p.truncation_dim()),
        ));
    }
    let report = oracle_enumerate(p, MAX_ORACLE_COLS).map_err(CliError::runtime)?;
    write_vec(&dir.join("oracle.csv"), &report.minimizer)?;
    write_json(&dir.join("oracle.json"), &report)?;
    Ok(Outcome {
        name: cfg.name().to_string(),
        dir,
        certificate_respected: true,
        message: format!(
            "objective {:.12e} after {} patterns",
            report.objective, report.patterns_checked
        ),
    })
}

#[derive(Debug, Clone, Serialize)]
struct SpectralOutput {
    name: String,
    spectral: SpectralReport,
    consistency_violations: Vec<String>,
    fbi: Option<FbiReport>,
    fbi_error: Option<String>,
}

fn spectral(cfg: &ExperimentConfig, inst: &Instance, dir: PathBuf) -> Result<Outcome, CliError> {
    let k = inst.problem.operator();
    let k_max = cfg.certificates.k_max.min(k.cols());
    let spec = k.spectral_report(k_max, 1e-12).map_err(CliError::runtime)?;
    let order = cfg.certificates.fbi_order.min(k.cols());
    let (fbi, fbi_error) = match k.fbi_check(&FbiOptions::order(order)) {
        Ok(r) => (Some(r), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let passes = fbi.as_ref().map(|f| f.passes);
    let out = SpectralOutput {
        name: cfg.name().to_string(),
        consistency_violations: spec.consistency_violations(),
        spectral: spec,
        fbi,
        fbi_error,
    };
    write_json(&dir.join("spectral.json"), &out)?;
    Ok(Outcome {
        name: cfg.name().to_string(),
        dir,
        certificate_respected: true,
        message: format!(
            "‖K‖² = {:.6e}, FBI of order {order}: {}",
            out.spectral.operator_norm_sq,
            passes.map_or("not checked".into(), |b| b.to_string())
        ),
    })
}

fn output_err(path: &Path, source: std::io::Error) -> CliError {
    CliError::Output {
        path: path.display().to_string(),
        source,
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Runtime(format!("serializing {}: {e}", path.display())))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| output_err(path, e))
}

fn write_vec(path: &Path, v: &[f64]) -> Result<(), CliError> {
    let file = File::create(path).map_err(|e| output_err(path, e))?;
    let mut w = BufWriter::new(file);
    write_vector(v, &mut w).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
    w.flush().map_err(|e| output_err(path, e))
}
