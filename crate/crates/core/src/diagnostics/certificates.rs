//! Linear rate certificates `‖uⁿ − u*‖ ≤ Cλⁿ` computed from instance data.

use std::collections::BTreeMap;

use nalgebra::SymmetricEigen;
use serde::Serialize;

use super::{ball_analysis, support_analysis, SupportAnalysis};
use crate::error::{Error, Result};
use crate::operators::{FbiReport, SpectralReport};
use crate::prox::{Penalty, Weights};
use crate::serde_ext;
use crate::solvers::{Problem, StepBounds};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CertificateKind {
    FbiBregmanTaylor,
    StrictPatternContraction,
    CompactExplicit,
    Empirical,
}

/// Which of the two complementary subspaces a certificate was built on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Subspace {
    /// Zero on `{k : |w*_k| = α_k}`.
    #[serde(rename = "U_dual")]
    UDual,
    /// Zero on `{k : u*_k ≠ 0}`.
    #[serde(rename = "U_support")]
    USupport,
    /// Zero on the head `{k < k₀}`.
    #[serde(rename = "tail")]
    Tail,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateCertificate {
    pub kind: CertificateKind,
    pub lambda: f64,
    /// `C` in `‖uⁿ − u*‖ ≤ Cλⁿ`; absent for asymptotic certificates.
    #[serde(serialize_with = "serde_ext::opt_f64")]
    pub c_bound: Option<f64>,
    #[serde(serialize_with = "serde_ext::map_f64")]
    pub constants: BTreeMap<String, f64>,
    pub subspace: Option<Subspace>,
    pub notes: Vec<String>,
}

impl RateCertificate {
    fn new(kind: CertificateKind, lambda: f64, c_bound: Option<f64>) -> Self {
        Self {
            kind,
            lambda,
            c_bound,
            constants: BTreeMap::new(),
            subspace: None,
            notes: Vec::new(),
        }
    }

    fn with(mut self, name: &str, value: f64) -> Self {
        self.constants.insert(name.to_owned(), value);
        self
    }

    pub fn constant(&self, name: &str) -> Option<f64> {
        self.constants.get(name).copied()
    }

    /// Whether a fitted rate respects this certificate.
    pub fn respects(&self, lambda_hat: f64, tol: f64) -> bool {
        lambda_hat <= self.lambda + tol
    }
}

/// `λ = (1 − δs̲c⁻¹/(2s̲c⁻¹ + 1))^{1/2}`, the rate implied by
/// `‖uⁿ − u*‖² ≤ c·r_n` and the descent inequality.
pub fn descent_rate(delta: f64, lower_step: f64, c: f64) -> f64 {
    let e = lower_step / c;
    (1.0 - delta * e / (2.0 * e + 1.0)).max(0.0).sqrt()
}

/// `c = (2‖K‖² + c̄ + 4c₁)/(c̄c₁)`, or `1/c₁` when the active block is empty.
fn norm_constant(op_norm_sq: f64, c_bar: Option<f64>, c1: f64) -> f64 {
    match c_bar {
        Some(cb) => (2.0 * op_norm_sq + cb + 4.0 * c1) / (cb * c1),
        None => 1.0 / c1,
    }
}

fn active_block_constant(fbi: &FbiReport, active: &[usize]) -> Result<Option<f64>> {
    if active.is_empty() {
        return Ok(None);
    }
    let smin = fbi.min_singular(active).ok_or_else(|| {
        Error::Certificate(format!(
            "FBI report of order {} does not cover the active set of size {}",
            fbi.order,
            active.len()
        ))
    })?;
    if !(smin > fbi.threshold) {
        return Err(Error::Certificate(format!(
            "operator is not injective on the active set (smallest singular value {smin:e})"
        )));
    }
    Ok(Some(smin * smin))
}

/// Certificate from the Bregman-Taylor lower bound under FBI, for weighted
/// ℓ¹ penalties and for the weighted ℓ¹-ball.
///
/// `m` bounds the objective along the iteration, normally `(F+Φ)(u⁰)`.
pub fn certificate_fbi(
    problem: &Problem,
    u_star: &[f64],
    fbi: &FbiReport,
    m: f64,
    bounds: &StepBounds,
    op_norm_sq: f64,
    tol: f64,
) -> Result<RateCertificate> {
    if !(bounds.delta > 0.0) || !(bounds.lower > 0.0) {
        return Err(Error::Certificate(format!(
            "descent constants must be positive (delta {}, lower step {})",
            bounds.delta, bounds.lower
        )));
    }
    let objective_star = problem.objective(u_star)?;
    if m < objective_star {
        return Err(Error::Certificate(format!(
            "objective bound {m} lies below the minimum {objective_star}"
        )));
    }
    let alpha_min = problem.penalty().weights().lower_bound();
    let (active, rho, c1, mut notes) = match problem.penalty() {
        Penalty::WeightedL1(_) => {
            let a = support_analysis(problem, u_star, tol)?;
            let c1 = (1.0 - a.rho) * alpha_min * alpha_min / (m + 1.0);
            (a.active_set, a.rho, c1, Vec::new())
        }
        Penalty::L1Ball { radius, .. } => {
            let a = ball_analysis(problem, u_star, tol)?;
            if !(a.weighted_dual_norm > 0.0) {
                return Err(Error::Certificate(
                    "w* = 0: the data is reachable from inside the ball".into(),
                ));
            }
            let c1 = a.weighted_dual_norm * (1.0 - a.rho) * alpha_min * alpha_min / radius;
            let notes = vec![format!(
                "ball lower bound carries the factor ‖α⁻¹w*‖∞ = {}",
                a.weighted_dual_norm
            )];
            (a.active_set, a.rho, c1, notes)
        }
        Penalty::Joint { .. } => {
            return Err(Error::Certificate(
                "no closed-form certificate is implemented for joint penalties".into(),
            ))
        }
    };
    if rho >= 1.0 - tol {
        return Err(Error::Certificate(format!("rho = {rho} is not below 1")));
    }
    let c_bar = active_block_constant(fbi, &active)?;
    let c = norm_constant(op_norm_sq, c_bar, c1);
    let lambda = descent_rate(bounds.delta, bounds.lower, c);
    let r0 = (m - objective_star).max(0.0);
    if c_bar.is_none() {
        notes.push("empty active set: c = 1/c1".into());
    }
    let mut cert = RateCertificate::new(CertificateKind::FbiBregmanTaylor, lambda, Some((c * r0).sqrt()))
        .with("delta", bounds.delta)
        .with("s_lower", bounds.lower)
        .with("M", m)
        .with("rho", rho)
        .with("c1", c1)
        .with("c", c)
        .with("c2", 1.0 / c)
        .with("active_set_size", active.len() as f64)
        .with("r0", r0)
        .with("operator_norm_sq", op_norm_sq);
    if let Some(cb) = c_bar {
        cert = cert.with("c_bar", cb);
    }
    cert.subspace = Some(Subspace::UDual);
    cert.notes = notes;
    Ok(cert)
}

/// Closed-form certificate for compact operators, valid for `u⁰ = 0` and the
/// constant step `s = 1/‖K‖²`.
pub fn certificate_compact(
    spec: &SpectralReport,
    weights: &Weights,
    f_norm: f64,
    op_norm_sq: f64,
) -> Result<RateCertificate> {
    if !(f_norm >= 0.0) || !(op_norm_sq > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "need ‖f‖ >= 0 and ‖K‖² > 0, got {f_norm} and {op_norm_sq}"
        )));
    }
    let a = weights.lower_bound();
    let base = |cert: RateCertificate| {
        let mut cert = cert
            .with("alpha_lower", a)
            .with("f_norm", f_norm)
            .with("operator_norm_sq", op_norm_sq)
            .with("delta", 0.5);
        cert.subspace = Some(Subspace::Tail);
        cert
    };
    if f_norm == 0.0 {
        let mut cert = base(RateCertificate::new(CertificateKind::CompactExplicit, 0.0, Some(0.0)));
        cert.notes.push("f = 0: the minimizer is 0 and u⁰ = 0 is already optimal".into());
        return Ok(cert);
    }
    let threshold = a * a / (4.0 * f_norm * f_norm);
    let k0 = (1..=spec.k_max())
        .find(|&k| spec.mu(k) <= threshold)
        .ok_or_else(|| {
            Error::Certificate(format!(
                "no k <= {} with mu_k <= {threshold}; increase k_max",
                spec.k_max()
            ))
        })?;
    let sigma = spec.sigma(k0);
    if !(sigma > 0.0) {
        return Err(Error::Certificate(format!(
            "sigma_{k0} = {sigma}: the operator is not injective on the head"
        )));
    }
    let (f2, k2, a2) = (f_norm * f_norm, op_norm_sq, a * a);
    let (first, second, c_bound, c) = if sigma.is_infinite() {
        (
            0.75,
            1.0 - a2 / (4.0 * a2 + 2.0 * k2 * f2),
            (f2 * f2 / (2.0 * a2)).sqrt(),
            f2 / a2,
        )
    } else {
        (
            1.0 - sigma / (4.0 * sigma + 8.0 * k2),
            1.0 - sigma * a2 / (4.0 * sigma * a2 + 2.0 * (sigma + 2.0 * k2) * k2 * f2),
            ((4.0 * a2 * f2 + (sigma + 2.0 * k2) * f2 * f2) / (2.0 * sigma * a2)).sqrt(),
            (4.0 / sigma).max((sigma + 2.0 * k2) * f2 / (sigma * a2)),
        )
    };
    let lambda = first.max(second).sqrt();
    let mut cert = base(RateCertificate::new(CertificateKind::CompactExplicit, lambda, Some(c_bound)))
        .with("k0", k0 as f64)
        .with("sigma_k0", sigma)
        .with("mu_k0", spec.mu(k0))
        .with("c", c);
    if sigma.is_infinite() {
        cert.notes.push("k0 = 1: sigma is unbounded and the limit of the closed form is used".into());
    }
    Ok(cert)
}

/// Asymptotic contraction factor after the support has frozen, for
/// minimizers with a strict sparsity pattern. Needs no FBI property.
pub fn certificate_strict_pattern(
    problem: &Problem,
    analysis: &SupportAnalysis,
    bounds: &StepBounds,
    op_norm_sq: f64,
) -> Result<RateCertificate> {
    if !analysis.strict_pattern {
        return Err(Error::Certificate(
            "the minimizer has no strict sparsity pattern".into(),
        ));
    }
    if !bounds.upper.is_finite() {
        return Err(Error::Certificate(
            "the contraction bound needs a finite upper step size".into(),
        ));
    }
    let support = &analysis.support;
    let mut cert = if support.is_empty() {
        let mut c = RateCertificate::new(CertificateKind::StrictPatternContraction, 0.0, None);
        c.notes.push("empty support: iterates vanish once the support freezes".into());
        c
    } else {
        let c = smallest_positive_eigenvalue(problem, support);
        if !(c > 0.0) {
            return Err(Error::Certificate("K vanishes on the support".into()));
        }
        let lambda = (bounds.upper * op_norm_sq - 1.0)
            .max(1.0 - bounds.lower * c)
            .max(0.0);
        if lambda >= 1.0 {
            return Err(Error::Certificate(format!("contraction factor {lambda} is not below 1")));
        }
        RateCertificate::new(CertificateKind::StrictPatternContraction, lambda, None).with("c", c)
    };
    cert = cert
        .with("s_lower", bounds.lower)
        .with("s_upper", bounds.upper)
        .with("operator_norm_sq", op_norm_sq)
        .with("support_size", support.len() as f64)
        .with("rho", analysis.rho);
    cert.subspace = Some(Subspace::USupport);
    cert.notes.push("asymptotic rate, valid after the support freezes".into());
    Ok(cert)
}

/// Smallest eigenvalue of `K_S*K_S` on the orthogonal complement of its kernel.
fn smallest_positive_eigenvalue(problem: &Problem, support: &[usize]) -> f64 {
    let gram = problem.operator().gram_submatrix(support);
    let eig = SymmetricEigen::new(gram).eigenvalues;
    let top = eig.iter().fold(0.0f64, |m, &x| m.max(x));
    let cutoff = top * 1e-12;
    eig.iter()
        .filter(|&&x| x > cutoff)
        .fold(f64::INFINITY, |m, &x| m.min(x))
}

/// Wraps a fitted rate so it can be reported alongside the certificates.
pub fn certificate_empirical(fit: &super::rates::RateFit) -> RateCertificate {
    RateCertificate::new(CertificateKind::Empirical, fit.lambda, Some(fit.c_hat))
        .with("r_squared", fit.r_squared)
        .with("points", fit.points as f64)
        .with("burn_in", fit.burn_in as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{DenseOperator, FbiOptions};
    use approx::assert_abs_diff_eq;

    fn report(sigma: Vec<f64>, mu: Vec<f64>, norm: f64) -> SpectralReport {
        SpectralReport {
            operator_norm_sq: norm,
            sigma,
            mu,
            tolerance: 1e-12,
        }
    }

    #[test]
    fn compact_closed_form() {
        // μ₂ = 0.2 ≤ 1/4 selects k₀ = 2 with σ₂ = 1
        let spec = report(vec![f64::INFINITY, 1.0], vec![1.0, 0.2], 1.0);
        let w = Weights::constant(2, 1.0).unwrap();
        let cert = certificate_compact(&spec, &w, 1.0, 1.0).unwrap();
        assert_eq!(cert.constant("k0"), Some(2.0));
        assert_abs_diff_eq!(cert.lambda, (11.0f64 / 12.0).sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(cert.c_bound.unwrap(), (7.0f64 / 2.0).sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn compact_zero_data_and_failures() {
        let w = Weights::constant(2, 1.0).unwrap();
        let spec = report(vec![f64::INFINITY, 1.0], vec![1.0, 0.9], 1.0);
        assert_eq!(certificate_compact(&spec, &w, 0.0, 1.0).unwrap().lambda, 0.0);
        assert!(certificate_compact(&spec, &w, 1.0, 1.0).is_err());
        let spec = report(vec![f64::INFINITY, 0.0], vec![1.0, 0.1], 1.0);
        assert!(certificate_compact(&spec, &w, 1.0, 1.0).is_err());
    }

    #[test]
    fn compact_first_index_uses_limit() {
        let w = Weights::constant(1, 1.0).unwrap();
        let spec = report(vec![f64::INFINITY], vec![0.1], 0.1);
        let cert = certificate_compact(&spec, &w, 1.0, 0.1).unwrap();
        let second = 1.0 - 1.0 / (4.0 + 0.2);
        assert_eq!(cert.lambda, 0.75f64.max(second).sqrt());
        // the finite formula approaches the limit
        let big = report(vec![1e12], vec![0.1], 0.1);
        let finite = certificate_compact(&big, &w, 1.0, 0.1).unwrap();
        assert_abs_diff_eq!(finite.lambda, cert.lambda, epsilon = 1e-9);
    }

    #[test]
    fn descent_rate_formula() {
        // δ = 1/2, s̲ = 1, c = 1: λ² = 1 − 0.5/3
        assert_abs_diff_eq!(descent_rate(0.5, 1.0, 1.0), (5.0f64 / 6.0).sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn identity_fbi_certificate() {
        let p = Problem::new(
            DenseOperator::identity(3),
            vec![1.0, 0.4, -2.0],
            Penalty::WeightedL1(Weights::constant(3, 0.5).unwrap()),
        )
        .unwrap();
        let u_star = [0.5, 0.0, -1.5];
        let fbi = DenseOperator::identity(3).fbi_check(&FbiOptions::order(3)).unwrap();
        let bounds = StepBounds {
            lower: 1.0,
            upper: 1.0,
            delta: 0.5,
        };
        let m = p.objective(&[0.0; 3]).unwrap();
        let cert = certificate_fbi(&p, &u_star, &fbi, m, &bounds, 1.0, 1e-10).unwrap();
        assert_eq!(cert.constant("c_bar"), Some(1.0));
        assert_abs_diff_eq!(cert.constant("M").unwrap(), 0.5 * (1.0 + 0.16 + 4.0), epsilon = 1e-15);
        assert!(cert.lambda < 1.0 && cert.lambda > 0.0);
        assert_eq!(cert.subspace, Some(Subspace::UDual));
    }

    #[test]
    fn strict_pattern_scalar() {
        let p = Problem::new(
            DenseOperator::from_rows(&[vec![2.0]]).unwrap(),
            vec![3.0],
            Penalty::WeightedL1(Weights::constant(1, 0.5).unwrap()),
        )
        .unwrap();
        // u* = (2·3 − 0.5)/4
        let u_star = [1.375];
        let a = support_analysis(&p, &u_star, 1e-12).unwrap();
        let s = 0.3;
        let bounds = StepBounds {
            lower: s,
            upper: s,
            delta: 1.0 - s * 2.0,
        };
        let cert = certificate_strict_pattern(&p, &a, &bounds, 4.0).unwrap();
        assert_abs_diff_eq!(cert.lambda, (1.0f64 - s * 4.0).abs(), epsilon = 1e-12);
        assert_eq!(cert.subspace, Some(Subspace::USupport));

        let id = Problem::new(
            DenseOperator::identity(2),
            vec![2.0, 0.1],
            Penalty::WeightedL1(Weights::constant(2, 0.5).unwrap()),
        )
        .unwrap();
        let a = support_analysis(&id, &[1.5, 0.0], 1e-12).unwrap();
        let one = StepBounds {
            lower: 1.0,
            upper: 1.0,
            delta: 0.5,
        };
        assert_eq!(certificate_strict_pattern(&id, &a, &one, 1.0).unwrap().lambda, 0.0);
    }
}
