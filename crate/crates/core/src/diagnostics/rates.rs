//! Empirical rates: geometric fits to distance sequences and the `O(1/n)`
//! check on functional gaps.

use serde::Serialize;

use super::trace::IterationTrace;
use crate::error::{Error, Result};
use crate::serde_ext;

/// Minimum number of usable points for a fit.
pub const MIN_FIT_POINTS: usize = 5;
/// Points below this fraction of the largest value are treated as noise.
pub const NOISE_FLOOR: f64 = 1e-10;
/// Default minimum number of steps discarded before fitting.
pub const DEFAULT_BURN_IN: usize = 10;
/// `r²` at or above which a fit is considered geometric.
pub const GEOMETRIC_R2: f64 = 0.98;
/// Additive slack in the per-step sublinear inequality.
pub const SUBLINEAR_SLACK: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateFit {
    /// `λ̂ = exp(slope)`.
    pub lambda: f64,
    /// `Ĉ = exp(intercept)`.
    pub c_hat: f64,
    pub r_squared: f64,
    pub points: usize,
    pub burn_in: usize,
    /// The sequence reached exactly zero; `λ̂ = 0`.
    pub exact_zero: bool,
    pub geometric: bool,
}

/// Fits `log dₙ ≈ log Ĉ + n log λ̂` over the distances to the reference.
///
/// `burn_in` defaults to the larger of 10 and the step at which the support
/// stops changing.
pub fn fit_rate(trace: &IterationTrace, burn_in: Option<usize>) -> Result<RateFit> {
    let d = trace
        .distances()
        .ok_or_else(|| Error::InsufficientData("trace has no distances to a reference".into()))?;
    let burn = burn_in.unwrap_or_else(|| DEFAULT_BURN_IN.max(trace.support_freeze_index()));
    fit_sequence(&d, burn)
}

pub fn fit_sequence(values: &[f64], burn_in: usize) -> Result<RateFit> {
    if values.iter().any(|v| !(*v >= 0.0) || v.is_infinite()) {
        return Err(Error::InvalidArgument("values must be finite and non-negative".into()));
    }
    // finite termination: identically zero from some index on
    if let Some(z) = values.iter().position(|v| *v == 0.0) {
        if values[z..].iter().all(|v| *v == 0.0) {
            return Ok(RateFit {
                lambda: 0.0,
                c_hat: values.first().copied().unwrap_or(0.0),
                r_squared: 1.0,
                points: z,
                burn_in,
                exact_zero: true,
                geometric: true,
            });
        }
    }
    let top = values.iter().fold(0.0f64, |m, v| m.max(*v));
    let floor = top * NOISE_FLOOR;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (n, v) in values.iter().enumerate().skip(burn_in) {
        if *v <= floor {
            break;
        }
        xs.push(n as f64);
        ys.push(v.ln());
    }
    if xs.len() < MIN_FIT_POINTS {
        return Err(Error::InsufficientData(format!(
            "{} usable points after burn-in {burn_in}, need {MIN_FIT_POINTS}",
            xs.len()
        )));
    }
    let (slope, intercept, r_squared) = least_squares(&xs, &ys);
    Ok(RateFit {
        lambda: slope.exp(),
        c_hat: intercept.exp(),
        r_squared,
        points: xs.len(),
        burn_in,
        exact_zero: false,
        geometric: r_squared >= GEOMETRIC_R2,
    })
}

/// Returns `(slope, intercept, r²)`.
fn least_squares(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (slope, my - slope * mx, r2)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SublinearReport {
    /// `q = (δ/(√r₀ + √(δ/s̲)·C₁))²`.
    #[serde(serialize_with = "serde_ext::f64")]
    pub q: f64,
    pub r0: f64,
    /// Bound on `‖uⁿ − u*‖` used in `q`.
    pub c1: f64,
    /// `1/q`, which bounds `n·r_n`.
    #[serde(serialize_with = "serde_ext::f64")]
    pub bound: f64,
    pub max_n_rn: f64,
    /// Steps `n` with `q·r_n² > r_n − r_{n+1} + slack`.
    pub violations: Vec<usize>,
    pub passes: bool,
}

/// Checks `q·r_n² ≤ r_n − r_{n+1}` and `n·r_n ≤ 1/q` along the trace.
///
/// `c1` defaults to the largest recorded distance to the reference.
pub fn sublinear_check(
    trace: &IterationTrace,
    delta: f64,
    lower_step: f64,
    c1: Option<f64>,
) -> Result<SublinearReport> {
    let gaps = trace
        .gaps()
        .ok_or_else(|| Error::InsufficientData("trace has no functional gaps".into()))?;
    let c1 = match c1 {
        Some(c) => c,
        None => trace
            .distances()
            .ok_or_else(|| Error::InsufficientData("trace has no distances to a reference".into()))?
            .iter()
            .fold(0.0f64, |m, d| m.max(*d)),
    };
    sublinear_sequence(&gaps, delta, lower_step, c1)
}

pub fn sublinear_sequence(gaps: &[f64], delta: f64, lower_step: f64, c1: f64) -> Result<SublinearReport> {
    if gaps.is_empty() {
        return Err(Error::InsufficientData("empty gap sequence".into()));
    }
    if !(delta > 0.0) || !(lower_step > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "need delta > 0 and lower step > 0, got {delta} and {lower_step}"
        )));
    }
    let r0 = gaps[0].max(0.0);
    let denom = r0.sqrt() + (delta / lower_step).sqrt() * c1;
    let q = if denom > 0.0 {
        (delta / denom).powi(2)
    } else {
        f64::INFINITY
    };
    let bound = 1.0 / q;
    let mut violations = Vec::new();
    let mut max_n_rn: f64 = 0.0;
    for (n, r) in gaps.iter().enumerate() {
        let r = r.max(0.0);
        max_n_rn = max_n_rn.max(n as f64 * r);
        if let Some(next) = gaps.get(n + 1) {
            let lhs = if r == 0.0 { 0.0 } else { q * r * r };
            if lhs > r - next + SUBLINEAR_SLACK {
                violations.push(n);
            }
        }
    }
    let passes = violations.is_empty() && max_n_rn <= bound * (1.0 + 1e-12) + SUBLINEAR_SLACK;
    Ok(SublinearReport {
        q,
        r0,
        c1,
        bound,
        max_n_rn,
        violations,
        passes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn exact_geometric() {
        let d: Vec<f64> = (0..60).map(|n| 0.5f64.powi(n)).collect();
        let fit = fit_sequence(&d, 10).unwrap();
        assert_abs_diff_eq!(fit.lambda, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(fit.r_squared, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(fit.c_hat, 1.0, epsilon = 1e-9);
        assert!(fit.geometric);
    }

    #[test]
    fn sublinear_sequence_is_flagged() {
        let d: Vec<f64> = (1..2000).map(|n| 1.0 / n as f64).collect();
        let fit = fit_sequence(&d, 10).unwrap();
        assert!(fit.r_squared < GEOMETRIC_R2, "{}", fit.r_squared);
        assert!(!fit.geometric);
    }

    #[test]
    fn zero_tail_and_short_input() {
        let fit = fit_sequence(&[1.0, 0.0, 0.0], 10).unwrap();
        assert!(fit.exact_zero);
        assert_eq!(fit.lambda, 0.0);
        assert!(fit_sequence(&[1.0, 0.5, 0.25], 0).is_err());
    }

    #[test]
    fn noise_floor_stops_the_fit() {
        let mut d: Vec<f64> = (0..30).map(|n| 0.1f64.powi(n)).collect();
        d.extend([1e-20; 10]);
        let fit = fit_sequence(&d, 0).unwrap();
        assert_eq!(fit.points, 11);
        assert_abs_diff_eq!(fit.lambda, 0.1, epsilon = 1e-10);
    }

    #[test]
    fn stalled_gaps_violate() {
        let r = vec![1.0; 20];
        let rep = sublinear_sequence(&r, 0.5, 1.0, 1.0).unwrap();
        assert!(!rep.passes);
        assert_eq!(rep.violations.len(), 19);
    }

    #[test]
    fn geometric_gaps_pass() {
        let r: Vec<f64> = (0..200).map(|n| 0.5f64.powi(n)).collect();
        let rep = sublinear_sequence(&r, 0.5, 1.0, 1.0).unwrap();
        assert!(rep.passes, "{rep:?}");
    }
}
