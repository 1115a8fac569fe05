//! Invariant checks for proximity maps, shared by property tests and the
//! acceptance harness. Each returns human-readable violations; empty means
//! the invariant held.

use crate::prox::{project_dual_ball, Penalty};
use crate::vecops;

/// Relative tolerance for identities that hold exactly in real arithmetic
/// but pick up rounding in floating point.
pub const ROUNDING_TOL: f64 = 1e-14;
/// Absolute tolerance for subdifferential conditions.
pub const SUBGRADIENT_TOL: f64 = 1e-10;

/// `J_s(x) + s·Π(x/s) = x` for penalties whose prox is a residual of a
/// dual-ball projection (weighted ℓ¹ and joint penalties).
pub fn moreau_violations(penalty: &Penalty, x: &[f64], s: f64) -> Vec<String> {
    let mut out = Vec::new();
    let Ok(v) = penalty.prox(x, s) else {
        return vec!["prox failed".into()];
    };
    let (block, q) = match penalty {
        Penalty::WeightedL1(_) => (1, crate::prox::NormExponent::One),
        Penalty::Joint { norm, .. } => (norm.block_size, norm.q),
        Penalty::L1Ball { .. } => return out,
    };
    let alpha = penalty.weights().as_slice();
    for (k, ((xb, vb), a)) in x.chunks(block).zip(v.chunks(block)).zip(alpha).enumerate() {
        let p = project_dual_ball(xb, s * a, q);
        for (i, ((xi, vi), pi)) in xb.iter().zip(vb).zip(&p).enumerate() {
            let err = (vi + pi - xi).abs();
            if err > ROUNDING_TOL * xi.abs().max(1.0) {
                out.push(format!("block {k} entry {i}: J + Π − x = {err:e}"));
            }
        }
    }
    out
}

/// `‖J_s(a) − J_s(b)‖ ≤ ‖a − b‖`.
pub fn nonexpansive_violations(penalty: &Penalty, a: &[f64], b: &[f64], s: f64) -> Vec<String> {
    match (penalty.prox(a, s), penalty.prox(b, s)) {
        (Ok(pa), Ok(pb)) => {
            let lhs = vecops::dist(&pa, &pb);
            let rhs = vecops::dist(a, b);
            if lhs > rhs * (1.0 + ROUNDING_TOL) + f64::MIN_POSITIVE {
                vec![format!("‖J(a) − J(b)‖ = {lhs} exceeds ‖a − b‖ = {rhs}")]
            } else {
                Vec::new()
            }
        }
        _ => vec!["prox failed".into()],
    }
}

/// `(x − J_s(x))/s ∈ ∂Φ(J_s(x))`.
pub fn subgradient_violations(penalty: &Penalty, x: &[f64], s: f64) -> Vec<String> {
    let Ok(v) = penalty.prox(x, s) else {
        return vec!["prox failed".into()];
    };
    let g: Vec<f64> = x.iter().zip(&v).map(|(a, b)| (a - b) / s).collect();
    let alpha = penalty.weights().as_slice();
    let mut out = Vec::new();
    match penalty {
        Penalty::WeightedL1(_) => {
            for (k, ((gk, vk), a)) in g.iter().zip(&v).zip(alpha).enumerate() {
                let bad = if *vk == 0.0 {
                    gk.abs() > a + SUBGRADIENT_TOL
                } else {
                    (gk - a * vk.signum()).abs() > SUBGRADIENT_TOL
                };
                if bad {
                    out.push(format!("entry {k}: g = {gk}, v = {vk}, alpha = {a}"));
                }
            }
        }
        Penalty::Joint { norm, .. } => {
            let dual = norm.q.dual();
            for (k, ((gb, vb), a)) in g
                .chunks(norm.block_size)
                .zip(v.chunks(norm.block_size))
                .zip(alpha)
                .enumerate()
            {
                let dn = dual.norm(gb);
                let gap = a * norm.q.norm(vb) - vecops::dot(gb, vb);
                if dn > a + SUBGRADIENT_TOL || gap.abs() > SUBGRADIENT_TOL * a.max(1.0) {
                    out.push(format!("block {k}: |g|_* = {dn}, Fenchel gap {gap:e}"));
                }
            }
        }
        Penalty::L1Ball { radius, .. } => {
            let mass: f64 = v.iter().zip(alpha).map(|(x, a)| a * x.abs()).sum();
            if mass > radius + SUBGRADIENT_TOL {
                out.push(format!("projection infeasible: mass {mass}"));
            }
            // normal cone: ⟨g, v⟩ equals the support function radius·‖α⁻¹g‖∞
            let support_fn = radius * g.iter().zip(alpha).fold(0.0f64, |m, (gk, a)| m.max(gk.abs() / a));
            let inner = vecops::dot(&g, &v);
            if (support_fn - inner).abs() > SUBGRADIENT_TOL * support_fn.max(1.0) {
                out.push(format!("normal cone: ⟨g,v⟩ = {inner} vs support function {support_fn}"));
            }
        }
    }
    out
}
