mod common;

use common::*;
use ista_core::diagnostics::certificates::{
    certificate_compact, certificate_fbi, certificate_strict_pattern, CertificateKind,
};
use ista_core::diagnostics::rates::{fit_rate, sublinear_check};
use ista_core::diagnostics::support_analysis;
use ista_core::operators::{DenseOperator, FbiOptions};
use ista_core::oracle::oracle_minimizer;
use ista_core::prox::{Penalty, Weights};
use ista_core::solvers::{Problem, Solver, StepSizeRule, StoppingRule};
use ista_core::vecops;

fn run(p: &Problem, rule: StepSizeRule, u_star: &[f64], iters: usize) -> ista_core::solvers::SolveOutcome {
    Solver::new(p, rule)
        .stopping(StoppingRule {
            max_iters: iters,
            ..Default::default()
        })
        .reference(u_star)
        .unwrap()
        .run(None)
        .unwrap()
}

#[test]
fn fitted_rate_respects_fbi_certificate() {
    for seed in 0..6u64 {
        let p = sparse_instance(900 + seed, 10, 6, 0.1);
        let u_star = oracle_minimizer(&p).unwrap();
        let ns = norm_sq(&p);
        let out = run(&p, StepSizeRule::Constant(1.0 / ns), &u_star, 10_000);
        let fit = fit_rate(&out.trace, None).unwrap();
        let fbi = p.operator().fbi_check(&FbiOptions::order(6)).unwrap();
        let m = p.objective(&[0.0; 6]).unwrap();
        let cert = certificate_fbi(&p, &u_star, &fbi, m, &out.bounds, ns, 1e-9).unwrap();
        assert_eq!(cert.kind, CertificateKind::FbiBregmanTaylor);
        assert!(cert.respects(fit.lambda, 1e-6), "{} > {}", fit.lambda, cert.lambda);

        let sub = sublinear_check(&out.trace, out.bounds.delta, out.bounds.lower, None).unwrap();
        assert!(sub.passes, "seed {seed}: {sub:?}");
    }
}

#[test]
fn compact_certificate_on_diagonal_decay() {
    let k = DenseOperator::diagonal(&[1.0, 0.5, 0.1, 0.01]).unwrap();
    let spec = k.spectral_report(4, 1e-12).unwrap();
    let w = Weights::constant(4, 1.0).unwrap();
    let cert = certificate_compact(&spec, &w, 1.0, 1.0).unwrap();
    assert_eq!(cert.constant("k0"), Some(2.0));
    assert!((cert.lambda - (11.0f64 / 12.0).sqrt()).abs() < 1e-15);

    for (alpha, f) in [(1.0, vec![0.6, 0.8, 0.0, 0.0]), (0.1, vec![0.5, 0.5, 0.5, 0.5])] {
        let w = Weights::constant(4, alpha).unwrap();
        let p = Problem::new(k.clone(), f.clone(), Penalty::WeightedL1(w.clone())).unwrap();
        let u_star = oracle_minimizer(&p).unwrap();
        let ns = k.operator_norm_sq(1e-14).unwrap();
        let cert = certificate_compact(&spec, &w, vecops::norm(&f), ns).unwrap();
        let out = run(&p, StepSizeRule::Constant(1.0 / ns), &u_star, 5000);
        let fit = fit_rate(&out.trace, None).unwrap();
        assert!(cert.respects(fit.lambda, 1e-6), "{} > {}", fit.lambda, cert.lambda);
        // the a-priori bound holds along the whole run
        let c = cert.c_bound.unwrap();
        for e in &out.trace.entries {
            assert!(e.distance_to_ref.unwrap() <= c * cert.lambda.powi(e.n as i32) + 1e-12);
        }
    }
}

/// Columns 0 and 5 coincide, so K is not injective on {0, 5}; the data lives
/// on columns 1 and 2.
fn duplicate_instance(seed: u64) -> Problem {
    let mut r = rng(1200 + seed);
    let base = gaussian_operator(&mut r, 10, 5);
    let mut rows = Vec::new();
    for i in 0..10 {
        let mut row = base.row(i).to_vec();
        row.push(row[0]);
        rows.push(row);
    }
    let k = DenseOperator::from_rows(&rows).unwrap();
    let truth = [0.0, 1.5, -1.0, 0.0, 0.0, 0.0];
    let mut f = k.apply(&truth).unwrap();
    for (fi, e) in f.iter_mut().zip(gaussian_vec(&mut r, 10, 0.02)) {
        *fi += e;
    }
    Problem::new(k, f, Penalty::WeightedL1(Weights::constant(6, 0.1).unwrap())).unwrap()
}

#[test]
fn strict_pattern_without_fbi() {
    let mut checked = 0;
    for seed in 0..10u64 {
        let p = duplicate_instance(seed);
        assert!(!p.operator().fbi_check(&FbiOptions::order(2)).unwrap().passes);
        let u_star = oracle_minimizer(&p).unwrap();
        let a = support_analysis(&p, &u_star, 1e-10).unwrap();
        if !a.strict_pattern {
            continue;
        }
        let ns = norm_sq(&p);
        let s = 1.2 / ns;
        let out = run(&p, StepSizeRule::Constant(s), &u_star, 3000);
        let cert = certificate_strict_pattern(&p, &a, &out.bounds, ns).unwrap();
        let fit = fit_rate(&out.trace, None).unwrap();
        assert!(cert.respects(fit.lambda, 1e-6), "{} > {}", fit.lambda, cert.lambda);

        // after freezing, uⁿ⁺¹ = (I − sP K*K P)(uⁿ − u*) + u*
        let freeze = out.trace.support_freeze_index();
        assert!(freeze < out.trace.len() - 1);
        let support = &a.support;
        let k = p.operator();
        let mut worst: f64 = 0.0;
        let mut replay = Vec::new();
        Solver::new(&p, StepSizeRule::Constant(s))
            .stopping(StoppingRule {
                max_iters: 3000,
                ..Default::default()
            })
            .run_with(None, |ev| {
                if let Some(next) = ev.next_iterate {
                    replay.push((ev.entry.n, ev.iterate.to_vec(), next.to_vec()));
                }
            })
            .unwrap();
        for (n, u, next) in replay.into_iter().filter(|(n, ..)| *n > freeze) {
            let mut d = vecops::sub(&u, &u_star);
            for (i, x) in d.iter_mut().enumerate() {
                if !support.contains(&i) {
                    *x = 0.0;
                }
            }
            let mut g = k.adjoint_apply(&k.apply(&d).unwrap()).unwrap();
            for (i, x) in g.iter_mut().enumerate() {
                if !support.contains(&i) {
                    *x = 0.0;
                }
            }
            let diff = vecops::sub(&u, &u_star);
            let predicted: Vec<f64> = (0..u.len()).map(|i| diff[i] - s * g[i] + u_star[i]).collect();
            let res = vecops::dist(&predicted, &next);
            worst = worst.max(res);
            assert!(res <= 1e-12, "step {n}: residual {res}");
        }
        assert!(worst.is_finite());
        checked += 1;
    }
    assert!(checked >= 3, "only {checked} strict-pattern instances");
}
