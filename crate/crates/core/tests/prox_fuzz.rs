use ista_core::diagnostics::checks::{moreau_violations, nonexpansive_violations, subgradient_violations};
use ista_core::prox::{BlockNorm, NormExponent, Penalty, Weights};
use proptest::prelude::*;

const LEN: usize = 6;

fn values() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(
        prop_oneof![
            4 => -5.0f64..5.0,
            1 => -1e-3f64..1e-3,
            1 => Just(0.0),
        ],
        LEN,
    )
}

fn weights(n: usize) -> impl Strategy<Value = Weights> {
    prop::collection::vec(0.05f64..2.0, n).prop_map(|a| Weights::new(a).unwrap())
}

fn joint_penalties() -> impl Strategy<Value = Penalty> {
    let q = prop_oneof![
        Just(NormExponent::One),
        Just(NormExponent::Two),
        Just(NormExponent::Infinity)
    ];
    (q, prop_oneof![Just(1usize), Just(2), Just(3)]).prop_flat_map(|(q, n)| {
        weights(LEN / n).prop_map(move |w| Penalty::Joint {
            weights: w,
            norm: BlockNorm::new(q, n).unwrap(),
        })
    })
}

fn check(v: Vec<String>) -> Result<(), TestCaseError> {
    prop_assert!(v.is_empty(), "{:?}", v);
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn weighted_l1(w in weights(LEN), x in values(), y in values(), s in 0.01f64..3.0) {
        let p = Penalty::WeightedL1(w);
        check(moreau_violations(&p, &x, s))?;
        check(nonexpansive_violations(&p, &x, &y, s))?;
        check(subgradient_violations(&p, &x, s))?;
    }

    #[test]
    fn joint(p in joint_penalties(), x in values(), y in values(), s in 0.01f64..3.0) {
        check(moreau_violations(&p, &x, s))?;
        check(nonexpansive_violations(&p, &x, &y, s))?;
        check(subgradient_violations(&p, &x, s))?;
    }

    #[test]
    fn ball(w in weights(LEN), r in 0.1f64..5.0, x in values(), y in values(), s in 0.01f64..3.0) {
        let p = Penalty::L1Ball { weights: w, radius: r };
        check(nonexpansive_violations(&p, &x, &y, s))?;
        check(subgradient_violations(&p, &x, s))?;
        // the projection ignores the step size
        prop_assert_eq!(p.prox(&x, s).unwrap(), p.prox(&x, 1.0).unwrap());
    }
}
