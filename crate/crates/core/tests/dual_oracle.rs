use proptest::prelude::*;
use tmlmc_core::dual::{worst_case, worst_case_oracle, DiscreteDistribution};
use tmlmc_core::{Divergence, UncertaintySpec};

const GRID_STEP: f64 = 0.02;

fn instance() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, f64)> {
    (1usize..=3)
        .prop_flat_map(|n| {
            (
                prop::collection::vec(0.0f64..10.0, n),
                prop::collection::vec(0.01f64..1.0, n),
                prop::bool::ANY,
                0.0f64..3.0,
            )
        })
        .prop_map(|(values, weights, below, gap)| {
            let total: f64 = weights.iter().sum();
            let probs = weights.iter().map(|w| w / total).collect();
            let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
            let ambient = if below { min - gap } else { min };
            (values, probs, ambient)
        })
}

fn check(div: Divergence, values: &[f64], probs: &[f64], ambient: f64, sigma: f64) -> Result<(), TestCaseError> {
    let dist = DiscreteDistribution::from_weights(values, probs, ambient).unwrap();
    let spec = UncertaintySpec::new(div, sigma).unwrap();
    let dual = worst_case(&dist, &spec).unwrap().value;
    let oracle = worst_case_oracle(&dist, &spec, GRID_STEP).unwrap();
    let span = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - ambient;
    prop_assert!(
        (dual - oracle).abs() <= 1e-6 + span * 1e-9,
        "{div} sigma={sigma} values={values:?} probs={probs:?} ambient={ambient}: dual {dual} oracle {oracle}"
    );
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn tv_agrees_with_oracle((values, probs, ambient) in instance(), sigma in 0.0f64..2.0) {
        check(Divergence::Tv, &values, &probs, ambient, sigma)?;
    }

    #[test]
    fn chi2_agrees_with_oracle((values, probs, ambient) in instance(), sigma in 0.0f64..2.0) {
        check(Divergence::Chi2, &values, &probs, ambient, sigma)?;
    }

    #[test]
    fn kl_agrees_with_oracle((values, probs, ambient) in instance(), sigma in 0.0f64..2.0) {
        check(Divergence::Kl, &values, &probs, ambient, sigma)?;
    }
}

#[test]
fn spec_examples() {
    let coin = DiscreteDistribution::from_weights(&[0.0, 1.0], &[0.5, 0.5], 0.0).unwrap();
    let at = |div, sigma| {
        let spec = UncertaintySpec::new(div, sigma).unwrap();
        (worst_case(&coin, &spec).unwrap().value, worst_case_oracle(&coin, &spec, 1e-3).unwrap())
    };
    let (tv, _) = at(Divergence::Tv, 0.5);
    assert!((tv - 0.25).abs() < 1e-15);
    let (chi2, chi2_oracle) = at(Divergence::Chi2, 0.25);
    assert!((chi2 - chi2_oracle).abs() < 1e-6);
    let (kl, kl_oracle) = at(Divergence::Kl, 0.1);
    assert!((kl - kl_oracle).abs() < 1e-6);
}
