//! Hinge, self-paced, and ramp losses, plus the two risk assemblers.
//!
//! Both objectives share the same structure: `||w||^2 + lambda * risk`,
//! where negatives always contribute a plain hinge and positives contribute
//! either an indicator-gated shifted hinge (self-paced) or a capped hinge
//! (ramp). The two differ pointwise in `w` by exactly
//! `lambda * n_pos / k` when the cap is `s = 1/k`, which is what makes the
//! formulations interchangeable.

use crate::dataset::{Dataset, Label};
use crate::error::{Error, Result};
use crate::selfpaced::IndicatorVector;
use crate::solver::LinearModel;

/// Parameters shared by the two risk formulations.
///
/// `k_pos` is the inclusion parameter for positives (a positive is included
/// while its hinge loss stays strictly below `1/k_pos`); `s_pos = 1/k_pos`
/// is the equivalent ramp cap. Negatives are always fully included; the
/// `include_all_negatives` flag records that degenerate choice and must be
/// `true` — finite negative capping is out of scope.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskParams {
    pub lambda: f64,
    pub k_pos: f64,
    pub s_pos: f64,
    pub include_all_negatives: bool,
}

impl RiskParams {
    /// Builds parameters from the inclusion parameter, with `s_pos = 1/k`.
    pub fn from_k(lambda: f64, k: f64) -> Self {
        assert!(lambda > 0.0, "lambda must be positive");
        assert!(k > 0.0, "k must be positive");
        RiskParams {
            lambda,
            k_pos: k,
            s_pos: 1.0 / k,
            include_all_negatives: true,
        }
    }
}

/// `max(0, 1 - label * score)`.
#[inline]
pub fn hinge(score: f64, label: Label) -> f64 {
    (1.0 - label.sign() * score).max(0.0)
}

/// Indicator and risk contribution of one positive under the self-paced rule.
///
/// The sample is included (`v = 1`) iff its hinge loss is strictly below
/// `1/k`; ties are excluded. An included sample contributes
/// `hinge_loss - 1/k`, which is always negative, so inclusion of low-loss
/// samples strictly decreases the risk.
#[inline]
pub fn self_paced_loss(hinge_loss: f64, k: f64) -> (bool, f64) {
    debug_assert!(k > 0.0);
    let threshold = 1.0 / k;
    if hinge_loss < threshold {
        (true, hinge_loss - threshold)
    } else {
        (false, 0.0)
    }
}

/// `min(hinge_loss, s)`: the hinge capped at `s`.
#[inline]
pub fn ramp_loss(hinge_loss: f64, s: f64) -> f64 {
    debug_assert!(s > 0.0);
    hinge_loss.min(s)
}

fn check_dims(model: &LinearModel, dataset: &Dataset) -> Result<()> {
    if model.dim() != dataset.dim() {
        return Err(Error::Dimension {
            expected: dataset.dim(),
            found: model.dim(),
        });
    }
    Ok(())
}

/// Self-paced objective: `||w||^2 + lambda * risk` for a fixed indicator
/// vector over the positives. All negatives are always included.
pub fn self_paced_objective(
    model: &LinearModel,
    dataset: &Dataset,
    v: &IndicatorVector,
    params: &RiskParams,
) -> Result<f64> {
    check_dims(model, dataset)?;
    assert!(
        params.include_all_negatives,
        "finite negative capping is unsupported"
    );
    assert_eq!(v.len(), dataset.n_pos(), "indicator length must match n_pos");
    let threshold = 1.0 / params.k_pos;
    let mut risk = 0.0;
    for (i, s) in dataset.positives().iter().enumerate() {
        if v.get(i) {
            risk += hinge(model.raw_score(&s.features), Label::Positive) - threshold;
        }
    }
    for s in dataset.negatives() {
        risk += hinge(model.raw_score(&s.features), Label::Negative);
    }
    Ok(model.weights_norm_sq() + params.lambda * risk)
}

/// Ramp objective: `||w||^2 + lambda * risk` with positive losses capped at
/// `s_pos` and negatives plain.
pub fn ramp_objective(model: &LinearModel, dataset: &Dataset, params: &RiskParams) -> Result<f64> {
    check_dims(model, dataset)?;
    assert!(
        params.include_all_negatives,
        "finite negative capping is unsupported"
    );
    let mut risk = 0.0;
    for s in dataset.positives() {
        risk += ramp_loss(hinge(model.raw_score(&s.features), Label::Positive), params.s_pos);
    }
    for s in dataset.negatives() {
        risk += hinge(model.raw_score(&s.features), Label::Negative);
    }
    Ok(model.weights_norm_sq() + params.lambda * risk)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{generate, ModeSpec, Sample, SynthSpec};
    use crate::selfpaced::update_indicators;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn tiny_dataset() -> Dataset {
        Dataset::new(vec![
            Sample::new(vec![1.0, 0.5], Label::Positive).unwrap(),
            Sample::new(vec![0.8, -0.2], Label::Positive).unwrap(),
            Sample::new(vec![-1.0, 0.1], Label::Negative).unwrap(),
            Sample::new(vec![-0.5, -0.7], Label::Negative).unwrap(),
        ])
        .unwrap()
    }

    #[test]
    fn hinge_values() {
        assert_eq!(hinge(1.0, Label::Positive), 0.0);
        assert_eq!(hinge(0.5, Label::Positive), 0.5);
        assert_eq!(hinge(0.5, Label::Negative), 1.5);
    }

    #[test]
    fn self_paced_loss_cases() {
        let (v, c) = self_paced_loss(0.5, 0.7);
        assert!(v);
        assert_abs_diff_eq!(c, 0.5 - 1.0 / 0.7, epsilon = 1e-15);

        let k = 0.8;
        let exactly = 1.0 / k;
        assert_eq!(self_paced_loss(exactly, k), (false, 0.0));

        assert_eq!(self_paced_loss(2.0, 0.55), (false, 0.0));
    }

    #[test]
    fn ramp_loss_cases() {
        assert_eq!(ramp_loss(0.5, 1.0), 0.5);
        assert_eq!(ramp_loss(3.0, 1.0), 1.0);
        assert_eq!(ramp_loss(0.0, 1.0), 0.0);
    }

    #[test]
    fn zero_model_objectives() {
        let ds = tiny_dataset();
        let model = LinearModel::zeros(2, 1.0);
        let params = RiskParams::from_k(2.5, 0.7);

        let v = IndicatorVector::zeros(ds.n_pos());
        let obj = self_paced_objective(&model, &ds, &v, &params).unwrap();
        assert_abs_diff_eq!(obj, 2.5 * ds.n_neg() as f64, epsilon = 1e-12);

        // hinge is 1 everywhere at w = 0, so every ramp term is min(1, s).
        let obj = ramp_objective(&model, &ds, &params).unwrap();
        let expected = 2.5 * (ds.n_pos() as f64 * 1.0f64.min(params.s_pos) + ds.n_neg() as f64);
        assert_abs_diff_eq!(obj, expected, epsilon = 1e-12);
    }

    #[test]
    fn objective_matches_independent_recomputation() {
        let ds = tiny_dataset();
        let model = LinearModel {
            weights: vec![0.3, -0.9],
            bias: 0.2,
            trained_lambda: 1.0,
        };
        let params = RiskParams::from_k(1.7, 0.6);
        let v = IndicatorVector::ones(ds.n_pos());
        let obj = self_paced_objective(&model, &ds, &v, &params).unwrap();

        // Independent scalar path: expand every term by hand, accumulate in
        // reverse order.
        let mut terms: Vec<f64> = Vec::new();
        for s in ds.samples() {
            let score = 0.3 * s.features[0] + -0.9 * s.features[1] + 0.2;
            let margin = s.label.sign() * score;
            let l = if 1.0 - margin > 0.0 { 1.0 - margin } else { 0.0 };
            let term = match s.label {
                Label::Positive => {
                    if l < 1.0 / 0.6 {
                        l - 1.0 / 0.6
                    } else {
                        0.0
                    }
                }
                Label::Negative => l,
            };
            terms.push(1.7 * term);
        }
        let mut expected = 0.3f64 * 0.3 + 0.9f64 * 0.9;
        for t in terms.iter().rev() {
            expected += t;
        }
        assert_abs_diff_eq!(obj, expected, epsilon = 1e-12);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let ds = tiny_dataset();
        let model = LinearModel::zeros(3, 1.0);
        let params = RiskParams::from_k(1.0, 0.7);
        assert!(matches!(
            ramp_objective(&model, &ds, &params),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn thresholded_indicators_minimize_objective() {
        let ds = tiny_dataset();
        let model = LinearModel {
            weights: vec![1.0, 0.0],
            bias: -0.3,
            trained_lambda: 1.0,
        };
        let params = RiskParams::from_k(2.0, 0.7);
        let best = update_indicators(&model, &ds, params.k_pos, None).unwrap();
        let best_obj = self_paced_objective(&model, &ds, &best, &params).unwrap();
        for bits in 0..(1u32 << ds.n_pos()) {
            let v = IndicatorVector::from_bits(
                (0..ds.n_pos()).map(|i| bits & (1 << i) != 0).collect(),
            );
            let obj = self_paced_objective(&model, &ds, &v, &params).unwrap();
            assert!(best_obj <= obj + 1e-12);
        }
    }

    fn residual_dataset(seed: u64) -> Dataset {
        generate(&SynthSpec {
            dim: 3,
            modes: vec![
                ModeSpec { mean: vec![2.0, 0.0, 1.0], stddev: 0.8, count: 9 },
                ModeSpec { mean: vec![-2.0, 1.0, 0.0], stddev: 0.8, count: 6 },
            ],
            outlier_count: 2,
            neg_count: 14,
            neg_spread: 1.0,
            seed,
        })
        .unwrap()
    }

    #[test]
    fn shift_identity_over_random_models() {
        use rand::{Rng, SeedableRng};
        let ds = residual_dataset(17);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        let params = RiskParams::from_k(3.0, 0.7);
        let shift = params.lambda * ds.n_pos() as f64 * params.s_pos;
        for _ in 0..200 {
            let model = LinearModel {
                weights: (0..3).map(|_| rng.random_range(-2.0..2.0)).collect(),
                bias: rng.random_range(-2.0..2.0),
                trained_lambda: 1.0,
            };
            let v = update_indicators(&model, &ds, params.k_pos, None).unwrap();
            let ramp = ramp_objective(&model, &ds, &params).unwrap();
            let sp = self_paced_objective(&model, &ds, &v, &params).unwrap();
            assert!((ramp - sp - shift).abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn included_contribution_is_negative(l in 0.0f64..10.0, k in 0.01f64..100.0) {
            let (v, c) = self_paced_loss(l, k);
            if v {
                prop_assert!(c < 0.0);
            } else {
                prop_assert_eq!(c, 0.0);
            }
        }

        #[test]
        fn ramp_is_monotone_and_capped(a in 0.0f64..10.0, b in 0.0f64..10.0, s in 0.01f64..5.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(ramp_loss(lo, s) <= ramp_loss(hi, s));
            prop_assert!(ramp_loss(hi, s) <= s);
            if lo >= s && hi >= s {
                prop_assert_eq!(ramp_loss(lo, s), ramp_loss(hi, s));
            }
        }
    }
}
