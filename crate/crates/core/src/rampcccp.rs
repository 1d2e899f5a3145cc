//! Ramp-loss risk minimization by outer linearization, and the numerical
//! equivalence harness against the self-paced search.
//!
//! The ramp objective caps each positive's hinge loss at `s_pos`, which
//! splits into a convex hinge sum minus a convex excess term. Each outer
//! iteration classifies positives with hinge loss at or above the cap as
//! outliers, replaces the excess term by its linearization there, and
//! re-solves the convex remainder. With the default subgradient selection
//! outliers drop out of the surrogate entirely, so each outer step trains
//! on the inliers plus all negatives; `keep_outliers_low` instead keeps the
//! linear pull that holds outlier scores down.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Label};
use crate::error::{Error, Result};
use crate::loss::{hinge, ramp_objective, self_paced_objective, RiskParams};
use crate::parallel;
use crate::selfpaced::{acs_train, update_indicators, AcsConfig, IndicatorVector};
use crate::solver::{solve_hinge, HingeProblem, LinearModel, SolverConfig};

/// Parameters for the ramp outer loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CccpConfig {
    /// Ramp cap on positive losses.
    pub s_pos: f64,
    pub lambda: f64,
    pub max_outer: usize,
    pub solver: SolverConfig,
    /// Keep the linearized pull on outliers instead of dropping them.
    pub keep_outliers_low: bool,
}

impl CccpConfig {
    pub fn new(s_pos: f64, lambda: f64) -> Self {
        CccpConfig {
            s_pos,
            lambda,
            max_outer: 100,
            solver: SolverConfig::default(),
            keep_outliers_low: false,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.s_pos > 0.0) {
            return Err(Error::InvalidConfig("s_pos must be positive".to_string()));
        }
        if !(self.lambda > 0.0) {
            return Err(Error::InvalidConfig("lambda must be positive".to_string()));
        }
        if self.max_outer == 0 {
            return Err(Error::InvalidConfig("max_outer must be >= 1".to_string()));
        }
        Ok(())
    }
}

/// One outer iteration, for trace emission.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CccpRecord {
    pub iteration: usize,
    pub outlier_count: usize,
    pub objective: f64,
}

#[derive(Debug, Clone)]
pub struct CccpOutcome {
    pub model: LinearModel,
    /// One bit per positive; set marks an outlier (hinge >= s_pos).
    pub outlier_mask: Vec<bool>,
    pub trace: Vec<CccpRecord>,
}

fn classify_outliers(model: &LinearModel, dataset: &Dataset, s_pos: f64) -> Vec<bool> {
    dataset
        .positives()
        .iter()
        .map(|s| hinge(model.raw_score(&s.features), Label::Positive) >= s_pos)
        .collect()
}

fn solve_surrogate(
    dataset: &Dataset,
    outliers: &[bool],
    config: &CccpConfig,
) -> Result<LinearModel> {
    let inliers = IndicatorVector::from_bits(outliers.iter().map(|&o| !o).collect());
    let mut problem = HingeProblem::from_active(dataset, &inliers, config.lambda)?;
    if config.keep_outliers_low {
        // Linearized excess term of each outlier: the hinge is in its linear
        // region there, so the surrogate gains lambda * y_i (w . x_i + b).
        for (i, s) in dataset.positives().iter().enumerate() {
            if outliers[i] {
                for d in 0..dataset.dim() {
                    problem.drift_w[d] += config.lambda * s.features[d];
                }
                problem.drift_b += config.lambda;
            }
        }
    }
    let (weights, bias) = solve_hinge(&problem, &config.solver)?;
    Ok(LinearModel {
        weights,
        bias,
        trained_lambda: config.lambda,
    })
}

/// Minimizes the ramp objective by alternating outlier classification and
/// convex re-solves; stops when the outlier set is stable.
pub fn cccp_train(dataset: &Dataset, config: &CccpConfig) -> Result<CccpOutcome> {
    config.validate()?;
    if dataset.n_pos() == 0 {
        return Err(Error::EmptyClass { class: "positive" });
    }
    if dataset.n_neg() == 0 {
        return Err(Error::EmptyClass { class: "negative" });
    }
    let params = RiskParams {
        lambda: config.lambda,
        k_pos: 1.0 / config.s_pos,
        s_pos: config.s_pos,
        include_all_negatives: true,
    };

    let mut outliers = vec![false; dataset.n_pos()];
    let mut trace = Vec::new();
    let mut model = solve_surrogate(dataset, &outliers, config)?;
    for iteration in 0..config.max_outer {
        let objective = ramp_objective(&model, dataset, &params)?;
        let next = classify_outliers(&model, dataset, config.s_pos);
        trace.push(CccpRecord {
            iteration,
            outlier_count: next.iter().filter(|&&o| o).count(),
            objective,
        });
        if next == outliers {
            return Ok(CccpOutcome {
                model,
                outlier_mask: outliers,
                trace,
            });
        }
        outliers = next;
        model = solve_surrogate(dataset, &outliers, config)?;
    }
    let objective = ramp_objective(&model, dataset, &params)?;
    trace.push(CccpRecord {
        iteration: config.max_outer,
        outlier_count: outliers.iter().filter(|&&o| o).count(),
        objective,
    });
    Ok(CccpOutcome {
        model,
        outlier_mask: outliers,
        trace,
    })
}

/// Numerical comparison of the two formulations on one dataset.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub k: f64,
    pub s_pos: f64,
    pub lambda: f64,
    pub n_w_samples: usize,
    /// Max over sampled models of
    /// `|ramp(w) - selfpaced(w, v*(w)) - lambda * n_pos * s|`.
    pub max_shift_residual: f64,
    pub selfpaced_ramp_objective: f64,
    pub cccp_ramp_objective: f64,
    pub cross_objective_gap: f64,
    pub selfpaced_outliers: Vec<usize>,
    pub cccp_outliers: Vec<usize>,
    pub symmetric_difference: Vec<usize>,
}

const W_SAMPLE_SEED: u64 = 0x5eed_ca11;
const W_SAMPLE_COUNT: usize = 100;

/// Checks the shift identity pointwise over sampled models and compares the
/// two solvers' outputs on the same instance.
pub fn check_equivalence(dataset: &Dataset, k: f64, lambda: f64) -> Result<EquivalenceReport> {
    if !(k > 0.0) {
        return Err(Error::InvalidConfig("k must be positive".to_string()));
    }
    if !(lambda > 0.0) {
        return Err(Error::InvalidConfig("lambda must be positive".to_string()));
    }
    let s = 1.0 / k;
    let params = RiskParams::from_k(lambda, k);
    let shift = lambda * dataset.n_pos() as f64 * s;

    let mut rng = ChaCha8Rng::seed_from_u64(W_SAMPLE_SEED);
    let probes: Vec<LinearModel> = (0..W_SAMPLE_COUNT)
        .map(|_| LinearModel {
            weights: (0..dataset.dim()).map(|_| rng.random_range(-2.0..2.0)).collect(),
            bias: rng.random_range(-2.0..2.0),
            trained_lambda: lambda,
        })
        .collect();
    let residuals = parallel::map_slice(&probes, |model| {
        let v = update_indicators(model, dataset, k, None).expect("dims match");
        let ramp = ramp_objective(model, dataset, &params).expect("dims match");
        let sp = self_paced_objective(model, dataset, &v, &params).expect("dims match");
        (ramp - sp - shift).abs()
    });
    let max_shift_residual = residuals.into_iter().fold(0.0f64, f64::max);

    let acs_config = AcsConfig {
        k_init: k,
        k_final: k,
        lambda_init: lambda,
        lambda_per_sample: false,
        ..AcsConfig::default()
    };
    let cccp_config = CccpConfig::new(s, lambda);
    let (acs_out, cccp_out) = parallel::join(
        || acs_train(dataset, &acs_config, None),
        || cccp_train(dataset, &cccp_config),
    );
    let acs_out = acs_out?;
    let cccp_out = cccp_out?;

    let selfpaced_outliers: Vec<usize> = (0..dataset.n_pos())
        .filter(|&i| !acs_out.indicators.get(i))
        .collect();
    let cccp_outliers: Vec<usize> = (0..dataset.n_pos())
        .filter(|&i| cccp_out.outlier_mask[i])
        .collect();
    let mut symmetric_difference: Vec<usize> = (0..dataset.n_pos())
        .filter(|&i| (!acs_out.indicators.get(i)) != cccp_out.outlier_mask[i])
        .collect();
    symmetric_difference.sort_unstable();

    let selfpaced_ramp_objective = ramp_objective(&acs_out.model, dataset, &params)?;
    let cccp_ramp_objective = ramp_objective(&cccp_out.model, dataset, &params)?;

    Ok(EquivalenceReport {
        k,
        s_pos: s,
        lambda,
        n_w_samples: W_SAMPLE_COUNT,
        max_shift_residual,
        selfpaced_ramp_objective,
        cccp_ramp_objective,
        cross_objective_gap: (selfpaced_ramp_objective - cccp_ramp_objective).abs(),
        selfpaced_outliers,
        cccp_outliers,
        symmetric_difference,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Sample;
    use crate::selfpaced::IndicatorVector;
    use crate::solver::train_inner;

    fn dataset_from(pos: &[&[f64]], neg: &[&[f64]]) -> Dataset {
        let mut samples = Vec::new();
        for p in pos {
            samples.push(Sample::new(p.to_vec(), Label::Positive).unwrap());
        }
        for n in neg {
            samples.push(Sample::new(n.to_vec(), Label::Negative).unwrap());
        }
        Dataset::new(samples).unwrap()
    }

    fn separable() -> Dataset {
        dataset_from(
            &[&[2.0, 0.1], &[2.2, -0.2], &[1.8, 0.3], &[2.5, 0.0]],
            &[&[-2.0, 0.1], &[-1.8, -0.4], &[-2.3, 0.2]],
        )
    }

    #[test]
    fn inactive_cap_reduces_to_plain_training() {
        let ds = separable();
        let config = CccpConfig::new(5.0, 10.0);
        let out = cccp_train(&ds, &config).unwrap();
        assert!(out.outlier_mask.iter().all(|&o| !o));
        let plain = train_inner(&ds, &IndicatorVector::ones(ds.n_pos()), 10.0, &config.solver).unwrap();
        assert_eq!(out.model, plain);
    }

    #[test]
    fn extreme_outlier_is_masked_and_matches_acs() {
        let ds = dataset_from(
            &[&[2.0, 0.1], &[2.1, -0.1], &[1.9, 0.0], &[2.2, 0.1], &[2.0, -0.2], &[-1.5, 0.0]],
            &[&[-1.0, 0.2], &[-1.3, -0.3], &[-0.8, 0.1], &[-1.6, 0.0]],
        );
        let k = 0.7;
        let config = CccpConfig::new(1.0 / k, 4.0);
        let out = cccp_train(&ds, &config).unwrap();
        assert_eq!(
            out.outlier_mask,
            vec![false, false, false, false, false, true]
        );

        let acs_config = AcsConfig {
            k_init: k,
            k_final: k,
            lambda_init: 4.0,
            ..AcsConfig::default()
        };
        let acs = acs_train(&ds, &acs_config, None).unwrap();
        for i in 0..ds.n_pos() {
            assert_eq!(!acs.indicators.get(i), out.outlier_mask[i]);
        }
    }

    #[test]
    fn ramp_objective_is_monotone_over_outer_iterations() {
        let ds = dataset_from(
            &[&[1.5, 0.4], &[0.9, -0.6], &[-0.7, 0.8], &[2.1, 0.2], &[0.1, 0.1]],
            &[&[-1.2, 0.1], &[-0.4, -0.9], &[-1.8, 0.5], &[0.3, -1.1]],
        );
        let out = cccp_train(&ds, &CccpConfig::new(1.0 / 0.7, 3.0)).unwrap();
        for pair in out.trace.windows(2) {
            assert!(
                pair[1].objective <= pair[0].objective + 1e-6,
                "ramp objective rose: {} -> {}",
                pair[0].objective,
                pair[1].objective
            );
        }
    }

    #[test]
    fn perturbing_an_outlier_leaves_the_solution_unchanged() {
        let mut pos: Vec<Vec<f64>> = vec![
            vec![2.0, 0.1],
            vec![2.1, -0.1],
            vec![1.9, 0.0],
            vec![-1.5, 0.0],
        ];
        let neg: Vec<Vec<f64>> = vec![vec![-1.0, 0.2], vec![-1.3, -0.3], vec![-0.8, 0.1]];
        let build = |pos: &[Vec<f64>]| {
            dataset_from(
                &pos.iter().map(|p| p.as_slice()).collect::<Vec<_>>(),
                &neg.iter().map(|n| n.as_slice()).collect::<Vec<_>>(),
            )
        };
        let config = CccpConfig::new(1.0 / 0.7, 4.0);
        let before = cccp_train(&build(&pos), &config).unwrap();
        assert!(before.outlier_mask[3]);

        pos[3] = vec![-1.4, 0.1]; // still deep on the negative side
        let after = cccp_train(&build(&pos), &config).unwrap();
        assert_eq!(before.model, after.model);
        assert_eq!(before.outlier_mask, after.outlier_mask);
    }

    #[test]
    fn keep_outliers_low_pulls_the_outlier_score_down() {
        let ds = dataset_from(
            &[&[2.0, 0.1], &[2.1, -0.1], &[1.9, 0.0], &[-1.5, 0.0]],
            &[&[-1.0, 0.2], &[-1.3, -0.3], &[-0.8, 0.1]],
        );
        let dropped = cccp_train(&ds, &CccpConfig::new(1.0 / 0.7, 4.0)).unwrap();
        let mut config = CccpConfig::new(1.0 / 0.7, 4.0);
        config.keep_outliers_low = true;
        let kept = cccp_train(&ds, &config).unwrap();
        assert_eq!(dropped.outlier_mask, kept.outlier_mask);
        let outlier = &ds.positives()[3].features;
        assert!(
            kept.model.raw_score(outlier) <= dropped.model.raw_score(outlier) + 1e-9,
            "keep_outliers_low should not raise the outlier's score"
        );
    }

    #[test]
    fn equivalence_report_on_separable_data() {
        let ds = separable();
        let report = check_equivalence(&ds, 0.7, 5.0).unwrap();
        assert!(report.max_shift_residual < 1e-10, "{}", report.max_shift_residual);
        assert!(report.cross_objective_gap < 1e-4, "{}", report.cross_objective_gap);
        assert!(report.symmetric_difference.is_empty());
        let json = serde_json::to_string(&report).unwrap();
        assert!(json.contains("max_shift_residual"));
    }
}
