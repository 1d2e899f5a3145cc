//! Alternating convex search for the self-tuned risk.
//!
//! Each alternation trains the inner model on the currently included
//! positives, then re-thresholds inclusion: a positive stays in while its
//! hinge loss is strictly below `1/k`. The inclusion parameter `k` starts
//! low (taking relatively many samples) and grows by a fixed factor per
//! alternation up to its final value, where the search runs until the
//! indicator vector is a fixed point.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Label};
use crate::error::{Error, Result};
use crate::loss::{hinge, RiskParams};
use crate::solver::{train_inner, LinearModel, SolverConfig};

/// Binary inclusion mask over the positive samples.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndicatorVector {
    bits: Vec<bool>,
}

impl IndicatorVector {
    pub fn ones(n: usize) -> Self {
        IndicatorVector { bits: vec![true; n] }
    }

    pub fn zeros(n: usize) -> Self {
        IndicatorVector {
            bits: vec![false; n],
        }
    }

    pub fn from_bits(bits: Vec<bool>) -> Self {
        IndicatorVector { bits }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        self.bits[i]
    }

    pub fn set(&mut self, i: usize, value: bool) {
        self.bits[i] = value;
    }

    /// Number of included positives.
    pub fn count_active(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Indices of included positives, ascending.
    pub fn support(&self) -> Vec<usize> {
        self.bits
            .iter()
            .enumerate()
            .filter_map(|(i, &b)| b.then_some(i))
            .collect()
    }
}

/// Schedule and stopping rules for the alternating search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcsConfig {
    pub k_init: f64,
    pub k_final: f64,
    /// Multiplicative growth applied to `k` after each alternation.
    pub k_growth: f64,
    pub lambda_init: f64,
    /// When set, the effective risk weight is
    /// `lambda_init * n_pos / max(1, active)`, keeping the per-active-sample
    /// cost constant as the subset changes.
    pub lambda_per_sample: bool,
    pub max_alternations: usize,
    pub solver: SolverConfig,
}

impl Default for AcsConfig {
    fn default() -> Self {
        AcsConfig {
            k_init: 0.55,
            k_final: 0.7,
            k_growth: 1.05,
            lambda_init: 1.0,
            lambda_per_sample: false,
            max_alternations: 100,
            solver: SolverConfig::default(),
        }
    }
}

impl AcsConfig {
    fn validate(&self) -> Result<()> {
        if !(self.k_init > 0.0 && self.k_final > 0.0) {
            return Err(Error::InvalidConfig("k values must be positive".to_string()));
        }
        if self.k_init > self.k_final {
            return Err(Error::InvalidConfig("k_init must not exceed k_final".to_string()));
        }
        if !(self.k_growth > 1.0) {
            return Err(Error::InvalidConfig("k_growth must exceed 1".to_string()));
        }
        if !(self.lambda_init > 0.0) {
            return Err(Error::InvalidConfig("lambda_init must be positive".to_string()));
        }
        if self.max_alternations == 0 {
            return Err(Error::InvalidConfig("max_alternations must be >= 1".to_string()));
        }
        Ok(())
    }
}

/// One alternation of the search, for trace emission.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlternationRecord {
    pub alternation: usize,
    pub k: f64,
    pub active_count: usize,
    pub objective: f64,
}

/// Renders trace rows as `alternation,k,active_count,objective` CSV.
pub fn trace_to_csv(rows: &[AlternationRecord]) -> String {
    let mut out = String::from("alternation,k,active_count,objective\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{},{}", r.alternation, r.k, r.active_count, r.objective);
    }
    out
}

/// Result of one alternating search run.
#[derive(Debug, Clone)]
pub struct AcsOutcome {
    pub model: LinearModel,
    pub indicators: IndicatorVector,
    pub trace: Vec<AlternationRecord>,
    /// Set when the indicator vector collapsed to empty and the run fell
    /// back to the single lowest-loss positive.
    pub degenerate_singleton: bool,
}

/// Optimal indicators for a fixed model: include positive `i` iff its hinge
/// loss is strictly below `1/k`, with `frozen` indices forced to 1.
pub fn update_indicators(
    model: &LinearModel,
    dataset: &Dataset,
    k: f64,
    frozen: Option<&[usize]>,
) -> Result<IndicatorVector> {
    if model.dim() != dataset.dim() {
        return Err(Error::Dimension {
            expected: dataset.dim(),
            found: model.dim(),
        });
    }
    assert!(k > 0.0, "k must be positive");
    let threshold = 1.0 / k;
    let mut bits: Vec<bool> = dataset
        .positives()
        .iter()
        .map(|s| hinge(model.raw_score(&s.features), Label::Positive) < threshold)
        .collect();
    if let Some(frozen) = frozen {
        for &i in frozen {
            assert!(i < bits.len(), "frozen index out of range");
            bits[i] = true;
        }
    }
    Ok(IndicatorVector::from_bits(bits))
}

fn effective_lambda(config: &AcsConfig, n_pos: usize, active: usize) -> f64 {
    if config.lambda_per_sample {
        config.lambda_init * n_pos as f64 / active.max(1) as f64
    } else {
        config.lambda_init
    }
}

/// Runs the alternating search on a dataset.
///
/// Starts from all positives included; terminates when the indicators are a
/// fixed point at `k = k_final`, or after `max_alternations`. The recorded
/// objective is non-increasing across alternations that share the same `k`
/// (up to solver tolerance) when `lambda_per_sample` is off.
pub fn acs_train(
    dataset: &Dataset,
    config: &AcsConfig,
    frozen: Option<&[usize]>,
) -> Result<AcsOutcome> {
    config.validate()?;
    if dataset.n_pos() == 0 {
        return Err(Error::EmptyClass { class: "positive" });
    }
    if dataset.n_neg() == 0 {
        return Err(Error::EmptyClass { class: "negative" });
    }
    let n_pos = dataset.n_pos();
    let mut v = IndicatorVector::ones(n_pos);
    let mut k = config.k_init;
    let mut trace = Vec::new();

    for alternation in 0..config.max_alternations {
        let lambda = effective_lambda(config, n_pos, v.count_active());
        let model = train_inner(dataset, &v, lambda, &config.solver)?;
        let next = update_indicators(&model, dataset, k, frozen)?;

        if next.count_active() == 0 {
            // Forced singleton: keep the positive with the smallest loss so
            // the surrounding mining loop always makes progress.
            let best = dataset
                .positives()
                .iter()
                .enumerate()
                .map(|(i, s)| (i, hinge(model.raw_score(&s.features), Label::Positive)))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .map(|(i, _)| i)
                .expect("dataset has positives");
            let mut singleton = IndicatorVector::zeros(n_pos);
            singleton.set(best, true);
            let lambda = effective_lambda(config, n_pos, 1);
            let model = train_inner(dataset, &singleton, lambda, &config.solver)?;
            let objective = crate::loss::self_paced_objective(
                &model,
                dataset,
                &singleton,
                &RiskParams::from_k(lambda, k),
            )?;
            trace.push(AlternationRecord {
                alternation,
                k,
                active_count: 1,
                objective,
            });
            return Ok(AcsOutcome {
                model,
                indicators: singleton,
                trace,
                degenerate_singleton: true,
            });
        }

        let objective =
            crate::loss::self_paced_objective(&model, dataset, &next, &RiskParams::from_k(lambda, k))?;
        trace.push(AlternationRecord {
            alternation,
            k,
            active_count: next.count_active(),
            objective,
        });

        let fixed_point = next == v;
        v = next;
        if fixed_point && k == config.k_final {
            return Ok(AcsOutcome {
                model,
                indicators: v,
                trace,
                degenerate_singleton: false,
            });
        }
        k = (k * config.k_growth).min(config.k_final);
    }

    // Ran out of alternations: return the state after one last inner solve
    // so model and indicators agree.
    let lambda = effective_lambda(config, n_pos, v.count_active());
    let model = train_inner(dataset, &v, lambda, &config.solver)?;
    Ok(AcsOutcome {
        model,
        indicators: v,
        trace,
        degenerate_singleton: false,
    })
}
