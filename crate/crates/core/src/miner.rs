//! Incremental subclass discovery.
//!
//! Each round runs the alternating search on the positives still
//! unclaimed (all negatives stay present), claims the included subset as a
//! new expert's core, optionally retrains the expert on the full positive
//! set with its core frozen in (sample sharing), and removes the core from
//! the pool. The forced-singleton fallback of the search guarantees every
//! round claims at least one positive, so mining always terminates.

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, DatasetFingerprint};
use crate::error::{Error, Result};
use crate::selfpaced::{acs_train, AcsConfig, AlternationRecord, IndicatorVector};
use crate::solver::{train_inner, LinearModel};

/// One discovered expert.
///
/// `core` holds the positive indices claimed during the expert's discovery
/// round; `shared` additionally contains positives adopted during the
/// sharing retrain and is always a superset of `core`.
#[derive(Debug, Clone, PartialEq)]
pub struct Expert {
    pub model: LinearModel,
    pub core: Vec<usize>,
    pub shared: Vec<usize>,
    pub round: usize,
}

/// The ordered set of discovered experts.
///
/// Cores are pairwise disjoint and cover all positives of the training
/// dataset; expert order is discovery order.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    pub experts: Vec<Expert>,
    pub n_pos_total: usize,
    pub dataset: DatasetFingerprint,
}

/// Mining parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MineConfig {
    pub acs: AcsConfig,
    /// Cores below this size count as isolated exemplars in reports.
    pub min_subclass_size: usize,
    pub sharing_enabled: bool,
    /// Cap on discovery rounds; positives left after the cap become
    /// singleton experts.
    pub max_rounds: usize,
}

impl Default for MineConfig {
    fn default() -> Self {
        MineConfig {
            acs: AcsConfig::default(),
            min_subclass_size: 5,
            sharing_enabled: true,
            max_rounds: usize::MAX,
        }
    }
}

/// Per-round alternating-search trace, tagged with its round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundTrace {
    pub round: usize,
    pub records: Vec<AlternationRecord>,
}

/// Mining result bundling the ensemble with per-round traces.
#[derive(Debug, Clone)]
pub struct MineOutcome {
    pub ensemble: Ensemble,
    pub traces: Vec<RoundTrace>,
}

/// Discovers experts until every positive is claimed.
pub fn mine(dataset: &Dataset, config: &MineConfig) -> Result<Ensemble> {
    Ok(mine_with_trace(dataset, config)?.ensemble)
}

/// Like [`mine`], also returning the per-round search traces.
pub fn mine_with_trace(dataset: &Dataset, config: &MineConfig) -> Result<MineOutcome> {
    if config.max_rounds == 0 {
        return Err(Error::InvalidConfig("max_rounds must be >= 1".to_string()));
    }
    let n_pos = dataset.n_pos();
    let mut remaining: Vec<usize> = (0..n_pos).collect();
    let mut experts: Vec<Expert> = Vec::new();
    let mut traces: Vec<RoundTrace> = Vec::new();
    let mut round = 0;

    while !remaining.is_empty() && round < config.max_rounds {
        let sub = dataset.restrict_positives(&remaining);
        let out = acs_train(&sub, &config.acs, None).map_err(|e| e.in_round(round))?;
        let core: Vec<usize> = out
            .indicators
            .support()
            .into_iter()
            .map(|i| remaining[i])
            .collect();
        debug_assert!(!core.is_empty(), "every round must claim a positive");
        traces.push(RoundTrace {
            round,
            records: out.trace,
        });

        let mut expert = Expert {
            model: out.model,
            core: core.clone(),
            shared: core.clone(),
            round,
        };
        if config.sharing_enabled {
            expert = share_samples(&expert, dataset, config).map_err(|e| e.in_round(round))?;
        }
        experts.push(expert);

        remaining.retain(|i| !core.contains(i));
        round += 1;
    }

    // Round cap reached: the leftovers become singleton experts.
    for &i in &remaining {
        let sub = dataset.restrict_positives(&[i]);
        let model = train_inner(
            &sub,
            &IndicatorVector::ones(1),
            config.acs.lambda_init,
            &config.acs.solver,
        )
        .map_err(|e| e.in_round(round))?;
        experts.push(Expert {
            model,
            core: vec![i],
            shared: vec![i],
            round,
        });
        round += 1;
    }

    let ensemble = Ensemble {
        experts,
        n_pos_total: n_pos,
        dataset: dataset.fingerprint(),
    };
    debug_assert!(partition_holds(&ensemble));
    Ok(MineOutcome { ensemble, traces })
}

fn partition_holds(ensemble: &Ensemble) -> bool {
    let mut seen = vec![false; ensemble.n_pos_total];
    for e in &ensemble.experts {
        for &i in &e.core {
            if i >= seen.len() || seen[i] {
                return false;
            }
            seen[i] = true;
        }
    }
    seen.iter().all(|&s| s)
}

/// Retrains an expert on the full positive set with its core frozen in.
///
/// The returned expert keeps its core and round; `shared` becomes the
/// support of the resulting indicators (a superset of the core) and the
/// model is replaced by the retrained one.
pub fn share_samples(expert: &Expert, dataset: &Dataset, config: &MineConfig) -> Result<Expert> {
    assert!(!expert.core.is_empty(), "expert core must be non-empty");
    let out = acs_train(dataset, &config.acs, Some(&expert.core))?;
    let shared = out.indicators.support();
    debug_assert!(expert.core.iter().all(|i| shared.contains(i)));
    Ok(Expert {
        model: out.model,
        core: expert.core.clone(),
        shared,
        round: expert.round,
    })
}

/// Core sizes sorted descending.
pub fn subclass_size_distribution(ensemble: &Ensemble) -> Vec<usize> {
    let mut sizes: Vec<usize> = ensemble.experts.iter().map(|e| e.core.len()).collect();
    sizes.sort_unstable_by(|a, b| b.cmp(a));
    sizes
}

/// Fraction of positives living in cores smaller than `threshold`.
pub fn tail_fraction(ensemble: &Ensemble, threshold: usize) -> f64 {
    assert!(threshold >= 1);
    if ensemble.n_pos_total == 0 {
        return 0.0;
    }
    let tail: usize = ensemble
        .experts
        .iter()
        .filter(|e| e.core.len() < threshold)
        .map(|e| e.core.len())
        .sum();
    tail as f64 / ensemble.n_pos_total as f64
}

/// Per-positive expert assignment derived from the cores.
pub fn core_assignments(ensemble: &Ensemble) -> Vec<i64> {
    let mut assignment = vec![-1i64; ensemble.n_pos_total];
    for (idx, e) in ensemble.experts.iter().enumerate() {
        for &i in &e.core {
            assignment[i] = idx as i64;
        }
    }
    assignment
}

/// Adjusted Rand index between two flat assignments of the same items.
///
/// Returns 1.0 for identical partitions (including the single-cluster
/// degenerate case where the correction denominator vanishes).
pub fn adjusted_rand_index(a: &[i64], b: &[i64]) -> f64 {
    assert_eq!(a.len(), b.len(), "assignments must cover the same items");
    let n = a.len();
    if n < 2 {
        return 1.0;
    }
    let mut a_labels: Vec<i64> = a.to_vec();
    a_labels.sort_unstable();
    a_labels.dedup();
    let mut b_labels: Vec<i64> = b.to_vec();
    b_labels.sort_unstable();
    b_labels.dedup();

    let a_index = |v: i64| a_labels.binary_search(&v).unwrap();
    let b_index = |v: i64| b_labels.binary_search(&v).unwrap();
    let mut table = vec![vec![0u64; b_labels.len()]; a_labels.len()];
    for i in 0..n {
        table[a_index(a[i])][b_index(b[i])] += 1;
    }

    let choose2 = |x: u64| (x * x.saturating_sub(1)) as f64 / 2.0;
    let sum_cells: f64 = table.iter().flatten().map(|&c| choose2(c)).sum();
    let sum_rows: f64 = table.iter().map(|row| choose2(row.iter().sum())).sum();
    let sum_cols: f64 = (0..b_labels.len())
        .map(|j| choose2(table.iter().map(|row| row[j]).sum()))
        .sum();
    let total = choose2(n as u64);
    let expected = sum_rows * sum_cols / total;
    let max_index = 0.5 * (sum_rows + sum_cols);
    if (max_index - expected).abs() < 1e-12 {
        return 1.0;
    }
    (sum_cells - expected) / (max_index - expected)
}

// Wire format: each expert is flattened to
// { weights, bias, core, shared, round }.
#[derive(Serialize, Deserialize)]
struct ExpertRecord {
    weights: Vec<f64>,
    bias: f64,
    core: Vec<usize>,
    shared: Vec<usize>,
    round: usize,
}

#[derive(Serialize, Deserialize)]
struct EnsembleRecord {
    experts: Vec<ExpertRecord>,
    n_pos_total: usize,
    dataset: DatasetFingerprint,
}

impl Serialize for Ensemble {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let record = EnsembleRecord {
            experts: self
                .experts
                .iter()
                .map(|e| ExpertRecord {
                    weights: e.model.weights.clone(),
                    bias: e.model.bias,
                    core: e.core.clone(),
                    shared: e.shared.clone(),
                    round: e.round,
                })
                .collect(),
            n_pos_total: self.n_pos_total,
            dataset: self.dataset.clone(),
        };
        record.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Ensemble {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let record = EnsembleRecord::deserialize(deserializer)?;
        Ok(Ensemble {
            experts: record
                .experts
                .into_iter()
                .map(|e| Expert {
                    model: LinearModel {
                        weights: e.weights,
                        bias: e.bias,
                        // not part of the wire format
                        trained_lambda: 0.0,
                    },
                    core: e.core,
                    shared: e.shared,
                    round: e.round,
                })
                .collect(),
            n_pos_total: record.n_pos_total,
            dataset: record.dataset,
        })
    }
}
