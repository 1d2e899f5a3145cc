//! Pooled ensemble scoring and ranking evaluation.
//!
//! Every expert scores every test sample; the pooled score is the maximum
//! over experts, as if all experts fed a single detector pool. Average
//! precision is computed exactly from the ranked list (sum of precision at
//! each positive's rank over the positive count) with a pessimistic tie
//! rule: negatives rank ahead of positives at equal scores. There is no
//! score calibration between experts; raw maxima are pooled.

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Label, Sample};
use crate::error::{Error, Result};
use crate::miner::{mine, Ensemble, MineConfig};
use crate::parallel;

/// Evaluation summary for one ensemble on one test set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub ap: f64,
    /// AP using only the first `m` experts, for `m = 1..=M`; empty when the
    /// prefix curve was not requested.
    pub ap_per_expert_prefix: Vec<f64>,
    /// `(recall, precision)` after each rank of the pooled ranking.
    pub pr_curve: Vec<(f64, f64)>,
    /// Fraction of the training positives covered by the scored experts'
    /// cores.
    pub fraction_used: f64,
}

/// Pooled score of one sample: the max over experts, with ties resolved to
/// the earliest round.
pub fn ensemble_score(ensemble: &Ensemble, sample: &Sample) -> Result<(f64, usize)> {
    if ensemble.experts.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    let mut best_score = f64::NEG_INFINITY;
    let mut best_idx = 0;
    for (idx, expert) in ensemble.experts.iter().enumerate() {
        let score = expert.model.score(sample)?;
        if score > best_score {
            best_score = score;
            best_idx = idx;
        }
    }
    Ok((best_score, best_idx))
}

/// Exact average precision of a scored, labelled list.
///
/// Requires at least one positive; ties are broken pessimistically
/// (negatives first).
pub fn average_precision(scores: &[(f64, Label)]) -> Result<f64> {
    if !scores.iter().any(|&(_, l)| l == Label::Positive) {
        return Err(Error::UndefinedMetric("average precision needs a positive"));
    }
    let ranked = rank_pessimistic(scores);
    let n_pos = scores.iter().filter(|&&(_, l)| l == Label::Positive).count();
    let mut tp = 0usize;
    let mut ap = 0.0;
    for (rank, &idx) in ranked.iter().enumerate() {
        if scores[idx].1 == Label::Positive {
            tp += 1;
            ap += tp as f64 / (rank + 1) as f64;
        }
    }
    Ok(ap / n_pos as f64)
}

/// Indices sorted by descending score; at equal scores negatives precede
/// positives, then input order.
fn rank_pessimistic(scores: &[(f64, Label)]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .0
            .total_cmp(&scores[a].0)
            .then_with(|| {
                let rank = |l: Label| if l == Label::Negative { 0 } else { 1 };
                rank(scores[a].1).cmp(&rank(scores[b].1))
            })
            .then(a.cmp(&b))
    });
    order
}

fn pr_curve(scores: &[(f64, Label)]) -> Vec<(f64, f64)> {
    let ranked = rank_pessimistic(scores);
    let n_pos = scores.iter().filter(|&&(_, l)| l == Label::Positive).count();
    let mut tp = 0usize;
    let mut curve = Vec::with_capacity(ranked.len());
    for (rank, &idx) in ranked.iter().enumerate() {
        if scores[idx].1 == Label::Positive {
            tp += 1;
        }
        curve.push((tp as f64 / n_pos as f64, tp as f64 / (rank + 1) as f64));
    }
    curve
}

/// Fraction of training positives covered by the first `m` cores, for
/// `m = 1..=M`.
pub fn prefix_fractions(ensemble: &Ensemble) -> Vec<f64> {
    let mut seen = vec![false; ensemble.n_pos_total];
    let mut covered = 0usize;
    let mut fractions = Vec::with_capacity(ensemble.experts.len());
    for expert in &ensemble.experts {
        for &i in &expert.core {
            if !seen[i] {
                seen[i] = true;
                covered += 1;
            }
        }
        fractions.push(covered as f64 / ensemble.n_pos_total.max(1) as f64);
    }
    fractions
}

/// Scores the test set with the pooled ensemble and computes AP, the PR
/// curve, and optionally the expert-prefix AP curve.
pub fn evaluate(ensemble: &Ensemble, test: &Dataset, prefix_curve: bool) -> Result<EvalReport> {
    if ensemble.experts.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    if ensemble.experts[0].model.dim() != test.dim() {
        return Err(Error::Dimension {
            expected: ensemble.experts[0].model.dim(),
            found: test.dim(),
        });
    }

    // Per-sample scores for every expert, then pooled prefix maxima.
    let per_expert: Vec<Vec<f64>> = parallel::map_slice(test.samples(), |s| {
        ensemble
            .experts
            .iter()
            .map(|e| e.model.raw_score(&s.features))
            .collect()
    });

    let pooled: Vec<(f64, Label)> = per_expert
        .iter()
        .zip(test.samples())
        .map(|(row, s)| {
            let best = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            (best, s.label)
        })
        .collect();
    let ap = average_precision(&pooled)?;
    let curve = pr_curve(&pooled);

    let ap_per_expert_prefix = if prefix_curve {
        let m = ensemble.experts.len();
        parallel::map_indices(m, |prefix| {
            let scored: Vec<(f64, Label)> = per_expert
                .iter()
                .zip(test.samples())
                .map(|(row, s)| {
                    let best = row[..=prefix].iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    (best, s.label)
                })
                .collect();
            average_precision(&scored).expect("pooled list has positives")
        })
    } else {
        Vec::new()
    };

    let fraction_used = prefix_fractions(ensemble).last().copied().unwrap_or(0.0);
    Ok(EvalReport {
        ap,
        ap_per_expert_prefix,
        pr_curve: curve,
        fraction_used,
    })
}

/// Paired evaluation of mining with and without sample sharing.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SharingComparison {
    pub with_sharing: EvalReport,
    pub without_sharing: EvalReport,
}

/// Runs mining twice from the same configuration (sharing on and off) and
/// evaluates both ensembles on the same test split.
pub fn compare_sharing(
    dataset: &Dataset,
    test: &Dataset,
    config: &MineConfig,
) -> Result<(SharingComparison, Ensemble, Ensemble)> {
    let mut on = config.clone();
    on.sharing_enabled = true;
    let mut off = config.clone();
    off.sharing_enabled = false;
    let (shared, plain) = parallel::join(|| mine(dataset, &on), || mine(dataset, &off));
    let shared = shared?;
    let plain = plain?;
    let with_sharing = evaluate(&shared, test, true)?;
    let without_sharing = evaluate(&plain, test, true)?;
    Ok((
        SharingComparison {
            with_sharing,
            without_sharing,
        },
        shared,
        plain,
    ))
}
