//! Brute-force reference procedures used by the verification suite.
//!
//! Everything here trades efficiency for independence: subset enumeration
//! replaces the alternating search, a refining lattice replaces the dual
//! solver's certificate, and a pairwise-count average precision replaces
//! the sort-based implementation. None of these share logic with the code
//! paths they check beyond the inner convex solve, which enumeration is
//! explicitly allowed to reuse.

use crate::dataset::{Dataset, Label};
use crate::error::Result;
use crate::loss::{self_paced_objective, RiskParams};
use crate::selfpaced::IndicatorVector;
use crate::solver::{train_inner, LinearModel, SolverConfig};

/// Globally minimal self-paced objective by enumerating all `2^n_pos`
/// indicator vectors and solving each induced convex problem.
///
/// Only sensible for small positive counts; panics above 20.
pub fn subset_enumeration_optimum(
    dataset: &Dataset,
    k: f64,
    lambda: f64,
    solver: &SolverConfig,
) -> Result<(f64, IndicatorVector)> {
    let n_pos = dataset.n_pos();
    assert!(n_pos <= 20, "enumeration over 2^{n_pos} subsets is too large");
    let params = RiskParams::from_k(lambda, k);
    let mut best_objective = f64::INFINITY;
    let mut best_v = IndicatorVector::zeros(n_pos);
    for mask in 0..(1u64 << n_pos) {
        let v = IndicatorVector::from_bits((0..n_pos).map(|i| mask & (1 << i) != 0).collect());
        let model = train_inner(dataset, &v, lambda, solver)?;
        let objective = self_paced_objective(&model, dataset, &v, &params)?;
        if objective < best_objective {
            best_objective = objective;
            best_v = v;
        }
    }
    Ok((best_objective, best_v))
}

/// Hinge objective of the active set at a candidate `(w, b)`.
pub fn hinge_objective(
    dataset: &Dataset,
    v: &IndicatorVector,
    lambda: f64,
    weights: &[f64],
    bias: f64,
) -> f64 {
    let mut risk = 0.0;
    for (i, s) in dataset.positives().iter().enumerate() {
        if v.get(i) {
            let score: f64 = s.features.iter().zip(weights).map(|(x, w)| x * w).sum::<f64>() + bias;
            risk += (1.0 - score).max(0.0);
        }
    }
    for s in dataset.negatives() {
        let score: f64 = s.features.iter().zip(weights).map(|(x, w)| x * w).sum::<f64>() + bias;
        risk += (1.0 + score).max(0.0);
    }
    weights.iter().map(|w| w * w).sum::<f64>() + lambda * risk
}

/// Lattice search over `(w1, w2, b)` for 2-D data, refined around the
/// running argmin a fixed number of times.
///
/// The objective is convex, so each zoom window (a few coarse steps wide)
/// keeps the true minimizer inside; the final step size bounds the
/// objective error by `slope * step`.
pub fn grid_search_2d(
    dataset: &Dataset,
    v: &IndicatorVector,
    lambda: f64,
    half_range: f64,
    points_per_axis: usize,
    levels: usize,
) -> (LinearModel, f64) {
    assert_eq!(dataset.dim(), 2, "grid oracle is built for 2-D data");
    assert!(points_per_axis >= 9);
    let mut center = [0.0f64; 3];
    let mut half = half_range;
    let mut best = (f64::INFINITY, [0.0f64; 3]);
    for _ in 0..levels {
        let step = 2.0 * half / (points_per_axis - 1) as f64;
        for i in 0..points_per_axis {
            let w1 = center[0] - half + i as f64 * step;
            for j in 0..points_per_axis {
                let w2 = center[1] - half + j as f64 * step;
                for l in 0..points_per_axis {
                    let b = center[2] - half + l as f64 * step;
                    let obj = hinge_objective(dataset, v, lambda, &[w1, w2], b);
                    if obj < best.0 {
                        best = (obj, [w1, w2, b]);
                    }
                }
            }
        }
        center = best.1;
        half = 3.0 * step;
    }
    (
        LinearModel {
            weights: vec![best.1[0], best.1[1]],
            bias: best.1[2],
            trained_lambda: lambda,
        },
        best.0,
    )
}

/// Average precision by pairwise rank counting, pessimistic ties.
///
/// For positive `i`, its rank counts all strictly higher scores, every tied
/// negative, and tied positives that precede it in input order; precision
/// at that rank counts the positives among them.
pub fn average_precision_by_counting(scores: &[(f64, Label)]) -> f64 {
    let n_pos = scores.iter().filter(|&&(_, l)| l == Label::Positive).count();
    assert!(n_pos > 0);
    let mut ap = 0.0;
    for (i, &(si, li)) in scores.iter().enumerate() {
        if li != Label::Positive {
            continue;
        }
        let mut above = 0usize;
        let mut positives_above = 0usize;
        for (j, &(sj, lj)) in scores.iter().enumerate() {
            if j == i {
                continue;
            }
            let outranks = sj > si
                || (sj == si && lj == Label::Negative)
                || (sj == si && lj == Label::Positive && j < i);
            if outranks {
                above += 1;
                if lj == Label::Positive {
                    positives_above += 1;
                }
            }
        }
        let rank = above + 1;
        let tp = positives_above + 1;
        ap += tp as f64 / rank as f64;
    }
    ap / n_pos as f64
}
