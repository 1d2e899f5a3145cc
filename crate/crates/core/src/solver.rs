//! Deterministic convex solver for the fixed-indicator inner problem:
//! minimize `||w||^2 + lambda * (sum of hinge losses)` over the active
//! positives plus all negatives, with an unregularized intercept.
//!
//! The solver works on the dual box problem with an equality constraint,
//! visiting samples in a fixed seed-derived order each epoch and pairing
//! each visited sample with its most violating partner. The intercept is
//! recovered exactly from the piecewise-linear bias subproblem, and
//! convergence is declared on a primal-dual gap certificate, which bounds
//! the relative suboptimality of the returned model directly.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Sample};
use crate::error::{Error, Result};
use crate::selfpaced::IndicatorVector;

/// A linear scorer `w . x + b` together with the risk weight it was
/// trained under.
///
/// `trained_lambda` is informational; it is not part of the ensemble wire
/// format and is zero for models reconstructed from ensemble files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    #[serde(rename = "lambda")]
    pub trained_lambda: f64,
}

impl LinearModel {
    pub fn zeros(dim: usize, lambda: f64) -> Self {
        LinearModel {
            weights: vec![0.0; dim],
            bias: 0.0,
            trained_lambda: lambda,
        }
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    /// `w . features + b` without a dimension check.
    #[inline]
    pub fn raw_score(&self, features: &[f64]) -> f64 {
        dot(&self.weights, features) + self.bias
    }

    /// Scores one sample; errors if dimensions disagree.
    pub fn score(&self, sample: &Sample) -> Result<f64> {
        if sample.features.len() != self.weights.len() {
            return Err(Error::Dimension {
                expected: self.weights.len(),
                found: sample.features.len(),
            });
        }
        Ok(self.raw_score(&sample.features))
    }

    pub fn weights_norm_sq(&self) -> f64 {
        dot(&self.weights, &self.weights)
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0;
    for i in 0..a.len() {
        acc += a[i] * b[i];
    }
    acc
}

/// Stopping rules for the inner solver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Relative suboptimality certified by the primal-dual gap.
    pub tolerance: f64,
    pub max_epochs: usize,
    /// Seed for the fixed sample visitation order.
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tolerance: 1e-8,
            max_epochs: 100_000,
            seed: 0,
        }
    }
}

/// The assembled inner problem: active samples plus an optional linear
/// drift term `drift_w . w + drift_b * b` added to the primal objective.
pub(crate) struct HingeProblem<'a> {
    pub features: Vec<&'a [f64]>,
    pub labels: Vec<f64>,
    pub dim: usize,
    pub lambda: f64,
    pub drift_w: Vec<f64>,
    pub drift_b: f64,
}

impl<'a> HingeProblem<'a> {
    pub fn from_active(
        dataset: &'a Dataset,
        v: &IndicatorVector,
        lambda: f64,
    ) -> Result<HingeProblem<'a>> {
        if v.len() != dataset.n_pos() {
            return Err(Error::Dimension {
                expected: dataset.n_pos(),
                found: v.len(),
            });
        }
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for (i, s) in dataset.positives().iter().enumerate() {
            if v.get(i) {
                features.push(s.features.as_slice());
                labels.push(1.0);
            }
        }
        for s in dataset.negatives() {
            features.push(s.features.as_slice());
            labels.push(-1.0);
        }
        Ok(HingeProblem {
            features,
            labels,
            dim: dataset.dim(),
            lambda,
            drift_w: vec![0.0; dataset.dim()],
            drift_b: 0.0,
        })
    }

    fn primal(&self, w: &[f64], scores: &[f64], b: f64) -> f64 {
        let mut risk = 0.0;
        for k in 0..self.labels.len() {
            risk += (1.0 - self.labels[k] * (scores[k] + b)).max(0.0);
        }
        dot(w, w) + self.lambda * risk + dot(&self.drift_w, w) + self.drift_b * b
    }
}

/// Minimizes the piecewise-linear bias subproblem
/// `lambda * sum_k hinge(y_k (s_k + b)) + drift_b * b` exactly.
///
/// The subgradient gains `lambda` at every breakpoint `y_k - s_k`; we walk
/// breakpoints in order until it turns non-negative. A flat optimal
/// interval yields its midpoint, an unbounded one its finite endpoint.
fn optimal_bias(scores: &[f64], labels: &[f64], lambda: f64, drift_b: f64) -> f64 {
    let m = scores.len();
    if m == 0 {
        return 0.0;
    }
    let mut bps: Vec<f64> = (0..m).map(|k| labels[k] - scores[k]).collect();
    bps.sort_by(f64::total_cmp);
    let n_pos = labels.iter().filter(|&&y| y > 0.0).count() as i64;
    let slope_after = |crossed: i64| lambda * ((crossed - n_pos) as f64) + drift_b;
    if slope_after(0) >= 0.0 {
        return bps[0];
    }
    for q in 0..m {
        let s = slope_after(q as i64 + 1);
        if s > 0.0 {
            return bps[q];
        }
        if s == 0.0 {
            return if q + 1 < m {
                0.5 * (bps[q] + bps[q + 1])
            } else {
                bps[q]
            };
        }
    }
    bps[m - 1]
}

struct SolveState {
    alpha: Vec<f64>,
    w: Vec<f64>,
    scores: Vec<f64>,
}

#[inline]
fn in_up(y: f64, a: f64, c: f64) -> bool {
    if y > 0.0 {
        a < c
    } else {
        a > 0.0
    }
}

#[inline]
fn in_low(y: f64, a: f64, c: f64) -> bool {
    if y > 0.0 {
        a > 0.0
    } else {
        a < c
    }
}

/// Solves the assembled problem; returns `(weights, bias)`.
pub(crate) fn solve_hinge(problem: &HingeProblem, config: &SolverConfig) -> Result<(Vec<f64>, f64)> {
    let m = problem.features.len();
    let d = problem.dim;
    let c = problem.lambda / 2.0;
    let target = problem.drift_b / 2.0;

    let w_base: Vec<f64> = problem.drift_w.iter().map(|u| -0.5 * u).collect();

    let mut state = SolveState {
        alpha: vec![0.0; m],
        w: w_base.clone(),
        scores: vec![0.0; m],
    };

    // Feasible start for the equality constraint sum(alpha_k y_k) = target.
    if target != 0.0 {
        let mut left = target;
        for k in 0..m {
            if left > 0.0 && problem.labels[k] > 0.0 {
                let take = left.min(c);
                state.alpha[k] = take;
                left -= take;
            } else if left < 0.0 && problem.labels[k] < 0.0 {
                let take = (-left).min(c);
                state.alpha[k] = take;
                left += take;
            }
            if left == 0.0 {
                break;
            }
        }
        if left.abs() > 1e-9 * c.max(1.0) {
            return Err(Error::InvalidConfig(
                "drift target exceeds the dual box capacity".to_string(),
            ));
        }
    }

    let refresh = |state: &mut SolveState| {
        for dd in 0..d {
            let mut acc = w_base[dd];
            for k in 0..m {
                acc += state.alpha[k] * problem.labels[k] * problem.features[k][dd];
            }
            state.w[dd] = acc;
        }
        for k in 0..m {
            state.scores[k] = dot(&state.w, problem.features[k]);
        }
    };
    refresh(&mut state);

    let mut order: Vec<usize> = (0..m).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    order.shuffle(&mut rng);

    let mut last_primal = f64::INFINITY;
    for _epoch in 0..config.max_epochs {
        let mut updated = false;
        for &i in &order {
            if pair_update(problem, &mut state, i, c) {
                updated = true;
            }
        }
        // Kill incremental drift before certifying.
        refresh(&mut state);
        let b = optimal_bias(&state.scores, &problem.labels, problem.lambda, problem.drift_b);
        let primal = problem.primal(&state.w, &state.scores, b);
        let dual = 2.0 * state.alpha.iter().sum::<f64>() - dot(&state.w, &state.w);
        let gap = primal - dual;
        last_primal = primal;
        if gap <= config.tolerance * primal.abs().max(1.0) {
            return Ok((state.w, b));
        }
        if !updated {
            // No representable step improves the dual any further.
            return Err(Error::Convergence {
                last_objective: primal,
            });
        }
    }
    Err(Error::Convergence {
        last_objective: last_primal,
    })
}

/// One working-pair step: pairs `i` with its most violating partner and
/// moves both dual variables along the equality-preserving direction.
fn pair_update(problem: &HingeProblem, state: &mut SolveState, i: usize, c: f64) -> bool {
    let m = problem.features.len();
    let y = &problem.labels;
    let e = |k: usize, state: &SolveState| state.scores[k] - y[k];

    let e_i = e(i, state);
    let mut best: Option<(usize, usize, f64)> = None; // (up, low, violation)

    if in_up(y[i], state.alpha[i], c) {
        let mut best_j = None;
        let mut best_e = f64::NEG_INFINITY;
        for j in 0..m {
            if j != i && in_low(y[j], state.alpha[j], c) {
                let ej = e(j, state);
                if ej > best_e {
                    best_e = ej;
                    best_j = Some(j);
                }
            }
        }
        if let Some(j) = best_j {
            let viol = best_e - e_i;
            if viol > best.map_or(0.0, |b| b.2) {
                best = Some((i, j, viol));
            }
        }
    }
    if in_low(y[i], state.alpha[i], c) {
        let mut best_p = None;
        let mut best_e = f64::INFINITY;
        for p in 0..m {
            if p != i && in_up(y[p], state.alpha[p], c) {
                let ep = e(p, state);
                if ep < best_e {
                    best_e = ep;
                    best_p = Some(p);
                }
            }
        }
        if let Some(p) = best_p {
            let viol = e_i - best_e;
            if viol > best.map_or(0.0, |b| b.2) {
                best = Some((p, i, viol));
            }
        }
    }

    let Some((u, l, viol)) = best else {
        return false;
    };
    if viol <= 1e-14 {
        return false;
    }

    let xu = problem.features[u];
    let xl = problem.features[l];
    let eta = {
        let mut acc = 0.0;
        for dd in 0..problem.dim {
            let diff = xu[dd] - xl[dd];
            acc += diff * diff;
        }
        acc
    };

    // Distance to the box boundary along the feasible direction.
    let bound_u = if y[u] > 0.0 { c - state.alpha[u] } else { state.alpha[u] };
    let bound_l = if y[l] > 0.0 { state.alpha[l] } else { c - state.alpha[l] };
    let t_max = bound_u.min(bound_l);
    if t_max <= 0.0 {
        return false;
    }
    let t = if eta > 1e-300 {
        (viol / eta).min(t_max)
    } else {
        t_max
    };
    if t <= 0.0 {
        return false;
    }

    // Snap a variable exactly onto its bound when the step is clipped there.
    if t == bound_u {
        state.alpha[u] = if y[u] > 0.0 { c } else { 0.0 };
    } else {
        state.alpha[u] += y[u] * t;
    }
    if t == bound_l {
        state.alpha[l] = if y[l] > 0.0 { 0.0 } else { c };
    } else {
        state.alpha[l] -= y[l] * t;
    }

    for dd in 0..problem.dim {
        let dw = t * (xu[dd] - xl[dd]);
        state.w[dd] += dw;
    }
    for k in 0..m {
        let mut ds = 0.0;
        for dd in 0..problem.dim {
            ds += t * (xu[dd] - xl[dd]) * problem.features[k][dd];
        }
        state.scores[k] += ds;
    }
    true
}

/// Trains the inner model on the active positives plus all negatives.
///
/// Deterministic given the config seed; errors with the last objective if
/// the gap certificate is not reached within `max_epochs`.
pub fn train_inner(
    dataset: &Dataset,
    v: &IndicatorVector,
    lambda: f64,
    config: &SolverConfig,
) -> Result<LinearModel> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidConfig("lambda must be positive".to_string()));
    }
    let problem = HingeProblem::from_active(dataset, v, lambda)?;
    let (weights, bias) = solve_hinge(&problem, config)?;
    Ok(LinearModel {
        weights,
        bias,
        trained_lambda: lambda,
    })
}

/// Norm of the smallest objective subgradient consistent with the model.
///
/// Samples whose margin sits within `kink_tol` of 1 may take any hinge
/// subgradient in `[0, 1]`; the minimization over those free choices is a
/// small box-constrained least squares solved by projected gradient. The
/// returned norm covers both the weight block and the unregularized bias
/// coordinate.
pub fn kkt_residual(
    model: &LinearModel,
    dataset: &Dataset,
    v: &IndicatorVector,
    lambda: f64,
    kink_tol: f64,
) -> Result<f64> {
    let problem = HingeProblem::from_active(dataset, v, lambda)?;
    if model.dim() != problem.dim {
        return Err(Error::Dimension {
            expected: problem.dim,
            found: model.dim(),
        });
    }
    let d = problem.dim;
    // Base subgradient: [2w; 0] plus the forced hinge terms.
    let mut base = vec![0.0; d + 1];
    for dd in 0..d {
        base[dd] = 2.0 * model.weights[dd];
    }
    let mut free: Vec<usize> = Vec::new();
    for k in 0..problem.features.len() {
        let margin = problem.labels[k] * model.raw_score(problem.features[k]);
        if margin < 1.0 - kink_tol {
            for dd in 0..d {
                base[dd] -= lambda * problem.labels[k] * problem.features[k][dd];
            }
            base[d] -= lambda * problem.labels[k];
        } else if (margin - 1.0).abs() <= kink_tol {
            free.push(k);
        }
    }
    if free.is_empty() {
        return Ok(dot(&base, &base).sqrt());
    }

    // Minimize || base - sum_j theta_j a_j ||^2 over theta in [0,1]^f,
    // with a_j = lambda * y_j * [x_j; 1].
    let cols: Vec<Vec<f64>> = free
        .iter()
        .map(|&k| {
            let mut col = Vec::with_capacity(d + 1);
            for dd in 0..d {
                col.push(lambda * problem.labels[k] * problem.features[k][dd]);
            }
            col.push(lambda * problem.labels[k]);
            col
        })
        .collect();
    let lipschitz: f64 = 2.0 * cols.iter().map(|c| dot(c, c)).sum::<f64>();
    let step = if lipschitz > 0.0 { 1.0 / lipschitz } else { 0.0 };
    let mut theta = vec![0.5; cols.len()];
    let mut best = f64::INFINITY;
    let mut residual = vec![0.0; d + 1];
    for _ in 0..2000 {
        for dd in 0..=d {
            let mut r = base[dd];
            for (j, col) in cols.iter().enumerate() {
                r -= theta[j] * col[dd];
            }
            residual[dd] = r;
        }
        let norm_sq = dot(&residual, &residual);
        if norm_sq < best {
            best = norm_sq;
        }
        for (j, col) in cols.iter().enumerate() {
            let grad = -2.0 * dot(&residual, col);
            theta[j] = (theta[j] - step * grad).clamp(0.0, 1.0);
        }
    }
    Ok(best.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{Label, Sample};
    use approx::assert_abs_diff_eq;

    fn make_dataset(pos: &[&[f64]], neg: &[&[f64]]) -> Dataset {
        let mut samples = Vec::new();
        for p in pos {
            samples.push(Sample::new(p.to_vec(), Label::Positive).unwrap());
        }
        for n in neg {
            samples.push(Sample::new(n.to_vec(), Label::Negative).unwrap());
        }
        Dataset::new(samples).unwrap()
    }

    #[test]
    fn score_examples() {
        let m = LinearModel {
            weights: vec![1.0, 0.0],
            bias: 0.0,
            trained_lambda: 1.0,
        };
        let s = Sample::new(vec![0.5, 9.0], Label::Positive).unwrap();
        assert_eq!(m.score(&s).unwrap(), 0.5);

        let zero = LinearModel::zeros(2, 1.0);
        assert_eq!(zero.score(&s).unwrap(), 0.0);

        let m = LinearModel {
            weights: vec![1.0, 1.0],
            bias: -1.0,
            trained_lambda: 1.0,
        };
        let s = Sample::new(vec![1.0, 1.0], Label::Positive).unwrap();
        assert_eq!(m.score(&s).unwrap(), 1.0);

        let bad = Sample::new(vec![1.0], Label::Positive).unwrap();
        assert!(matches!(m.score(&bad), Err(Error::Dimension { .. })));
    }

    #[test]
    fn one_dimensional_margin_oracle() {
        // minimize w^2 + 10 * (hinge at +1) + 10 * (hinge at -1): the
        // subgradient vanishes exactly at w = 1, b = 0 with objective 1.
        let ds = make_dataset(&[&[1.0]], &[&[-1.0]]);
        let v = IndicatorVector::ones(1);
        let model = train_inner(&ds, &v, 10.0, &SolverConfig::default()).unwrap();
        assert_abs_diff_eq!(model.weights[0], 1.0, epsilon = 1e-6);
        assert_abs_diff_eq!(model.bias, 0.0, epsilon = 1e-9);
        let obj = model.weights_norm_sq()
            + 10.0
                * ds.samples()
                    .iter()
                    .map(|s| (1.0 - s.label.sign() * model.raw_score(&s.features)).max(0.0))
                    .sum::<f64>();
        assert_abs_diff_eq!(obj, 1.0, epsilon = 1e-6);
    }

    #[test]
    fn mirrored_data_gives_zero_bias() {
        let pos: Vec<Vec<f64>> = vec![vec![1.0, 0.5], vec![2.0, -0.3], vec![0.7, 1.1]];
        let neg: Vec<Vec<f64>> = pos.iter().map(|p| p.iter().map(|x| -x).collect()).collect();
        let ds = make_dataset(
            &pos.iter().map(|p| p.as_slice()).collect::<Vec<_>>(),
            &neg.iter().map(|n| n.as_slice()).collect::<Vec<_>>(),
        );
        let v = IndicatorVector::ones(3);
        let model = train_inner(&ds, &v, 2.0, &SolverConfig::default()).unwrap();
        assert!(model.bias.abs() <= 1e-12, "bias = {}", model.bias);
    }

    #[test]
    fn deterministic_and_seed_insensitive_objective() {
        let ds = make_dataset(
            &[&[1.0, 0.2], &[1.5, -0.4], &[0.8, 0.9], &[2.0, 0.1]],
            &[&[-1.0, 0.3], &[-1.2, -0.5], &[-0.3, -1.0], &[-2.0, 0.4]],
        );
        let v = IndicatorVector::ones(4);
        let cfg = SolverConfig::default();
        let a = train_inner(&ds, &v, 3.0, &cfg).unwrap();
        let b = train_inner(&ds, &v, 3.0, &cfg).unwrap();
        assert_eq!(a, b);

        let objective = |m: &LinearModel| {
            m.weights_norm_sq()
                + 3.0
                    * ds.samples()
                        .iter()
                        .map(|s| (1.0 - s.label.sign() * m.raw_score(&s.features)).max(0.0))
                        .sum::<f64>()
        };
        let other_seed = SolverConfig { seed: 1234, ..cfg };
        let c = train_inner(&ds, &v, 3.0, &other_seed).unwrap();
        let oa = objective(&a);
        let oc = objective(&c);
        assert!((oa - oc).abs() <= 1e-6 * oa.abs().max(1.0));

        // never worse than the trivial model
        let zero = LinearModel::zeros(2, 3.0);
        assert!(oa <= objective(&zero) + 1e-12);
    }

    #[test]
    fn negative_only_training_is_accepted() {
        let ds = make_dataset(&[&[5.0, 5.0]], &[&[-1.0, 0.0], &[0.5, -0.2]]);
        let v = IndicatorVector::zeros(1);
        let model = train_inner(&ds, &v, 4.0, &SolverConfig::default()).unwrap();
        assert_eq!(model.weights, vec![0.0, 0.0]);
        // every negative sits at or beyond its margin
        for s in ds.negatives() {
            assert!(model.raw_score(&s.features) <= -1.0 + 1e-12);
        }
    }

    #[test]
    fn kkt_residual_is_small_at_optimum_and_large_away() {
        let ds = make_dataset(
            &[&[1.0, 0.2], &[1.5, -0.4], &[0.8, 0.9]],
            &[&[-1.0, 0.3], &[-1.2, -0.5], &[-0.3, -1.0]],
        );
        let v = IndicatorVector::ones(3);
        let model = train_inner(&ds, &v, 2.0, &SolverConfig::default()).unwrap();
        let resid = kkt_residual(&model, &ds, &v, 2.0, 1e-4).unwrap();
        assert!(resid <= 1e-3, "residual {resid}");

        let off = LinearModel {
            weights: vec![3.0, -2.0],
            bias: 0.7,
            trained_lambda: 2.0,
        };
        let resid_off = kkt_residual(&off, &ds, &v, 2.0, 1e-4).unwrap();
        assert!(resid_off > 1.0, "residual {resid_off}");
    }

    #[test]
    fn non_convergence_reports_last_objective() {
        let ds = make_dataset(
            &[&[1.0, 0.2], &[0.3, 0.9], &[0.5, 0.5]],
            &[&[0.9, 0.1], &[0.4, 0.8], &[-0.1, -0.2]],
        );
        let v = IndicatorVector::ones(3);
        let cfg = SolverConfig {
            tolerance: 1e-14,
            max_epochs: 1,
            seed: 0,
        };
        match train_inner(&ds, &v, 50.0, &cfg) {
            Err(Error::Convergence { last_objective }) => assert!(last_objective.is_finite()),
            other => panic!("expected convergence error, got {other:?}"),
        }
    }

    #[test]
    fn model_json_round_trip() {
        let model = LinearModel {
            weights: vec![0.123456789012345, -2.5],
            bias: 0.25,
            trained_lambda: 3.0,
        };
        let json = serde_json::to_string(&model).unwrap();
        assert!(json.contains("\"lambda\":3.0"));
        let back: LinearModel = serde_json::from_str(&json).unwrap();
        assert_eq!(back, model);
    }
}
