//! Weighted ensemble of per-feature-set classifiers.
//!
//! Member weights come from an exhaustive search over the probability
//! simplex on a fixed grid (plus the exact uniform point), scored by
//! validation F-measure at each weighting's own best threshold. Ties go to
//! the weighting closest to uniform, then to the lexicographically smallest.

use std::cmp::Ordering;
use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::linear::{train_probabilistic_linear_with, LinearConfig, ProbabilisticLinearModel};
use super::{FeatureMatrix, FeatureSet, Featurizer, ModelError};
use crate::dataset::LabeledDataset;
use crate::eval::{stratified_folds, ConfusionCounts};
use crate::preprocess::{Label, Message, TokenizedMessage};

/// Fitted ensemble: members, convex weights, decision threshold and the
/// featurizer that feeds each member.
#[derive(Debug, Clone)]
pub struct EnsembleModel {
    pub featurizer: Featurizer,
    members: Vec<ProbabilisticLinearModel>,
    weights: Vec<f64>,
    threshold: f64,
}

impl EnsembleModel {
    pub fn new(
        featurizer: Featurizer,
        members: Vec<ProbabilisticLinearModel>,
        weights: Vec<f64>,
        threshold: f64,
    ) -> Result<Self, ModelError> {
        if members.is_empty() {
            return Err(ModelError::NoMembers);
        }
        if weights.len() != members.len() {
            return Err(ModelError::DimensionMismatch {
                expected: members.len(),
                found: weights.len(),
            });
        }
        let sum: f64 = weights.iter().sum();
        if weights.iter().any(|w| !(*w >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
            return Err(ModelError::Format(format!(
                "member weights must be non-negative and sum to 1, got {weights:?}"
            )));
        }
        if !(0.0..=1.0).contains(&threshold) {
            return Err(ModelError::Format(format!("threshold {threshold} outside [0, 1]")));
        }
        for m in &members {
            let dim = featurizer.dim(m.feature_set)?;
            if dim != m.dim() {
                return Err(ModelError::DimensionMismatch {
                    expected: dim,
                    found: m.dim(),
                });
            }
        }
        Ok(EnsembleModel {
            featurizer,
            members,
            weights,
            threshold,
        })
    }

    pub fn members(&self) -> &[ProbabilisticLinearModel] {
        &self.members
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn feature_sets(&self) -> Vec<FeatureSet> {
        self.members.iter().map(|m| m.feature_set).collect()
    }

    pub fn member_probabilities(&self, tm: &TokenizedMessage) -> Vec<f64> {
        self.members
            .iter()
            .map(|m| {
                let x = self
                    .featurizer
                    .features(m.feature_set, tm)
                    .expect("feature sets checked at construction");
                m.predict_proba(&x).expect("dimensions checked at construction")
            })
            .collect()
    }

    pub fn score_tokens(&self, tm: &TokenizedMessage) -> f64 {
        combine(&self.weights, &self.member_probabilities(tm))
    }

    pub fn score(&self, message: &Message) -> f64 {
        self.score_tokens(&self.featurizer.tokenize(message))
    }

    /// Urgent iff the score is strictly above the threshold.
    pub fn verdict(&self, score: f64) -> Label {
        Label::from_bool(score > self.threshold)
    }

    pub fn classify(&self, message: &Message) -> Label {
        self.verdict(self.score(message))
    }
}

pub fn ensemble_score(e: &EnsembleModel, message: &Message) -> f64 {
    e.score(message)
}

fn combine(weights: &[f64], probs: &[f64]) -> f64 {
    weights.iter().zip(probs).map(|(w, p)| w * p).sum()
}

/// How member regularization strength is picked.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegularizationChoice {
    Fixed(f64),
    /// Stratified k-fold cross-validation minimizing held-out log-loss.
    CrossValidate { grid: Vec<f64>, folds: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    pub regularization: RegularizationChoice,
    pub linear: LinearConfig,
    pub weight_step: f64,
    pub seed: u64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            regularization: RegularizationChoice::CrossValidate {
                grid: vec![0.01, 0.1, 1.0, 10.0],
                folds: 5,
            },
            linear: LinearConfig::default(),
            weight_step: 0.05,
            seed: 0,
        }
    }
}

/// Picks the grid value with the lowest mean held-out log-loss; earlier grid
/// entries win ties. When a class is too small for even 2 folds the grid
/// value closest to 1 is used.
pub fn select_regularization(
    x: &FeatureMatrix,
    y: &[Label],
    grid: &[f64],
    folds: usize,
    seed: u64,
    linear: &LinearConfig,
) -> Result<f64, ModelError> {
    let Some(&first) = grid.first() else {
        return Err(ModelError::InvalidRegularization(f64::NAN));
    };
    if grid.len() == 1 {
        return Ok(first);
    }
    let smallest_class = y
        .iter()
        .filter(|l| l.is_urgent())
        .count()
        .min(y.iter().filter(|l| !l.is_urgent()).count());
    let k = folds.min(smallest_class);
    if k < 2 {
        return Ok(*grid
            .iter()
            .min_by(|a, b| (*a - 1.0).abs().total_cmp(&(*b - 1.0).abs()))
            .expect("grid non-empty"));
    }
    let held_out = stratified_folds(y, k, seed).map_err(|_| ModelError::SingleClass)?;
    let mut best = (f64::INFINITY, first);
    for &reg in grid {
        let mut loss = 0.0;
        for fold in &held_out {
            let mut in_fold = vec![false; y.len()];
            fold.iter().for_each(|&i| in_fold[i] = true);
            let train_idx: Vec<usize> = (0..y.len()).filter(|&i| !in_fold[i]).collect();
            let train_y: Vec<Label> = train_idx.iter().map(|&i| y[i]).collect();
            let (model, _) = train_probabilistic_linear_with(&x.select(&train_idx), &train_y, reg, linear)?;
            for &i in fold {
                let p = model.predict_proba(x.row(i))?.clamp(1e-12, 1.0 - 1e-12);
                loss -= if y[i].is_urgent() { p.ln() } else { (1.0 - p).ln() };
            }
        }
        let mean = loss / y.len() as f64;
        if mean < best.0 {
            best = (mean, reg);
        }
    }
    Ok(best.1)
}

/// Trains one member per feature set on `train`.
pub fn fit_members(
    train: &LabeledDataset,
    featurizer: &Featurizer,
    sets: &[FeatureSet],
    opts: &FitOptions,
) -> Result<Vec<ProbabilisticLinearModel>, ModelError> {
    let y = train.labels();
    sets.iter()
        .map(|&set| {
            let x = featurizer.dataset_matrix(set, train)?;
            let reg = match &opts.regularization {
                RegularizationChoice::Fixed(r) => *r,
                RegularizationChoice::CrossValidate { grid, folds } => {
                    select_regularization(&x, &y, grid, *folds, opts.seed, &opts.linear)?
                }
            };
            train_probabilistic_linear_with(&x, &y, reg, &opts.linear).map(|(m, _)| m)
        })
        .collect()
}

/// Trains members on `train`, then tunes member weights and the threshold
/// on `validation`.
pub fn fit_ensemble(
    train: &LabeledDataset,
    validation: &LabeledDataset,
    featurizer: &Featurizer,
    sets: &[FeatureSet],
    opts: &FitOptions,
) -> Result<EnsembleModel, ModelError> {
    let train_ids: HashSet<&str> = train.ids().collect();
    let overlap: Vec<String> = validation
        .ids()
        .filter(|id| train_ids.contains(id))
        .map(str::to_string)
        .collect();
    if !overlap.is_empty() {
        return Err(ModelError::Overlap(overlap));
    }
    if !validation.has_both_classes() {
        return Err(ModelError::SingleClass);
    }
    if sets.is_empty() {
        return Err(ModelError::NoMembers);
    }
    let members = fit_members(train, featurizer, sets, opts)?;
    let probs = validation_probabilities(&members, featurizer, validation)?;
    let choice = choose_member_weights(&probs, &validation.labels(), opts.weight_step)?;
    EnsembleModel::new(featurizer.clone(), members, choice.weights, choice.threshold)
}

/// Member-major probabilities: `out[m][i]` is member `m` on message `i`.
pub(crate) fn validation_probabilities(
    members: &[ProbabilisticLinearModel],
    featurizer: &Featurizer,
    data: &LabeledDataset,
) -> Result<Vec<Vec<f64>>, ModelError> {
    members
        .iter()
        .map(|m| {
            let x = featurizer.dataset_matrix(m.feature_set, data)?;
            (0..x.rows()).map(|i| m.predict_proba(x.row(i))).collect()
        })
        .collect()
}

/// Grid points of the simplex with `k` coordinates in multiples of `step`,
/// in lexicographic order.
pub fn simplex_grid(k: usize, step: f64) -> Result<Vec<Vec<f64>>, ModelError> {
    let units = grid_units(step)?;
    Ok(compositions(k, units)
        .into_iter()
        .map(|c| c.iter().map(|&u| u as f64 / units as f64).collect())
        .collect())
}

fn grid_units(step: f64) -> Result<u32, ModelError> {
    if !(step > 0.0 && step <= 1.0) {
        return Err(ModelError::InvalidStep(step));
    }
    let units = (1.0 / step).round();
    if (units * step - 1.0).abs() > 1e-9 {
        return Err(ModelError::InvalidStep(step));
    }
    Ok(units as u32)
}

fn compositions(k: usize, total: u32) -> Vec<Vec<u32>> {
    if k == 0 {
        return Vec::new();
    }
    if k == 1 {
        return vec![vec![total]];
    }
    let mut out = Vec::new();
    for first in 0..=total {
        for mut rest in compositions(k - 1, total - first) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

/// Outcome of the weight search.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightChoice {
    pub weights: Vec<f64>,
    pub threshold: f64,
    pub f_measure: f64,
}

pub fn choose_member_weights(
    member_probs: &[Vec<f64>],
    labels: &[Label],
    step: f64,
) -> Result<WeightChoice, ModelError> {
    let k = member_probs.len();
    if k == 0 {
        return Err(ModelError::NoMembers);
    }
    for p in member_probs {
        if p.len() != labels.len() {
            return Err(ModelError::LengthMismatch {
                rows: p.len(),
                labels: labels.len(),
            });
        }
    }
    let units = grid_units(step)?;
    // (weights, squared distance to uniform in grid units * k)
    let mut candidates: Vec<(Vec<f64>, u64)> = vec![(vec![1.0 / k as f64; k], 0)];
    for c in compositions(k, units) {
        let dist = c
            .iter()
            .map(|&u| {
                let d = (k as i64) * u as i64 - units as i64;
                (d * d) as u64
            })
            .sum::<u64>();
        candidates.push((c.iter().map(|&u| u as f64 / units as f64).collect(), dist));
    }

    let mut best: Option<(WeightChoice, u64)> = None;
    let mut scores = vec![(0.0, Label::NonUrgent); labels.len()];
    for (weights, dist) in candidates {
        for (i, s) in scores.iter_mut().enumerate() {
            let probs: Vec<f64> = member_probs.iter().map(|p| p[i]).collect();
            *s = (combine(&weights, &probs), labels[i]);
        }
        let (threshold, f) = threshold_search(&scores)?;
        let better = match &best {
            None => true,
            Some((b, bdist)) => match f.total_cmp(&b.f_measure) {
                Ordering::Greater => true,
                Ordering::Less => false,
                Ordering::Equal => match dist.cmp(bdist) {
                    Ordering::Less => true,
                    Ordering::Greater => false,
                    Ordering::Equal => lexicographic(&weights, &b.weights) == Ordering::Less,
                },
            },
        };
        if better {
            best = Some((
                WeightChoice {
                    weights,
                    threshold,
                    f_measure: f,
                },
                dist,
            ));
        }
    }
    Ok(best.expect("at least the uniform candidate").0)
}

fn lexicographic(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

/// Threshold maximizing F-measure over the midpoints between adjacent
/// distinct scores and 0.5. Ties go to the candidate nearest 0.5, then the
/// smaller one.
pub fn select_threshold(scores: &[(f64, Label)]) -> Result<f64, ModelError> {
    threshold_search(scores).map(|(t, _)| t)
}

fn threshold_search(scores: &[(f64, Label)]) -> Result<(f64, f64), ModelError> {
    if scores.is_empty() {
        return Err(ModelError::EmptyScores);
    }
    let positives = scores.iter().filter(|(_, l)| l.is_urgent()).count();
    if positives == 0 || positives == scores.len() {
        return Err(ModelError::SingleClass);
    }
    let mut sorted: Vec<(f64, bool)> = scores.iter().map(|&(s, l)| (s, l.is_urgent())).collect();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    // suffix[i] = (positives, negatives) among sorted[i..]
    let mut suffix = vec![(0u64, 0u64); sorted.len() + 1];
    for i in (0..sorted.len()).rev() {
        let (p, n) = suffix[i + 1];
        suffix[i] = if sorted[i].1 { (p + 1, n) } else { (p, n + 1) };
    }
    let total_pos = positives as u64;

    let mut candidates: Vec<f64> = vec![0.5];
    for w in sorted.windows(2) {
        if w[0].0 < w[1].0 {
            candidates.push(0.5 * (w[0].0 + w[1].0));
        }
    }

    let mut best: (f64, f64) = (0.5, f64::NEG_INFINITY);
    for t in candidates {
        let idx = sorted.partition_point(|&(s, _)| s <= t);
        let (tp, fp) = suffix[idx];
        let f = ConfusionCounts::new(tp, fp, 0, total_pos - tp).f_measure();
        let better = match f.total_cmp(&best.1) {
            Ordering::Greater => true,
            Ordering::Less => false,
            Ordering::Equal => {
                let (dt, db) = ((t - 0.5).abs(), (best.0 - 0.5).abs());
                dt < db || (dt == db && t < best.0)
            }
        };
        if better {
            best = (t, f);
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use Label::*;

    #[test]
    fn grid_has_231_points_for_three_members() {
        let g = simplex_grid(3, 0.05).unwrap();
        assert_eq!(g.len(), 231);
        assert!(g.iter().all(|w| (w.iter().sum::<f64>() - 1.0).abs() < 1e-9));
        assert_eq!(simplex_grid(2, 0.05).unwrap().len(), 21);
        assert!(matches!(simplex_grid(3, 0.3), Err(ModelError::InvalidStep(_))));
    }

    #[test]
    fn separated_scores_reach_perfect_f() {
        let scores = [
            (0.1, NonUrgent),
            (0.2, NonUrgent),
            (0.05, NonUrgent),
            (0.8, Urgent),
            (0.95, Urgent),
        ];
        let (t, f) = threshold_search(&scores).unwrap();
        assert!(t > 0.2 && t < 0.8);
        assert_eq!(f, 1.0);
        // 0.5 is a maximizer here, so the tie-break keeps it
        assert_eq!(t, 0.5);
    }

    #[test]
    fn identical_scores_fall_back_to_one_half() {
        let scores = [(0.3, Urgent), (0.3, NonUrgent), (0.3, Urgent)];
        assert_eq!(select_threshold(&scores).unwrap(), 0.5);
    }

    #[test]
    fn threshold_errors() {
        assert!(matches!(select_threshold(&[]), Err(ModelError::EmptyScores)));
        assert!(matches!(
            select_threshold(&[(0.2, NonUrgent), (0.4, NonUrgent)]),
            Err(ModelError::SingleClass)
        ));
    }

    #[test]
    fn threshold_is_strict() {
        // Midpoint candidates sit strictly between scores; the winner must
        // flag exactly the two highest.
        let scores = [(0.6, NonUrgent), (0.7, Urgent), (0.9, Urgent)];
        let t = select_threshold(&scores).unwrap();
        assert!((t - 0.65).abs() < 1e-12);
    }

    #[test]
    fn perfect_member_gets_at_least_equal_weight() {
        let labels = [Urgent, NonUrgent, Urgent, NonUrgent, Urgent, NonUrgent];
        let a = vec![0.9, 0.1, 0.8, 0.2, 0.7, 0.3];
        let flat = vec![0.5; 6];
        let choice = choose_member_weights(&[a, flat.clone(), flat], &labels, 0.05).unwrap();
        assert_eq!(choice.f_measure, 1.0);
        assert!(choice.weights[0] >= choice.weights[1] && choice.weights[0] >= choice.weights[2]);
    }

    #[test]
    fn identical_members_get_uniform_weights() {
        let labels = [Urgent, NonUrgent, Urgent, NonUrgent];
        let p = vec![0.6, 0.4, 0.3, 0.7];
        let choice = choose_member_weights(&[p.clone(), p.clone(), p], &labels, 0.05).unwrap();
        assert_eq!(choice.weights, vec![1.0 / 3.0; 3]);
    }

    #[test]
    fn degenerate_weights_pick_single_member() {
        let labels = [Urgent, NonUrgent, Urgent, NonUrgent];
        let good = vec![0.9, 0.1, 0.6, 0.4];
        let bad = vec![0.1, 0.9, 0.4, 0.6];
        let choice = choose_member_weights(&[bad, good], &labels, 0.05).unwrap();
        assert_eq!(choice.f_measure, 1.0);
        assert!(choice.weights[1] > choice.weights[0]);
    }
}
