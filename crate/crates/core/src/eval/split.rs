//! Seeded stratified splits and folds.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::EvalError;
use crate::dataset::{DatasetRole, LabeledDataset};
use crate::preprocess::Label;

fn class_indices(labels: &[Label], rng: &mut ChaCha8Rng) -> [Vec<usize>; 2] {
    let mut urgent = Vec::new();
    let mut non_urgent = Vec::new();
    for (i, l) in labels.iter().enumerate() {
        if l.is_urgent() {
            urgent.push(i);
        } else {
            non_urgent.push(i);
        }
    }
    urgent.shuffle(rng);
    non_urgent.shuffle(rng);
    [urgent, non_urgent]
}

/// Index form of [`stratified_split`]: per class, `round(fraction * count)`
/// shuffled members go to the first part. Both parts keep input order.
pub fn stratified_split_indices(
    labels: &[Label],
    fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>), EvalError> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(EvalError::InvalidFraction(fraction));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let classes = class_indices(labels, &mut rng);
    if classes.iter().any(Vec::is_empty) {
        return Err(EvalError::MissingClass);
    }
    let mut first = Vec::new();
    let mut second = Vec::new();
    for members in classes {
        let take = (fraction * members.len() as f64).round() as usize;
        first.extend_from_slice(&members[..take]);
        second.extend_from_slice(&members[take..]);
    }
    first.sort_unstable();
    second.sort_unstable();
    Ok((first, second))
}

pub fn stratified_split(
    d: &LabeledDataset,
    fraction: f64,
    seed: u64,
) -> Result<(LabeledDataset, LabeledDataset), EvalError> {
    let (a, b) = stratified_split_indices(&d.labels(), fraction, seed)?;
    Ok((d.subset(&a, DatasetRole::Train), d.subset(&b, DatasetRole::Test)))
}

/// Stratified k-fold assignment: returns the held-out indices of each fold.
/// Each class is shuffled then dealt round-robin, so fold class counts
/// differ by at most one.
pub fn stratified_folds(labels: &[Label], k: usize, seed: u64) -> Result<Vec<Vec<usize>>, EvalError> {
    if k < 2 {
        return Err(EvalError::InvalidFolds(k));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let classes = class_indices(labels, &mut rng);
    if classes.iter().any(|c| c.len() < k) {
        return Err(EvalError::TooFewForFolds { folds: k });
    }
    let mut folds = vec![Vec::new(); k];
    let mut next = 0usize;
    for members in classes {
        for i in members {
            folds[next % k].push(i);
            next += 1;
        }
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}
