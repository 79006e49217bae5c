//! Training for a new crisis from a labeled source crisis.
//!
//! The local embedding is trained on source-domain text, the small target
//! set is repeated `u` times and mixed with the source labeled set, and the
//! three members are averaged with a fixed 0.5 threshold (no validation
//! split is held out).

use std::sync::Arc;

use super::ensemble::{fit_members, EnsembleModel, FitOptions};
use super::{FeatureSet, Featurizer, ModelError};
use crate::dataset::{Corpus, DatasetRole, LabeledDataset};
use crate::embedding::{train_subword_skipgram, EmbeddingModel, SkipGramParams};
use crate::preprocess::Label;

/// `u` whole copies of `target` followed by `source`.
pub fn upsample_and_mix(
    target: &LabeledDataset,
    source: &LabeledDataset,
    u: usize,
) -> Result<LabeledDataset, ModelError> {
    if u == 0 {
        return Err(ModelError::InvalidUpsampling);
    }
    let mut items = Vec::with_capacity(u * target.len() + source.len());
    for _ in 0..u {
        items.extend_from_slice(target.items());
    }
    items.extend_from_slice(source.items());
    Ok(LabeledDataset::from_items(items, DatasetRole::Train))
}

#[derive(Debug, Clone)]
pub struct TransferOutcome {
    pub ensemble: EnsembleModel,
    /// The source-domain embedding the local member was trained with.
    pub local_embedding: Arc<EmbeddingModel>,
    pub train_size: usize,
    pub train_urgent: usize,
}

/// Full transfer pipeline, including training the source embedding on the
/// text of `source_corpus` and `source_labeled`.
#[allow(clippy::too_many_arguments)]
pub fn transfer_train(
    target: &LabeledDataset,
    source_labeled: &LabeledDataset,
    source_corpus: &Corpus,
    featurizer: &Featurizer,
    embedding_params: &SkipGramParams,
    u: usize,
    opts: &FitOptions,
) -> Result<TransferOutcome, ModelError> {
    if u == 0 {
        return Err(ModelError::InvalidUpsampling);
    }
    if target.is_empty() {
        return Err(ModelError::EmptyTarget);
    }
    let mut text = source_corpus.clone();
    text.extend_from(source_labeled);
    if text.token_count() == 0 {
        return Err(ModelError::NoEmbeddingText);
    }
    let local = Arc::new(train_subword_skipgram(&text, embedding_params)?);
    let featurizer = Featurizer {
        local: Some(local),
        ..featurizer.clone()
    };
    transfer_train_with_embedding(target, source_labeled, &featurizer, u, opts)
}

/// The same pipeline with an already-trained source embedding in
/// `featurizer.local`.
pub fn transfer_train_with_embedding(
    target: &LabeledDataset,
    source_labeled: &LabeledDataset,
    featurizer: &Featurizer,
    u: usize,
    opts: &FitOptions,
) -> Result<TransferOutcome, ModelError> {
    if target.is_empty() {
        return Err(ModelError::EmptyTarget);
    }
    let local = featurizer
        .local
        .clone()
        .ok_or(ModelError::MissingEmbedding(FeatureSet::LocalEmbedding))?;
    let train = upsample_and_mix(target, source_labeled, u)?;
    let sets: Vec<FeatureSet> = FeatureSet::ALL
        .into_iter()
        .filter(|&s| featurizer.available(s))
        .collect();
    let members = fit_members(&train, featurizer, &sets, opts)?;
    let k = members.len();
    let ensemble = EnsembleModel::new(featurizer.clone(), members, vec![1.0 / k as f64; k], 0.5)?;
    Ok(TransferOutcome {
        ensemble,
        local_embedding: local,
        train_size: train.len(),
        train_urgent: train.count(Label::Urgent),
    })
}
