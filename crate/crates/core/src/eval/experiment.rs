//! Repeated-trial protocols.
//!
//! Single crisis: each trial splits the labeled set 90/10 into train/test,
//! then the train part 90/10 into inner-train/validation. Members are fitted
//! on inner-train (regularization by stratified 5-fold CV) and every system
//! tunes its member weights and threshold on validation.
//!
//! Transfer: each trial splits the target set 90/10. The local embedding is
//! trained once on source-domain text. Systems without a validation split
//! average their members at threshold 0.5.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::metrics::{compute_metrics, ConfusionCounts};
use super::report::{EvalReport, TrialResult};
use super::split::stratified_split;
use super::EvalError;
use crate::dataset::{Corpus, DatasetRole, LabeledDataset};
use crate::embedding::{train_subword_skipgram, EmbeddingModel, SkipGramParams};
use crate::features::KeywordSet;
use crate::model::{
    choose_member_weights, fit_members, upsample_and_mix, EnsembleModel, FeatureSet, Featurizer,
    FitOptions, ModelError, ProbabilisticLinearModel, RegularizationChoice,
};
use crate::preprocess::{Label, Tokenizer};
use crate::seed::{derive_seed, STREAM_CROSS_VALIDATION, STREAM_INNER_SPLIT, STREAM_OUTER_SPLIT};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rq1System {
    Local,
    Manual,
    Wiki,
    LocalManual,
    WikiLocal,
    WikiManual,
    OurApproach,
}

impl Rq1System {
    pub const ALL: [Rq1System; 7] = [
        Rq1System::Local,
        Rq1System::Manual,
        Rq1System::Wiki,
        Rq1System::LocalManual,
        Rq1System::WikiLocal,
        Rq1System::WikiManual,
        Rq1System::OurApproach,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Rq1System::Local => "Local",
            Rq1System::Manual => "Manual",
            Rq1System::Wiki => "Wiki",
            Rq1System::LocalManual => "Local-Manual",
            Rq1System::WikiLocal => "Wiki-Local",
            Rq1System::WikiManual => "Wiki-Manual",
            Rq1System::OurApproach => "Our Approach",
        }
    }

    pub fn feature_sets(self) -> &'static [FeatureSet] {
        use FeatureSet::*;
        match self {
            Rq1System::Local => &[LocalEmbedding],
            Rq1System::Manual => &[Manual],
            Rq1System::Wiki => &[WikiEmbedding],
            Rq1System::LocalManual => &[LocalEmbedding, Manual],
            Rq1System::WikiLocal => &[LocalEmbedding, WikiEmbedding],
            Rq1System::WikiManual => &[Manual, WikiEmbedding],
            Rq1System::OurApproach => &[LocalEmbedding, Manual, WikiEmbedding],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rq2System {
    /// Wiki + manual members trained on the target split only.
    TargetLocal,
    /// Source embedding + manual + wiki members trained on the target split.
    EmbeddingTransform,
    /// As above on `u` copies of the target split.
    Upsample,
    /// `u` copies of the target split mixed with the source labeled set.
    OurApproach,
}

impl Rq2System {
    pub const ALL: [Rq2System; 4] = [
        Rq2System::TargetLocal,
        Rq2System::EmbeddingTransform,
        Rq2System::Upsample,
        Rq2System::OurApproach,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Rq2System::TargetLocal => "Target Local",
            Rq2System::EmbeddingTransform => "Embedding Transform",
            Rq2System::Upsample => "Upsample",
            Rq2System::OurApproach => "Our Approach",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub trials: usize,
    /// Trial `i` uses seed `seed + i`.
    pub seed: u64,
    pub train_fraction: f64,
    pub inner_train_fraction: f64,
    /// `seed` here is ignored; each trial derives its own.
    pub fit: FitOptions,
    pub embedding: SkipGramParams,
    pub keywords: KeywordSet,
    pub upsampling: usize,
    /// Used on up-sampled training sets, where CV folds would share copies.
    pub transfer_regularization: f64,
    pub rq1_systems: Vec<Rq1System>,
    pub rq2_systems: Vec<Rq2System>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            trials: 10,
            seed: 0,
            train_fraction: 0.9,
            inner_train_fraction: 0.9,
            fit: FitOptions::default(),
            embedding: SkipGramParams::default(),
            keywords: KeywordSet::default(),
            upsampling: 6,
            transfer_regularization: 1.0,
            rq1_systems: Rq1System::ALL.to_vec(),
            rq2_systems: Rq2System::ALL.to_vec(),
        }
    }
}

impl ExperimentConfig {
    fn trial_seed(&self, trial: usize) -> u64 {
        self.seed.wrapping_add(trial as u64)
    }

    fn fit_for(&self, trial_seed: u64) -> FitOptions {
        FitOptions {
            seed: derive_seed(trial_seed, STREAM_CROSS_VALIDATION),
            ..self.fit.clone()
        }
    }

    fn check(&self, datasets: &[&LabeledDataset]) -> Result<(), EvalError> {
        if self.trials < 2 {
            return Err(EvalError::TooFewTrials(self.trials));
        }
        if datasets.iter().any(|d| !d.has_both_classes()) {
            return Err(EvalError::MissingClass);
        }
        Ok(())
    }
}

fn train_local(text: &Corpus, params: &SkipGramParams) -> Result<Arc<EmbeddingModel>, EvalError> {
    if text.token_count() == 0 {
        return Err(ModelError::NoEmbeddingText.into());
    }
    Ok(Arc::new(train_subword_skipgram(text, params)?))
}

fn featurizer(cfg: &ExperimentConfig, local: Arc<EmbeddingModel>, wiki: Arc<EmbeddingModel>) -> Featurizer {
    Featurizer::new(Tokenizer::default(), cfg.keywords.clone(), Some(local), Some(wiki))
}

fn score_test(
    weights: &[f64],
    threshold: f64,
    probs: &[Vec<f64>],
    labels: &[Label],
) -> ConfusionCounts {
    let pairs = labels.iter().enumerate().map(|(i, &actual)| {
        let score: f64 = weights.iter().zip(probs).map(|(w, p)| w * p[i]).sum();
        (Label::from_bool(score > threshold), actual)
    });
    ConfusionCounts::from_pairs(pairs)
}

fn member_probs(
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

#[allow(clippy::too_many_arguments)]
fn result(
    trial: usize,
    seed: u64,
    system: &str,
    weights: Vec<f64>,
    threshold: f64,
    test_probs: &[Vec<f64>],
    test: &LabeledDataset,
    train_size: usize,
) -> Result<TrialResult, EvalError> {
    let confusion = score_test(&weights, threshold, test_probs, &test.labels());
    Ok(TrialResult {
        trial,
        seed,
        system: system.to_string(),
        confusion,
        metrics: compute_metrics(&confusion)?,
        weights,
        threshold,
        train_size,
    })
}

/// Single-crisis protocol. The local embedding is trained once on
/// `background` with `config.embedding`.
pub fn run_rq1_experiment(
    labeled: &LabeledDataset,
    background: &Corpus,
    wiki: Arc<EmbeddingModel>,
    config: &ExperimentConfig,
) -> Result<EvalReport, EvalError> {
    config.check(&[labeled])?;
    let local = train_local(background, &config.embedding)?;
    run_rq1_with_embeddings(labeled, local, wiki, config)
}

/// Single-crisis protocol with an already-trained local embedding.
pub fn run_rq1_with_embeddings(
    labeled: &LabeledDataset,
    local: Arc<EmbeddingModel>,
    wiki: Arc<EmbeddingModel>,
    config: &ExperimentConfig,
) -> Result<EvalReport, EvalError> {
    config.check(&[labeled])?;
    if config.rq1_systems.is_empty() {
        return Err(EvalError::NoSystems);
    }
    let featurizer = featurizer(config, local, wiki);
    let mut results = Vec::new();
    for trial in 0..config.trials {
        let seed = config.trial_seed(trial);
        let (train, test) =
            stratified_split(labeled, config.train_fraction, derive_seed(seed, STREAM_OUTER_SPLIT))?;
        let (inner, mut validation) =
            stratified_split(&train, config.inner_train_fraction, derive_seed(seed, STREAM_INNER_SPLIT))?;
        validation.role = DatasetRole::Validation;
        let all_sets = FeatureSet::ALL;
        let members = fit_members(&inner, &featurizer, &all_sets, &config.fit_for(seed))?;
        let val_probs = member_probs(&members, &featurizer, &validation)?;
        let test_probs = member_probs(&members, &featurizer, &test)?;
        let val_labels = validation.labels();
        for &system in &config.rq1_systems {
            let pick: Vec<usize> = system
                .feature_sets()
                .iter()
                .map(|s| all_sets.iter().position(|a| a == s).expect("known set"))
                .collect();
            let vp: Vec<Vec<f64>> = pick.iter().map(|&i| val_probs[i].clone()).collect();
            let tp: Vec<Vec<f64>> = pick.iter().map(|&i| test_probs[i].clone()).collect();
            let choice = choose_member_weights(&vp, &val_labels, config.fit.weight_step)?;
            results.push(result(
                trial,
                seed,
                system.name(),
                choice.weights,
                choice.threshold,
                &tp,
                &test,
                inner.len(),
            )?);
        }
    }
    let names: Vec<String> = config.rq1_systems.iter().map(|s| s.name().to_string()).collect();
    EvalReport::assemble("rq1", &names, Some(Rq1System::Local.name()), results)
}

/// Cross-crisis protocol. The source embedding is trained once on the text
/// of `source_corpus` and `source_labeled`.
pub fn run_rq2_experiment(
    source_labeled: &LabeledDataset,
    source_corpus: &Corpus,
    target_labeled: &LabeledDataset,
    wiki: Arc<EmbeddingModel>,
    config: &ExperimentConfig,
) -> Result<EvalReport, EvalError> {
    config.check(&[source_labeled, target_labeled])?;
    let mut text = source_corpus.clone();
    text.extend_from(source_labeled);
    let local = train_local(&text, &config.embedding)?;
    run_rq2_with_embeddings(source_labeled, target_labeled, local, wiki, config)
}

/// Cross-crisis protocol with an already-trained source embedding.
pub fn run_rq2_with_embeddings(
    source_labeled: &LabeledDataset,
    target_labeled: &LabeledDataset,
    local: Arc<EmbeddingModel>,
    wiki: Arc<EmbeddingModel>,
    config: &ExperimentConfig,
) -> Result<EvalReport, EvalError> {
    config.check(&[source_labeled, target_labeled])?;
    if config.rq2_systems.is_empty() {
        return Err(EvalError::NoSystems);
    }
    if config.upsampling == 0 {
        return Err(ModelError::InvalidUpsampling.into());
    }
    let featurizer = featurizer(config, local, wiki);
    let empty = LabeledDataset::new(Vec::new(), &Tokenizer::default(), DatasetRole::SourceLabeled)
        .expect("empty dataset is valid");
    let mut results = Vec::new();
    for trial in 0..config.trials {
        let seed = config.trial_seed(trial);
        let (train, test) =
            stratified_split(target_labeled, config.train_fraction, derive_seed(seed, STREAM_OUTER_SPLIT))?;
        let cv = config.fit_for(seed);
        let fixed = FitOptions {
            regularization: RegularizationChoice::Fixed(config.transfer_regularization),
            ..cv.clone()
        };
        for &system in &config.rq2_systems {
            let (data, sets, opts): (LabeledDataset, &[FeatureSet], &FitOptions) = match system {
                Rq2System::TargetLocal => (train.clone(), &[FeatureSet::Manual, FeatureSet::WikiEmbedding], &cv),
                Rq2System::EmbeddingTransform => (train.clone(), &FeatureSet::ALL, &cv),
                Rq2System::Upsample => (upsample_and_mix(&train, &empty, config.upsampling)?, &FeatureSet::ALL, &fixed),
                Rq2System::OurApproach => (
                    upsample_and_mix(&train, source_labeled, config.upsampling)?,
                    &FeatureSet::ALL,
                    &fixed,
                ),
            };
            let members = fit_members(&data, &featurizer, sets, opts)?;
            let k = members.len();
            let model = EnsembleModel::new(featurizer.clone(), members, vec![1.0 / k as f64; k], 0.5)?;
            let probs = member_probs(model.members(), &featurizer, &test)?;
            results.push(result(
                trial,
                seed,
                system.name(),
                model.weights().to_vec(),
                model.threshold(),
                &probs,
                &test,
                data.len(),
            )?);
        }
    }
    let names: Vec<String> = config.rq2_systems.iter().map(|s| s.name().to_string()).collect();
    EvalReport::assemble("rq2", &names, Some(Rq2System::TargetLocal.name()), results)
}
