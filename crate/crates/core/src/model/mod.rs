//! Per-feature-set linear classifiers and their weighted ensemble.

mod ensemble;
mod linear;
mod persist;
mod transfer;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use ensemble::{
    choose_member_weights, ensemble_score, fit_ensemble, fit_members, select_regularization,
    select_threshold, simplex_grid, EnsembleModel, FitOptions, RegularizationChoice, WeightChoice,
};
pub use linear::{
    predict_proba, train_probabilistic_linear, train_probabilistic_linear_with, FitSummary,
    LinearConfig, Link, ProbabilisticLinearModel,
};
pub use persist::{
    load_embedding_file, load_ensemble, save_ensemble, EmbeddingRef, ENSEMBLE_FORMAT_VERSION,
};
pub use transfer::{transfer_train, transfer_train_with_embedding, upsample_and_mix, TransferOutcome};

use crate::dataset::LabeledDataset;
use crate::embedding::{EmbeddingError, EmbeddingModel};
use crate::features::KeywordSet;
use crate::preprocess::{Message, TokenizedMessage, Tokenizer};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("training data has a single class; check the split is stratified")]
    SingleClass,
    #[error("need at least 2 training rows, got {0}")]
    TooFewSamples(usize),
    #[error("feature dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("{rows} feature rows but {labels} labels")]
    LengthMismatch { rows: usize, labels: usize },
    #[error("regularization must be finite and non-negative, got {0}")]
    InvalidRegularization(f64),
    #[error("train and validation share ids: {0:?}")]
    Overlap(Vec<String>),
    #[error("no scores to threshold")]
    EmptyScores,
    #[error("feature set `{0}` needs an embedding model that was not provided")]
    MissingEmbedding(FeatureSet),
    #[error("ensemble needs at least one member")]
    NoMembers,
    #[error("weight grid step must divide 1 evenly, got {0}")]
    InvalidStep(f64),
    #[error("up-sampling factor must be at least 1")]
    InvalidUpsampling,
    #[error("no text to train the local embedding on")]
    NoEmbeddingText,
    #[error("target dataset is empty")]
    EmptyTarget,
    #[error("embedding: {0}")]
    Embedding(#[from] EmbeddingError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("model file: {0}")]
    Format(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSet {
    Manual,
    LocalEmbedding,
    WikiEmbedding,
}

impl FeatureSet {
    pub const ALL: [FeatureSet; 3] = [
        FeatureSet::LocalEmbedding,
        FeatureSet::Manual,
        FeatureSet::WikiEmbedding,
    ];
}

impl fmt::Display for FeatureSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FeatureSet::Manual => "manual",
            FeatureSet::LocalEmbedding => "local_embedding",
            FeatureSet::WikiEmbedding => "wiki_embedding",
        })
    }
}

/// One feature row per message, all rows the same length.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub feature_set: FeatureSet,
    dim: usize,
    data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn from_rows(feature_set: FeatureSet, rows: Vec<Vec<f64>>) -> Result<Self, ModelError> {
        let dim = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * dim);
        for r in rows {
            if r.len() != dim {
                return Err(ModelError::DimensionMismatch {
                    expected: dim,
                    found: r.len(),
                });
            }
            data.extend(r);
        }
        Ok(FeatureMatrix {
            feature_set,
            dim,
            data,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rows(&self) -> usize {
        self.data.len().checked_div(self.dim).unwrap_or(0)
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn select(&self, indices: &[usize]) -> FeatureMatrix {
        let mut data = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        FeatureMatrix {
            feature_set: self.feature_set,
            dim: self.dim,
            data,
        }
    }
}

/// Turns messages into the rows of each feature set.
#[derive(Debug, Clone, Default)]
pub struct Featurizer {
    pub tokenizer: Tokenizer,
    pub keywords: KeywordSet,
    pub local: Option<Arc<EmbeddingModel>>,
    pub wiki: Option<Arc<EmbeddingModel>>,
}

impl Featurizer {
    pub fn new(
        tokenizer: Tokenizer,
        keywords: KeywordSet,
        local: Option<Arc<EmbeddingModel>>,
        wiki: Option<Arc<EmbeddingModel>>,
    ) -> Self {
        Featurizer {
            tokenizer,
            keywords,
            local,
            wiki,
        }
    }

    pub fn available(&self, set: FeatureSet) -> bool {
        match set {
            FeatureSet::Manual => true,
            FeatureSet::LocalEmbedding => self.local.is_some(),
            FeatureSet::WikiEmbedding => self.wiki.is_some(),
        }
    }

    pub fn dim(&self, set: FeatureSet) -> Result<usize, ModelError> {
        Ok(match set {
            FeatureSet::Manual => self.keywords.dim(),
            _ => self.embedding(set)?.dim(),
        })
    }

    fn embedding(&self, set: FeatureSet) -> Result<&EmbeddingModel, ModelError> {
        let model = match set {
            FeatureSet::LocalEmbedding => self.local.as_deref(),
            FeatureSet::WikiEmbedding => self.wiki.as_deref(),
            FeatureSet::Manual => None,
        };
        model.ok_or(ModelError::MissingEmbedding(set))
    }

    pub fn features(&self, set: FeatureSet, tm: &TokenizedMessage) -> Result<Vec<f64>, ModelError> {
        match set {
            FeatureSet::Manual => Ok(self.keywords.extract(tm).to_f64()),
            _ => Ok(self
                .embedding(set)?
                .sentence_vector(tm)
                .into_iter()
                .map(f64::from)
                .collect()),
        }
    }

    pub fn tokenize(&self, message: &Message) -> TokenizedMessage {
        self.tokenizer.tokenize(message)
    }

    pub fn matrix<'a>(
        &self,
        set: FeatureSet,
        messages: impl IntoIterator<Item = &'a TokenizedMessage>,
    ) -> Result<FeatureMatrix, ModelError> {
        let dim = self.dim(set)?;
        let mut data = Vec::new();
        for tm in messages {
            data.extend(self.features(set, tm)?);
        }
        Ok(FeatureMatrix {
            feature_set: set,
            dim,
            data,
        })
    }

    pub fn dataset_matrix(&self, set: FeatureSet, d: &LabeledDataset) -> Result<FeatureMatrix, ModelError> {
        self.matrix(set, d.tokenized())
    }
}
