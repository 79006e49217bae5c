//! Pipeline configuration, read from TOML.
//!
//! Every section and field is optional; omitted values take the defaults
//! below. Unknown keys are rejected. A full file with the defaults:
//!
//! ```toml
//! seed = 0                      # any u64; all subsystem seeds derive from it
//!
//! [tokenizer]
//! drop_prefixes = ["@"]
//! drop_tokens = ["rt"]
//! url_prefixes = ["http://", "https://", "www."]
//! hashtags = "keep_word"        # or "drop"
//!
//! [features]
//! keywords = ["hit", "help", "kill", "injure", "strand",
//!             "miss", "urgent", "die", "need", "food"]   # non-empty, lowercase
//!
//! [embedding]
//! dim = 20                      # 1..=1024
//! window = 5                    # 1..=50
//! negatives = 5                 # 1..=100
//! epochs = 5                    # 1..=1000
//! learning_rate = 0.05          # (0, 1]
//! min_n = 3                     # 1 <= min_n <= max_n <= 10
//! max_n = 6
//! buckets = 2000000             # 1..=10000000
//! min_count = 1                 # >= 1
//! threads = 1                   # 1..=256; 1 is deterministic
//!
//! [model]
//! regularization_grid = [0.01, 0.1, 1.0, 10.0]   # non-empty, each in [0, 1e6]
//! cv_folds = 5                  # 2..=20
//! weight_step = 0.05            # 1/step must be an integer in 1..=100
//! link = "logistic"             # or "least_squares"
//! max_iter = 100                # 1..=10000
//! tolerance = 1e-6              # (0, 1)
//!
//! [transfer]
//! upsampling = 6                # 1..=1000
//! regularization = 1.0          # [0, 1e6]
//!
//! [active]
//! seed_size = 100               # >= 1, <= total
//! batch_size = 100              # >= 1
//! total = 400
//!
//! [evaluation]
//! trials = 10                   # 2..=1000
//! train_fraction = 0.9          # (0, 1)
//! inner_train_fraction = 0.9    # (0, 1)
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::active::{Schedule, SessionConfig};
use crate::embedding::SkipGramParams;
use crate::eval::ExperimentConfig;
use crate::features::KeywordSet;
use crate::model::{FitOptions, Featurizer, LinearConfig, Link, RegularizationChoice};
use crate::preprocess::{Tokenizer, TokenizerConfig};
use crate::seed::{derive_seed, STREAM_ACTIVE, STREAM_CROSS_VALIDATION, STREAM_EMBEDDING};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("i/o error reading config: {0}")]
    Io(#[from] std::io::Error),
    #[error("config syntax: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("config `{field}`: {message}")]
    Range { field: &'static str, message: String },
}

fn range(field: &'static str, ok: bool, message: impl Into<String>) -> Result<(), ConfigError> {
    if ok {
        Ok(())
    } else {
        Err(ConfigError::Range {
            field,
            message: message.into(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeaturesSection {
    pub keywords: KeywordSet,
}

impl Default for FeaturesSection {
    fn default() -> Self {
        FeaturesSection {
            keywords: KeywordSet::default(),
        }
    }
}

/// Skip-gram settings without a seed; the seed derives from the top level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbeddingSection {
    pub dim: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub min_n: usize,
    pub max_n: usize,
    pub buckets: u32,
    pub min_count: u64,
    pub threads: usize,
}

impl Default for EmbeddingSection {
    fn default() -> Self {
        let p = SkipGramParams::default();
        EmbeddingSection {
            dim: p.dim,
            window: p.window,
            negatives: p.negatives,
            epochs: p.epochs,
            learning_rate: p.learning_rate,
            min_n: p.min_n,
            max_n: p.max_n,
            buckets: p.buckets,
            min_count: p.min_count,
            threads: p.threads,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub regularization_grid: Vec<f64>,
    pub cv_folds: usize,
    pub weight_step: f64,
    pub link: Link,
    pub max_iter: usize,
    pub tolerance: f64,
}

impl Default for ModelSection {
    fn default() -> Self {
        let linear = LinearConfig::default();
        ModelSection {
            regularization_grid: vec![0.01, 0.1, 1.0, 10.0],
            cv_folds: 5,
            weight_step: 0.05,
            link: linear.link,
            max_iter: linear.max_iter,
            tolerance: linear.tolerance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransferSection {
    pub upsampling: usize,
    pub regularization: f64,
}

impl Default for TransferSection {
    fn default() -> Self {
        TransferSection {
            upsampling: 6,
            regularization: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationSection {
    pub trials: usize,
    pub train_fraction: f64,
    pub inner_train_fraction: f64,
}

impl Default for EvaluationSection {
    fn default() -> Self {
        EvaluationSection {
            trials: 10,
            train_fraction: 0.9,
            inner_train_fraction: 0.9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub tokenizer: TokenizerConfig,
    pub features: FeaturesSection,
    pub embedding: EmbeddingSection,
    pub model: ModelSection,
    pub transfer: TransferSection,
    pub active: Schedule,
    pub evaluation: EvaluationSection,
}

impl PipelineConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let cfg: PipelineConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    /// Defaults, or the file at `path` when given, with `seed` overriding
    /// the file's seed.
    pub fn resolve(path: Option<&Path>, seed: Option<u64>) -> Result<Self, ConfigError> {
        let mut cfg = match path {
            Some(p) => Self::load(p)?,
            None => Self::default(),
        };
        if let Some(s) = seed {
            cfg.seed = s;
        }
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let kw = self.features.keywords.keywords();
        range("features.keywords", !kw.is_empty(), "must not be empty")?;
        range(
            "features.keywords",
            kw.iter().all(|k| !k.is_empty() && k.chars().all(|c| !c.is_uppercase() && !c.is_whitespace())),
            "keywords must be non-empty lowercase words",
        )?;

        let e = &self.embedding;
        range("embedding.dim", (1..=1024).contains(&e.dim), "must be in 1..=1024")?;
        range("embedding.window", (1..=50).contains(&e.window), "must be in 1..=50")?;
        range("embedding.negatives", (1..=100).contains(&e.negatives), "must be in 1..=100")?;
        range("embedding.epochs", (1..=1000).contains(&e.epochs), "must be in 1..=1000")?;
        range(
            "embedding.learning_rate",
            e.learning_rate > 0.0 && e.learning_rate <= 1.0,
            "must be in (0, 1]",
        )?;
        range(
            "embedding.min_n",
            e.min_n >= 1 && e.min_n <= e.max_n && e.max_n <= 10,
            "need 1 <= min_n <= max_n <= 10",
        )?;
        range("embedding.buckets", (1..=10_000_000).contains(&e.buckets), "must be in 1..=10000000")?;
        range("embedding.min_count", e.min_count >= 1, "must be at least 1")?;
        range("embedding.threads", (1..=256).contains(&e.threads), "must be in 1..=256")?;

        let m = &self.model;
        range("model.regularization_grid", !m.regularization_grid.is_empty(), "must not be empty")?;
        range(
            "model.regularization_grid",
            m.regularization_grid.iter().all(|r| (0.0..=1e6).contains(r)),
            "values must be in [0, 1e6]",
        )?;
        range("model.cv_folds", (2..=20).contains(&m.cv_folds), "must be in 2..=20")?;
        let units = 1.0 / m.weight_step;
        range(
            "model.weight_step",
            m.weight_step > 0.0 && (units - units.round()).abs() < 1e-9 && (1.0..=100.0).contains(&units.round()),
            "1/step must be an integer in 1..=100",
        )?;
        range("model.max_iter", (1..=10_000).contains(&m.max_iter), "must be in 1..=10000")?;
        range("model.tolerance", m.tolerance > 0.0 && m.tolerance < 1.0, "must be in (0, 1)")?;

        let t = &self.transfer;
        range("transfer.upsampling", (1..=1000).contains(&t.upsampling), "must be in 1..=1000")?;
        range(
            "transfer.regularization",
            (0.0..=1e6).contains(&t.regularization),
            "must be in [0, 1e6]",
        )?;

        let a = &self.active;
        range("active.seed_size", a.seed_size >= 1, "must be at least 1")?;
        range("active.batch_size", a.batch_size >= 1, "must be at least 1")?;
        range("active.total", a.total >= a.seed_size, "must be at least seed_size")?;

        let v = &self.evaluation;
        range("evaluation.trials", (2..=1000).contains(&v.trials), "must be in 2..=1000")?;
        for (field, f) in [
            ("evaluation.train_fraction", v.train_fraction),
            ("evaluation.inner_train_fraction", v.inner_train_fraction),
        ] {
            range(field, f > 0.0 && f < 1.0, "must be in (0, 1)")?;
        }
        Ok(())
    }

    pub fn tokenizer(&self) -> Tokenizer {
        Tokenizer::new(self.tokenizer.clone())
    }

    /// Featurizer without embeddings.
    pub fn featurizer(&self) -> Featurizer {
        Featurizer::new(self.tokenizer(), self.features.keywords.clone(), None, None)
    }

    pub fn skipgram(&self) -> SkipGramParams {
        let e = &self.embedding;
        SkipGramParams {
            dim: e.dim,
            window: e.window,
            negatives: e.negatives,
            epochs: e.epochs,
            learning_rate: e.learning_rate,
            min_n: e.min_n,
            max_n: e.max_n,
            buckets: e.buckets,
            min_count: e.min_count,
            seed: derive_seed(self.seed, STREAM_EMBEDDING),
            threads: e.threads,
        }
    }

    pub fn linear(&self) -> LinearConfig {
        LinearConfig {
            link: self.model.link,
            max_iter: self.model.max_iter,
            tolerance: self.model.tolerance,
        }
    }

    pub fn fit_options(&self) -> FitOptions {
        FitOptions {
            regularization: RegularizationChoice::CrossValidate {
                grid: self.model.regularization_grid.clone(),
                folds: self.model.cv_folds,
            },
            linear: self.linear(),
            weight_step: self.model.weight_step,
            seed: derive_seed(self.seed, STREAM_CROSS_VALIDATION),
        }
    }

    /// Options for training on up-sampled sets, which use the fixed
    /// transfer regularization.
    pub fn transfer_fit_options(&self) -> FitOptions {
        FitOptions {
            regularization: RegularizationChoice::Fixed(self.transfer.regularization),
            ..self.fit_options()
        }
    }

    pub fn experiment(&self) -> ExperimentConfig {
        ExperimentConfig {
            trials: self.evaluation.trials,
            seed: self.seed,
            train_fraction: self.evaluation.train_fraction,
            inner_train_fraction: self.evaluation.inner_train_fraction,
            fit: self.fit_options(),
            embedding: self.skipgram(),
            keywords: self.features.keywords.clone(),
            upsampling: self.transfer.upsampling,
            transfer_regularization: self.transfer.regularization,
            ..ExperimentConfig::default()
        }
    }

    pub fn session(&self) -> SessionConfig {
        SessionConfig {
            schedule: self.active,
            seed: derive_seed(self.seed, STREAM_ACTIVE),
            fit: self.fit_options(),
        }
    }
}
