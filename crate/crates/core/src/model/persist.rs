//! Ensemble container: a versioned JSON document holding the member models,
//! weights, threshold and featurization settings, plus path + SHA-256
//! references to the embedding files it was trained with.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{EnsembleModel, FeatureSet, Featurizer, ModelError, ProbabilisticLinearModel};
use crate::embedding::{parse_text_vectors, EmbeddingModel};
use crate::features::KeywordSet;
use crate::preprocess::{Tokenizer, TokenizerConfig};

const FORMAT: &str = "urgency-ensemble";
pub const ENSEMBLE_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmbeddingRef {
    /// Relative paths resolve against the ensemble file's directory.
    pub path: String,
    pub sha256: String,
    pub dim: usize,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EnsembleFile {
    format: String,
    version: u32,
    tokenizer: TokenizerConfig,
    keywords: KeywordSet,
    feature_sets: Vec<FeatureSet>,
    members: Vec<ProbabilisticLinearModel>,
    member_weights: Vec<f64>,
    threshold: f64,
    local_embedding: Option<EmbeddingRef>,
    wiki_embedding: Option<EmbeddingRef>,
}

fn sha256_file(path: &Path) -> Result<String, ModelError> {
    Ok(hex::encode(Sha256::digest(fs::read(path)?)))
}

fn reference(ensemble_path: &Path, embedding: &Path, dim: usize) -> Result<EmbeddingRef, ModelError> {
    let base = ensemble_path.parent().unwrap_or(Path::new(""));
    let same_dir = embedding.parent().unwrap_or(Path::new("")) == base;
    let stored = if same_dir {
        PathBuf::from(embedding.file_name().unwrap_or_default())
    } else {
        fs::canonicalize(embedding)?
    };
    Ok(EmbeddingRef {
        path: stored.to_string_lossy().into_owned(),
        sha256: sha256_file(embedding)?,
        dim,
    })
}

/// Writes `model` to `path`. Embedding files must be given for every
/// embedding feature set the model uses.
pub fn save_ensemble(
    model: &EnsembleModel,
    path: impl AsRef<Path>,
    local_path: Option<&Path>,
    wiki_path: Option<&Path>,
) -> Result<(), ModelError> {
    let path = path.as_ref();
    let sets = model.feature_sets();
    let refer = |set: FeatureSet, file: Option<&Path>| -> Result<Option<EmbeddingRef>, ModelError> {
        if !sets.contains(&set) {
            return Ok(None);
        }
        let file = file.ok_or(ModelError::MissingEmbedding(set))?;
        reference(path, file, model.featurizer.dim(set)?).map(Some)
    };
    let doc = EnsembleFile {
        format: FORMAT.to_string(),
        version: ENSEMBLE_FORMAT_VERSION,
        tokenizer: model.featurizer.tokenizer.config().clone(),
        keywords: model.featurizer.keywords.clone(),
        feature_sets: sets.clone(),
        members: model.members().to_vec(),
        member_weights: model.weights().to_vec(),
        threshold: model.threshold(),
        local_embedding: refer(FeatureSet::LocalEmbedding, local_path)?,
        wiki_embedding: refer(FeatureSet::WikiEmbedding, wiki_path)?,
    };
    let mut json = serde_json::to_string_pretty(&doc).map_err(|e| ModelError::Format(e.to_string()))?;
    json.push('\n');
    fs::write(path, json)?;
    Ok(())
}

/// Reads a binary (`UEMB`) model or text vectors, sniffing the magic bytes.
pub fn load_embedding_file(path: &Path) -> Result<EmbeddingModel, ModelError> {
    let bytes = fs::read(path)?;
    if bytes.starts_with(b"UEMB") {
        Ok(EmbeddingModel::read_from(&mut bytes.as_slice())?)
    } else {
        Ok(parse_text_vectors(bytes.as_slice())?)
    }
}

pub fn load_ensemble(path: impl AsRef<Path>) -> Result<EnsembleModel, ModelError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let doc: EnsembleFile = serde_json::from_str(&text).map_err(|e| ModelError::Format(e.to_string()))?;
    if doc.format != FORMAT {
        return Err(ModelError::Format(format!("unexpected format `{}`", doc.format)));
    }
    if doc.version != ENSEMBLE_FORMAT_VERSION {
        return Err(ModelError::Format(format!("unsupported version {}", doc.version)));
    }
    let base = path.parent().unwrap_or(Path::new(""));
    let resolve = |r: &Option<EmbeddingRef>| -> Result<Option<Arc<EmbeddingModel>>, ModelError> {
        let Some(r) = r else { return Ok(None) };
        let file = base.join(&r.path);
        let digest = sha256_file(&file)?;
        if digest != r.sha256 {
            return Err(ModelError::Format(format!(
                "embedding `{}` changed since the ensemble was saved (sha256 {digest}, expected {})",
                file.display(),
                r.sha256
            )));
        }
        let model = load_embedding_file(&file)?;
        if model.dim() != r.dim {
            return Err(ModelError::DimensionMismatch {
                expected: r.dim,
                found: model.dim(),
            });
        }
        Ok(Some(Arc::new(model)))
    };
    let featurizer = Featurizer {
        tokenizer: Tokenizer::new(doc.tokenizer),
        keywords: doc.keywords,
        local: resolve(&doc.local_embedding)?,
        wiki: resolve(&doc.wiki_embedding)?,
    };
    let model = EnsembleModel::new(featurizer, doc.members, doc.member_weights, doc.threshold)?;
    if model.feature_sets() != doc.feature_sets {
        return Err(ModelError::Format("feature-set descriptors disagree with members".into()));
    }
    Ok(model)
}
