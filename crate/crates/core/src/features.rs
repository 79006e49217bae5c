//! Binary keyword/digit features.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::preprocess::TokenizedMessage;

/// The ten default urgency stems, in feature order.
pub const DEFAULT_KEYWORDS: [&str; 10] = [
    "hit", "help", "kill", "injure", "strand", "miss", "urgent", "die", "need", "food",
];

/// Keyword stems matched by prefix against each token.
///
/// Prefix matching means "helping" fires `help` and "stranded" fires
/// `strand`, but "dying" does not fire `die`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct KeywordSet(Vec<String>);

impl Default for KeywordSet {
    fn default() -> Self {
        KeywordSet(DEFAULT_KEYWORDS.iter().map(|k| k.to_string()).collect())
    }
}

impl KeywordSet {
    pub fn new(keywords: Vec<String>) -> Self {
        KeywordSet(keywords)
    }

    pub fn keywords(&self) -> &[String] {
        &self.0
    }

    /// Feature vector length: one bit per keyword plus the digit bit.
    pub fn dim(&self) -> usize {
        self.0.len() + 1
    }

    pub fn extract(&self, tm: &TokenizedMessage) -> ManualFeatureVector {
        let mut bits: Vec<bool> = self
            .0
            .iter()
            .map(|k| tm.tokens.iter().any(|t| t.starts_with(k.as_str())))
            .collect();
        bits.push(
            tm.tokens
                .iter()
                .any(|t| t.bytes().any(|b| b.is_ascii_digit())),
        );
        ManualFeatureVector { bits }
    }
}

/// Keyword bits in keyword order, followed by the has-digit bit.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ManualFeatureVector {
    bits: Vec<bool>,
}

impl ManualFeatureVector {
    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn has_digit(&self) -> bool {
        *self.bits.last().expect("digit bit always present")
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.bits.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect()
    }
}

impl fmt::Display for ManualFeatureVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, b) in self.bits.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            f.write_str(if *b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

/// Extracts features with the default ten keywords.
pub fn extract_manual_features(tm: &TokenizedMessage) -> ManualFeatureVector {
    KeywordSet::default().extract(tm)
}
