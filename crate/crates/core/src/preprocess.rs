//! Message normalization.
//!
//! Raw short messages are split on whitespace, Twitter-specific noise tokens
//! (mentions, retweet markers, links) are dropped, and every surviving token
//! is reduced to lowercase ASCII letters and digits.

use serde::{Deserialize, Serialize};

/// Binary urgency label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum Label {
    NonUrgent,
    Urgent,
}

impl Label {
    pub fn is_urgent(self) -> bool {
        self == Label::Urgent
    }

    pub fn from_bool(urgent: bool) -> Self {
        if urgent {
            Label::Urgent
        } else {
            Label::NonUrgent
        }
    }
}

impl From<Label> for u8 {
    fn from(label: Label) -> u8 {
        match label {
            Label::NonUrgent => 0,
            Label::Urgent => 1,
        }
    }
}

impl TryFrom<u8> for Label {
    type Error = String;

    fn try_from(value: u8) -> Result<Self, Self::Error> {
        match value {
            0 => Ok(Label::NonUrgent),
            1 => Ok(Label::Urgent),
            other => Err(format!("label must be 0 or 1, got {other}")),
        }
    }
}

/// A raw message, optionally carrying its urgency label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<Label>,
}

impl Message {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        Message {
            id: id.into(),
            text: text.into(),
            label: None,
        }
    }

    pub fn labeled(id: impl Into<String>, text: impl Into<String>, label: Label) -> Self {
        Message {
            id: id.into(),
            text: text.into(),
            label: Some(label),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenizedMessage {
    pub id: String,
    pub tokens: Vec<String>,
}

/// What to do with `#hashtag` tokens.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HashtagMode {
    /// Remove the `#` and keep the tag word.
    #[default]
    KeepWord,
    /// Drop the whole token.
    Drop,
}

/// Tokenizer rules. The defaults drop `@` mentions, `RT` markers and links.
///
/// Link detection (`url_prefixes`) is a best guess at which tokens count as
/// suffix-style noise; adjust it per corpus.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TokenizerConfig {
    /// Tokens starting with any of these are dropped.
    pub drop_prefixes: Vec<String>,
    /// Tokens whose normalized form equals one of these are dropped.
    pub drop_tokens: Vec<String>,
    /// Tokens starting with any of these (case-insensitive) are dropped.
    pub url_prefixes: Vec<String>,
    pub hashtags: HashtagMode,
}

impl Default for TokenizerConfig {
    fn default() -> Self {
        TokenizerConfig {
            drop_prefixes: vec!["@".to_string()],
            drop_tokens: vec!["rt".to_string()],
            url_prefixes: vec![
                "http://".to_string(),
                "https://".to_string(),
                "www.".to_string(),
            ],
            hashtags: HashtagMode::KeepWord,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Tokenizer {
    config: TokenizerConfig,
}

impl Tokenizer {
    pub fn new(mut config: TokenizerConfig) -> Self {
        for t in &mut config.drop_tokens {
            *t = normalize_token(t);
        }
        for p in &mut config.url_prefixes {
            p.make_ascii_lowercase();
        }
        Tokenizer { config }
    }

    pub fn config(&self) -> &TokenizerConfig {
        &self.config
    }

    pub fn tokenize(&self, message: &Message) -> TokenizedMessage {
        TokenizedMessage {
            id: message.id.clone(),
            tokens: self.tokens(&message.text),
        }
    }

    pub fn tokens(&self, text: &str) -> Vec<String> {
        text.split_whitespace()
            .filter_map(|raw| self.token(raw))
            .collect()
    }

    fn token(&self, raw: &str) -> Option<String> {
        if self
            .config
            .drop_prefixes
            .iter()
            .any(|p| !p.is_empty() && raw.starts_with(p.as_str()))
        {
            return None;
        }
        if raw.starts_with('#') && self.config.hashtags == HashtagMode::Drop {
            return None;
        }
        let lower = raw.to_ascii_lowercase();
        if self
            .config
            .url_prefixes
            .iter()
            .any(|p| !p.is_empty() && lower.starts_with(p.as_str()))
        {
            return None;
        }
        let token = normalize_token(raw);
        // Checked after normalization so that "RT:" is caught and re-tokenizing
        // the output is a no-op.
        if token.is_empty() || self.config.drop_tokens.contains(&token) {
            return None;
        }
        Some(token)
    }
}

fn normalize_token(raw: &str) -> String {
    raw.chars()
        .filter(char::is_ascii_alphanumeric)
        .map(|c| c.to_ascii_lowercase())
        .collect()
}

/// Tokenizes with the default rules.
pub fn tokenize(message: &Message) -> TokenizedMessage {
    Tokenizer::default().tokenize(message)
}
