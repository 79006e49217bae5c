//! Labeled datasets, unlabeled corpora and their JSON-lines / plain-text formats.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::preprocess::{Label, Message, TokenizedMessage, Tokenizer};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("duplicate message id `{0}`")]
    DuplicateId(String),
    #[error("message `{0}` has no label")]
    MissingLabel(String),
}

/// Which part of an experiment a dataset plays.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetRole {
    Target,
    SourceLabeled,
    Train,
    Validation,
    Test,
    Labeled,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledItem {
    pub message: Message,
    pub tokens: TokenizedMessage,
    pub label: Label,
}

/// Labeled messages with cached tokenization. Ids are unique.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub role: DatasetRole,
    items: Vec<LabeledItem>,
}

impl LabeledDataset {
    pub fn new(
        messages: Vec<Message>,
        tokenizer: &Tokenizer,
        role: DatasetRole,
    ) -> Result<Self, DatasetError> {
        let mut seen = HashSet::new();
        let mut items = Vec::with_capacity(messages.len());
        for message in messages {
            if !seen.insert(message.id.clone()) {
                return Err(DatasetError::DuplicateId(message.id));
            }
            let label = message
                .label
                .ok_or_else(|| DatasetError::MissingLabel(message.id.clone()))?;
            let tokens = tokenizer.tokenize(&message);
            items.push(LabeledItem {
                message,
                tokens,
                label,
            });
        }
        Ok(LabeledDataset { role, items })
    }

    /// Builds a dataset from already-validated items. Ids are not re-checked,
    /// which is what up-sampling relies on.
    pub(crate) fn from_items(items: Vec<LabeledItem>, role: DatasetRole) -> Self {
        LabeledDataset { role, items }
    }

    pub fn items(&self) -> &[LabeledItem] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn labels(&self) -> Vec<Label> {
        self.items.iter().map(|i| i.label).collect()
    }

    pub fn count(&self, label: Label) -> usize {
        self.items.iter().filter(|i| i.label == label).count()
    }

    pub fn has_both_classes(&self) -> bool {
        self.count(Label::Urgent) > 0 && self.count(Label::NonUrgent) > 0
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.items.iter().map(|i| i.message.id.as_str())
    }

    pub fn messages(&self) -> impl Iterator<Item = &Message> {
        self.items.iter().map(|i| &i.message)
    }

    pub fn tokenized(&self) -> impl Iterator<Item = &TokenizedMessage> {
        self.items.iter().map(|i| &i.tokens)
    }

    pub fn subset(&self, indices: &[usize], role: DatasetRole) -> Self {
        LabeledDataset {
            role,
            items: indices.iter().map(|&i| self.items[i].clone()).collect(),
        }
    }
}

/// Unlabeled background text used for embedding training.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Corpus {
    pub messages: Vec<TokenizedMessage>,
}

impl Corpus {
    pub fn new(messages: Vec<TokenizedMessage>) -> Self {
        Corpus { messages }
    }

    pub fn from_messages<'a>(
        messages: impl IntoIterator<Item = &'a Message>,
        tokenizer: &Tokenizer,
    ) -> Self {
        Corpus {
            messages: messages.into_iter().map(|m| tokenizer.tokenize(m)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.messages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.messages.is_empty()
    }

    pub fn token_count(&self) -> usize {
        self.messages.iter().map(|m| m.tokens.len()).sum()
    }

    pub fn extend_from(&mut self, dataset: &LabeledDataset) {
        self.messages.extend(dataset.tokenized().cloned());
    }
}

/// Reads one JSON object per line (`id`, `text`, optional `label` 0/1).
/// Blank lines are skipped.
pub fn read_jsonl(path: impl AsRef<Path>) -> Result<Vec<Message>, DatasetError> {
    parse_jsonl(BufReader::new(File::open(path)?))
}

pub fn parse_jsonl(reader: impl BufRead) -> Result<Vec<Message>, DatasetError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let msg: Message = serde_json::from_str(&line).map_err(|e| DatasetError::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(msg);
    }
    Ok(out)
}

/// Reads one message per line; the id is the 1-based line number.
pub fn read_plain(path: impl AsRef<Path>) -> Result<Vec<Message>, DatasetError> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        out.push(Message::new((i + 1).to_string(), line?));
    }
    Ok(out)
}

/// Reads JSON lines when the extension is `.jsonl`/`.json`, plain text otherwise.
pub fn read_messages(path: impl AsRef<Path>) -> Result<Vec<Message>, DatasetError> {
    let path = path.as_ref();
    match path.extension().and_then(|e| e.to_str()) {
        Some("jsonl") | Some("json") => read_jsonl(path),
        _ => read_plain(path),
    }
}

pub fn write_jsonl<'a>(
    path: impl AsRef<Path>,
    messages: impl IntoIterator<Item = &'a Message>,
) -> Result<(), DatasetError> {
    let mut w = BufWriter::new(File::create(path)?);
    write_jsonl_to(&mut w, messages)?;
    w.flush()?;
    Ok(())
}

pub fn write_jsonl_to<'a>(
    w: &mut impl Write,
    messages: impl IntoIterator<Item = &'a Message>,
) -> std::io::Result<()> {
    for m in messages {
        serde_json::to_writer(&mut *w, m)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_jsonl_with_optional_labels() {
        let input = "{\"id\":\"1\",\"text\":\"help\",\"label\":1}\n\n{\"id\":\"2\",\"text\":\"ok\"}\n";
        let msgs = parse_jsonl(input.as_bytes()).unwrap();
        assert_eq!(msgs.len(), 2);
        assert_eq!(msgs[0].label, Some(Label::Urgent));
        assert_eq!(msgs[1].label, None);
    }

    #[test]
    fn parse_error_reports_line() {
        let input = "{\"id\":\"1\",\"text\":\"a\"}\nnot json\n";
        match parse_jsonl(input.as_bytes()) {
            Err(DatasetError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn labeled_dataset_rejects_duplicates_and_missing_labels() {
        let tok = Tokenizer::default();
        let dup = vec![
            Message::labeled("a", "x", Label::Urgent),
            Message::labeled("a", "y", Label::NonUrgent),
        ];
        assert!(matches!(
            LabeledDataset::new(dup, &tok, DatasetRole::Labeled),
            Err(DatasetError::DuplicateId(_))
        ));
        let unlabeled = vec![Message::new("a", "x")];
        assert!(matches!(
            LabeledDataset::new(unlabeled, &tok, DatasetRole::Labeled),
            Err(DatasetError::MissingLabel(_))
        ));
    }

    #[test]
    fn plain_text_ids_are_line_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.txt");
        std::fs::write(&path, "first line\nsecond\n").unwrap();
        let msgs = read_messages(&path).unwrap();
        assert_eq!(msgs[0].id, "1");
        assert_eq!(msgs[1].text, "second");
    }
}
