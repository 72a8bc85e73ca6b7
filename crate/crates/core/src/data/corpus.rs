use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use super::vocab::Vocab;
use crate::error::{Error, Result};
use crate::model::{Input, LabeledExample};

/// How label strings in a JSONL file are interpreted.
#[derive(Debug, Clone, PartialEq)]
pub enum LabelSchema {
    /// Class names are the sorted distinct labels; every line must carry one.
    Infer,
    /// Labels must be among these names (e.g. a test split using the training classes).
    Fixed(Vec<String>),
    /// Labels are ignored; used for outlier and OOD corpora.
    Unlabeled,
}

#[derive(Deserialize)]
struct Line {
    text: String,
    #[serde(default)]
    label: Option<String>,
}

/// Raw text examples as read from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct TextCorpus {
    pub texts: Vec<String>,
    pub labels: Vec<Option<usize>>,
    pub class_names: Vec<String>,
    pub source: PathBuf,
}

impl TextCorpus {
    pub fn len(&self) -> usize {
        self.texts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.texts.is_empty()
    }

    pub fn is_labeled(&self) -> bool {
        self.labels.iter().all(Option::is_some)
    }
}

/// Model-ready examples.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub examples: Vec<LabeledExample>,
    pub class_names: Vec<String>,
    pub source: String,
}

impl Corpus {
    pub fn new(
        examples: Vec<LabeledExample>,
        class_names: Vec<String>,
        source: impl Into<String>,
    ) -> Result<Self> {
        if examples.is_empty() {
            return Err(Error::Empty(format!("corpus {}", source.into())));
        }
        let k = class_names.len();
        if let Some(bad) = examples
            .iter()
            .filter_map(|e| e.label)
            .find(|&y| k > 0 && y >= k)
        {
            return Err(Error::domain(format!("label {bad} outside {k} classes")));
        }
        Ok(Self {
            examples,
            class_names,
            source: source.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn refs(&self) -> Vec<&LabeledExample> {
        self.examples.iter().collect()
    }

    pub fn inputs(&self) -> Vec<&Input> {
        self.examples.iter().map(|e| &e.input).collect()
    }

    pub fn labels(&self) -> Option<Vec<usize>> {
        self.examples.iter().map(|e| e.label).collect()
    }
}

pub fn load_jsonl_corpus(path: impl AsRef<Path>, schema: &LabelSchema) -> Result<TextCorpus> {
    let path = path.as_ref();
    let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let parse_err = |line: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut rows = Vec::new();
    for (i, line) in raw.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parsed: Line =
            serde_json::from_str(line).map_err(|e| parse_err(i + 1, e.to_string()))?;
        rows.push((i + 1, parsed));
    }
    if rows.is_empty() {
        return Err(Error::Empty(format!("{} has no examples", path.display())));
    }
    let class_names = match schema {
        LabelSchema::Unlabeled => Vec::new(),
        LabelSchema::Fixed(names) => names.clone(),
        LabelSchema::Infer => {
            let set: BTreeSet<&str> = rows
                .iter()
                .filter_map(|(_, r)| r.label.as_deref())
                .collect();
            if set.len() < 2 {
                return Err(parse_err(
                    rows[0].0,
                    "a labeled corpus needs at least two classes".into(),
                ));
            }
            set.into_iter().map(str::to_string).collect()
        }
    };
    let mut texts = Vec::with_capacity(rows.len());
    let mut labels = Vec::with_capacity(rows.len());
    for (n, row) in rows {
        let label = match schema {
            LabelSchema::Unlabeled => None,
            _ => {
                let name = row
                    .label
                    .ok_or_else(|| parse_err(n, "missing label".into()))?;
                let id = class_names
                    .iter()
                    .position(|c| *c == name)
                    .ok_or_else(|| parse_err(n, format!("unknown label `{name}`")))?;
                Some(id)
            }
        };
        texts.push(row.text);
        labels.push(label);
    }
    Ok(TextCorpus {
        texts,
        labels,
        class_names,
        source: path.to_path_buf(),
    })
}

/// Encodes every text with `vocab`, truncating to `max_len` tokens.
pub fn encode_corpus(text: &TextCorpus, vocab: &Vocab, max_len: usize) -> Result<Corpus> {
    let examples = text
        .texts
        .iter()
        .zip(&text.labels)
        .map(|(t, y)| LabeledExample {
            input: Input::Tokens(vocab.encode(t, max_len)),
            label: *y,
        })
        .collect();
    Corpus::new(
        examples,
        text.class_names.clone(),
        text.source.display().to_string(),
    )
}
