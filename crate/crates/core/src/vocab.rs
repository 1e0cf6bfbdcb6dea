//! String-to-index vocabularies and pretrained embedding tables.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::numcore::{Float, Tensor};

/// Ordered vocabulary. Index = position; the text form is one entry per
/// line, so line number = index.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Vocab {
    items: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocab {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a vocabulary from `reserved` entries followed by the distinct
    /// `items` in first-seen order.
    pub fn build<'a, I>(reserved: &[&str], items: I) -> Self
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut v = Vocab::new();
        for r in reserved {
            v.insert(r);
        }
        for it in items {
            v.insert(it);
        }
        v
    }

    pub fn insert(&mut self, item: &str) -> usize {
        if let Some(&i) = self.index.get(item) {
            return i;
        }
        self.items.push(item.to_string());
        self.index.insert(item.to_string(), self.items.len() - 1);
        self.items.len() - 1
    }

    pub fn get(&self, item: &str) -> Option<usize> {
        self.index.get(item).copied()
    }

    /// Index of `item`, falling back to `default`.
    pub fn get_or(&self, item: &str, default: usize) -> usize {
        self.get(item).unwrap_or(default)
    }

    pub fn item(&self, i: usize) -> &str {
        &self.items[i]
    }

    pub fn items(&self) -> &[String] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for it in &self.items {
            s.push_str(it);
            s.push('\n');
        }
        s
    }

    pub fn from_text(text: &str) -> Self {
        let mut v = Vocab::new();
        for line in text.lines() {
            v.items.push(line.to_string());
            v.index.insert(line.to_string(), v.items.len() - 1);
        }
        v
    }
}

/// Pretrained word vectors. Row 0 is a zero vector used for unknown words.
#[derive(Clone, Debug, PartialEq)]
pub struct Embeddings {
    pub vocab: Vocab,
    pub vectors: Tensor,
}

pub const UNKNOWN: &str = "<unk>";

impl Embeddings {
    pub fn dim(&self) -> usize {
        self.vectors.cols()
    }

    /// Parses whitespace-separated `word v1 … vD` lines; D is taken from
    /// the first line.
    pub fn parse(text: &str) -> Result<Self> {
        let mut vocab = Vocab::build(&[UNKNOWN], []);
        let mut data: Vec<Float> = Vec::new();
        let mut dim = None;
        for (i, line) in text.lines().enumerate() {
            let mut fields = line.split_whitespace();
            let Some(word) = fields.next() else { continue };
            let values = fields
                .map(|f| f.parse::<Float>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| Error::Parse {
                    line: i + 1,
                    msg: "malformed embedding value".into(),
                })?;
            let d = *dim.get_or_insert(values.len());
            if d == 0 || values.len() != d {
                return Err(Error::Parse {
                    line: i + 1,
                    msg: format!("expected {d} values, found {}", values.len()),
                });
            }
            if data.is_empty() {
                data.extend(std::iter::repeat_n(0.0, d));
            }
            if vocab.get(word).is_some() {
                continue;
            }
            vocab.insert(word);
            data.extend(values);
        }
        let d = dim.ok_or(Error::Empty("embedding file"))?;
        let rows = vocab.len();
        Ok(Embeddings {
            vocab,
            vectors: Tensor::new(vec![rows, d], data)?,
        })
    }

    /// Row for `word`: exact match, then lowercase, then the unknown row.
    pub fn row_for(&self, word: &str) -> usize {
        lookup_with_lowercase(&self.vocab, word, 0)
    }
}

pub(crate) fn lookup_with_lowercase(vocab: &Vocab, word: &str, unk: usize) -> usize {
    vocab
        .get(word)
        .or_else(|| vocab.get(&word.to_lowercase()))
        .unwrap_or(unk)
}
