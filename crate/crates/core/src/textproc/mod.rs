//! Deterministic text normalization shared by every metric: tokenization,
//! n-gram multisets, Porter stemming and term count vectors.
//!
//! Everything in this module is a pure function over its inputs, so callers
//! may score in parallel without coordination.

use std::collections::HashMap;

use thiserror::Error;

mod porter;

pub use porter::stem;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TextError {
    #[error("n-gram order must be >= 1, got {0}")]
    InvalidOrder(usize),
}

/// Ordered lowercase word tokens. Tokens are never empty and never contain
/// whitespace.
pub type TokenSequence = Vec<String>;

/// Multiset of n-token windows extracted from a sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NGramMultiset {
    order: usize,
    counts: HashMap<Vec<String>, usize>,
}

impl NGramMultiset {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn count(&self, gram: &[String]) -> usize {
        self.counts.get(gram).copied().unwrap_or(0)
    }

    /// Total number of windows, counting multiplicity.
    pub fn total(&self) -> usize {
        self.counts.values().sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Vec<String>, usize)> {
        self.counts.iter().map(|(k, &v)| (k, v))
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }
}

/// Token counts aligned to a sorted, duplicate-free vocabulary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TermVector {
    pub vocabulary: Vec<String>,
    pub counts: Vec<u64>,
}

impl TermVector {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// Splits text into lowercase word tokens. Unicode letters and digits are
/// kept; every other character acts as a separator.
pub fn tokenize(text: &str) -> TokenSequence {
    let mut tokens = Vec::new();
    let mut current = String::new();
    for ch in text.chars() {
        if ch.is_alphanumeric() {
            for lower in ch.to_lowercase() {
                current.push(lower);
            }
        } else if !current.is_empty() {
            tokens.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

/// Sliding-window n-gram extraction. The result holds exactly
/// `max(0, len - n + 1)` windows counting multiplicity.
pub fn ngrams(tokens: &[String], n: usize) -> Result<NGramMultiset, TextError> {
    if n < 1 {
        return Err(TextError::InvalidOrder(n));
    }
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for window in tokens.windows(n) {
            *counts.entry(window.to_vec()).or_insert(0) += 1;
        }
    }
    Ok(NGramMultiset { order: n, counts })
}

/// Builds count vectors for two sequences over their shared sorted union
/// vocabulary.
pub fn term_vectors(a: &[String], b: &[String]) -> (TermVector, TermVector) {
    let mut vocabulary: Vec<String> = a.iter().chain(b.iter()).cloned().collect();
    vocabulary.sort();
    vocabulary.dedup();

    let count_into = |tokens: &[String]| {
        let mut freq: HashMap<&str, u64> = HashMap::new();
        for t in tokens {
            *freq.entry(t.as_str()).or_insert(0) += 1;
        }
        vocabulary
            .iter()
            .map(|v| freq.get(v.as_str()).copied().unwrap_or(0))
            .collect::<Vec<u64>>()
    };

    let counts_a = count_into(a);
    let counts_b = count_into(b);
    (
        TermVector {
            vocabulary: vocabulary.clone(),
            counts: counts_a,
        },
        TermVector {
            vocabulary,
            counts: counts_b,
        },
    )
}
