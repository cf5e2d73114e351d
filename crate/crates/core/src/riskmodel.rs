//! N-gram language models over reference descriptions and the two-class
//! perplexity comparison used for risk screening: a text is flagged as
//! risk-exposed when the model trained on risk-positive captions finds it
//! no more surprising than the risk-negative model does.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::textproc::tokenize;

const MODEL_FILE_VERSION: u32 = 1;
const UNKNOWN_TOKEN: &str = "<unk>";
const BOUNDARY_TOKEN: &str = "<s>";

#[derive(Debug, Error, PartialEq)]
pub enum RiskModelError {
    #[error("training corpus is empty")]
    EmptyCorpus,
    #[error("invalid smoothing configuration: {0}")]
    InvalidSmoothing(String),
    #[error("text has no tokens")]
    EmptyText,
    #[error("model file is invalid: {0}")]
    InvalidModelFile(String),
}

/// Model order plus add-k smoothing and interpolation weights. The default
/// is an interpolated bigram: 0.75 bigram, 0.25 unigram, k = 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LmConfig {
    pub order: usize,
    pub k: f64,
    /// weights[i] applies to the (i+1)-gram component; must sum to 1.
    pub weights: Vec<f64>,
}

impl Default for LmConfig {
    fn default() -> Self {
        LmConfig {
            order: 2,
            k: 1.0,
            weights: vec![0.25, 0.75],
        }
    }
}

impl LmConfig {
    fn validate(&self) -> Result<(), RiskModelError> {
        if self.order < 1 {
            return Err(RiskModelError::InvalidSmoothing(format!(
                "order must be >= 1, got {}",
                self.order
            )));
        }
        if !(self.k > 0.0) {
            return Err(RiskModelError::InvalidSmoothing(format!(
                "k must be > 0, got {}",
                self.k
            )));
        }
        if self.weights.len() != self.order {
            return Err(RiskModelError::InvalidSmoothing(format!(
                "expected {} weights, got {}",
                self.order,
                self.weights.len()
            )));
        }
        if self.weights.iter().any(|w| *w < 0.0) {
            return Err(RiskModelError::InvalidSmoothing(
                "weights must be non-negative".to_string(),
            ));
        }
        let sum: f64 = self.weights.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(RiskModelError::InvalidSmoothing(format!(
                "weights must sum to 1, got {sum}"
            )));
        }
        Ok(())
    }
}

/// Interpolated add-k n-gram model. Immutable once trained; tokens outside
/// the training vocabulary map to a reserved unknown token at scoring time,
/// so every conditional probability is positive.
#[derive(Debug, Clone, PartialEq)]
pub struct NGramLanguageModel {
    config: LmConfig,
    vocabulary: BTreeSet<String>,
    /// counts[o-1] maps an o-gram (context plus target) to its count.
    counts: Vec<HashMap<Vec<String>, u64>>,
    /// context_totals[o-1] maps an (o-1)-token context to the sum of its
    /// continuation counts; derived from `counts`.
    context_totals: Vec<HashMap<Vec<String>, u64>>,
}

/// Trains a model on a corpus of texts. Sentence boundaries are padded with
/// a reserved start token for orders above 1; n-grams never cross texts.
pub fn train_lm(corpus: &[String], config: &LmConfig) -> Result<NGramLanguageModel, RiskModelError> {
    NGramLanguageModel::train(corpus, config)
}

impl NGramLanguageModel {
    pub fn train(corpus: &[String], config: &LmConfig) -> Result<Self, RiskModelError> {
        if corpus.is_empty() {
            return Err(RiskModelError::EmptyCorpus);
        }
        config.validate()?;

        let mut vocabulary = BTreeSet::new();
        let mut counts: Vec<HashMap<Vec<String>, u64>> = vec![HashMap::new(); config.order];
        for text in corpus {
            let tokens = tokenize(text);
            vocabulary.extend(tokens.iter().cloned());
            for order in 1..=config.order {
                let mut padded: Vec<String> =
                    std::iter::repeat(BOUNDARY_TOKEN.to_string()).take(order - 1).collect();
                padded.extend(tokens.iter().cloned());
                for window in padded.windows(order) {
                    *counts[order - 1].entry(window.to_vec()).or_insert(0) += 1;
                }
            }
        }

        let context_totals = derive_context_totals(&counts);
        Ok(NGramLanguageModel {
            config: config.clone(),
            vocabulary,
            counts,
            context_totals,
        })
    }

    /// A model assigning the same probability to every category (the given
    /// symbols plus the unknown token); its perplexity is the category
    /// count for any text.
    pub fn uniform(symbols: &[String]) -> Self {
        NGramLanguageModel {
            config: LmConfig {
                order: 1,
                k: 1.0,
                weights: vec![1.0],
            },
            vocabulary: symbols.iter().cloned().collect(),
            counts: vec![HashMap::new()],
            context_totals: vec![HashMap::new()],
        }
    }

    pub fn config(&self) -> &LmConfig {
        &self.config
    }

    /// Vocabulary size plus the unknown token.
    pub fn category_count(&self) -> usize {
        self.vocabulary.len() + 1
    }

    /// Raw (pre-smoothing) count of an n-gram from the training corpus.
    pub fn raw_count(&self, gram: &[String]) -> u64 {
        match gram.len() {
            0 => 0,
            n if n <= self.config.order => {
                self.counts[n - 1].get(gram).copied().unwrap_or(0)
            }
            _ => 0,
        }
    }

    fn map_token(&self, token: &str) -> String {
        if self.vocabulary.contains(token) {
            token.to_string()
        } else {
            UNKNOWN_TOKEN.to_string()
        }
    }

    fn component_probability(&self, order: usize, context: &[String], token: &str) -> f64 {
        let categories = self.category_count() as f64;
        let mut gram: Vec<String> = context.to_vec();
        gram.push(token.to_string());
        let count = self.counts[order - 1].get(&gram).copied().unwrap_or(0) as f64;
        let total = self.context_totals[order - 1]
            .get(context)
            .copied()
            .unwrap_or(0) as f64;
        (count + self.config.k) / (total + self.config.k * categories)
    }

    /// Interpolated conditional probability of `token` given the preceding
    /// tokens of the text. Both are mapped into the vocabulary first.
    pub fn conditional_probability(&self, history: &[String], token: &str) -> f64 {
        let token = self.map_token(token);
        let mapped: Vec<String> = history.iter().map(|t| self.map_token(t)).collect();
        let mut p = 0.0;
        for order in 1..=self.config.order {
            let needed = order - 1;
            let mut context: Vec<String> = Vec::with_capacity(needed);
            if mapped.len() < needed {
                context.extend(
                    std::iter::repeat(BOUNDARY_TOKEN.to_string()).take(needed - mapped.len()),
                );
                context.extend(mapped.iter().cloned());
            } else {
                context.extend(mapped[mapped.len() - needed..].iter().cloned());
            }
            p += self.config.weights[order - 1] * self.component_probability(order, &context, &token);
        }
        p
    }

    /// Serializes the model as a versioned JSON document with entries in a
    /// deterministic order.
    pub fn to_json(&self) -> String {
        let tables = self
            .counts
            .iter()
            .enumerate()
            .map(|(i, table)| {
                let mut entries: Vec<GramEntry> = table
                    .iter()
                    .map(|(gram, &count)| GramEntry {
                        gram: gram.clone(),
                        count,
                    })
                    .collect();
                entries.sort_by(|a, b| a.gram.cmp(&b.gram));
                CountTable {
                    order: i + 1,
                    entries,
                }
            })
            .collect();
        let file = ModelFile {
            version: MODEL_FILE_VERSION,
            order: self.config.order,
            k: self.config.k,
            weights: self.config.weights.clone(),
            vocabulary: self.vocabulary.iter().cloned().collect(),
            tables,
        };
        serde_json::to_string_pretty(&file).expect("model serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self, RiskModelError> {
        let file: ModelFile = serde_json::from_str(text)
            .map_err(|e| RiskModelError::InvalidModelFile(e.to_string()))?;
        if file.version != MODEL_FILE_VERSION {
            return Err(RiskModelError::InvalidModelFile(format!(
                "unsupported version {}",
                file.version
            )));
        }
        let config = LmConfig {
            order: file.order,
            k: file.k,
            weights: file.weights,
        };
        config.validate()?;
        let mut counts: Vec<HashMap<Vec<String>, u64>> = vec![HashMap::new(); config.order];
        for table in file.tables {
            if table.order < 1 || table.order > config.order {
                return Err(RiskModelError::InvalidModelFile(format!(
                    "table order {} outside 1..={}",
                    table.order, config.order
                )));
            }
            for entry in table.entries {
                if entry.gram.len() != table.order {
                    return Err(RiskModelError::InvalidModelFile(format!(
                        "gram {:?} does not match table order {}",
                        entry.gram, table.order
                    )));
                }
                counts[table.order - 1].insert(entry.gram, entry.count);
            }
        }
        let context_totals = derive_context_totals(&counts);
        Ok(NGramLanguageModel {
            config,
            vocabulary: file.vocabulary.into_iter().collect(),
            counts,
            context_totals,
        })
    }
}

fn derive_context_totals(
    counts: &[HashMap<Vec<String>, u64>],
) -> Vec<HashMap<Vec<String>, u64>> {
    counts
        .iter()
        .map(|table| {
            let mut totals: HashMap<Vec<String>, u64> = HashMap::new();
            for (gram, &count) in table {
                let context = gram[..gram.len() - 1].to_vec();
                *totals.entry(context).or_insert(0) += count;
            }
            totals
        })
        .collect()
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    version: u32,
    order: usize,
    k: f64,
    weights: Vec<f64>,
    vocabulary: Vec<String>,
    tables: Vec<CountTable>,
}

#[derive(Serialize, Deserialize)]
struct CountTable {
    order: usize,
    entries: Vec<GramEntry>,
}

#[derive(Serialize, Deserialize)]
struct GramEntry {
    gram: Vec<String>,
    count: u64,
}

/// exp of the mean negative log-likelihood of the text under the model.
/// Finite for every text because smoothed probabilities are positive.
pub fn perplexity(text: &str, lm: &NGramLanguageModel) -> Result<f64, RiskModelError> {
    let tokens = tokenize(text);
    if tokens.is_empty() {
        return Err(RiskModelError::EmptyText);
    }
    let mut log_sum = 0.0;
    for i in 0..tokens.len() {
        let p = lm.conditional_probability(&tokens[..i], &tokens[i]);
        log_sum += p.ln();
    }
    Ok((-log_sum / tokens.len() as f64).exp())
}

/// Two language models with a shared configuration, one per risk class.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskClassifier {
    lm_risk: NGramLanguageModel,
    lm_norisk: NGramLanguageModel,
}

/// Outcome of classifying one text: the label plus both perplexities for
/// audit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiskDecision {
    pub risk_exposed: bool,
    pub pp_risk: f64,
    pub pp_norisk: f64,
}

impl RiskClassifier {
    pub fn train(
        risk_corpus: &[String],
        norisk_corpus: &[String],
        config: &LmConfig,
    ) -> Result<Self, RiskModelError> {
        Ok(RiskClassifier {
            lm_risk: NGramLanguageModel::train(risk_corpus, config)?,
            lm_norisk: NGramLanguageModel::train(norisk_corpus, config)?,
        })
    }

    pub fn from_models(
        lm_risk: NGramLanguageModel,
        lm_norisk: NGramLanguageModel,
    ) -> Result<Self, RiskModelError> {
        if lm_risk.config != lm_norisk.config {
            return Err(RiskModelError::InvalidSmoothing(
                "classifier models must share order and smoothing".to_string(),
            ));
        }
        Ok(RiskClassifier { lm_risk, lm_norisk })
    }

    pub fn risk_model(&self) -> &NGramLanguageModel {
        &self.lm_risk
    }

    pub fn norisk_model(&self) -> &NGramLanguageModel {
        &self.lm_norisk
    }
}

/// Labels a text by comparing class perplexities. Ties resolve to
/// risk-exposed, the conservative call for safety screening.
pub fn classify_risk(text: &str, c: &RiskClassifier) -> Result<RiskDecision, RiskModelError> {
    let pp_risk = perplexity(text, &c.lm_risk)?;
    let pp_norisk = perplexity(text, &c.lm_norisk)?;
    Ok(RiskDecision {
        risk_exposed: pp_risk <= pp_norisk,
        pp_risk,
        pp_norisk,
    })
}
