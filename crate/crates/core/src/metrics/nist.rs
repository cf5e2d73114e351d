use std::collections::HashMap;

use super::MetricError;
use crate::textproc::tokenize;

const MAX_ORDER: usize = 5;

/// Calibrated so the length factor equals 0.5 when the candidate is 2/3 of
/// the mean reference length.
fn beta() -> f64 {
    0.5f64.ln() / (2.0f64 / 3.0).ln().powi(2)
}

/// Immutable n-gram count tables (orders 1..=5) over an info corpus.
/// The weight of an n-gram is the log2 ratio of its prefix count to its own
/// count; rarer continuations carry more information.
#[derive(Debug, Clone)]
pub struct InfoTable {
    counts: Vec<HashMap<Vec<String>, u64>>,
    total_unigrams: u64,
}

impl InfoTable {
    pub fn count(&self, gram: &[String]) -> u64 {
        match gram.len() {
            1..=MAX_ORDER => self.counts[gram.len() - 1]
                .get(gram)
                .copied()
                .unwrap_or(0),
            _ => 0,
        }
    }

    /// log2(count(prefix) / count(gram)); the empty prefix counts the whole
    /// corpus. Unseen n-grams carry no information.
    pub fn info(&self, gram: &[String]) -> f64 {
        let own = self.count(gram);
        if own == 0 {
            return 0.0;
        }
        let prefix = if gram.len() == 1 {
            self.total_unigrams
        } else {
            self.count(&gram[..gram.len() - 1])
        };
        if prefix == 0 {
            return 0.0;
        }
        (prefix as f64 / own as f64).log2()
    }

    pub fn total_unigrams(&self) -> u64 {
        self.total_unigrams
    }
}

/// Builds the info tables from a corpus of texts. N-grams never cross text
/// boundaries.
pub fn build_info_table(corpus: &[String]) -> Result<InfoTable, MetricError> {
    if corpus.is_empty() {
        return Err(MetricError::EmptyCorpus);
    }
    let mut counts: Vec<HashMap<Vec<String>, u64>> = vec![HashMap::new(); MAX_ORDER];
    let mut total_unigrams = 0u64;
    for text in corpus {
        let tokens = tokenize(text);
        total_unigrams += tokens.len() as u64;
        for (n, table) in counts.iter_mut().enumerate() {
            for w in tokens.windows(n + 1) {
                *table.entry(w.to_vec()).or_insert(0) += 1;
            }
        }
    }
    Ok(InfoTable {
        counts,
        total_unigrams,
    })
}

/// NIST score over orders 1..=5: per order, the summed info weights of
/// clipped candidate n-gram matches divided by the candidate n-gram count,
/// then scaled by a brevity factor exp(beta * ln^2(min(c/mean_ref_len, 1))).
pub fn nist(candidate: &str, references: &[String], info: &InfoTable) -> Result<f64, MetricError> {
    if references.is_empty() {
        return Err(MetricError::EmptyReferences);
    }
    let cand = tokenize(candidate);
    let refs: Vec<Vec<String>> = references.iter().map(|r| tokenize(r)).collect();
    if cand.is_empty() {
        return Ok(0.0);
    }

    let mut score = 0.0;
    for n in 1..=MAX_ORDER {
        if cand.len() < n {
            break;
        }
        let total = (cand.len() - n + 1) as f64;
        let mut cand_counts: HashMap<&[String], u64> = HashMap::new();
        for w in cand.windows(n) {
            *cand_counts.entry(w).or_insert(0) += 1;
        }
        let mut max_ref_counts: HashMap<&[String], u64> = HashMap::new();
        for reference in &refs {
            if reference.len() < n {
                continue;
            }
            let mut counts: HashMap<&[String], u64> = HashMap::new();
            for w in reference.windows(n) {
                *counts.entry(w).or_insert(0) += 1;
            }
            for (gram, c) in counts {
                let e = max_ref_counts.entry(gram).or_insert(0);
                *e = (*e).max(c);
            }
        }
        let mut info_sum = 0.0;
        for (gram, &c) in &cand_counts {
            let matched = c.min(max_ref_counts.get(gram).copied().unwrap_or(0));
            if matched > 0 {
                info_sum += matched as f64 * info.info(gram);
            }
        }
        score += info_sum / total;
    }

    let mean_ref_len =
        refs.iter().map(|r| r.len()).sum::<usize>() as f64 / refs.len() as f64;
    let length_factor = if mean_ref_len == 0.0 {
        1.0
    } else {
        let ratio = (cand.len() as f64 / mean_ref_len).min(1.0);
        (beta() * ratio.ln().powi(2)).exp()
    };

    Ok(score * length_factor)
}
