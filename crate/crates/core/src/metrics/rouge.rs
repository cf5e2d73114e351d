use crate::textproc::tokenize;

/// Unigram recall, precision and their harmonic mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RougeScores {
    pub recall: f64,
    pub precision: f64,
    pub f1: f64,
}

/// ROUGE-1 with clipped (multiset-min) unigram overlap. A zero denominator
/// yields 0 for the affected component rather than an error.
pub fn rouge1(candidate: &str, reference: &str) -> RougeScores {
    let cand = tokenize(candidate);
    let refr = tokenize(reference);

    let mut ref_counts = std::collections::HashMap::new();
    for t in &refr {
        *ref_counts.entry(t.as_str()).or_insert(0u64) += 1;
    }
    let mut cand_counts = std::collections::HashMap::new();
    for t in &cand {
        *cand_counts.entry(t.as_str()).or_insert(0u64) += 1;
    }

    let overlap: u64 = cand_counts
        .iter()
        .map(|(tok, &c)| c.min(ref_counts.get(tok).copied().unwrap_or(0)))
        .sum();

    let recall = if refr.is_empty() {
        0.0
    } else {
        overlap as f64 / refr.len() as f64
    };
    let precision = if cand.is_empty() {
        0.0
    } else {
        overlap as f64 / cand.len() as f64
    };
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    RougeScores {
        recall,
        precision,
        f1,
    }
}
