use super::ScoredValue;
use crate::textproc::{term_vectors, tokenize};

/// Cosine similarity of raw token count vectors over the union vocabulary.
/// With count vectors the realized range is [0, 1]; an all-zero vector on
/// either side yields a flagged 0.
pub fn cosine_similarity(candidate: &str, reference: &str) -> ScoredValue {
    let (va, vb) = term_vectors(&tokenize(candidate), &tokenize(reference));
    let dot: f64 = va
        .counts
        .iter()
        .zip(&vb.counts)
        .map(|(&a, &b)| a as f64 * b as f64)
        .sum();
    let norm = |v: &[u64]| v.iter().map(|&x| (x as f64).powi(2)).sum::<f64>().sqrt();
    let (na, nb) = (norm(&va.counts), norm(&vb.counts));
    if na == 0.0 || nb == 0.0 {
        return ScoredValue::degenerate();
    }
    ScoredValue::ok(dot / (na * nb))
}

/// Euclidean distance between raw token count vectors over the union
/// vocabulary.
pub fn euclidean_distance(candidate: &str, reference: &str) -> f64 {
    let (va, vb) = term_vectors(&tokenize(candidate), &tokenize(reference));
    va.counts
        .iter()
        .zip(&vb.counts)
        .map(|(&a, &b)| (a as f64 - b as f64).powi(2))
        .sum::<f64>()
        .sqrt()
}
