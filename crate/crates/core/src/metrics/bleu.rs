use std::collections::HashMap;

use super::MetricError;
use crate::textproc::tokenize;

const MAX_ORDER: usize = 4;

/// Clipped n-gram match count for one order: each candidate n-gram
/// occurrence is matched up to the maximum count of that n-gram in any
/// single reference. Returns `(matches, candidate n-gram total)`.
pub fn clipped_matches(
    candidate: &[String],
    references: &[Vec<String>],
    n: usize,
) -> (u64, u64) {
    if candidate.len() < n {
        return (0, 0);
    }
    let mut cand_counts: HashMap<&[String], u64> = HashMap::new();
    for w in candidate.windows(n) {
        *cand_counts.entry(w).or_insert(0) += 1;
    }
    let mut max_ref_counts: HashMap<&[String], u64> = HashMap::new();
    for reference in references {
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
    let matches = cand_counts
        .iter()
        .map(|(gram, &c)| c.min(max_ref_counts.get(gram).copied().unwrap_or(0)))
        .sum();
    let total = (candidate.len() - n + 1) as u64;
    (matches, total)
}

/// Modified precisions for orders 1..=4 as `(matches, total)` pairs.
/// Orders where the candidate has no n-grams report `(0, 0)`.
pub fn modified_precisions(
    candidate: &[String],
    references: &[Vec<String>],
) -> Vec<(u64, u64)> {
    (1..=MAX_ORDER)
        .map(|n| clipped_matches(candidate, references, n))
        .collect()
}

/// BLEU-4 with uniform weights over the orders the candidate can populate.
///
/// Zero precisions at order >= 2 are smoothed to `1/(2 * total)`; a zero
/// unigram precision makes the whole score 0. The brevity penalty uses the
/// reference length closest to the candidate length (ties go to the
/// shorter reference).
pub fn bleu(candidate: &str, references: &[String]) -> Result<f64, MetricError> {
    if references.is_empty() {
        return Err(MetricError::EmptyReferences);
    }
    let cand = tokenize(candidate);
    let refs: Vec<Vec<String>> = references.iter().map(|r| tokenize(r)).collect();
    if cand.is_empty() {
        return Ok(0.0);
    }

    let precisions = modified_precisions(&cand, &refs);
    let kept: Vec<(usize, u64, u64)> = precisions
        .iter()
        .enumerate()
        .filter(|(_, (_, total))| *total > 0)
        .map(|(i, &(m, t))| (i + 1, m, t))
        .collect();
    if kept.is_empty() {
        return Ok(0.0);
    }
    if kept[0].0 == 1 && kept[0].1 == 0 {
        return Ok(0.0);
    }

    let weight = 1.0 / kept.len() as f64;
    let mut log_sum = 0.0;
    for (order, matches, total) in &kept {
        let p = if *matches == 0 {
            debug_assert!(*order >= 2);
            1.0 / (2.0 * *total as f64)
        } else {
            *matches as f64 / *total as f64
        };
        log_sum += weight * p.ln();
    }

    let c = cand.len() as f64;
    let closest_ref_len = refs
        .iter()
        .map(|r| r.len())
        .min_by_key(|&len| {
            let diff = (len as i64 - cand.len() as i64).abs();
            (diff, len)
        })
        .unwrap_or(0) as f64;
    let bp = (1.0 - closest_ref_len / c).exp().min(1.0);

    Ok(bp * log_sum.exp())
}
