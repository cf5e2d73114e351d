//! Independent oracles and generators for the integration suites. Nothing
//! here calls into the implementation paths it checks: counts come from
//! direct window scans and alignments from exhaustive search.

use rand::Rng;

/// Occurrences of `gram` in `tokens` by direct window scan.
fn occurrences(tokens: &[String], gram: &[String]) -> u64 {
    if tokens.len() < gram.len() || gram.is_empty() {
        return 0;
    }
    tokens.windows(gram.len()).filter(|w| *w == gram).count() as u64
}

/// Clipped n-gram matches by enumeration: candidate window p is matched
/// when its rank among equal windows is below the best per-reference
/// occurrence count. Returns (matches, candidate window count).
pub fn oracle_clipped_matches(
    cand: &[String],
    refs: &[Vec<String>],
    n: usize,
) -> (u64, u64) {
    if cand.len() < n || n == 0 {
        return (0, 0);
    }
    let mut matches = 0u64;
    let windows: Vec<&[String]> = cand.windows(n).collect();
    for (p, gram) in windows.iter().enumerate() {
        let rank = windows[..p].iter().filter(|w| *w == gram).count() as u64;
        let best = refs
            .iter()
            .map(|r| occurrences(r, gram))
            .max()
            .unwrap_or(0);
        if rank < best {
            matches += 1;
        }
    }
    (matches, windows.len() as u64)
}

/// ROUGE-1 recall/precision/F by the same enumeration route.
pub fn oracle_rouge1(cand: &[String], refr: &[String]) -> (f64, f64, f64) {
    let (overlap, _) = oracle_clipped_matches(cand, &[refr.to_vec()], 1);
    let r = if refr.is_empty() {
        0.0
    } else {
        overlap as f64 / refr.len() as f64
    };
    let p = if cand.is_empty() {
        0.0
    } else {
        overlap as f64 / cand.len() as f64
    };
    let f = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
    (r, p, f)
}

/// Exhaustive search over every injective stem-compatible matching,
/// keeping maximum cardinality and then minimum chunk count. Exponential;
/// only for short sequences.
pub fn oracle_alignment(cand: &[String], refr: &[String]) -> (usize, usize) {
    let cand_stems: Vec<String> = cand.iter().map(|t| ergochat_eval::textproc::stem(t)).collect();
    let ref_stems: Vec<String> = refr.iter().map(|t| ergochat_eval::textproc::stem(t)).collect();

    fn chunks_of(pairs: &[(usize, usize)]) -> usize {
        let mut count = 0;
        for (idx, &(i, j)) in pairs.iter().enumerate() {
            if idx == 0 || pairs[idx - 1] != (i.wrapping_sub(1), j.wrapping_sub(1)) {
                count += 1;
            }
        }
        count
    }

    fn recurse(
        i: usize,
        cand_stems: &[String],
        ref_stems: &[String],
        used: &mut Vec<bool>,
        pairs: &mut Vec<(usize, usize)>,
        best: &mut (usize, usize),
    ) {
        if i == cand_stems.len() {
            let m = pairs.len();
            let c = chunks_of(pairs);
            if m > best.0 || (m == best.0 && c < best.1) {
                *best = (m, c);
            }
            return;
        }
        for j in 0..ref_stems.len() {
            if !used[j] && ref_stems[j] == cand_stems[i] {
                used[j] = true;
                pairs.push((i, j));
                recurse(i + 1, cand_stems, ref_stems, used, pairs, best);
                pairs.pop();
                used[j] = false;
            }
        }
        recurse(i + 1, cand_stems, ref_stems, used, pairs, best);
    }

    let mut used = vec![false; ref_stems.len()];
    let mut pairs = Vec::new();
    let mut best = (0, usize::MAX);
    recurse(0, &cand_stems, &ref_stems, &mut used, &mut pairs, &mut best);
    if best.0 == 0 {
        (0, 0)
    } else {
        best
    }
}

const CAPTION_WORDS: &[&str] = &[
    "worker", "workers", "panel", "ladder", "beam", "helmet", "posture", "bends", "bending",
    "lifts", "lifting", "carries", "heavy", "tall", "awkward", "overhead", "kneeling", "site",
    "tools", "the", "a", "on", "and", "risk", "exposed", "safe",
];

/// Random caption-like text: 1..=max_len words drawn from a fixed bank.
pub fn random_text<R: Rng>(rng: &mut R, max_len: usize) -> String {
    let len = rng.gen_range(1..=max_len);
    (0..len)
        .map(|_| CAPTION_WORDS[rng.gen_range(0..CAPTION_WORDS.len())])
        .collect::<Vec<_>>()
        .join(" ")
}

/// Random token sequence over a tiny alphabet, length 0..=max_len.
pub fn random_symbols<R: Rng>(rng: &mut R, max_len: usize) -> Vec<String> {
    let alphabet = ["a", "b", "c"];
    let len = rng.gen_range(0..=max_len);
    (0..len)
        .map(|_| alphabet[rng.gen_range(0..alphabet.len())].to_string())
        .collect()
}
