use std::collections::HashMap;

use crate::textproc::{stem, tokenize};

/// Result of the unigram alignment stage: candidate/reference index pairs,
/// their count, and the number of chunks (maximal runs contiguous in both
/// texts).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MeteorAlignment {
    pub matches: usize,
    pub chunks: usize,
    pub pairs: Vec<(usize, usize)>,
}

/// Guards against pathological repeated-token inputs; ordinary captions
/// stay far below this. When hit, the best alignment found so far is kept
/// (still a maximum-cardinality matching, found on the first descent).
const NODE_BUDGET: u64 = 5_000_000;

/// METEOR with exact and Porter-stem match stages, alpha = 0.9, gamma = 0.5,
/// beta = 3. Returns 0 when no unigram aligns.
pub fn meteor(candidate: &str, reference: &str) -> f64 {
    let cand = tokenize(candidate);
    let refr = tokenize(reference);
    let alignment = align(&cand, &refr);
    let m = alignment.matches as f64;
    if alignment.matches == 0 {
        return 0.0;
    }
    let precision = m / cand.len() as f64;
    let recall = m / refr.len() as f64;
    let f_mean = 10.0 * precision * recall / (recall + 9.0 * precision);
    let penalty = 0.5 * (alignment.chunks as f64 / m).powi(3);
    f_mean * (1.0 - penalty)
}

/// Finds a maximum-cardinality unigram matching (tokens match when their
/// Porter stems are equal, which subsumes exact equality) and, among those,
/// one with the fewest chunks. Ties are broken deterministically by a fixed
/// search order that prefers diagonal continuations, then exact-word
/// matches, then lower reference positions.
pub fn align(cand: &[String], refr: &[String]) -> MeteorAlignment {
    if cand.is_empty() || refr.is_empty() {
        return MeteorAlignment {
            matches: 0,
            chunks: 0,
            pairs: Vec::new(),
        };
    }

    let mut class_ids: HashMap<String, usize> = HashMap::new();
    let mut class_of = |token: &String| {
        let key = stem(token);
        let next = class_ids.len();
        *class_ids.entry(key).or_insert(next)
    };
    let cand_class: Vec<usize> = cand.iter().map(&mut class_of).collect();
    let ref_class: Vec<usize> = refr.iter().map(&mut class_of).collect();
    let n_classes = class_ids.len();

    let mut rc = vec![0usize; n_classes];
    for &c in &cand_class {
        rc[c] += 1;
    }
    let mut ar = vec![0usize; n_classes];
    for &c in &ref_class {
        ar[c] += 1;
    }
    let m_star: usize = (0..n_classes).map(|c| rc[c].min(ar[c])).sum();
    if m_star == 0 {
        return MeteorAlignment {
            matches: 0,
            chunks: 0,
            pairs: Vec::new(),
        };
    }

    // Reference positions per class, ascending.
    let mut positions: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
    for (j, &c) in ref_class.iter().enumerate() {
        positions[c].push(j);
    }

    let potential: i64 = (0..n_classes).map(|c| rc[c].min(ar[c]) as i64).sum();
    let mut search = Search {
        cand,
        refr,
        cand_class: &cand_class,
        ref_class: &ref_class,
        positions: &positions,
        used: vec![false; refr.len()],
        rc,
        ar,
        potential,
        m_star,
        best_chunks: None,
        best_pairs: Vec::new(),
        stack: Vec::new(),
        nodes: 0,
    };
    search.dfs(0, 0, 0, None);

    let pairs = search.best_pairs;
    let chunks = search.best_chunks.unwrap_or(0);
    debug_assert_eq!(chunks, count_chunks(&pairs));
    MeteorAlignment {
        matches: pairs.len(),
        chunks,
        pairs,
    }
}

fn count_chunks(pairs: &[(usize, usize)]) -> usize {
    let mut chunks = 0;
    let mut prev: Option<(usize, usize)> = None;
    for &(i, j) in pairs {
        if prev != Some((i.wrapping_sub(1), j.wrapping_sub(1))) {
            chunks += 1;
        }
        prev = Some((i, j));
    }
    chunks
}

struct Search<'a> {
    cand: &'a [String],
    refr: &'a [String],
    cand_class: &'a [usize],
    ref_class: &'a [usize],
    positions: &'a [Vec<usize>],
    used: Vec<bool>,
    /// Candidate tokens per class not yet passed over.
    rc: Vec<usize>,
    /// Unused reference tokens per class.
    ar: Vec<usize>,
    /// Sum over classes of min(rc, ar): the matches still obtainable.
    potential: i64,
    m_star: usize,
    best_chunks: Option<usize>,
    best_pairs: Vec<(usize, usize)>,
    stack: Vec<(usize, usize)>,
    nodes: u64,
}

impl Search<'_> {
    fn adjust(&mut self, class: usize, d_rc: i64, d_ar: i64) {
        let before = self.rc[class].min(self.ar[class]) as i64;
        self.rc[class] = (self.rc[class] as i64 + d_rc) as usize;
        self.ar[class] = (self.ar[class] as i64 + d_ar) as usize;
        let after = self.rc[class].min(self.ar[class]) as i64;
        self.potential += after - before;
    }

    fn dfs(&mut self, i: usize, matched: usize, chunks: usize, last: Option<(usize, usize)>) {
        if self.nodes >= NODE_BUDGET {
            return;
        }
        self.nodes += 1;

        if (matched as i64) + self.potential < self.m_star as i64 {
            return;
        }
        if let Some(best) = self.best_chunks {
            let must_open_chunk = matched < self.m_star && !self.can_continue_run(i, last);
            let lower_bound = chunks + usize::from(must_open_chunk);
            if lower_bound >= best {
                return;
            }
        }
        if i == self.cand.len() {
            // The potential prune guarantees matched == m_star here.
            if self.best_chunks.map_or(true, |b| chunks < b) {
                self.best_chunks = Some(chunks);
                self.best_pairs = self.stack.clone();
            }
            return;
        }

        let class = self.cand_class[i];
        let mut moves: Vec<(u8, usize)> = self.positions[class]
            .iter()
            .filter(|&&j| !self.used[j])
            .map(|&j| {
                let priority = if continues_run(last, i, j) {
                    0
                } else if self.refr[j] == self.cand[i] {
                    1
                } else {
                    2
                };
                (priority, j)
            })
            .collect();
        moves.sort_unstable();

        for (_, j) in moves {
            let new_chunk = usize::from(!continues_run(last, i, j));
            self.used[j] = true;
            self.adjust(class, -1, -1);
            self.stack.push((i, j));
            self.dfs(i + 1, matched + 1, chunks + new_chunk, Some((i, j)));
            self.stack.pop();
            self.adjust(class, 1, 1);
            self.used[j] = false;
        }

        // Leave candidate token i unmatched.
        self.adjust(class, -1, 0);
        self.dfs(i + 1, matched, chunks, last);
        self.adjust(class, 1, 0);
    }

    /// Whether the very next match could extend the current chunk: the last
    /// pair must be (i-1, j-1) with a compatible, unused reference at j.
    fn can_continue_run(&self, i: usize, last: Option<(usize, usize)>) -> bool {
        let Some((li, lj)) = last else {
            return false;
        };
        if li + 1 != i || i >= self.cand.len() {
            return false;
        }
        let j = lj + 1;
        j < self.refr.len() && !self.used[j] && self.ref_class[j] == self.cand_class[i]
    }
}

fn continues_run(last: Option<(usize, usize)>, i: usize, j: usize) -> bool {
    matches!(last, Some((li, lj)) if li + 1 == i && lj + 1 == j)
}
