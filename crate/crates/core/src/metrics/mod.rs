//! The caption-similarity metric family.
//!
//! Each metric is exposed two ways: as a plain function (`rouge1`, `bleu`,
//! `nist`, ...) and as a [`CaptionMetric`] strategy object registered by
//! name in a [`MetricRegistry`], which is how the evaluation pipeline and
//! the CLI select metrics at runtime.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::textproc::tokenize;

mod bleu;
mod meteor;
mod nist;
mod rouge;
mod spice;
mod vector;

pub use bleu::{bleu, clipped_matches, modified_precisions};
pub use meteor::{align, meteor, MeteorAlignment};
pub use nist::{build_info_table, nist, InfoTable};
pub use rouge::{rouge1, RougeScores};
pub use spice::{extract_tuples, spice_lite, SceneTuple};
pub use vector::{cosine_similarity, euclidean_distance};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricError {
    #[error("reference list is empty")]
    EmptyReferences,
    #[error("info corpus is empty")]
    EmptyCorpus,
}

/// Identifier for every metric in the toolkit, including perplexity, which
/// is computed by the risk model rather than the caption registry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricId {
    RougeR,
    RougeP,
    RougeF,
    Bleu,
    Nist,
    CosineSimilarity,
    EuclideanDistance,
    Meteor,
    Spice,
    Perplexity,
}

impl MetricId {
    /// The nine caption metrics in report row order.
    pub const CAPTION_METRICS: [MetricId; 9] = [
        MetricId::RougeR,
        MetricId::RougeP,
        MetricId::RougeF,
        MetricId::Bleu,
        MetricId::Nist,
        MetricId::CosineSimilarity,
        MetricId::EuclideanDistance,
        MetricId::Meteor,
        MetricId::Spice,
    ];

    /// Stable machine name, used in score files and on the CLI.
    pub fn name(self) -> &'static str {
        match self {
            MetricId::RougeR => "rouge_r",
            MetricId::RougeP => "rouge_p",
            MetricId::RougeF => "rouge_f",
            MetricId::Bleu => "bleu",
            MetricId::Nist => "nist",
            MetricId::CosineSimilarity => "cosine_similarity",
            MetricId::EuclideanDistance => "euclidean_distance",
            MetricId::Meteor => "meteor",
            MetricId::Spice => "spice",
            MetricId::Perplexity => "perplexity",
        }
    }

    /// Human-facing row label used in rendered reports.
    pub fn label(self) -> &'static str {
        match self {
            MetricId::RougeR => "ROUGE_r",
            MetricId::RougeP => "ROUGE_p",
            MetricId::RougeF => "ROUGE_f",
            MetricId::Bleu => "BLEU",
            MetricId::Nist => "NIST",
            MetricId::CosineSimilarity => "cos_similarity",
            MetricId::EuclideanDistance => "Euc_distance",
            MetricId::Meteor => "METEOR",
            MetricId::Spice => "SPICE",
            MetricId::Perplexity => "perplexity",
        }
    }

    pub fn from_name(name: &str) -> Option<MetricId> {
        let all = [
            MetricId::RougeR,
            MetricId::RougeP,
            MetricId::RougeF,
            MetricId::Bleu,
            MetricId::Nist,
            MetricId::CosineSimilarity,
            MetricId::EuclideanDistance,
            MetricId::Meteor,
            MetricId::Spice,
            MetricId::Perplexity,
        ];
        all.into_iter().find(|m| m.name() == name)
    }

    pub fn bounds(self) -> MetricBounds {
        match self {
            MetricId::RougeR
            | MetricId::RougeP
            | MetricId::RougeF
            | MetricId::Bleu
            | MetricId::Meteor
            | MetricId::Spice => MetricBounds {
                metric: self,
                lower: 0.0,
                upper: Some(1.0),
                higher_is_better: true,
            },
            MetricId::Nist => MetricBounds {
                metric: self,
                lower: 0.0,
                upper: None,
                higher_is_better: true,
            },
            MetricId::CosineSimilarity => MetricBounds {
                metric: self,
                lower: -1.0,
                upper: Some(1.0),
                higher_is_better: true,
            },
            MetricId::EuclideanDistance => MetricBounds {
                metric: self,
                lower: 0.0,
                upper: None,
                higher_is_better: false,
            },
            MetricId::Perplexity => MetricBounds {
                metric: self,
                lower: 1.0,
                upper: None,
                higher_is_better: false,
            },
        }
    }
}

impl std::fmt::Display for MetricId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Value range and preferred direction of a metric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricBounds {
    pub metric: MetricId,
    pub lower: f64,
    /// `None` means the range is unbounded above.
    pub upper: Option<f64>,
    pub higher_is_better: bool,
}

impl MetricBounds {
    pub fn contains(&self, value: f64) -> bool {
        value >= self.lower && self.upper.map_or(true, |u| value <= u)
    }
}

/// A metric value plus a degeneracy flag. Degenerate scores (empty
/// candidate or reference, empty tuple sets) are reported as 0 instead of
/// aborting a batch run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredValue {
    pub value: f64,
    pub degenerate: bool,
}

impl ScoredValue {
    pub fn ok(value: f64) -> Self {
        ScoredValue {
            value,
            degenerate: false,
        }
    }

    pub fn degenerate() -> Self {
        ScoredValue {
            value: 0.0,
            degenerate: true,
        }
    }
}

/// Shared context handed to every metric at scoring time. Only NIST uses
/// the info table today.
#[derive(Default)]
pub struct ScoringContext<'a> {
    pub info: Option<&'a InfoTable>,
}

/// A caption-similarity scoring strategy. Single-reference metrics score
/// against the first reference; BLEU and NIST use the whole list.
pub trait CaptionMetric: Send + Sync {
    fn id(&self) -> MetricId;

    fn bounds(&self) -> MetricBounds {
        self.id().bounds()
    }

    fn score(&self, candidate: &str, references: &[String], ctx: &ScoringContext) -> ScoredValue;
}

fn degenerate_pair(candidate: &str, reference: &str) -> bool {
    tokenize(candidate).is_empty() || tokenize(reference).is_empty()
}

macro_rules! single_reference_metric {
    ($name:ident, $id:expr, |$cand:ident, $reference:ident| $body:expr) => {
        struct $name;

        impl CaptionMetric for $name {
            fn id(&self) -> MetricId {
                $id
            }

            fn score(
                &self,
                candidate: &str,
                references: &[String],
                _ctx: &ScoringContext,
            ) -> ScoredValue {
                let Some(reference) = references.first() else {
                    return ScoredValue::degenerate();
                };
                if degenerate_pair(candidate, reference) {
                    return ScoredValue::degenerate();
                }
                let $cand = candidate;
                let $reference = reference.as_str();
                $body
            }
        }
    };
}

single_reference_metric!(RougeRecall, MetricId::RougeR, |c, r| ScoredValue::ok(
    rouge1(c, r).recall
));
single_reference_metric!(RougePrecision, MetricId::RougeP, |c, r| ScoredValue::ok(
    rouge1(c, r).precision
));
single_reference_metric!(RougeF1, MetricId::RougeF, |c, r| ScoredValue::ok(
    rouge1(c, r).f1
));
single_reference_metric!(CosineMetric, MetricId::CosineSimilarity, |c, r| {
    cosine_similarity(c, r)
});
single_reference_metric!(EuclideanMetric, MetricId::EuclideanDistance, |c, r| {
    ScoredValue::ok(euclidean_distance(c, r))
});
single_reference_metric!(MeteorMetric, MetricId::Meteor, |c, r| ScoredValue::ok(
    meteor(c, r)
));
single_reference_metric!(SpiceMetric, MetricId::Spice, |c, r| spice_lite(c, r));

struct BleuMetric;

impl CaptionMetric for BleuMetric {
    fn id(&self) -> MetricId {
        MetricId::Bleu
    }

    fn score(&self, candidate: &str, references: &[String], _ctx: &ScoringContext) -> ScoredValue {
        if references.iter().all(|r| tokenize(r).is_empty()) || tokenize(candidate).is_empty() {
            return ScoredValue::degenerate();
        }
        match bleu(candidate, references) {
            Ok(v) => ScoredValue::ok(v),
            Err(_) => ScoredValue::degenerate(),
        }
    }
}

struct NistMetric;

impl CaptionMetric for NistMetric {
    fn id(&self) -> MetricId {
        MetricId::Nist
    }

    fn score(&self, candidate: &str, references: &[String], ctx: &ScoringContext) -> ScoredValue {
        let Some(info) = ctx.info else {
            return ScoredValue::degenerate();
        };
        if references.iter().all(|r| tokenize(r).is_empty()) || tokenize(candidate).is_empty() {
            return ScoredValue::degenerate();
        }
        match nist(candidate, references, info) {
            Ok(v) => ScoredValue::ok(v),
            Err(_) => ScoredValue::degenerate(),
        }
    }
}

/// Runtime registry of caption metrics, keyed by [`MetricId::name`].
pub struct MetricRegistry {
    entries: Vec<Box<dyn CaptionMetric>>,
}

impl MetricRegistry {
    pub fn empty() -> Self {
        MetricRegistry {
            entries: Vec::new(),
        }
    }

    /// Registry holding the nine caption metrics in report row order.
    pub fn with_default_metrics() -> Self {
        let mut reg = MetricRegistry::empty();
        reg.register(Box::new(RougeRecall));
        reg.register(Box::new(RougePrecision));
        reg.register(Box::new(RougeF1));
        reg.register(Box::new(BleuMetric));
        reg.register(Box::new(NistMetric));
        reg.register(Box::new(CosineMetric));
        reg.register(Box::new(EuclideanMetric));
        reg.register(Box::new(MeteorMetric));
        reg.register(Box::new(SpiceMetric));
        reg
    }

    pub fn register(&mut self, metric: Box<dyn CaptionMetric>) {
        self.entries.push(metric);
    }

    pub fn get(&self, name: &str) -> Option<&dyn CaptionMetric> {
        self.entries
            .iter()
            .find(|m| m.id().name() == name)
            .map(|m| m.as_ref())
    }

    pub fn iter(&self) -> impl Iterator<Item = &dyn CaptionMetric> {
        self.entries.iter().map(|m| m.as_ref())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Keeps only the named metrics, preserving registry order. Unknown
    /// names are reported back as an error.
    pub fn select(&mut self, names: &[String]) -> Result<(), String> {
        for name in names {
            if !self.entries.iter().any(|m| m.id().name() == *name) {
                return Err(format!("unknown metric: {name}"));
            }
        }
        self.entries.retain(|m| names.contains(&m.id().name().to_string()));
        Ok(())
    }
}
