//! Scoring prediction files against the dataset: VQA accuracy, per-image
//! caption metric scores, perplexity/label agreement, and the paired
//! two-model comparison aggregates.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{build_prompt, Dataset, TaskToken};
use crate::metrics::{InfoTable, MetricId, MetricRegistry, ScoringContext};
use crate::riskmodel::{classify_risk, RiskClassifier};
use crate::textproc::tokenize;

mod report;

pub use report::{format_fixed, render_report, ReportFormat};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("no prediction for image {image_id}")]
    MissingPrediction { image_id: u64 },
    #[error("duplicate prediction for model {model_id:?}, image {image_id}, task {task:?}")]
    DuplicatePrediction {
        model_id: String,
        image_id: u64,
        task: TaskToken,
    },
    #[error("prediction file mixes model ids: {0:?}")]
    MixedModels(Vec<String>),
    #[error("prediction for image {image_id} does not use the canonical prompt for {task:?}")]
    PromptMismatch { image_id: u64, task: TaskToken },
    #[error("line {line}: {message}")]
    MalformedRecord { line: usize, message: String },
    #[error("runs are not comparable: {0}")]
    MismatchedRuns(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One model output for (image, task), tagged with the model that produced
/// it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub model_id: String,
    pub image_id: u64,
    pub task: TaskToken,
    pub prompt: String,
    pub output_text: String,
}

/// One (image, metric, value) triple. `degenerate` marks scores produced
/// under the empty-text convention.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub image_id: u64,
    pub metric: MetricId,
    pub value: f64,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub degenerate: bool,
}

/// Validates a prediction run: unique (model, image, task) triples, a
/// single model id, and canonical prompts.
pub fn validate_run(records: &[PredictionRecord]) -> Result<(), EvalError> {
    let mut seen = BTreeSet::new();
    let mut models = BTreeSet::new();
    for rec in records {
        models.insert(rec.model_id.clone());
        if !seen.insert((rec.model_id.clone(), rec.image_id, rec.task)) {
            return Err(EvalError::DuplicatePrediction {
                model_id: rec.model_id.clone(),
                image_id: rec.image_id,
                task: rec.task,
            });
        }
        if rec.prompt != build_prompt(rec.task) {
            return Err(EvalError::PromptMismatch {
                image_id: rec.image_id,
                task: rec.task,
            });
        }
    }
    if models.len() > 1 {
        return Err(EvalError::MixedModels(models.into_iter().collect()));
    }
    Ok(())
}

/// Reads a JSON-lines prediction file and validates the run.
pub fn load_predictions(path: &Path) -> Result<Vec<PredictionRecord>, EvalError> {
    let file = std::fs::File::open(path)?;
    let mut records = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: PredictionRecord =
            serde_json::from_str(&line).map_err(|e| EvalError::MalformedRecord {
                line: idx + 1,
                message: e.to_string(),
            })?;
        records.push(rec);
    }
    validate_run(&records)?;
    Ok(records)
}

pub fn write_predictions(records: &[PredictionRecord], path: &Path) -> Result<(), EvalError> {
    let mut out = Vec::new();
    for rec in records {
        serde_json::to_writer(&mut out, rec).expect("prediction serialization");
        out.push(b'\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn load_scores(path: &Path) -> Result<Vec<ScoreRecord>, EvalError> {
    let file = std::fs::File::open(path)?;
    let mut records = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: ScoreRecord =
            serde_json::from_str(&line).map_err(|e| EvalError::MalformedRecord {
                line: idx + 1,
                message: e.to_string(),
            })?;
        records.push(rec);
    }
    Ok(records)
}

pub fn write_scores(records: &[ScoreRecord], path: &Path) -> Result<(), EvalError> {
    let mut buf = Vec::new();
    for rec in records {
        serde_json::to_writer(&mut buf, rec).expect("score serialization");
        buf.push(b'\n');
    }
    let mut file = std::fs::File::create(path)?;
    file.write_all(&buf)?;
    Ok(())
}

/// A normalized yes/no answer, or neither.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VqaAnswer {
    Yes,
    No,
    Unparseable,
}

impl VqaAnswer {
    pub fn as_ground_truth(self) -> Option<&'static str> {
        match self {
            VqaAnswer::Yes => Some("yes"),
            VqaAnswer::No => Some("no"),
            VqaAnswer::Unparseable => None,
        }
    }
}

/// Lowercases, strips punctuation, and returns the first whole-word "yes"
/// or "no".
pub fn normalize_vqa_answer(output_text: &str) -> VqaAnswer {
    for token in tokenize(output_text) {
        match token.as_str() {
            "yes" => return VqaAnswer::Yes,
            "no" => return VqaAnswer::No,
            _ => {}
        }
    }
    VqaAnswer::Unparseable
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VqaAccuracyReport {
    pub n: usize,
    pub correct: usize,
    pub accuracy_pct: f64,
    /// Images whose outputs contained neither "yes" nor "no"; counted as
    /// incorrect.
    pub unparseable: Vec<u64>,
}

/// Percentage of VQA predictions whose normalized answer equals the ground
/// truth. Every VQA annotation must have a prediction.
pub fn vqa_accuracy(preds: &[PredictionRecord], d: &Dataset) -> Result<VqaAccuracyReport, EvalError> {
    validate_run(preds)?;
    let by_image: HashMap<u64, &PredictionRecord> = preds
        .iter()
        .filter(|p| p.task == TaskToken::Vqa)
        .map(|p| (p.image_id, p))
        .collect();

    let mut n = 0;
    let mut correct = 0;
    let mut unparseable = Vec::new();
    for image_id in d.image_ids_with_task(TaskToken::Vqa) {
        let ann = d.vqa_for(image_id).expect("image id came from the task index");
        let pred = by_image
            .get(&image_id)
            .ok_or(EvalError::MissingPrediction { image_id })?;
        n += 1;
        match normalize_vqa_answer(&pred.output_text).as_ground_truth() {
            Some(answer) if answer == ann.text => correct += 1,
            Some(_) => {}
            None => unparseable.push(image_id),
        }
    }
    Ok(VqaAccuracyReport {
        n,
        correct,
        accuracy_pct: 100.0 * correct as f64 / n as f64,
        unparseable,
    })
}

/// Scores every caption prediction against its reference captions with the
/// registered metrics. Records come back sorted by image id, then registry
/// order: nine per image with the default registry.
pub fn score_captions(
    preds: &[PredictionRecord],
    d: &Dataset,
    info: &InfoTable,
    registry: &MetricRegistry,
) -> Result<Vec<ScoreRecord>, EvalError> {
    validate_run(preds)?;
    let by_image: HashMap<u64, &PredictionRecord> = preds
        .iter()
        .filter(|p| p.task == TaskToken::Caption)
        .map(|p| (p.image_id, p))
        .collect();

    let mut work: Vec<(u64, &PredictionRecord, Vec<String>)> = Vec::new();
    for image_id in d.image_ids_with_task(TaskToken::Caption) {
        let pred = by_image
            .get(&image_id)
            .ok_or(EvalError::MissingPrediction { image_id })?;
        let references: Vec<String> = d
            .captions_for(image_id)
            .iter()
            .map(|a| a.text.clone())
            .collect();
        work.push((image_id, pred, references));
    }

    let groups: Vec<Vec<ScoreRecord>> = work
        .par_iter()
        .map(|(image_id, pred, references)| {
            let ctx = ScoringContext { info: Some(info) };
            registry
                .iter()
                .map(|metric| {
                    let scored = metric.score(&pred.output_text, references, &ctx);
                    ScoreRecord {
                        image_id: *image_id,
                        metric: metric.id(),
                        value: scored.value,
                        degenerate: scored.degenerate,
                    }
                })
                .collect::<Vec<ScoreRecord>>()
        })
        .collect();
    Ok(groups.into_iter().flatten().collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub n: usize,
    pub agree: usize,
    pub agreement_pct: f64,
    /// Images whose outputs had no tokens and could not be classified;
    /// counted as disagreement.
    pub unclassifiable: Vec<u64>,
}

/// Percentage of caption predictions whose perplexity-based risk label
/// matches the annotated label.
pub fn perplexity_agreement(
    preds: &[PredictionRecord],
    d: &Dataset,
    classifier: &RiskClassifier,
) -> Result<AgreementReport, EvalError> {
    validate_run(preds)?;
    let by_image: HashMap<u64, &PredictionRecord> = preds
        .iter()
        .filter(|p| p.task == TaskToken::Caption)
        .map(|p| (p.image_id, p))
        .collect();

    let mut n = 0;
    let mut agree = 0;
    let mut unclassifiable = Vec::new();
    for image_id in d.image_ids_with_task(TaskToken::Caption) {
        let pred = by_image
            .get(&image_id)
            .ok_or(EvalError::MissingPrediction { image_id })?;
        let label = d
            .risk_label_for(image_id)
            .expect("image id came from the caption index");
        n += 1;
        match classify_risk(&pred.output_text, classifier) {
            Ok(decision) => {
                if decision.risk_exposed == label {
                    agree += 1;
                }
            }
            Err(_) => unclassifiable.push(image_id),
        }
    }
    Ok(AgreementReport {
        n,
        agree,
        agreement_pct: 100.0 * agree as f64 / n as f64,
        unclassifiable,
    })
}

/// Per-model accuracy figures produced by an evaluation run; feeds the
/// correct-identification section of the comparison report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationSummary {
    pub model_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vqa: Option<VqaAccuracyReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perplexity_agreement: Option<AgreementReport>,
}

/// Per-metric comparison aggregates between a fine-tuned and a general run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricComparison {
    pub metric: MetricId,
    /// Mean of per-image (fine-tuned - general) differences.
    pub avg_difference: f64,
    /// Share of images improving in the metric's beneficial direction.
    pub pct_improved: f64,
    /// Share of exactly tied images; ties never count as improvement.
    pub pct_tied: f64,
    /// avg_difference normalized by the metric's upper bound, as a
    /// percentage; absent for unbounded metrics.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub avg_improvement_pct: Option<f64>,
    pub finetuned_mean: f64,
    pub general_mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    /// Number of evaluated image pairs.
    pub n: usize,
    pub rows: Vec<MetricComparison>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub finetuned_summary: Option<EvaluationSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub general_summary: Option<EvaluationSummary>,
}

fn index_by_metric(
    records: &[ScoreRecord],
    run: &str,
) -> Result<BTreeMap<MetricId, BTreeMap<u64, f64>>, EvalError> {
    let mut map: BTreeMap<MetricId, BTreeMap<u64, f64>> = BTreeMap::new();
    for rec in records {
        let per_image = map.entry(rec.metric).or_default();
        if per_image.insert(rec.image_id, rec.value).is_some() {
            return Err(EvalError::MismatchedRuns(format!(
                "{run} run has two {} scores for image {}",
                rec.metric, rec.image_id
            )));
        }
    }
    Ok(map)
}

/// Aggregates two score runs into per-metric average difference, share of
/// improved images, and normalized average improvement. Both runs must
/// cover the same image and metric sets.
pub fn compare_runs(
    finetuned: &[ScoreRecord],
    general: &[ScoreRecord],
) -> Result<ComparisonReport, EvalError> {
    let ft = index_by_metric(finetuned, "fine-tuned")?;
    let gen = index_by_metric(general, "general")?;

    let ft_metrics: Vec<MetricId> = ft.keys().copied().collect();
    let gen_metrics: Vec<MetricId> = gen.keys().copied().collect();
    if ft_metrics != gen_metrics {
        return Err(EvalError::MismatchedRuns(format!(
            "metric sets differ: {ft_metrics:?} vs {gen_metrics:?}"
        )));
    }
    if ft.is_empty() {
        return Err(EvalError::MismatchedRuns("runs are empty".to_string()));
    }

    let image_set: Vec<u64> = ft.values().next().unwrap().keys().copied().collect();
    for (metric, per_image) in ft.iter().chain(gen.iter()) {
        let ids: Vec<u64> = per_image.keys().copied().collect();
        if ids != image_set {
            return Err(EvalError::MismatchedRuns(format!(
                "image sets differ for {metric}"
            )));
        }
    }
    let n = image_set.len();

    // Report rows follow the canonical metric order; any other registered
    // metrics come after.
    let mut ordered: Vec<MetricId> = MetricId::CAPTION_METRICS
        .into_iter()
        .filter(|m| ft.contains_key(m))
        .collect();
    for metric in ft.keys() {
        if !ordered.contains(metric) {
            ordered.push(*metric);
        }
    }

    let mut rows = Vec::new();
    for metric in ordered {
        let f_scores = &ft[&metric];
        let u_scores = &gen[&metric];
        let bounds = metric.bounds();

        let mut diff_sum = 0.0;
        let mut f_sum = 0.0;
        let mut u_sum = 0.0;
        let mut improved = 0usize;
        let mut tied = 0usize;
        // ascending image id: fixed summation order keeps floats reproducible
        for image_id in &image_set {
            let f = f_scores[image_id];
            let u = u_scores[image_id];
            diff_sum += f - u;
            f_sum += f;
            u_sum += u;
            if f == u {
                tied += 1;
            } else if bounds.higher_is_better {
                improved += usize::from(f > u);
            } else {
                improved += usize::from(f < u);
            }
        }
        let avg_difference = diff_sum / n as f64;
        rows.push(MetricComparison {
            metric,
            avg_difference,
            pct_improved: 100.0 * improved as f64 / n as f64,
            pct_tied: 100.0 * tied as f64 / n as f64,
            avg_improvement_pct: bounds.upper.map(|m_max| avg_difference / m_max * 100.0),
            finetuned_mean: f_sum / n as f64,
            general_mean: u_sum / n as f64,
        });
    }

    Ok(ComparisonReport {
        n,
        rows,
        finetuned_summary: None,
        general_summary: None,
    })
}
