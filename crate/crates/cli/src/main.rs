//! Command-line pipeline: validate -> split -> infer -> evaluate ->
//! compare -> survey-plan/survey-analyze -> report.
//!
//! Exit codes: 0 on success, 1 on data or validation errors, 2 on usage
//! errors. Every file path is an explicit flag and every random choice
//! takes a mandatory seed, so identical invocations produce identical
//! artifacts.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use ergochat_eval::dataset::{
    load_dataset, split_dataset, split_dataset_by_ids, write_dataset, TaskToken,
};
use ergochat_eval::evaluation::{
    compare_runs, load_predictions, load_scores, perplexity_agreement, render_report,
    score_captions, vqa_accuracy, write_scores, ComparisonReport, EvaluationSummary,
    ReportFormat,
};
use ergochat_eval::metrics::{build_info_table, MetricRegistry};
use ergochat_eval::model_client::{run_batch, BackendConfig, BackendKind};
use ergochat_eval::riskmodel::{LmConfig, RiskClassifier};
use ergochat_eval::survey::{
    demographics_summary, load_responses, plan_versions, render_survey_summary,
    resolve_choices, summarize, SurveyPlan,
};

#[derive(Parser)]
#[command(name = "ergochat", version, about = "Ergonomic-risk caption/VQA evaluation pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a dataset file against the format and label invariants.
    Validate {
        #[arg(long)]
        dataset: PathBuf,
    },
    /// Split a dataset into image-disjoint fine-tune and test partitions.
    Split {
        #[arg(long)]
        dataset: PathBuf,
        /// Number of images in the test partition.
        #[arg(long)]
        test_count: usize,
        /// Seed for the shuffled split; same seed, same split.
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out_finetune: PathBuf,
        #[arg(long)]
        out_test: PathBuf,
        /// Pin the test partition to the newline-separated image ids in
        /// this file instead of sampling (ignores --test-count/--seed).
        #[arg(long)]
        test_ids: Option<PathBuf>,
    },
    /// Run inference for one task over every image in a dataset.
    Infer {
        #[arg(long)]
        dataset: PathBuf,
        /// Directory the dataset's image file names resolve against.
        #[arg(long)]
        images_dir: PathBuf,
        /// Task to run: caption or vqa.
        #[arg(long, value_parser = parse_task)]
        task: TaskToken,
        /// Backend strategy: stub or remote.
        #[arg(long, value_parser = parse_backend)]
        backend: BackendKind,
        /// Label recorded on every prediction.
        #[arg(long)]
        model_id: String,
        #[arg(long)]
        cache_dir: PathBuf,
        /// Prediction JSON-lines output; failures go to <out>.failures.
        #[arg(long)]
        out: PathBuf,
        /// Remote endpoint URL (remote backend only).
        #[arg(long)]
        endpoint: Option<String>,
        /// Environment variable holding the bearer token.
        #[arg(long)]
        auth_env: Option<String>,
        /// Parallel requests in flight.
        #[arg(long, default_value_t = 4)]
        jobs: usize,
        #[arg(long, default_value_t = 30.0)]
        timeout_secs: f64,
        #[arg(long, default_value_t = 2)]
        max_retries: u32,
    },
    /// Score predictions against the dataset and write per-image scores.
    Evaluate {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        predictions: PathBuf,
        /// Score JSON-lines output for caption predictions.
        #[arg(long)]
        scores: PathBuf,
        /// Fine-tune partition used to train the two-class risk language
        /// models; enables the perplexity agreement figure.
        #[arg(long)]
        finetune_dataset: Option<PathBuf>,
        /// Evaluation summary JSON output.
        #[arg(long)]
        summary: Option<PathBuf>,
        /// Comma-separated metric subset (default: all nine).
        #[arg(long, value_delimiter = ',')]
        metrics: Vec<String>,
        /// Worker threads for scoring; 0 means one per core.
        #[arg(long, default_value_t = 0)]
        jobs: usize,
    },
    /// Aggregate two score runs into a comparison report.
    Compare {
        /// Score file of the fine-tuned model.
        #[arg(long)]
        finetuned: PathBuf,
        /// Score file of the general model.
        #[arg(long)]
        general: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "text", value_parser = parse_format)]
        format: ReportFormat,
        /// Also write the raw comparison as JSON (for `report`).
        #[arg(long)]
        out_json: Option<PathBuf>,
        /// Evaluation summary JSON of the fine-tuned model.
        #[arg(long)]
        finetuned_summary: Option<PathBuf>,
        /// Evaluation summary JSON of the general model.
        #[arg(long)]
        general_summary: Option<PathBuf>,
    },
    /// Partition the 200 test images into the 13 questionnaire versions.
    SurveyPlan {
        #[arg(long)]
        dataset: PathBuf,
        /// Seed for version assignment and option-order randomization.
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Resolve survey responses against a plan and summarize them.
    SurveyAnalyze {
        /// Response CSV file.
        #[arg(long)]
        responses: PathBuf,
        /// Plan JSON produced by survey-plan.
        #[arg(long)]
        plan: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Re-render a saved comparison JSON.
    Report {
        #[arg(long)]
        comparison: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "text", value_parser = parse_format)]
        format: ReportFormat,
    },
}

fn parse_task(value: &str) -> Result<TaskToken, String> {
    TaskToken::from_name(value).ok_or_else(|| format!("unknown task {value:?} (caption, vqa)"))
}

fn parse_backend(value: &str) -> Result<BackendKind, String> {
    BackendKind::from_name(value)
        .ok_or_else(|| format!("unknown backend {value:?} (stub, remote)"))
}

fn parse_format(value: &str) -> Result<ReportFormat, String> {
    ReportFormat::from_name(value).ok_or_else(|| format!("unknown format {value:?} (text, tsv)"))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Validate { dataset } => {
            let d = load_dataset(&dataset)
                .with_context(|| format!("validating {}", dataset.display()))?;
            let captions = d
                .annotations
                .iter()
                .filter(|a| a.task == TaskToken::Caption)
                .count();
            let vqa = d.annotations.len() - captions;
            println!(
                "dataset ok: {} images, {} annotations ({} caption, {} vqa), partition: {:?}",
                d.images.len(),
                d.annotations.len(),
                captions,
                vqa,
                d.partition_tag
            );
            Ok(())
        }
        Command::Split {
            dataset,
            test_count,
            seed,
            out_finetune,
            out_test,
            test_ids,
        } => {
            let d = load_dataset(&dataset)?;
            let (finetune, test) = match test_ids {
                Some(path) => {
                    let ids = read_id_list(&path)?;
                    split_dataset_by_ids(&d, &ids)?
                }
                None => split_dataset(&d, test_count, seed)?,
            };
            write_dataset(&finetune, &out_finetune)?;
            write_dataset(&test, &out_test)?;
            println!(
                "split: {} fine-tune images -> {}, {} test images -> {}",
                finetune.images.len(),
                out_finetune.display(),
                test.images.len(),
                out_test.display()
            );
            Ok(())
        }
        Command::Infer {
            dataset,
            images_dir,
            task,
            backend,
            model_id,
            cache_dir,
            out,
            endpoint,
            auth_env,
            jobs,
            timeout_secs,
            max_retries,
        } => {
            let d = load_dataset(&dataset)?;
            let cfg = BackendConfig {
                backend_kind: backend,
                model_id,
                endpoint: endpoint.unwrap_or_default(),
                auth_token_env: auth_env,
                timeout_secs,
                max_in_flight: jobs,
                max_retries,
                ..BackendConfig::stub("placeholder")
            };
            let outcome = run_batch(&d, &images_dir, task, &cfg, &cache_dir, &out)?;
            println!(
                "inferred {} predictions -> {} ({} failures)",
                outcome.records.len(),
                out.display(),
                outcome.failures.len()
            );
            Ok(())
        }
        Command::Evaluate {
            dataset,
            predictions,
            scores,
            finetune_dataset,
            summary,
            metrics,
            jobs,
        } => {
            let d = load_dataset(&dataset)?;
            let preds = load_predictions(&predictions)?;
            if preds.is_empty() {
                bail!("prediction file {} is empty", predictions.display());
            }
            let model_id = preds[0].model_id.clone();

            let caption_preds: Vec<_> = preds
                .iter()
                .filter(|p| p.task == TaskToken::Caption)
                .cloned()
                .collect();
            let vqa_preds: Vec<_> = preds
                .iter()
                .filter(|p| p.task == TaskToken::Vqa)
                .cloned()
                .collect();

            let mut registry = MetricRegistry::with_default_metrics();
            if !metrics.is_empty() {
                registry
                    .select(&metrics)
                    .map_err(|e| anyhow::anyhow!(e))?;
            }

            let score_records = if caption_preds.is_empty() {
                Vec::new()
            } else {
                let corpus = d.caption_corpus();
                let info = build_info_table(&corpus)
                    .map_err(|e| anyhow::anyhow!("building the info corpus: {e}"))?;
                let pool = rayon::ThreadPoolBuilder::new()
                    .num_threads(jobs)
                    .build()
                    .context("building scoring thread pool")?;
                pool.install(|| score_captions(&caption_preds, &d, &info, &registry))?
            };
            write_scores(&score_records, &scores)?;
            println!(
                "scored {} caption predictions ({} records) -> {}",
                caption_preds.len(),
                score_records.len(),
                scores.display()
            );

            let vqa_report = if vqa_preds.is_empty() {
                None
            } else {
                let report = vqa_accuracy(&vqa_preds, &d)?;
                println!(
                    "vqa accuracy: {}% ({} of {}, {} unparseable)",
                    ergochat_eval::evaluation::format_fixed(report.accuracy_pct, 2),
                    report.correct,
                    report.n,
                    report.unparseable.len()
                );
                Some(report)
            };

            let agreement = match (&finetune_dataset, caption_preds.is_empty()) {
                (Some(path), false) => {
                    let finetune = load_dataset(path)?;
                    let risk: Vec<String> = finetune
                        .annotations
                        .iter()
                        .filter(|a| a.task == TaskToken::Caption && a.risk_exposed)
                        .map(|a| a.text.clone())
                        .collect();
                    let norisk: Vec<String> = finetune
                        .annotations
                        .iter()
                        .filter(|a| a.task == TaskToken::Caption && !a.risk_exposed)
                        .map(|a| a.text.clone())
                        .collect();
                    if risk.is_empty() || norisk.is_empty() {
                        bail!(
                            "fine-tune partition needs captions in both risk classes \
                             ({} risk, {} no-risk)",
                            risk.len(),
                            norisk.len()
                        );
                    }
                    let classifier = RiskClassifier::train(&risk, &norisk, &LmConfig::default())
                        .map_err(|e| anyhow::anyhow!("training risk models: {e}"))?;
                    let report = perplexity_agreement(&caption_preds, &d, &classifier)?;
                    println!(
                        "perplexity agreement: {}% ({} of {})",
                        ergochat_eval::evaluation::format_fixed(report.agreement_pct, 2),
                        report.agree,
                        report.n
                    );
                    Some(report)
                }
                _ => None,
            };

            if let Some(path) = summary {
                let doc = EvaluationSummary {
                    model_id,
                    vqa: vqa_report,
                    perplexity_agreement: agreement,
                };
                let mut text = serde_json::to_string_pretty(&doc)?;
                text.push('\n');
                std::fs::write(&path, text)?;
                println!("summary -> {}", path.display());
            }
            Ok(())
        }
        Command::Compare {
            finetuned,
            general,
            out,
            format,
            out_json,
            finetuned_summary,
            general_summary,
        } => {
            let ft = load_scores(&finetuned)?;
            let gen = load_scores(&general)?;
            let mut report = compare_runs(&ft, &gen)?;
            if let Some(path) = finetuned_summary {
                report.finetuned_summary = Some(read_summary(&path)?);
            }
            if let Some(path) = general_summary {
                report.general_summary = Some(read_summary(&path)?);
            }
            std::fs::write(&out, render_report(&report, format))?;
            if let Some(path) = out_json {
                let mut text = serde_json::to_string_pretty(&report)?;
                text.push('\n');
                std::fs::write(&path, text)?;
            }
            println!("comparison over {} image pairs -> {}", report.n, out.display());
            Ok(())
        }
        Command::SurveyPlan { dataset, seed, out } => {
            let d = load_dataset(&dataset)?;
            let plan = plan_versions(&d.image_ids(), seed)?;
            plan.write(&out)?;
            println!(
                "planned {} versions over {} images -> {}",
                plan.versions.len(),
                plan.versions.iter().map(|v| v.questions.len()).sum::<usize>(),
                out.display()
            );
            Ok(())
        }
        Command::SurveyAnalyze {
            responses,
            plan,
            out,
        } => {
            let plan = SurveyPlan::load(&plan)?;
            let responses = load_responses(&responses)?;
            let resolved = resolve_choices(&responses, &plan)?;
            let summary = summarize(&resolved)?;
            let demographics = demographics_summary(&responses);
            let text = render_survey_summary(&summary, Some(&demographics));
            std::fs::write(&out, &text)?;
            print!("{text}");
            Ok(())
        }
        Command::Report {
            comparison,
            out,
            format,
        } => {
            let text = std::fs::read_to_string(&comparison)?;
            let report: ComparisonReport = serde_json::from_str(&text)
                .with_context(|| format!("parsing {}", comparison.display()))?;
            std::fs::write(&out, render_report(&report, format))?;
            println!("report -> {}", out.display());
            Ok(())
        }
    }
}

fn read_id_list(path: &PathBuf) -> Result<Vec<u64>> {
    let text = std::fs::read_to_string(path)?;
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(|l| {
            l.parse::<u64>()
                .with_context(|| format!("bad image id {l:?} in {}", path.display()))
        })
        .collect()
}

fn read_summary(path: &PathBuf) -> Result<EvaluationSummary> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}
