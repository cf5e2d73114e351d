//! Plain-text and tab-separated rendering of comparison reports. Output is
//! a pure function of the report, so repeated renders are byte-identical.

use super::{ComparisonReport, EvaluationSummary};
use crate::metrics::MetricId;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Text,
    Tsv,
}

impl ReportFormat {
    pub fn from_name(name: &str) -> Option<ReportFormat> {
        match name {
            "text" => Some(ReportFormat::Text),
            "tsv" => Some(ReportFormat::Tsv),
            _ => None,
        }
    }
}

/// Rounds half-up (half away from zero) at `decimals` places and formats
/// with exactly that many digits. The explicit rounding step matters:
/// float formatting alone would resolve halfway cases to even.
pub fn format_fixed(value: f64, decimals: u32) -> String {
    let scale = 10f64.powi(decimals as i32);
    let rounded = (value * scale).round() / scale;
    format!("{rounded:.prec$}", prec = decimals as usize)
}

fn improvement_cell(value: Option<f64>) -> String {
    match value {
        Some(v) => format!("{}%", format_fixed(v, 2)),
        None => "N/A".to_string(),
    }
}

struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn render(&self, format: ReportFormat, out: &mut String) {
        match format {
            ReportFormat::Tsv => {
                out.push_str(&self.header.join("\t"));
                out.push('\n');
                for row in &self.rows {
                    out.push_str(&row.join("\t"));
                    out.push('\n');
                }
            }
            ReportFormat::Text => {
                let columns = self.header.len();
                let mut widths = vec![0usize; columns];
                for row in std::iter::once(&self.header).chain(self.rows.iter()) {
                    for (i, cell) in row.iter().enumerate() {
                        widths[i] = widths[i].max(cell.chars().count());
                    }
                }
                let write_row = |row: &[String], out: &mut String| {
                    let cells: Vec<String> = row
                        .iter()
                        .enumerate()
                        .map(|(i, cell)| format!("{cell:<width$}", width = widths[i]))
                        .collect();
                    out.push_str(cells.join("  ").trim_end());
                    out.push('\n');
                };
                write_row(&self.header, out);
                let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
                out.push_str(&rule.join("  "));
                out.push('\n');
                for row in &self.rows {
                    write_row(row, out);
                }
            }
        }
    }
}

fn summary_cell(summary: &Option<EvaluationSummary>, metric: &str) -> String {
    let Some(summary) = summary else {
        return "-".to_string();
    };
    let value = match metric {
        "vqa" => summary.vqa.as_ref().map(|v| v.accuracy_pct),
        _ => summary
            .perplexity_agreement
            .as_ref()
            .map(|a| a.agreement_pct),
    };
    match value {
        Some(v) => format!("{}%", format_fixed(v, 2)),
        None => "-".to_string(),
    }
}

/// Renders the comparison into a deterministic document: the per-metric
/// comparison table, per-model metric means, and, when evaluation
/// summaries are attached, the correct-identification percentages.
pub fn render_report(report: &ComparisonReport, format: ReportFormat) -> String {
    let mut out = String::new();
    out.push_str(&format!("image pairs evaluated: {}\n", report.n));
    out.push('\n');

    out.push_str("Metric comparison (fine-tuned minus general)\n");
    let comparison = Table {
        header: vec![
            "Metric".to_string(),
            "Average of difference".to_string(),
            "Data with improvement".to_string(),
            "Tied".to_string(),
            "Average improvement".to_string(),
        ],
        rows: report
            .rows
            .iter()
            .map(|row| {
                vec![
                    row.metric.label().to_string(),
                    format_fixed(row.avg_difference, 2),
                    format!("{}%", format_fixed(row.pct_improved, 2)),
                    format!("{}%", format_fixed(row.pct_tied, 2)),
                    improvement_cell(row.avg_improvement_pct),
                ]
            })
            .collect(),
    };
    comparison.render(format, &mut out);
    if report
        .rows
        .iter()
        .any(|r| r.metric == MetricId::CosineSimilarity)
    {
        out.push_str(
            "note: cos_similarity spans [-1, 1]; its improvement percentage uses only the \
             upper bound and overstates relative change.\n",
        );
    }
    out.push('\n');

    out.push_str("Average metric scores per model\n");
    let means = Table {
        header: vec![
            "Metric".to_string(),
            "General".to_string(),
            "Fine-tuned".to_string(),
        ],
        rows: report
            .rows
            .iter()
            .map(|row| {
                vec![
                    row.metric.label().to_string(),
                    format_fixed(row.general_mean, 2),
                    format_fixed(row.finetuned_mean, 2),
                ]
            })
            .collect(),
    };
    means.render(format, &mut out);

    if report.finetuned_summary.is_some() || report.general_summary.is_some() {
        out.push('\n');
        out.push_str("Correct risk identification\n");
        let label = |s: &Option<EvaluationSummary>, fallback: &str| {
            s.as_ref()
                .map(|v| v.model_id.clone())
                .unwrap_or_else(|| fallback.to_string())
        };
        let accuracy = Table {
            header: vec![
                "Metric".to_string(),
                label(&report.finetuned_summary, "fine-tuned"),
                label(&report.general_summary, "general"),
            ],
            rows: vec![
                vec![
                    "perplexity".to_string(),
                    summary_cell(&report.finetuned_summary, "perplexity"),
                    summary_cell(&report.general_summary, "perplexity"),
                ],
                vec![
                    "VQA".to_string(),
                    summary_cell(&report.finetuned_summary, "vqa"),
                    summary_cell(&report.general_summary, "vqa"),
                ],
            ],
        };
        accuracy.render(format, &mut out);
    }

    out
}
