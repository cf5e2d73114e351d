//! Questionnaire planning and human-evaluation analytics: partitioning the
//! 200 test images into 13 questionnaire versions with randomized option
//! order, resolving which model each response preferred, and the summary
//! statistics.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const SURVEY_IMAGE_COUNT: usize = 200;
const VERSIONS_WITH_15: usize = 8;
const VERSIONS_WITH_16: usize = 5;
const ALLOWED_IMPROVEMENTS: [u8; 6] = [0, 20, 40, 60, 80, 100];

#[derive(Debug, Error)]
pub enum SurveyError {
    #[error("survey planning needs exactly {expected} distinct image ids, got {got}")]
    WrongImageCount { expected: usize, got: usize },
    #[error("version {version_id} has no question for image {image_id}")]
    UnknownQuestion { version_id: u32, image_id: u64 },
    #[error("no responses to summarize")]
    EmptyResponses,
    #[error("response line {line}: {message}")]
    InvalidResponse { line: usize, message: String },
    #[error("participant {participant_id} answered image {image_id} twice")]
    DuplicateResponse {
        participant_id: String,
        image_id: u64,
    },
    #[error("malformed plan file: {0}")]
    MalformedPlan(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One survey question slot: which image, and whether option A holds the
/// fine-tuned model's text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanQuestion {
    pub image_id: u64,
    pub finetuned_is_a: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanVersion {
    pub version_id: u32,
    pub questions: Vec<PlanQuestion>,
}

/// The 13-version questionnaire partition: 8 versions of 15 images and 5 of
/// 16, covering all 200 test images exactly once, with a seeded option
/// randomization key.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SurveyPlan {
    pub seed: u64,
    pub versions: Vec<PlanVersion>,
}

impl SurveyPlan {
    fn question(&self, version_id: u32, image_id: u64) -> Option<&PlanQuestion> {
        self.versions
            .iter()
            .find(|v| v.version_id == version_id)
            .and_then(|v| v.questions.iter().find(|q| q.image_id == image_id))
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("plan serialization");
        text.push('\n');
        text
    }

    pub fn from_json(text: &str) -> Result<SurveyPlan, SurveyError> {
        serde_json::from_str(text).map_err(|e| SurveyError::MalformedPlan(e.to_string()))
    }

    pub fn write(&self, path: &Path) -> Result<(), SurveyError> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<SurveyPlan, SurveyError> {
        SurveyPlan::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Deterministically partitions exactly 200 image ids into the 13 versions
/// and draws the option-order key from the same seed.
pub fn plan_versions(test_image_ids: &[u64], seed: u64) -> Result<SurveyPlan, SurveyError> {
    let distinct: HashSet<u64> = test_image_ids.iter().copied().collect();
    if test_image_ids.len() != SURVEY_IMAGE_COUNT || distinct.len() != SURVEY_IMAGE_COUNT {
        return Err(SurveyError::WrongImageCount {
            expected: SURVEY_IMAGE_COUNT,
            got: distinct.len().min(test_image_ids.len()),
        });
    }
    let mut ids: Vec<u64> = test_image_ids.to_vec();
    ids.sort_unstable();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ids.shuffle(&mut rng);

    let mut versions = Vec::with_capacity(VERSIONS_WITH_15 + VERSIONS_WITH_16);
    let mut cursor = 0usize;
    for version_index in 0..(VERSIONS_WITH_15 + VERSIONS_WITH_16) {
        let size = if version_index < VERSIONS_WITH_15 { 15 } else { 16 };
        let questions = ids[cursor..cursor + size]
            .iter()
            .map(|&image_id| PlanQuestion {
                image_id,
                finetuned_is_a: rng.gen::<bool>(),
            })
            .collect();
        versions.push(PlanVersion {
            version_id: version_index as u32 + 1,
            questions,
        });
        cursor += size;
    }
    Ok(SurveyPlan { seed, versions })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OptionChoice {
    A,
    B,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Demographics {
    pub education: String,
    pub sector: String,
    pub expertise: String,
    pub age: String,
}

/// One participant's answer pair for one image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SurveyResponse {
    pub participant_id: String,
    pub version_id: u32,
    pub image_id: u64,
    pub selected_option: OptionChoice,
    pub improvement_pct: u8,
    pub demographics: Demographics,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelSide {
    FineTuned,
    General,
}

/// A response with the option randomization undone.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResolvedChoice {
    pub participant_id: String,
    pub version_id: u32,
    pub image_id: u64,
    pub chosen_model: ModelSide,
    pub improvement_pct: u8,
}

/// Maps each selected option back to the model whose text it held.
pub fn resolve_choices(
    responses: &[SurveyResponse],
    plan: &SurveyPlan,
) -> Result<Vec<ResolvedChoice>, SurveyError> {
    responses
        .iter()
        .map(|r| {
            let question =
                plan.question(r.version_id, r.image_id)
                    .ok_or(SurveyError::UnknownQuestion {
                        version_id: r.version_id,
                        image_id: r.image_id,
                    })?;
            let picked_a = r.selected_option == OptionChoice::A;
            let chosen_model = if picked_a == question.finetuned_is_a {
                ModelSide::FineTuned
            } else {
                ModelSide::General
            };
            Ok(ResolvedChoice {
                participant_id: r.participant_id.clone(),
                version_id: r.version_id,
                image_id: r.image_id,
                chosen_model,
                improvement_pct: r.improvement_pct,
            })
        })
        .collect()
}

/// Headline survey statistics. The improvement average comes in two
/// declared variants: over fine-tuned-choice responses (headline) and over
/// all responses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurveySummary {
    pub n_responses: usize,
    pub fine_tuned_choice_rate: f64,
    /// Mean improvement over responses that chose the fine-tuned text;
    /// absent when nobody did.
    pub avg_accuracy_improvement: Option<f64>,
    /// Mean improvement over every response, regardless of choice.
    pub avg_accuracy_improvement_all: f64,
}

pub fn summarize(resolved: &[ResolvedChoice]) -> Result<SurveySummary, SurveyError> {
    if resolved.is_empty() {
        return Err(SurveyError::EmptyResponses);
    }
    let n = resolved.len();
    let finetuned: Vec<&ResolvedChoice> = resolved
        .iter()
        .filter(|r| r.chosen_model == ModelSide::FineTuned)
        .collect();
    let rate = 100.0 * finetuned.len() as f64 / n as f64;
    let avg_over = |items: &[&ResolvedChoice]| {
        items.iter().map(|r| r.improvement_pct as f64).sum::<f64>() / items.len() as f64
    };
    let all: Vec<&ResolvedChoice> = resolved.iter().collect();
    Ok(SurveySummary {
        n_responses: n,
        fine_tuned_choice_rate: rate,
        avg_accuracy_improvement: if finetuned.is_empty() {
            None
        } else {
            Some(avg_over(&finetuned))
        },
        avg_accuracy_improvement_all: avg_over(&all),
    })
}

/// Percentage distribution of one demographic field over participants.
pub type Distribution = Vec<(String, u32)>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DemographicsSummary {
    pub n_participants: usize,
    pub education: Distribution,
    pub sector: Distribution,
    pub expertise: Distribution,
    pub age: Distribution,
}

/// Per-field distributions over participants (not responses); percentages
/// are rounded half-up to whole numbers. Each participant's demographics
/// come from their first response in (participant, version, image) order.
pub fn demographics_summary(responses: &[SurveyResponse]) -> DemographicsSummary {
    let mut sorted: Vec<&SurveyResponse> = responses.iter().collect();
    sorted.sort_by(|a, b| {
        (&a.participant_id, a.version_id, a.image_id)
            .cmp(&(&b.participant_id, b.version_id, b.image_id))
    });
    let mut per_participant: BTreeMap<&str, &Demographics> = BTreeMap::new();
    for r in sorted {
        per_participant
            .entry(r.participant_id.as_str())
            .or_insert(&r.demographics);
    }
    let n = per_participant.len();

    let distribution = |field: fn(&Demographics) -> &String| -> Distribution {
        let mut counts: BTreeMap<&String, usize> = BTreeMap::new();
        for demo in per_participant.values() {
            *counts.entry(field(demo)).or_insert(0) += 1;
        }
        counts
            .into_iter()
            .map(|(value, count)| {
                let pct = (100.0 * count as f64 / n as f64).round() as u32;
                (value.clone(), pct)
            })
            .collect()
    };

    DemographicsSummary {
        n_participants: n,
        education: distribution(|d| &d.education),
        sector: distribution(|d| &d.sector),
        expertise: distribution(|d| &d.expertise),
        age: distribution(|d| &d.age),
    }
}

/// Reads the response CSV. Header: participant_id,version_id,image_id,
/// selected_option,improvement_pct,education,sector,expertise,age.
/// Improvement values outside {0,20,40,60,80,100} and duplicate
/// (participant, image) pairs are rejected.
pub fn load_responses(path: &Path) -> Result<Vec<SurveyResponse>, SurveyError> {
    let file = std::fs::File::open(path)?;
    parse_responses(file)
}

pub fn parse_responses<R: std::io::Read>(reader: R) -> Result<Vec<SurveyResponse>, SurveyError> {
    #[derive(Deserialize)]
    struct Row {
        participant_id: String,
        version_id: u32,
        image_id: u64,
        selected_option: String,
        improvement_pct: u8,
        education: String,
        sector: String,
        expertise: String,
        age: String,
    }

    let mut reader = csv::Reader::from_reader(reader);
    let mut seen: HashMap<(String, u64), ()> = HashMap::new();
    let mut responses = Vec::new();
    for (idx, row) in reader.deserialize::<Row>().enumerate() {
        let line = idx + 2; // header is line 1
        let row = row.map_err(|e| SurveyError::InvalidResponse {
            line,
            message: e.to_string(),
        })?;
        let selected_option = match row.selected_option.as_str() {
            "A" => OptionChoice::A,
            "B" => OptionChoice::B,
            other => {
                return Err(SurveyError::InvalidResponse {
                    line,
                    message: format!("selected_option must be A or B, got {other:?}"),
                })
            }
        };
        if !ALLOWED_IMPROVEMENTS.contains(&row.improvement_pct) {
            return Err(SurveyError::InvalidResponse {
                line,
                message: format!(
                    "improvement_pct must be one of {ALLOWED_IMPROVEMENTS:?}, got {}",
                    row.improvement_pct
                ),
            });
        }
        if seen
            .insert((row.participant_id.clone(), row.image_id), ())
            .is_some()
        {
            return Err(SurveyError::DuplicateResponse {
                participant_id: row.participant_id,
                image_id: row.image_id,
            });
        }
        responses.push(SurveyResponse {
            participant_id: row.participant_id,
            version_id: row.version_id,
            image_id: row.image_id,
            selected_option,
            improvement_pct: row.improvement_pct,
            demographics: Demographics {
                education: row.education,
                sector: row.sector,
                expertise: row.expertise,
                age: row.age,
            },
        });
    }
    Ok(responses)
}

/// Renders a survey summary as deterministic plain text.
pub fn render_survey_summary(
    summary: &SurveySummary,
    demographics: Option<&DemographicsSummary>,
) -> String {
    use crate::evaluation::format_fixed;
    let mut out = String::new();
    out.push_str(&format!("responses: {}\n", summary.n_responses));
    out.push_str(&format!(
        "fine-tuned choice rate: {}%\n",
        format_fixed(summary.fine_tuned_choice_rate, 2)
    ));
    match summary.avg_accuracy_improvement {
        Some(v) => out.push_str(&format!(
            "average accuracy improvement (fine-tuned choices): {}%\n",
            format_fixed(v, 2)
        )),
        None => out.push_str("average accuracy improvement (fine-tuned choices): N/A\n"),
    }
    out.push_str(&format!(
        "average accuracy improvement (all responses): {}%\n",
        format_fixed(summary.avg_accuracy_improvement_all, 2)
    ));
    if let Some(demo) = demographics {
        out.push_str(&format!("participants: {}\n", demo.n_participants));
        for (name, dist) in [
            ("education", &demo.education),
            ("sector", &demo.sector),
            ("expertise", &demo.expertise),
            ("age", &demo.age),
        ] {
            out.push_str(name);
            out.push_str(":\n");
            for (value, pct) in dist {
                out.push_str(&format!("  {value}: {pct}%\n"));
            }
        }
    }
    out
}
