//! The ergonomic image-text-pair dataset: a COCO-style JSON document of
//! image records and caption/VQA annotations carrying risk labels, plus the
//! seeded fine-tune/test split and the fixed task prompts.
//!
//! Datasets are immutable after loading and safe to share across workers.

use std::collections::HashSet;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Five-level observational risk outcome; ordered from least to most
/// severe. The medium level is the exposure threshold.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum RiskLevel {
    Negligible,
    Low,
    Medium,
    High,
    VeryHigh,
}

impl RiskLevel {
    /// The exposure rule: a record is risk-exposed exactly when its level
    /// reaches medium.
    pub fn is_exposed(self) -> bool {
        self >= RiskLevel::Medium
    }
}

/// Task discriminator. Serialized as "caption"/"vqa" in dataset files; the
/// bracketed forms "[caption]" and "[vqa]" prefix prompts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskToken {
    Caption,
    Vqa,
}

impl TaskToken {
    pub fn bracket_token(self) -> &'static str {
        match self {
            TaskToken::Caption => "[caption]",
            TaskToken::Vqa => "[vqa]",
        }
    }

    /// Parses a bracketed task token; anything but the two known forms is
    /// rejected.
    pub fn from_bracket(text: &str) -> Result<TaskToken, DatasetError> {
        match text {
            "[caption]" => Ok(TaskToken::Caption),
            "[vqa]" => Ok(TaskToken::Vqa),
            other => Err(DatasetError::MalformedDocument(format!(
                "unknown task token {other:?}"
            ))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            TaskToken::Caption => "caption",
            TaskToken::Vqa => "vqa",
        }
    }

    pub fn from_name(name: &str) -> Option<TaskToken> {
        match name {
            "caption" => Some(TaskToken::Caption),
            "vqa" => Some(TaskToken::Vqa),
            _ => None,
        }
    }
}

/// The byte-exact prompt for a task. The VQA prompt carries a space after
/// the token; the caption prompt does not.
pub fn build_prompt(task: TaskToken) -> &'static str {
    match task {
        TaskToken::Vqa => "[vqa] Is the worker exposed to postural ergonomic risks?",
        TaskToken::Caption => {
            "[caption]Describe the workers and their postures in the image and tell me if \
             they are exposed to ergonomic risks due to their postures?"
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageRecord {
    pub id: u64,
    pub file_name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub height: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub id: u64,
    pub image_id: u64,
    pub task: TaskToken,
    pub text: String,
    pub risk_exposed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reba_level: Option<RiskLevel>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartitionTag {
    FineTune,
    Test,
    Unsplit,
}

impl Default for PartitionTag {
    fn default() -> Self {
        PartitionTag::Unsplit
    }
}

/// A validated dataset: every annotation resolves to an image, ids are
/// unique, risk flags agree with their levels, and records are sorted by
/// id so serialization is canonical.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub images: Vec<ImageRecord>,
    pub annotations: Vec<AnnotationRecord>,
    #[serde(default)]
    pub partition_tag: PartitionTag,
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("malformed dataset document: {0}")]
    MalformedDocument(String),
    #[error("annotation {annotation_id} references missing image {image_id}")]
    DanglingReference { annotation_id: u64, image_id: u64 },
    #[error("{record} {record_id}: {message}")]
    InvariantViolation {
        record: &'static str,
        record_id: u64,
        message: String,
    },
    #[error("invalid test count {test_count} for {image_count} images")]
    InvalidCount { test_count: usize, image_count: usize },
    #[error("dataset is already split")]
    AlreadySplit,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Dataset {
    /// Validates and normalizes the records into a canonical dataset.
    pub fn new(
        images: Vec<ImageRecord>,
        annotations: Vec<AnnotationRecord>,
        partition_tag: PartitionTag,
    ) -> Result<Dataset, DatasetError> {
        let mut d = Dataset {
            images,
            annotations,
            partition_tag,
        };
        d.images.sort_by_key(|i| i.id);
        d.annotations.sort_by_key(|a| a.id);
        d.validate()?;
        Ok(d)
    }

    fn validate(&self) -> Result<(), DatasetError> {
        let mut image_ids = HashSet::new();
        for image in &self.images {
            if !image_ids.insert(image.id) {
                return Err(DatasetError::InvariantViolation {
                    record: "image",
                    record_id: image.id,
                    message: "duplicate image id".to_string(),
                });
            }
            if image.file_name.is_empty() {
                return Err(DatasetError::InvariantViolation {
                    record: "image",
                    record_id: image.id,
                    message: "empty file_name".to_string(),
                });
            }
            for (dim, value) in [("width", image.width), ("height", image.height)] {
                if value == Some(0) {
                    return Err(DatasetError::InvariantViolation {
                        record: "image",
                        record_id: image.id,
                        message: format!("{dim} must be positive"),
                    });
                }
            }
        }

        let mut annotation_ids = HashSet::new();
        let mut vqa_images = HashSet::new();
        for ann in &self.annotations {
            if !annotation_ids.insert(ann.id) {
                return Err(DatasetError::InvariantViolation {
                    record: "annotation",
                    record_id: ann.id,
                    message: "duplicate annotation id".to_string(),
                });
            }
            if !image_ids.contains(&ann.image_id) {
                return Err(DatasetError::DanglingReference {
                    annotation_id: ann.id,
                    image_id: ann.image_id,
                });
            }
            if let Some(level) = ann.reba_level {
                if ann.risk_exposed != level.is_exposed() {
                    return Err(DatasetError::InvariantViolation {
                        record: "annotation",
                        record_id: ann.id,
                        message: format!(
                            "risk_exposed={} contradicts reba_level {:?} under the medium \
                             threshold",
                            ann.risk_exposed, level
                        ),
                    });
                }
            }
            match ann.task {
                TaskToken::Vqa => {
                    if ann.text != "yes" && ann.text != "no" {
                        return Err(DatasetError::InvariantViolation {
                            record: "annotation",
                            record_id: ann.id,
                            message: format!(
                                "vqa ground truth must be \"yes\" or \"no\", got {:?}",
                                ann.text
                            ),
                        });
                    }
                    if !vqa_images.insert(ann.image_id) {
                        return Err(DatasetError::InvariantViolation {
                            record: "annotation",
                            record_id: ann.id,
                            message: format!(
                                "image {} already has a vqa annotation",
                                ann.image_id
                            ),
                        });
                    }
                }
                TaskToken::Caption => {
                    if ann.text.trim().is_empty() {
                        return Err(DatasetError::InvariantViolation {
                            record: "annotation",
                            record_id: ann.id,
                            message: "caption text is empty".to_string(),
                        });
                    }
                }
            }
        }
        Ok(())
    }

    pub fn image_ids(&self) -> Vec<u64> {
        self.images.iter().map(|i| i.id).collect()
    }

    pub fn image(&self, image_id: u64) -> Option<&ImageRecord> {
        self.images.iter().find(|i| i.id == image_id)
    }

    /// Caption annotations for an image, in annotation-id order.
    pub fn captions_for(&self, image_id: u64) -> Vec<&AnnotationRecord> {
        self.annotations
            .iter()
            .filter(|a| a.image_id == image_id && a.task == TaskToken::Caption)
            .collect()
    }

    pub fn vqa_for(&self, image_id: u64) -> Option<&AnnotationRecord> {
        self.annotations
            .iter()
            .find(|a| a.image_id == image_id && a.task == TaskToken::Vqa)
    }

    /// Image ids that carry at least one annotation for the task, ascending.
    pub fn image_ids_with_task(&self, task: TaskToken) -> Vec<u64> {
        let mut ids: Vec<u64> = self
            .annotations
            .iter()
            .filter(|a| a.task == task)
            .map(|a| a.image_id)
            .collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    /// The image's risk label: the first caption annotation's flag, falling
    /// back to the VQA annotation.
    pub fn risk_label_for(&self, image_id: u64) -> Option<bool> {
        self.captions_for(image_id)
            .first()
            .map(|a| a.risk_exposed)
            .or_else(|| self.vqa_for(image_id).map(|a| a.risk_exposed))
    }

    /// All ground-truth caption texts, in annotation-id order. This is the
    /// info corpus for NIST.
    pub fn caption_corpus(&self) -> Vec<String> {
        self.annotations
            .iter()
            .filter(|a| a.task == TaskToken::Caption)
            .map(|a| a.text.clone())
            .collect()
    }
}

/// Parses and validates a dataset document from JSON text. Record order in
/// the document does not matter.
pub fn parse_dataset(json: &str) -> Result<Dataset, DatasetError> {
    let raw: Dataset = serde_json::from_str(json)
        .map_err(|e| DatasetError::MalformedDocument(e.to_string()))?;
    Dataset::new(raw.images, raw.annotations, raw.partition_tag)
}

pub fn load_dataset(path: &Path) -> Result<Dataset, DatasetError> {
    let text = std::fs::read_to_string(path)?;
    parse_dataset(&text)
}

/// Canonical serialization: arrays sorted by id, two-space indentation,
/// trailing newline. Byte-identical for equal datasets.
pub fn canonical_json(d: &Dataset) -> String {
    let mut sorted = d.clone();
    sorted.images.sort_by_key(|i| i.id);
    sorted.annotations.sort_by_key(|a| a.id);
    let mut text = serde_json::to_string_pretty(&sorted).expect("dataset serialization");
    text.push('\n');
    text
}

pub fn write_dataset(d: &Dataset, path: &Path) -> Result<(), DatasetError> {
    std::fs::write(path, canonical_json(d))?;
    Ok(())
}

/// Seeded random image-disjoint split into (fine-tune, test) partitions.
/// All annotations of an image travel with it; the same seed always yields
/// the same split.
pub fn split_dataset(
    d: &Dataset,
    test_count: usize,
    seed: u64,
) -> Result<(Dataset, Dataset), DatasetError> {
    if d.partition_tag != PartitionTag::Unsplit {
        return Err(DatasetError::AlreadySplit);
    }
    let mut ids = d.image_ids();
    if test_count == 0 || test_count >= ids.len() {
        return Err(DatasetError::InvalidCount {
            test_count,
            image_count: ids.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ids.shuffle(&mut rng);
    let test_ids: HashSet<u64> = ids[..test_count].iter().copied().collect();
    Ok(partition_by_ids(d, &test_ids))
}

/// Splits using an explicit test-image id list, for pinning a published
/// split. Every id must exist and at least one image must remain on each
/// side.
pub fn split_dataset_by_ids(
    d: &Dataset,
    test_ids: &[u64],
) -> Result<(Dataset, Dataset), DatasetError> {
    if d.partition_tag != PartitionTag::Unsplit {
        return Err(DatasetError::AlreadySplit);
    }
    let known: HashSet<u64> = d.image_ids().into_iter().collect();
    let unique: HashSet<u64> = test_ids.iter().copied().collect();
    for id in &unique {
        if !known.contains(id) {
            return Err(DatasetError::InvariantViolation {
                record: "image",
                record_id: *id,
                message: "test id not present in dataset".to_string(),
            });
        }
    }
    if unique.is_empty() || unique.len() >= known.len() {
        return Err(DatasetError::InvalidCount {
            test_count: unique.len(),
            image_count: known.len(),
        });
    }
    Ok(partition_by_ids(d, &unique))
}

fn partition_by_ids(d: &Dataset, test_ids: &HashSet<u64>) -> (Dataset, Dataset) {
    let split = |keep_test: bool, tag: PartitionTag| {
        let images: Vec<ImageRecord> = d
            .images
            .iter()
            .filter(|i| test_ids.contains(&i.id) == keep_test)
            .cloned()
            .collect();
        let annotations: Vec<AnnotationRecord> = d
            .annotations
            .iter()
            .filter(|a| test_ids.contains(&a.image_id) == keep_test)
            .cloned()
            .collect();
        Dataset {
            images,
            annotations,
            partition_tag: tag,
        }
    };
    (
        split(false, PartitionTag::FineTune),
        split(true, PartitionTag::Test),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn image(id: u64) -> ImageRecord {
        ImageRecord {
            id,
            file_name: format!("img{id}.jpg"),
            width: None,
            height: None,
        }
    }

    fn caption(id: u64, image_id: u64, risk: bool, level: Option<RiskLevel>) -> AnnotationRecord {
        AnnotationRecord {
            id,
            image_id,
            task: TaskToken::Caption,
            text: format!("a worker in scene {image_id}"),
            risk_exposed: risk,
            reba_level: level,
        }
    }

    fn make_dataset(image_count: u64) -> Dataset {
        let images = (1..=image_count).map(image).collect();
        let annotations = (1..=image_count)
            .map(|i| caption(i, i, i % 2 == 0, None))
            .collect();
        Dataset::new(images, annotations, PartitionTag::Unsplit).unwrap()
    }

    #[test]
    fn minimal_valid_document_loads() {
        let doc = r#"{
            "images": [{"id": 1, "file_name": "w.jpg"}],
            "annotations": [{
                "id": 1, "image_id": 1, "task": "caption",
                "text": "a worker bends low", "risk_exposed": true,
                "reba_level": "high"
            }]
        }"#;
        let d = parse_dataset(doc).unwrap();
        assert_eq!(d.images.len(), 1);
        assert_eq!(d.annotations.len(), 1);
        assert_eq!(d.partition_tag, PartitionTag::Unsplit);
    }

    #[test]
    fn dangling_reference_names_the_annotation() {
        let doc = r#"{
            "images": [{"id": 1, "file_name": "w.jpg"}],
            "annotations": [{
                "id": 7, "image_id": 99, "task": "caption",
                "text": "text", "risk_exposed": false
            }]
        }"#;
        match parse_dataset(doc).unwrap_err() {
            DatasetError::DanglingReference {
                annotation_id,
                image_id,
            } => {
                assert_eq!(annotation_id, 7);
                assert_eq!(image_id, 99);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn risk_flag_must_match_reba_level() {
        let doc = r#"{
            "images": [{"id": 1, "file_name": "w.jpg"}],
            "annotations": [{
                "id": 3, "image_id": 1, "task": "caption",
                "text": "text", "risk_exposed": true, "reba_level": "low"
            }]
        }"#;
        match parse_dataset(doc).unwrap_err() {
            DatasetError::InvariantViolation {
                record, record_id, ..
            } => {
                assert_eq!(record, "annotation");
                assert_eq!(record_id, 3);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn medium_and_above_means_exposed() {
        assert!(!RiskLevel::Negligible.is_exposed());
        assert!(!RiskLevel::Low.is_exposed());
        assert!(RiskLevel::Medium.is_exposed());
        assert!(RiskLevel::High.is_exposed());
        assert!(RiskLevel::VeryHigh.is_exposed());
    }

    #[test]
    fn risk_levels_are_totally_ordered() {
        use RiskLevel::*;
        let levels = [Negligible, Low, Medium, High, VeryHigh];
        for pair in levels.windows(2) {
            assert!(pair[0] < pair[1]);
        }
    }

    #[test]
    fn vqa_text_must_be_yes_or_no() {
        let doc = r#"{
            "images": [{"id": 1, "file_name": "w.jpg"}],
            "annotations": [{
                "id": 1, "image_id": 1, "task": "vqa",
                "text": "maybe", "risk_exposed": false
            }]
        }"#;
        assert!(matches!(
            parse_dataset(doc).unwrap_err(),
            DatasetError::InvariantViolation { record_id: 1, .. }
        ));
    }

    #[test]
    fn one_vqa_annotation_per_image() {
        let images = vec![image(1)];
        let make_vqa = |id| AnnotationRecord {
            id,
            image_id: 1,
            task: TaskToken::Vqa,
            text: "yes".to_string(),
            risk_exposed: true,
            reba_level: None,
        };
        let err = Dataset::new(
            images,
            vec![make_vqa(1), make_vqa(2)],
            PartitionTag::Unsplit,
        )
        .unwrap_err();
        assert!(matches!(
            err,
            DatasetError::InvariantViolation { record_id: 2, .. }
        ));
    }

    #[test]
    fn duplicate_captions_are_allowed() {
        let images = vec![image(1)];
        let annotations = vec![caption(1, 1, false, None), caption(2, 1, false, None)];
        assert!(Dataset::new(images, annotations, PartitionTag::Unsplit).is_ok());
    }

    #[test]
    fn not_json_is_malformed() {
        assert!(matches!(
            parse_dataset("not json at all").unwrap_err(),
            DatasetError::MalformedDocument(_)
        ));
        assert!(matches!(
            parse_dataset(r#"{"images": []}"#).unwrap_err(),
            DatasetError::MalformedDocument(_)
        ));
    }

    #[test]
    fn round_trip_preserves_the_dataset() {
        let d = make_dataset(5);
        let text = canonical_json(&d);
        let back = parse_dataset(&text).unwrap();
        assert_eq!(d, back);
        assert_eq!(canonical_json(&back), text);
    }

    #[test]
    fn parse_is_order_insensitive_over_record_arrays() {
        let a = r#"{
            "images": [{"id": 2, "file_name": "b.jpg"}, {"id": 1, "file_name": "a.jpg"}],
            "annotations": []
        }"#;
        let b = r#"{
            "images": [{"id": 1, "file_name": "a.jpg"}, {"id": 2, "file_name": "b.jpg"}],
            "annotations": []
        }"#;
        assert_eq!(parse_dataset(a).unwrap(), parse_dataset(b).unwrap());
    }

    #[test]
    fn split_sizes_match_request() {
        let d = make_dataset(1900);
        let (ft, test) = split_dataset(&d, 200, 7).unwrap();
        assert_eq!(ft.images.len(), 1700);
        assert_eq!(test.images.len(), 200);
        assert_eq!(ft.partition_tag, PartitionTag::FineTune);
        assert_eq!(test.partition_tag, PartitionTag::Test);
    }

    #[test]
    fn split_is_deterministic_per_seed() {
        let d = make_dataset(50);
        let (a1, b1) = split_dataset(&d, 10, 42).unwrap();
        let (a2, b2) = split_dataset(&d, 10, 42).unwrap();
        assert_eq!(a1, a2);
        assert_eq!(b1, b2);
        let (_, b3) = split_dataset(&d, 10, 43).unwrap();
        assert_ne!(b1.image_ids(), b3.image_ids());
    }

    #[test]
    fn split_partitions_are_disjoint_and_exhaustive() {
        let d = make_dataset(30);
        for seed in 0..20 {
            let (ft, test) = split_dataset(&d, 7, seed).unwrap();
            let mut all: Vec<u64> = ft.image_ids();
            all.extend(test.image_ids());
            all.sort_unstable();
            assert_eq!(all, d.image_ids());
            let test_set: HashSet<u64> = test.image_ids().into_iter().collect();
            assert!(ft.image_ids().iter().all(|id| !test_set.contains(id)));
        }
    }

    #[test]
    fn annotations_travel_with_their_images() {
        let images = vec![image(1), image(2), image(3)];
        let annotations = vec![
            caption(1, 1, false, None),
            caption(2, 1, false, None),
            caption(3, 2, true, Some(RiskLevel::High)),
            caption(4, 3, false, Some(RiskLevel::Low)),
        ];
        let d = Dataset::new(images, annotations, PartitionTag::Unsplit).unwrap();
        let (ft, test) = split_dataset_by_ids(&d, &[1]).unwrap();
        assert_eq!(test.annotations.len(), 2);
        assert!(test.annotations.iter().all(|a| a.image_id == 1));
        assert_eq!(ft.annotations.len(), 2);
    }

    #[test]
    fn zero_test_count_is_invalid() {
        let d = make_dataset(5);
        assert!(matches!(
            split_dataset(&d, 0, 1).unwrap_err(),
            DatasetError::InvalidCount { .. }
        ));
        assert!(matches!(
            split_dataset(&d, 5, 1).unwrap_err(),
            DatasetError::InvalidCount { .. }
        ));
    }

    #[test]
    fn split_requires_unsplit_input() {
        let d = make_dataset(5);
        let (_, test) = split_dataset(&d, 2, 1).unwrap();
        assert!(matches!(
            split_dataset(&test, 1, 1).unwrap_err(),
            DatasetError::AlreadySplit
        ));
    }

    #[test]
    fn split_by_ids_rejects_unknown_images() {
        let d = make_dataset(5);
        assert!(split_dataset_by_ids(&d, &[99]).is_err());
    }

    #[test]
    fn prompts_are_byte_exact() {
        assert_eq!(
            build_prompt(TaskToken::Vqa),
            "[vqa] Is the worker exposed to postural ergonomic risks?"
        );
        assert_eq!(
            build_prompt(TaskToken::Caption),
            "[caption]Describe the workers and their postures in the image and tell me if \
             they are exposed to ergonomic risks due to their postures?"
        );
        // pure function: identical on every call
        assert_eq!(build_prompt(TaskToken::Vqa), build_prompt(TaskToken::Vqa));
    }

    #[test]
    fn task_token_round_trips_and_rejects_strangers() {
        for task in [TaskToken::Caption, TaskToken::Vqa] {
            assert_eq!(
                TaskToken::from_bracket(task.bracket_token()).unwrap(),
                task
            );
        }
        assert!(TaskToken::from_bracket("[grounding]").is_err());
        assert!(TaskToken::from_bracket("vqa").is_err());
    }
}
