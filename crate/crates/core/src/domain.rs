//! Entity types and the segment/label validation rules shared by every service.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, ErrorCode, Result};

macro_rules! id_type {
    ($($name:ident),* $(,)?) => {$(
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub u64);

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                self.0.fmt(f)
            }
        }

        impl std::str::FromStr for $name {
            type Err = std::num::ParseIntError;
            fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
                s.parse().map($name)
            }
        }
    )*};
}

id_type!(UserId, ProjectId, LabelId, LabelValueId, DataPointId, AssignmentId, SegmentId);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Admin,
    Annotator,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct User {
    pub id: UserId,
    pub username: String,
    /// PHC-formatted password digest. Never leaves the store.
    pub credential_digest: String,
    pub role: Role,
    pub created_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Project {
    pub id: ProjectId,
    pub name: String,
    pub api_key: String,
    pub created_at: DateTime<Utc>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SelectionType {
    Single,
    Multi,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Label {
    pub id: LabelId,
    pub project_id: ProjectId,
    pub name: String,
    pub selection_type: SelectionType,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelValue {
    pub id: LabelValueId,
    pub label_id: LabelId,
    pub value: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AudioFormat {
    Wav,
    Mp3,
    Ogg,
}

impl AudioFormat {
    pub fn extension(self) -> &'static str {
        match self {
            AudioFormat::Wav => "wav",
            AudioFormat::Mp3 => "mp3",
            AudioFormat::Ogg => "ogg",
        }
    }

    pub fn content_type(self) -> &'static str {
        match self {
            AudioFormat::Wav => "audio/wav",
            AudioFormat::Mp3 => "audio/mpeg",
            AudioFormat::Ogg => "audio/ogg",
        }
    }

    pub fn from_extension(ext: &str) -> Result<Self> {
        match ext.to_ascii_lowercase().as_str() {
            "wav" => Ok(AudioFormat::Wav),
            "mp3" => Ok(AudioFormat::Mp3),
            "ogg" => Ok(AudioFormat::Ogg),
            other => Err(Error::new(
                ErrorCode::BadFormat,
                format!("unsupported audio format {other:?}"),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DataPoint {
    pub id: DataPointId,
    pub project_id: ProjectId,
    pub original_filename: String,
    pub stored_name: String,
    pub format: AudioFormat,
    pub duration_ms: u64,
    pub reference_transcription: Option<String>,
    pub created_at: DateTime<Utc>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AssignmentStatus {
    Pending,
    Completed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    pub id: AssignmentId,
    pub datapoint_id: DataPointId,
    pub user_id: UserId,
    pub status: AssignmentStatus,
    pub marked_for_review: bool,
    pub updated_at: DateTime<Utc>,
}

/// Chosen values per label. A label absent from the map is unanswered.
pub type Selections = BTreeMap<LabelId, BTreeSet<LabelValueId>>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub id: SegmentId,
    pub assignment_id: AssignmentId,
    pub start_ms: i64,
    pub end_ms: i64,
    pub transcription: String,
    pub selections: Selections,
    pub created_at: DateTime<Utc>,
    pub updated_at: DateTime<Utc>,
}

/// Segment fields as submitted, before ids and timestamps exist.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentDraft {
    pub start_ms: i64,
    pub end_ms: i64,
    #[serde(default)]
    pub transcription: String,
    #[serde(default)]
    pub selections: Selections,
}

/// A project's label schema: what annotators may select, and how many.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProjectSchema {
    pub labels: Vec<LabelSchema>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelSchema {
    pub id: LabelId,
    pub name: String,
    pub selection_type: SelectionType,
    pub values: Vec<LabelValueSchema>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelValueSchema {
    pub id: LabelValueId,
    pub value: String,
}

impl ProjectSchema {
    pub fn label(&self, id: LabelId) -> Option<&LabelSchema> {
        self.labels.iter().find(|l| l.id == id)
    }

    pub fn label_by_name(&self, name: &str) -> Option<&LabelSchema> {
        self.labels.iter().find(|l| l.name == name)
    }
}

impl LabelSchema {
    pub fn has_value(&self, id: LabelValueId) -> bool {
        self.values.iter().any(|v| v.id == id)
    }

    pub fn value_by_name(&self, value: &str) -> Option<&LabelValueSchema> {
        self.values.iter().find(|v| v.value == value)
    }
}

/// Checks label selections against a project schema.
///
/// Every label must belong to the schema and every value to its label
/// (`ERR_LABEL_SCOPE`); a single-choice label carries exactly one value
/// (`ERR_CARDINALITY`). Scope is checked across all entries before cardinality.
pub fn validate_label_selection(selections: &Selections, schema: &ProjectSchema) -> Result<()> {
    let mut resolved = Vec::with_capacity(selections.len());
    for (label_id, values) in selections {
        let label = schema.label(*label_id).ok_or_else(|| {
            Error::new(
                ErrorCode::LabelScope,
                format!("label {label_id} is not part of this project"),
            )
        })?;
        if let Some(v) = values.iter().find(|v| !label.has_value(**v)) {
            return Err(Error::new(
                ErrorCode::LabelScope,
                format!("value {v} does not belong to label {:?}", label.name),
            ));
        }
        resolved.push((label, values.len()));
    }
    for (label, count) in resolved {
        if label.selection_type == SelectionType::Single && count != 1 {
            return Err(Error::new(
                ErrorCode::Cardinality,
                format!(
                    "single-choice label {:?} needs exactly one value, got {count}",
                    label.name
                ),
            ));
        }
    }
    Ok(())
}

/// Checks a segment against the datapoint it would belong to.
///
/// Rules are applied in a fixed order and the first violation is reported:
/// bounds (`0 <= start`, `end <= duration`), then `start < end`, then label
/// scope, then cardinality. Overlap with sibling segments is allowed.
pub fn validate_segment(draft: &SegmentDraft, duration_ms: u64, schema: &ProjectSchema) -> Result<()> {
    let duration = i64::try_from(duration_ms).unwrap_or(i64::MAX);
    if draft.start_ms < 0 || draft.end_ms < 0 || draft.start_ms > duration || draft.end_ms > duration {
        return Err(Error::new(
            ErrorCode::Bounds,
            format!(
                "segment [{}, {}) lies outside [0, {duration}]",
                draft.start_ms, draft.end_ms
            ),
        ));
    }
    if draft.start_ms >= draft.end_ms {
        return Err(Error::new(
            ErrorCode::EmptyInterval,
            format!("segment start {} is not before end {}", draft.start_ms, draft.end_ms),
        ));
    }
    validate_label_selection(&draft.selections, schema)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn schema() -> ProjectSchema {
        ProjectSchema {
            labels: vec![
                LabelSchema {
                    id: LabelId(1),
                    name: "speaker".into(),
                    selection_type: SelectionType::Single,
                    values: vec![
                        LabelValueSchema { id: LabelValueId(10), value: "S1".into() },
                        LabelValueSchema { id: LabelValueId(11), value: "S2".into() },
                    ],
                },
                LabelSchema {
                    id: LabelId(2),
                    name: "noise".into(),
                    selection_type: SelectionType::Multi,
                    values: vec![
                        LabelValueSchema { id: LabelValueId(20), value: "music".into() },
                        LabelValueSchema { id: LabelValueId(21), value: "traffic".into() },
                        LabelValueSchema { id: LabelValueId(22), value: "crowd".into() },
                    ],
                },
            ],
        }
    }

    fn sel(pairs: &[(u64, &[u64])]) -> Selections {
        pairs
            .iter()
            .map(|(l, vs)| (LabelId(*l), vs.iter().map(|v| LabelValueId(*v)).collect()))
            .collect()
    }

    fn draft(start_ms: i64, end_ms: i64, selections: Selections) -> SegmentDraft {
        SegmentDraft { start_ms, end_ms, transcription: String::new(), selections }
    }

    #[test]
    fn full_span_is_accepted() {
        assert!(validate_segment(&draft(0, 60_000, Selections::new()), 60_000, &schema()).is_ok());
    }

    #[test]
    fn zero_length_is_empty_interval() {
        let err = validate_segment(&draft(500, 500, Selections::new()), 60_000, &schema()).unwrap_err();
        assert_eq!(err.code, ErrorCode::EmptyInterval);
        let err = validate_segment(&draft(900, 500, Selections::new()), 60_000, &schema()).unwrap_err();
        assert_eq!(err.code, ErrorCode::EmptyInterval);
    }

    #[test]
    fn out_of_range_is_bounds() {
        for (s, e) in [(-1, 10), (0, 60_001), (60_001, 60_002), (-5, -5)] {
            let err = validate_segment(&draft(s, e, Selections::new()), 60_000, &schema()).unwrap_err();
            assert_eq!(err.code, ErrorCode::Bounds, "({s}, {e})");
        }
    }

    #[test]
    fn single_choice_needs_exactly_one_value() {
        let two = sel(&[(1, &[10, 11])]);
        let err = validate_segment(&draft(0, 10, two), 100, &schema()).unwrap_err();
        assert_eq!(err.code, ErrorCode::Cardinality);
        let none = sel(&[(1, &[])]);
        assert_eq!(validate_label_selection(&none, &schema()).unwrap_err().code, ErrorCode::Cardinality);
        assert!(validate_label_selection(&sel(&[(1, &[11])]), &schema()).is_ok());
    }

    #[test]
    fn label_selection_rules() {
        assert!(validate_label_selection(&Selections::new(), &schema()).is_ok());
        assert!(validate_label_selection(&sel(&[(2, &[20, 21, 22])]), &schema()).is_ok());
        let foreign_value = sel(&[(2, &[10])]);
        assert_eq!(
            validate_label_selection(&foreign_value, &schema()).unwrap_err().code,
            ErrorCode::LabelScope
        );
        let foreign_label = sel(&[(99, &[10])]);
        assert_eq!(
            validate_label_selection(&foreign_label, &schema()).unwrap_err().code,
            ErrorCode::LabelScope
        );
    }

    #[test]
    fn scope_violation_wins_over_cardinality() {
        // label 1 would be a cardinality error, label 2 holds a foreign value
        let s = sel(&[(1, &[10, 11]), (2, &[99])]);
        assert_eq!(validate_label_selection(&s, &schema()).unwrap_err().code, ErrorCode::LabelScope);
    }

    #[test]
    fn selections_serialize_with_string_keys() {
        let s = sel(&[(1, &[10]), (2, &[21, 20])]);
        let json = serde_json::to_string(&s).unwrap();
        assert_eq!(json, r#"{"1":[10],"2":[20,21]}"#);
        let back: Selections = serde_json::from_str(&json).unwrap();
        assert_eq!(back, s);
    }
}
