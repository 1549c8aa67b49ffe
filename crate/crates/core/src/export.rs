//! Deterministic JSON export of a project's annotations.
//!
//! Labels are referenced by name, never by id, matching the pre-annotation
//! shape accepted at ingest. Ordering: labels by name, label values
//! lexicographically, data by `(created_at, id)`, assignments by username,
//! segments by `(start_ms, end_ms, id)`. No secrets, no internal ids other
//! than the project id.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::app::App;
use crate::auth::{Principal, Requirement};
use crate::domain::*;
use crate::error::{Error, Result};
use crate::store::Tables;

pub const EXPORT_VERSION: &str = "1";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExportDocument {
    pub version: String,
    pub project: ExportProject,
    pub labels: Vec<ExportLabel>,
    pub data: Vec<ExportDatapoint>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExportProject {
    pub id: ProjectId,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExportLabel {
    pub name: String,
    #[serde(rename = "type")]
    pub selection_type: SelectionType,
    pub values: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExportDatapoint {
    pub original_filename: String,
    pub stored_name: String,
    pub format: AudioFormat,
    pub duration_ms: u64,
    pub reference_transcription: Option<String>,
    pub assignments: Vec<ExportAssignment>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExportAssignment {
    pub username: String,
    pub status: AssignmentStatus,
    pub marked_for_review: bool,
    pub segments: Vec<ExportSegment>,
}

/// A segment with labels and values by name.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExportSegment {
    pub start_ms: i64,
    pub end_ms: i64,
    #[serde(default)]
    pub transcription: String,
    #[serde(default)]
    pub labels: BTreeMap<String, Vec<String>>,
}

fn named_labels(t: &Tables, selections: &Selections) -> BTreeMap<String, Vec<String>> {
    selections
        .iter()
        .filter_map(|(label_id, values)| {
            let label = t.label(*label_id)?;
            let mut names: Vec<String> = values
                .iter()
                .filter_map(|v| t.label_value(*v).map(|v| v.value.clone()))
                .collect();
            names.sort();
            Some((label.name.clone(), names))
        })
        .collect()
}

pub(crate) fn build_document(t: &Tables, project_id: ProjectId) -> Result<ExportDocument> {
    let project = t.project(project_id).ok_or_else(|| Error::not_found("project"))?;

    let mut labels: Vec<ExportLabel> = t
        .labels_of(project_id)
        .into_iter()
        .map(|l| {
            let mut values: Vec<String> = t.values_of(l.id).into_iter().map(|v| v.value.clone()).collect();
            values.sort();
            ExportLabel { name: l.name.clone(), selection_type: l.selection_type, values }
        })
        .collect();
    labels.sort_by(|a, b| a.name.cmp(&b.name));

    let data = t
        .datapoints_of(project_id)
        .into_iter()
        .map(|dp| {
            let mut assignments: Vec<ExportAssignment> = t
                .assignments_of_datapoint(dp.id)
                .into_iter()
                .map(|a| ExportAssignment {
                    username: t.user(a.user_id).map(|u| u.username.clone()).unwrap_or_default(),
                    status: a.status,
                    marked_for_review: a.marked_for_review,
                    segments: t
                        .segments_of(a.id)
                        .into_iter()
                        .map(|s| ExportSegment {
                            start_ms: s.start_ms,
                            end_ms: s.end_ms,
                            transcription: s.transcription.clone(),
                            labels: named_labels(t, &s.selections),
                        })
                        .collect(),
                })
                .collect();
            assignments.sort_by(|a, b| a.username.cmp(&b.username));
            ExportDatapoint {
                original_filename: dp.original_filename.clone(),
                stored_name: dp.stored_name.clone(),
                format: dp.format,
                duration_ms: dp.duration_ms,
                reference_transcription: dp.reference_transcription.clone(),
                assignments,
            }
        })
        .collect();

    Ok(ExportDocument {
        version: EXPORT_VERSION.to_owned(),
        project: ExportProject { id: project.id, name: project.name.clone() },
        labels,
        data,
    })
}

impl App {
    /// Builds the export from a single committed snapshot.
    pub fn export_project(&self, principal: &Principal, project_id: ProjectId) -> Result<ExportDocument> {
        self.authorize(principal, Requirement::Admin)?;
        build_document(&self.store.read(), project_id)
    }

    /// The export as pretty-printed JSON with a trailing newline. Identical
    /// state yields identical bytes.
    pub fn export_project_json(&self, principal: &Principal, project_id: ProjectId) -> Result<String> {
        let doc = self.export_project(principal, project_id)?;
        let mut out = serde_json::to_string_pretty(&doc).map_err(|e| Error::internal(e.to_string()))?;
        out.push('\n');
        Ok(out)
    }
}
