//! Machine ingestion of audio datapoints authenticated by a project api key.
//!
//! An ingest either lands completely (datapoint row, audio blob, one pending
//! assignment per assignee, pre-annotation segments on every assignment) or
//! not at all. The blob is written before the store transaction and removed
//! again if anything after it fails.

use std::collections::BTreeSet;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::annotation::build_segment;
use crate::app::App;
use crate::audio::validate_audio;
use crate::domain::*;
use crate::error::{Error, ErrorCode, Result};
use crate::export::ExportSegment;
use crate::faults::FaultPoint;
use crate::store::Tables;
use crate::text::normalize_text;

/// Pre-annotations use the export segment shape: labels and values by name.
pub type PreAnnotation = ExportSegment;

/// A random stored name: 32 lowercase hex characters (128 bits) and the
/// extension. Nothing about the upload feeds into it.
pub fn generate_stored_name(rng: &mut impl rand::RngCore, extension: &str) -> Result<String> {
    let format = AudioFormat::from_extension(extension)?;
    let mut id = [0u8; 16];
    rng.fill_bytes(&mut id);
    Ok(format!("{}.{}", hex::encode(id), format.extension()))
}

#[derive(Debug, Clone, Default)]
pub struct IngestRequest {
    pub api_key: String,
    pub original_filename: String,
    pub audio: Vec<u8>,
    pub reference_transcription: Option<String>,
    pub pre_annotations: Vec<PreAnnotation>,
    pub assignees: Vec<String>,
    pub marked_for_review: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestOutcome {
    pub datapoint_id: DataPointId,
    pub stored_name: String,
    pub format: AudioFormat,
    pub duration_ms: u64,
    pub created_at: DateTime<Utc>,
    pub assignments: Vec<AssignmentId>,
}

struct Resolved {
    project_id: ProjectId,
    assignees: Vec<UserId>,
    drafts: Vec<SegmentDraft>,
}

/// Turns name-based pre-annotations into drafts against the project schema.
pub fn resolve_pre_annotations(items: &[PreAnnotation], schema: &ProjectSchema, duration_ms: u64) -> Result<Vec<SegmentDraft>> {
    items
        .iter()
        .enumerate()
        .map(|(i, item)| {
            let bad = |msg: String| Error::new(ErrorCode::BadPreannotation, format!("pre-annotation {i}: {msg}")).at_index(i);
            let mut selections = Selections::new();
            for (label_name, values) in &item.labels {
                let label = schema
                    .label_by_name(&normalize_text(label_name))
                    .ok_or_else(|| bad(format!("unknown label {label_name:?}")))?;
                let mut ids = BTreeSet::new();
                for value in values {
                    let v = label
                        .value_by_name(&normalize_text(value))
                        .ok_or_else(|| bad(format!("unknown value {value:?} for label {label_name:?}")))?;
                    ids.insert(v.id);
                }
                selections.insert(label.id, ids);
            }
            let draft = SegmentDraft {
                start_ms: item.start_ms,
                end_ms: item.end_ms,
                transcription: item.transcription.clone(),
                selections,
            };
            validate_segment(&draft, duration_ms, schema).map_err(|e| bad(e.to_string()))?;
            Ok(draft)
        })
        .collect()
}

fn resolve(t: &Tables, req: &IngestRequest, duration_ms: u64) -> Result<Resolved> {
    let project = t.project_by_api_key(&req.api_key).ok_or_else(Error::bad_api_key)?;
    let mut assignees = Vec::new();
    for name in &req.assignees {
        let name = normalize_text(name.trim());
        let user = t.user_by_name(&name).ok_or_else(|| {
            Error::new(ErrorCode::UnknownAssignee, format!("unknown user {name:?}"))
        })?;
        if !t.is_member(user.id, project.id) {
            return Err(Error::new(
                ErrorCode::NotMember,
                format!("user {name:?} is not a member of the project"),
            ));
        }
        if !assignees.contains(&user.id) {
            assignees.push(user.id);
        }
    }
    let drafts = resolve_pre_annotations(&req.pre_annotations, &t.schema(project.id), duration_ms)?;
    Ok(Resolved { project_id: project.id, assignees, drafts })
}

/// Keeps only the final path component of a client-supplied filename.
fn base_name(name: &str) -> &str {
    name.rsplit(['/', '\\']).next().unwrap_or(name)
}

impl App {
    /// The project a machine key belongs to.
    pub fn check_api_key(&self, api_key: &str) -> Result<ProjectId> {
        self.store
            .read()
            .project_by_api_key(api_key)
            .map(|p| p.id)
            .ok_or_else(Error::bad_api_key)
    }

    pub fn ingest_datapoint(&self, req: IngestRequest) -> Result<IngestOutcome> {
        // The key is checked first so that a wrong key reveals nothing else.
        self.check_api_key(&req.api_key)?;
        let probed = validate_audio(&req.audio, self.settings.max_upload_bytes)?;
        let original_filename = normalize_text(base_name(req.original_filename.trim()));
        if original_filename.is_empty() {
            return Err(Error::bad_request("original_filename must not be empty"));
        }
        let reference = req.reference_transcription.as_deref().map(normalize_text);

        // fail fast on a snapshot before touching blob storage
        resolve(&self.store.read(), &req, probed.duration_ms)?;

        let stored_name = generate_stored_name(&mut *self.rng.lock(), probed.format.extension())?;
        self.faults.check(FaultPoint::BlobWrite)?;
        self.blobs.put(&stored_name, &req.audio)?;

        let now = self.clock.now();
        let result = self.faults.check(FaultPoint::AfterBlobWrite).and_then(|()| {
            self.store.write(|t| {
                let resolved = resolve(t, &req, probed.duration_ms)?;
                let dp = DataPoint {
                    id: DataPointId(t.next_id()),
                    project_id: resolved.project_id,
                    original_filename,
                    stored_name: stored_name.clone(),
                    format: probed.format,
                    duration_ms: probed.duration_ms,
                    reference_transcription: reference,
                    created_at: now,
                };
                t.insert_datapoint(dp.clone())?;
                self.faults.check(FaultPoint::DatapointInsert)?;

                let mut assignments = Vec::with_capacity(resolved.assignees.len());
                for user_id in resolved.assignees {
                    let a = Assignment {
                        id: AssignmentId(t.next_id()),
                        datapoint_id: dp.id,
                        user_id,
                        status: AssignmentStatus::Pending,
                        marked_for_review: req.marked_for_review,
                        updated_at: now,
                    };
                    t.insert_assignment(a.clone())?;
                    assignments.push(a.id);
                }
                self.faults.check(FaultPoint::AssignmentInsert)?;

                for &assignment_id in &assignments {
                    for draft in &resolved.drafts {
                        let segment = build_segment(t, assignment_id, draft, now);
                        t.insert_segment(segment)?;
                    }
                }
                self.faults.check(FaultPoint::SegmentInsert)?;

                Ok(IngestOutcome {
                    datapoint_id: dp.id,
                    stored_name: dp.stored_name.clone(),
                    format: dp.format,
                    duration_ms: dp.duration_ms,
                    created_at: dp.created_at,
                    assignments,
                })
            })
        });
        if result.is_err() {
            if let Err(e) = self.blobs.delete(&stored_name) {
                tracing::error!(blob = %stored_name, error = %e, "orphan audio blob left after failed ingest");
            }
        }
        result
    }
}
