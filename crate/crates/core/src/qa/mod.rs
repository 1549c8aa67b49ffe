//! Inter-annotator quality checks: overlap planning, transcript assembly,
//! pairwise word error rate and discrepancy flagging.

mod overlap;
mod wer;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

pub use overlap::{plan_overlap, shared_count, OverlapPlan};
pub use wer::{tokenize, word_error_rate, WordErrors};

use crate::app::App;
use crate::auth::{Principal, Requirement};
use crate::domain::*;
use crate::error::{Error, ErrorCode, Result};
use crate::text::normalize_text;

pub const DEFAULT_FLAG_THRESHOLD: f64 = 0.5;

/// Joins segment transcriptions in `(start_ms, end_ms, id)` order with
/// single spaces, skipping empty ones.
pub fn assemble_transcript<'a>(segments: impl IntoIterator<Item = &'a Segment>) -> String {
    let mut segs: Vec<&Segment> = segments.into_iter().collect();
    segs.sort_by_key(|s| (s.start_ms, s.end_ms, s.id));
    segs.iter()
        .map(|s| s.transcription.as_str())
        .filter(|t| !t.is_empty())
        .collect::<Vec<_>>()
        .join(" ")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaRow {
    pub datapoint_id: DataPointId,
    pub original_filename: String,
    /// `None` when the reference annotator's transcript has no words.
    pub wer: Option<f64>,
    pub errors: Option<WordErrors>,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaReport {
    pub project_id: ProjectId,
    /// `(reference annotator, compared annotator)`
    pub pair: (String, String),
    pub threshold: f64,
    pub rows: Vec<QaRow>,
    pub generated_at: DateTime<Utc>,
}

impl QaReport {
    pub fn flagged(&self) -> impl Iterator<Item = &QaRow> {
        self.rows.iter().filter(|r| r.flagged)
    }
}

/// Compares two transcripts with `reference` as the ground truth.
/// Returns `(wer, errors, flagged)`; a wordless reference is always flagged.
pub fn compare_transcripts(reference: &str, hypothesis: &str, threshold: f64) -> (Option<f64>, Option<WordErrors>, bool) {
    let r = tokenize(reference, true);
    let h = tokenize(hypothesis, true);
    match word_error_rate(&r, &h) {
        Ok(e) => {
            let wer = e.rate();
            (Some(wer), Some(e), wer > threshold)
        }
        Err(_) => (None, None, true),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlapRequest {
    pub annotators: [String; 2],
    pub overlap_fraction: f64,
    #[serde(default)]
    pub seed: u64,
    /// Defaults to every datapoint of the project.
    #[serde(default)]
    pub datapoint_ids: Option<Vec<DataPointId>>,
    /// Create the planned assignments instead of only returning the plan.
    #[serde(default)]
    pub apply: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OverlapOutcome {
    pub annotators: [String; 2],
    #[serde(flatten)]
    pub plan: OverlapPlan<DataPointId>,
    pub applied: bool,
}

impl App {
    /// Transcript of one assignment, for its owner or an admin.
    pub fn assignment_transcript(&self, principal: &Principal, assignment_id: AssignmentId) -> Result<String> {
        let t = self.store.read();
        let a = t.assignment(assignment_id).ok_or_else(|| Error::not_found("assignment"))?;
        if !principal.is_admin() && a.user_id != principal.user_id {
            return Err(Error::forbidden());
        }
        Ok(assemble_transcript(t.segments_of(a.id)))
    }

    /// Pairwise WER over every datapoint of the project assigned to both users,
    /// with `user_a` as the reference.
    pub fn qa_report(&self, principal: &Principal, project_id: ProjectId, user_a: &str, user_b: &str, threshold: Option<f64>) -> Result<QaReport> {
        self.authorize(principal, Requirement::Admin)?;
        let threshold = threshold.unwrap_or(DEFAULT_FLAG_THRESHOLD);
        if !threshold.is_finite() || threshold < 0.0 {
            return Err(Error::bad_request("threshold must be a non-negative number"));
        }
        let t = self.store.read();
        if t.project(project_id).is_none() {
            return Err(Error::not_found("project"));
        }
        let find = |name: &str| {
            t.user_by_name(&normalize_text(name.trim()))
                .map(|u| (u.id, u.username.clone()))
                .ok_or_else(|| Error::not_found("user"))
        };
        let (a_id, a_name) = find(user_a)?;
        let (b_id, b_name) = find(user_b)?;

        let rows = t
            .datapoints_of(project_id)
            .into_iter()
            .filter_map(|dp| {
                let a = t.assignment_for(dp.id, a_id)?;
                let b = t.assignment_for(dp.id, b_id)?;
                let (wer, errors, flagged) = compare_transcripts(
                    &assemble_transcript(t.segments_of(a.id)),
                    &assemble_transcript(t.segments_of(b.id)),
                    threshold,
                );
                Some(QaRow {
                    datapoint_id: dp.id,
                    original_filename: dp.original_filename.clone(),
                    wer,
                    errors,
                    flagged,
                })
            })
            .collect();

        Ok(QaReport {
            project_id,
            pair: (a_name, b_name),
            threshold,
            rows,
            generated_at: self.clock.now(),
        })
    }

    /// Plans (and optionally creates) a two-annotator split of a project's
    /// datapoints. With `apply`, a receives `a_only + shared` and b receives
    /// `b_only + shared`; existing assignments are kept.
    pub fn plan_project_overlap(&self, principal: &Principal, project_id: ProjectId, req: OverlapRequest) -> Result<OverlapOutcome> {
        self.authorize(principal, Requirement::Admin)?;
        let now = self.clock.now();
        let plan_in = |t: &crate::store::Tables| -> Result<OverlapPlan<DataPointId>> {
            if t.project(project_id).is_none() {
                return Err(Error::not_found("project"));
            }
            let ids = match &req.datapoint_ids {
                Some(ids) => {
                    for id in ids {
                        match t.datapoint(*id) {
                            Some(dp) if dp.project_id == project_id => {}
                            _ => return Err(Error::not_found("datapoint")),
                        }
                    }
                    ids.clone()
                }
                None => t.datapoints_of(project_id).into_iter().map(|d| d.id).collect(),
            };
            plan_overlap(&ids, req.overlap_fraction, req.seed)
        };
        if !req.apply {
            let plan = plan_in(&self.store.read())?;
            return Ok(OverlapOutcome { annotators: req.annotators.clone(), plan, applied: false });
        }
        self.store.write(|t| {
            let plan = plan_in(t)?;
            let mut users = Vec::with_capacity(2);
            for name in &req.annotators {
                let name = normalize_text(name.trim());
                let user = t.user_by_name(&name).ok_or_else(|| {
                    Error::new(ErrorCode::UnknownAssignee, format!("unknown user {name:?}"))
                })?;
                if !t.is_member(user.id, project_id) {
                    return Err(Error::new(ErrorCode::NotMember, format!("user {name:?} is not a project member")));
                }
                users.push(user.id);
            }
            let wanted = [(users[0], &plan.a_only), (users[1], &plan.b_only)];
            for (user_id, own) in wanted {
                for &dp in own.iter().chain(&plan.shared) {
                    if t.assignment_for(dp, user_id).is_some() {
                        continue;
                    }
                    let a = Assignment {
                        id: AssignmentId(t.next_id()),
                        datapoint_id: dp,
                        user_id,
                        status: AssignmentStatus::Pending,
                        marked_for_review: false,
                        updated_at: now,
                    };
                    t.insert_assignment(a)?;
                }
            }
            Ok(OverlapOutcome { annotators: req.annotators.clone(), plan, applied: true })
        })
    }
}
