//! Annotator-facing operations: project and datapoint listings, segment
//! CRUD, review and completion flags.
//!
//! Segments belong to one assignment. Only the assignment's user may write
//! them; admins included, since authorship feeds inter-annotator comparison.

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::admin::ProjectView;
use crate::app::App;
use crate::auth::{Principal, Requirement};
use crate::domain::*;
use crate::error::{Error, ErrorCode, Result};
use crate::store::Tables;
use crate::text::normalize_text;

pub const DEFAULT_PAGE_SIZE: u32 = 10;
pub const MAX_PAGE_SIZE: u32 = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    #[default]
    All,
    Pending,
    Completed,
    MarkedReview,
}

impl Category {
    fn admits(self, a: &Assignment) -> bool {
        match self {
            Category::All => true,
            Category::Pending => a.status == AssignmentStatus::Pending,
            Category::Completed => a.status == AssignmentStatus::Completed,
            Category::MarkedReview => a.marked_for_review,
        }
    }
}

impl std::str::FromStr for Category {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "" | "all" => Ok(Category::All),
            "pending" => Ok(Category::Pending),
            "completed" => Ok(Category::Completed),
            "marked_review" => Ok(Category::MarkedReview),
            other => Err(Error::bad_request(format!("unknown category {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Page<T> {
    pub items: Vec<T>,
    pub total: usize,
    pub page: u32,
    pub page_size: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatapointRow {
    pub datapoint_id: DataPointId,
    pub assignment_id: AssignmentId,
    pub original_filename: String,
    pub format: AudioFormat,
    pub duration_ms: u64,
    pub status: AssignmentStatus,
    pub marked_for_review: bool,
    pub segment_count: usize,
    pub created_at: DateTime<Utc>,
    pub updated_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatapointDetail {
    pub id: DataPointId,
    pub project_id: ProjectId,
    pub original_filename: String,
    pub stored_name: String,
    pub audio_url: String,
    pub format: AudioFormat,
    pub duration_ms: u64,
    pub reference_transcription: Option<String>,
    /// The full label schema, so clients build their forms from it.
    pub labels: Vec<LabelSchema>,
    /// The caller's own assignment, if any.
    pub assignment: Option<Assignment>,
    /// The caller's own segments, ordered by `(start_ms, end_ms, id)`.
    pub segments: Vec<Segment>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentPatch {
    pub start_ms: Option<i64>,
    pub end_ms: Option<i64>,
    pub transcription: Option<String>,
    pub selections: Option<Selections>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssignmentPatch {
    pub marked_for_review: Option<bool>,
    pub status: Option<AssignmentStatus>,
}

/// The segment `create_segment` would store for a validated draft.
pub(crate) fn build_segment(t: &mut Tables, assignment_id: AssignmentId, draft: &SegmentDraft, now: DateTime<Utc>) -> Segment {
    Segment {
        id: SegmentId(t.next_id()),
        assignment_id,
        start_ms: draft.start_ms,
        end_ms: draft.end_ms,
        transcription: normalize_text(&draft.transcription),
        selections: draft.selections.clone(),
        created_at: now,
        updated_at: now,
    }
}

fn check_page(page: u32, page_size: u32) -> Result<()> {
    if page < 1 {
        return Err(Error::new(ErrorCode::BadPage, "page numbers start at 1"));
    }
    if !(1..=MAX_PAGE_SIZE).contains(&page_size) {
        return Err(Error::new(
            ErrorCode::BadPage,
            format!("page_size must be between 1 and {MAX_PAGE_SIZE}"),
        ));
    }
    Ok(())
}

impl App {
    /// Projects the caller belongs to; every project for admins.
    pub fn list_projects(&self, principal: &Principal) -> Result<Vec<ProjectView>> {
        let t = self.store.read();
        let views = if principal.is_admin() {
            t.projects().map(|p| ProjectView::for_principal(p, principal)).collect()
        } else {
            t.projects_of(principal.user_id)
                .into_iter()
                .filter_map(|id| t.project(id))
                .map(|p| ProjectView::for_principal(p, principal))
                .collect()
        };
        Ok(views)
    }

    /// One page of the caller's own assignments in a project, ordered by the
    /// datapoint's `(created_at, id)`. `page` is 1-based.
    pub fn list_datapoints(&self, principal: &Principal, project_id: ProjectId, category: Category, page: u32, page_size: u32) -> Result<Page<DatapointRow>> {
        self.authorize(principal, Requirement::MemberOf(project_id))?;
        check_page(page, page_size)?;
        let t = self.store.read();
        if t.project(project_id).is_none() {
            return Err(Error::not_found("project"));
        }
        let mut rows: Vec<(&DataPoint, &Assignment)> = t
            .assignments_of_user(principal.user_id)
            .into_iter()
            .filter(|a| category.admits(a))
            .filter_map(|a| t.datapoint(a.datapoint_id).map(|d| (d, a)))
            .filter(|(d, _)| d.project_id == project_id)
            .collect();
        rows.sort_by_key(|(d, _)| (d.created_at, d.id));
        let total = rows.len();
        let skip = (page as usize - 1).saturating_mul(page_size as usize);
        let items = rows
            .into_iter()
            .skip(skip)
            .take(page_size as usize)
            .map(|(d, a)| DatapointRow {
                datapoint_id: d.id,
                assignment_id: a.id,
                original_filename: d.original_filename.clone(),
                format: d.format,
                duration_ms: d.duration_ms,
                status: a.status,
                marked_for_review: a.marked_for_review,
                segment_count: t.segments_of(a.id).len(),
                created_at: d.created_at,
                updated_at: a.updated_at,
            })
            .collect();
        Ok(Page { items, total, page, page_size })
    }

    pub fn get_datapoint(&self, principal: &Principal, datapoint_id: DataPointId) -> Result<DatapointDetail> {
        self.authorize(principal, Requirement::AssigneeOf(datapoint_id))?;
        let t = self.store.read();
        let dp = t.datapoint(datapoint_id).ok_or_else(|| Error::not_found("datapoint"))?;
        let assignment = t.assignment_for(datapoint_id, principal.user_id).cloned();
        let segments = assignment
            .as_ref()
            .map(|a| t.segments_of(a.id).into_iter().cloned().collect())
            .unwrap_or_default();
        Ok(DatapointDetail {
            id: dp.id,
            project_id: dp.project_id,
            original_filename: dp.original_filename.clone(),
            stored_name: dp.stored_name.clone(),
            audio_url: format!("/audio/{}", dp.stored_name),
            format: dp.format,
            duration_ms: dp.duration_ms,
            reference_transcription: dp.reference_transcription.clone(),
            labels: t.schema(dp.project_id).labels,
            assignment,
            segments,
        })
    }

    /// The caller's assignment on a datapoint, or `ERR_FORBIDDEN`.
    fn own_assignment<'t>(&self, t: &'t Tables, principal: &Principal, datapoint_id: DataPointId) -> Result<&'t Assignment> {
        if let Some(a) = t.assignment_for(datapoint_id, principal.user_id) {
            return Ok(a);
        }
        if principal.is_admin() && t.datapoint(datapoint_id).is_none() {
            return Err(Error::not_found("datapoint"));
        }
        Err(Error::forbidden())
    }

    pub fn create_segment(&self, principal: &Principal, datapoint_id: DataPointId, draft: SegmentDraft) -> Result<Segment> {
        self.authorize(principal, Requirement::AssigneeOf(datapoint_id))?;
        let now = self.clock.now();
        self.store.write(|t| {
            let assignment_id = self.own_assignment(t, principal, datapoint_id)?.id;
            let dp = t.datapoint(datapoint_id).ok_or_else(|| Error::not_found("datapoint"))?;
            validate_segment(&draft, dp.duration_ms, &t.schema(dp.project_id))?;
            let segment = build_segment(t, assignment_id, &draft, now);
            t.insert_segment(segment.clone())?;
            Ok(segment)
        })
    }

    /// The segment and its datapoint, if `principal` owns the segment.
    fn own_segment(&self, t: &Tables, principal: &Principal, segment_id: SegmentId) -> Result<(Segment, DataPoint)> {
        let seg = t.segment(segment_id).ok_or_else(|| Error::not_found("segment"))?;
        let a = t.assignment(seg.assignment_id).ok_or_else(|| Error::not_found("segment"))?;
        if a.user_id != principal.user_id {
            return Err(Error::forbidden());
        }
        let dp = t.datapoint(a.datapoint_id).ok_or_else(|| Error::not_found("datapoint"))?;
        Ok((seg.clone(), dp.clone()))
    }

    /// Applies `patch` and re-validates the result. Last write wins.
    pub fn update_segment(&self, principal: &Principal, segment_id: SegmentId, patch: SegmentPatch) -> Result<Segment> {
        let now = self.clock.now();
        self.store.write(|t| {
            let (mut seg, dp) = self.own_segment(t, principal, segment_id)?;
            let draft = SegmentDraft {
                start_ms: patch.start_ms.unwrap_or(seg.start_ms),
                end_ms: patch.end_ms.unwrap_or(seg.end_ms),
                transcription: patch.transcription.map(|s| normalize_text(&s)).unwrap_or(seg.transcription.clone()),
                selections: patch.selections.unwrap_or(seg.selections.clone()),
            };
            validate_segment(&draft, dp.duration_ms, &t.schema(dp.project_id))?;
            seg.start_ms = draft.start_ms;
            seg.end_ms = draft.end_ms;
            seg.transcription = draft.transcription;
            seg.selections = draft.selections;
            seg.updated_at = now;
            t.update_segment(seg.clone())?;
            Ok(seg)
        })
    }

    pub fn delete_segment(&self, principal: &Principal, segment_id: SegmentId) -> Result<()> {
        self.store.write(|t| {
            self.own_segment(t, principal, segment_id)?;
            t.delete_segment(segment_id).map(drop)
        })
    }

    /// Updates the caller's own assignment flags. Both fields are optional.
    pub fn update_assignment(&self, principal: &Principal, datapoint_id: DataPointId, patch: AssignmentPatch) -> Result<Assignment> {
        self.authorize(principal, Requirement::AssigneeOf(datapoint_id))?;
        let now = self.clock.now();
        self.store.write(|t| {
            let mut a = self.own_assignment(t, principal, datapoint_id)?.clone();
            if let Some(flag) = patch.marked_for_review {
                a.marked_for_review = flag;
            }
            if let Some(status) = patch.status {
                a.status = status;
            }
            a.updated_at = now;
            t.update_assignment(a.clone())?;
            Ok(a)
        })
    }

    pub fn set_review_flag(&self, principal: &Principal, datapoint_id: DataPointId, flag: bool) -> Result<Assignment> {
        self.update_assignment(principal, datapoint_id, AssignmentPatch { marked_for_review: Some(flag), status: None })
    }

    pub fn set_completion(&self, principal: &Principal, datapoint_id: DataPointId, status: AssignmentStatus) -> Result<Assignment> {
        self.update_assignment(principal, datapoint_id, AssignmentPatch { marked_for_review: None, status: Some(status) })
    }
}
