mod common;

use chrono::Duration;
use sonotate::annotation::{AssignmentPatch, Category, SegmentPatch};
use sonotate::domain::*;
use sonotate::ingest::IngestRequest;
use sonotate::ErrorCode;

use common::*;

fn ingest(fx: &Fixture, name: &str, assignees: &[&str]) -> DataPointId {
    fx.app
        .ingest_datapoint(IngestRequest {
            api_key: fx.api_key.clone(),
            original_filename: name.into(),
            audio: wav(300),
            assignees: assignees.iter().map(|s| s.to_string()).collect(),
            ..IngestRequest::default()
        })
        .unwrap()
        .datapoint_id
}

fn draft(start: i64, end: i64) -> SegmentDraft {
    SegmentDraft { start_ms: start, end_ms: end, ..SegmentDraft::default() }
}

#[tokio::test]
async fn pages_partition_the_listing_in_creation_order() {
    let fx = Fixture::new().await;
    let mut ids = vec![fx.datapoint.datapoint_id];
    for i in 0..24 {
        fx.clock.advance(Duration::seconds(1));
        ids.push(ingest(&fx, &format!("{i}.wav"), &["mia"]));
    }
    let mut seen = Vec::new();
    for (page, want) in [(1, 10), (2, 10), (3, 5), (4, 0)] {
        let p = fx.app.list_datapoints(&fx.member, fx.project, Category::All, page, 10).unwrap();
        assert_eq!(p.total, 25);
        assert_eq!(p.items.len(), want, "page {page}");
        seen.extend(p.items.iter().map(|r| r.datapoint_id));
    }
    assert_eq!(seen, ids);
}

#[tokio::test]
async fn page_bounds_are_checked() {
    let fx = Fixture::new().await;
    for (page, size) in [(0, 10), (1, 0), (1, 101)] {
        let err = fx.app.list_datapoints(&fx.member, fx.project, Category::All, page, size).unwrap_err();
        assert_eq!(err.code, ErrorCode::BadPage, "page {page} size {size}");
    }
    assert!(fx.app.list_datapoints(&fx.member, fx.project, Category::All, 1, 100).is_ok());
}

#[tokio::test]
async fn categories_filter_the_callers_assignments() {
    let fx = Fixture::new().await;
    let a = ingest(&fx, "a.wav", &["mia"]);
    let b = ingest(&fx, "b.wav", &["mia"]);
    fx.app.set_completion(&fx.member, a, AssignmentStatus::Completed).unwrap();
    fx.app.set_review_flag(&fx.member, a, true).unwrap();
    fx.app.set_review_flag(&fx.member, b, true).unwrap();
    let count = |c| fx.app.list_datapoints(&fx.member, fx.project, c, 1, 100).unwrap().total;
    assert_eq!(count(Category::All), 3);
    assert_eq!(count(Category::Pending), 2);
    assert_eq!(count(Category::Completed), 1);
    assert_eq!(count(Category::MarkedReview), 2);
    // ida is a member with no assignments
    let idle = fx.app.list_datapoints(&fx.idle_member, fx.project, Category::All, 1, 10).unwrap();
    assert_eq!(idle.total, 0);

    fx.app.update_assignment(&fx.member, a, AssignmentPatch { marked_for_review: Some(false), status: Some(AssignmentStatus::Pending) }).unwrap();
    assert_eq!(count(Category::Completed), 0);
    assert_eq!(count(Category::MarkedReview), 1);
}

#[tokio::test]
async fn visibility_follows_membership_and_assignment() {
    let fx = Fixture::new().await;
    let dp = fx.datapoint.datapoint_id;
    let code = |r: sonotate::Result<()>| r.unwrap_err().code;
    assert_eq!(code(fx.app.list_datapoints(&fx.outsider, fx.project, Category::All, 1, 10).map(drop)), ErrorCode::Forbidden);
    assert_eq!(code(fx.app.get_datapoint(&fx.idle_member, dp).map(drop)), ErrorCode::Forbidden);
    assert_eq!(code(fx.app.create_segment(&fx.idle_member, dp, draft(0, 10)).map(drop)), ErrorCode::Forbidden);
    assert!(fx.app.list_projects(&fx.outsider).unwrap().is_empty());
    let mine = fx.app.list_projects(&fx.member).unwrap();
    assert_eq!(mine.len(), 1);
    assert_eq!(mine[0].api_key, None, "annotators never see the key");
}

#[tokio::test]
async fn admins_read_but_do_not_write_other_peoples_work() {
    let fx = Fixture::new().await;
    let dp = fx.datapoint.datapoint_id;
    let detail = fx.app.get_datapoint(&fx.admin, dp).unwrap();
    assert!(detail.assignment.is_none() && detail.segments.is_empty());
    assert_eq!(fx.app.create_segment(&fx.admin, dp, draft(0, 10)).unwrap_err().code, ErrorCode::Forbidden);
    assert_eq!(fx.app.delete_segment(&fx.admin, fx.segment).unwrap_err().code, ErrorCode::Forbidden);
    assert_eq!(fx.app.create_segment(&fx.admin, DataPointId(9_999), draft(0, 10)).unwrap_err().code, ErrorCode::NotFound);
}

#[tokio::test]
async fn schema_seen_by_annotators_matches_what_admins_defined() {
    let fx = Fixture::new().await;
    let admin_view = fx.app.project_schema(&fx.admin, fx.project).unwrap();
    let detail = fx.app.get_datapoint(&fx.member, fx.datapoint.datapoint_id).unwrap();
    assert_eq!(detail.labels, admin_view.labels);
    assert_eq!(fx.app.project_schema(&fx.member, fx.project).unwrap(), admin_view);
    let speaker = admin_view.label(fx.speaker).unwrap();
    assert_eq!(speaker.selection_type, SelectionType::Single);
    assert!(speaker.has_value(fx.s1) && speaker.has_value(fx.s2) && !speaker.has_value(fx.music));
}

#[tokio::test]
async fn segment_lifecycle() {
    let fx = Fixture::new().await;
    let dp = fx.datapoint.datapoint_id;
    // overlapping siblings are fine
    let other = fx.app.create_segment(&fx.member, dp, draft(250, 1000)).unwrap();
    let patched = fx
        .app
        .update_segment(
            &fx.member,
            other.id,
            SegmentPatch { transcription: Some("two".into()), selections: Some([(fx.noise, [fx.music, fx.traffic].into())].into()), ..Default::default() },
        )
        .unwrap();
    assert_eq!((patched.start_ms, patched.end_ms, patched.transcription.as_str()), (250, 1000, "two"));
    let err = fx.app.update_segment(&fx.member, other.id, SegmentPatch { end_ms: Some(100), ..Default::default() }).unwrap_err();
    assert_eq!(err.code, ErrorCode::EmptyInterval);
    let detail = fx.app.get_datapoint(&fx.member, dp).unwrap();
    assert_eq!(detail.segments.iter().map(|s| s.id).collect::<Vec<_>>(), vec![fx.segment, other.id]);
    assert_eq!(detail.segments[1], patched, "rejected patch left the segment unchanged");

    fx.app.delete_segment(&fx.member, other.id).unwrap();
    assert_eq!(fx.app.delete_segment(&fx.member, other.id).unwrap_err().code, ErrorCode::NotFound);
    assert_eq!(fx.app.get_datapoint(&fx.member, dp).unwrap().segments.len(), 1);
}

#[tokio::test]
async fn labels_in_use_cannot_be_deleted() {
    let fx = Fixture::new().await;
    assert_eq!(fx.app.delete_label_value(&fx.admin, fx.s1).unwrap_err().code, ErrorCode::InUse);
    assert_eq!(fx.app.delete_label(&fx.admin, fx.speaker).unwrap_err().code, ErrorCode::InUse);
    fx.app.delete_label_value(&fx.admin, fx.s2).unwrap();
    fx.app.delete_label(&fx.admin, fx.unused_label).unwrap();
    let schema = fx.app.project_schema(&fx.admin, fx.project).unwrap();
    assert!(schema.label(fx.unused_label).is_none());
}

#[tokio::test]
async fn concurrent_segment_writes_all_land() {
    let fx = Fixture::new().await;
    let dp = fx.datapoint.datapoint_id;
    let handles: Vec<_> = (0..8)
        .map(|i| {
            let app = fx.app.clone();
            let member = fx.member;
            std::thread::spawn(move || {
                (0..25)
                    .map(|j| app.create_segment(&member, dp, draft(i * 100 + j, i * 100 + j + 50)).unwrap().id)
                    .collect::<Vec<_>>()
            })
        })
        .collect();
    let mut ids: Vec<SegmentId> = handles.into_iter().flat_map(|h| h.join().unwrap()).collect();
    ids.sort();
    ids.dedup();
    assert_eq!(ids.len(), 200);
    assert_eq!(fx.app.get_datapoint(&fx.member, dp).unwrap().segments.len(), 201);
}

#[tokio::test]
async fn transcripts_assemble_in_time_order() {
    let fx = Fixture::new().await;
    let dp = fx.datapoint.datapoint_id;
    fx.app.create_segment(&fx.member, dp, SegmentDraft { transcription: "there".into(), ..draft(600, 900) }).unwrap();
    let a = fx.datapoint.assignments[0];
    assert_eq!(fx.app.assignment_transcript(&fx.member, a).unwrap(), "hi there");
    assert_eq!(fx.app.assignment_transcript(&fx.admin, a).unwrap(), "hi there");
    assert_eq!(fx.app.assignment_transcript(&fx.idle_member, a).unwrap_err().code, ErrorCode::Forbidden);
}
