//! An annotator's session: list pending work, add and edit segments, then
//! mark the datapoint complete.

use sonotate::annotation::{Category, SegmentPatch};
use sonotate::audio::encode_wav_pcm16;
use sonotate::domain::{AssignmentStatus, Role, SegmentDraft, SelectionType};
use sonotate::ingest::IngestRequest;
use sonotate::{App, Principal};

fn main() -> sonotate::Result<()> {
    let app = App::in_memory();
    let root = app.bootstrap_admin("root", "change me please")?;
    let admin = Principal { user_id: root.id, role: root.role };
    let project = app.create_project(&admin, "Podcasts")?;
    let amara = app.create_user(&admin, "amara", "annotator pass", Role::Annotator)?;
    app.assign_user_to_project(&admin, amara.id, project.id)?;
    let speaker = app.create_label(&admin, project.id, "speaker", SelectionType::Single)?;
    let host = app.create_label_value(&admin, speaker.id, "host")?;
    for name in ["ep1.wav", "ep2.wav"] {
        app.ingest_datapoint(IngestRequest {
            api_key: project.api_key.clone().unwrap_or_default(),
            original_filename: name.into(),
            audio: encode_wav_pcm16(8_000, 1, &vec![0; 80_000]),
            assignees: vec!["amara".into()],
            ..IngestRequest::default()
        })?;
    }

    let token = app.login("amara", "annotator pass")?;
    let me = app.verify(&token.token)?;
    let page = app.list_datapoints(&me, project.id, Category::Pending, 1, 10)?;
    println!("{} pending", page.total);
    let first = page.items[0].datapoint_id;

    let detail = app.get_datapoint(&me, first)?;
    println!("{} ({} ms) at {}", detail.original_filename, detail.duration_ms, detail.audio_url);
    let seg = app.create_segment(
        &me,
        first,
        SegmentDraft {
            start_ms: 1_200,
            end_ms: 4_800,
            transcription: "welcome to the show".into(),
            selections: [(speaker.id, [host.id].into())].into(),
        },
    )?;
    let seg = app.update_segment(&me, seg.id, SegmentPatch { end_ms: Some(5_100), ..Default::default() })?;
    println!("segment [{}, {}) {:?}", seg.start_ms, seg.end_ms, seg.transcription);

    let rejected = app.create_segment(&me, first, SegmentDraft { start_ms: 9_000, end_ms: 11_000, ..Default::default() });
    println!("past the end: {}", rejected.unwrap_err());

    app.set_completion(&me, first, AssignmentStatus::Completed)?;
    app.set_review_flag(&me, first, true)?;
    for category in [Category::Pending, Category::Completed, Category::MarkedReview] {
        println!("{category:?}: {}", app.list_datapoints(&me, project.id, category, 1, 10)?.total);
    }
    app.logout(&token.token)?;
    Ok(())
}
