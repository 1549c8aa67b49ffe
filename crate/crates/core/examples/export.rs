//! Prints a project's export document. The same state always produces the
//! same bytes.

use sonotate::audio::encode_wav_pcm16;
use sonotate::domain::{Role, SegmentDraft, SelectionType};
use sonotate::ingest::IngestRequest;
use sonotate::{App, Principal};

fn main() -> sonotate::Result<()> {
    let app = App::in_memory();
    let root = app.bootstrap_admin("root", "change me please")?;
    let admin = Principal { user_id: root.id, role: root.role };
    let project = app.create_project(&admin, "Greetings")?;
    let user = app.create_user(&admin, "amara", "annotator pass", Role::Annotator)?;
    app.assign_user_to_project(&admin, user.id, project.id)?;
    let lang = app.create_label(&admin, project.id, "language", SelectionType::Single)?;
    let hindi = app.create_label_value(&admin, lang.id, "hi")?;

    let out = app.ingest_datapoint(IngestRequest {
        api_key: project.api_key.clone().unwrap_or_default(),
        original_filename: "greeting.wav".into(),
        audio: encode_wav_pcm16(8_000, 1, &vec![0; 16_000]),
        reference_transcription: Some("नमस्ते".into()),
        assignees: vec!["amara".into()],
        ..IngestRequest::default()
    })?;
    let me = Principal { user_id: user.id, role: user.role };
    app.create_segment(
        &me,
        out.datapoint_id,
        SegmentDraft {
            start_ms: 150,
            end_ms: 1_850,
            transcription: "नमस्ते 😀".into(),
            selections: [(lang.id, [hindi.id].into())].into(),
        },
    )?;

    let first = app.export_project_json(&admin, project.id)?;
    let second = app.export_project_json(&admin, project.id)?;
    assert_eq!(first, second);
    print!("{first}");
    Ok(())
}
