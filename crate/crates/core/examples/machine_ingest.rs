//! Uploads a generated WAV with the project api key, a reference
//! transcription and one pre-annotation, assigning it to two annotators.

use sonotate::audio::encode_wav_pcm16;
use sonotate::domain::{Role, SelectionType};
use sonotate::export::ExportSegment;
use sonotate::ingest::IngestRequest;
use sonotate::{App, Principal};

fn main() -> sonotate::Result<()> {
    let app = App::in_memory();
    let root = app.bootstrap_admin("root", "change me please")?;
    let admin = Principal { user_id: root.id, role: root.role };
    let project = app.create_project(&admin, "Field recordings")?;
    for name in ["amara", "bo"] {
        let user = app.create_user(&admin, name, "annotator pass", Role::Annotator)?;
        app.assign_user_to_project(&admin, user.id, project.id)?;
    }
    let speaker = app.create_label(&admin, project.id, "speaker", SelectionType::Single)?;
    app.create_label_value(&admin, speaker.id, "guest")?;

    // two seconds of a 440 Hz tone, 16 kHz mono
    let samples: Vec<i16> = (0..32_000)
        .map(|i| ((i as f32 * 440.0 * std::f32::consts::TAU / 16_000.0).sin() * 8_000.0) as i16)
        .collect();
    let outcome = app.ingest_datapoint(IngestRequest {
        api_key: project.api_key.clone().unwrap_or_default(),
        original_filename: "uploads/tone.wav".into(),
        audio: encode_wav_pcm16(16_000, 1, &samples),
        reference_transcription: Some("a steady tone".into()),
        pre_annotations: vec![ExportSegment {
            start_ms: 0,
            end_ms: 1_500,
            transcription: "machine guess".into(),
            labels: [("speaker".to_string(), vec!["guest".to_string()])].into(),
        }],
        assignees: vec!["amara".into(), "bo".into()],
        marked_for_review: false,
    })?;
    println!("datapoint {} stored as {}", outcome.datapoint_id, outcome.stored_name);
    println!("format {:?}, {} ms, {} assignments", outcome.format, outcome.duration_ms, outcome.assignments.len());

    let bad = app.ingest_datapoint(IngestRequest {
        api_key: "0".repeat(64),
        original_filename: "x.wav".into(),
        audio: encode_wav_pcm16(16_000, 1, &samples),
        ..IngestRequest::default()
    });
    println!("wrong key: {}", bad.unwrap_err());
    Ok(())
}
