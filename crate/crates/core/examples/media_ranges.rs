//! Serves stored audio in byte ranges, the way an audio element seeks.

use sonotate::audio::encode_wav_pcm16;
use sonotate::domain::Role;
use sonotate::ingest::IngestRequest;
use sonotate::{App, ErrorCode, Principal};

fn main() -> sonotate::Result<()> {
    let app = App::in_memory();
    let root = app.bootstrap_admin("root", "change me please")?;
    let admin = Principal { user_id: root.id, role: root.role };
    let project = app.create_project(&admin, "Media")?;
    let stranger = app.create_user(&admin, "stranger", "annotator pass", Role::Annotator)?;
    let stranger = Principal { user_id: stranger.id, role: stranger.role };

    let samples: Vec<i16> = (0..2026).map(|i| (i % 300) as i16).collect();
    let out = app.ingest_datapoint(IngestRequest {
        api_key: project.api_key.clone().unwrap_or_default(),
        original_filename: "short.wav".into(),
        audio: encode_wav_pcm16(8_000, 1, &samples),
        ..IngestRequest::default()
    })?;

    for range in [None, Some("bytes=0-1023"), Some("bytes=1024-"), Some("bytes=-96")] {
        let r = app.serve_audio(&admin, &out.stored_name, range)?;
        println!(
            "{:<14} -> {} {} bytes {}",
            range.unwrap_or("(none)"),
            r.status(),
            r.bytes.len(),
            r.content_range().unwrap_or_default()
        );
    }
    let err = app.serve_audio(&admin, &out.stored_name, Some("bytes=9000-")).unwrap_err();
    assert_eq!(err.code, ErrorCode::Range);
    println!("bytes=9000-    -> 416 Content-Range: {}", err.message);

    let hidden = app.serve_audio(&stranger, &out.stored_name, None).unwrap_err();
    let missing = app.serve_audio(&stranger, "ffffffffffffffffffffffffffffffff.wav", None).unwrap_err();
    println!("unassigned: {hidden}; missing: {missing}");
    Ok(())
}
