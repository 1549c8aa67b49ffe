//! Splits datapoints between two annotators with a 20% overlap, lets both
//! transcribe the shared ones, and prints the word error rate report.

use sonotate::audio::encode_wav_pcm16;
use sonotate::domain::{Role, SegmentDraft};
use sonotate::ingest::IngestRequest;
use sonotate::qa::OverlapRequest;
use sonotate::{App, Principal};

fn main() -> sonotate::Result<()> {
    let app = App::in_memory();
    let root = app.bootstrap_admin("root", "change me please")?;
    let admin = Principal { user_id: root.id, role: root.role };
    let project = app.create_project(&admin, "Agreement")?;
    let mut people = Vec::new();
    for name in ["amara", "bo"] {
        let u = app.create_user(&admin, name, "annotator pass", Role::Annotator)?;
        app.assign_user_to_project(&admin, u.id, project.id)?;
        people.push(Principal { user_id: u.id, role: u.role });
    }
    for i in 0..10 {
        app.ingest_datapoint(IngestRequest {
            api_key: project.api_key.clone().unwrap_or_default(),
            original_filename: format!("utt{i:02}.wav"),
            audio: encode_wav_pcm16(8_000, 1, &vec![0; 8_000]),
            ..IngestRequest::default()
        })?;
    }

    let plan = app.plan_project_overlap(
        &admin,
        project.id,
        OverlapRequest {
            annotators: ["amara".into(), "bo".into()],
            overlap_fraction: 0.2,
            seed: 42,
            datapoint_ids: None,
            apply: true,
        },
    )?;
    let show = |ids: &[sonotate::domain::DataPointId]| ids.iter().map(|id| id.to_string()).collect::<Vec<_>>().join(" ");
    println!("a only: {}", show(&plan.plan.a_only));
    println!("b only: {}", show(&plan.plan.b_only));
    println!("shared: {}", show(&plan.plan.shared));

    let texts = [("the cat sat on the mat", "the cat sat mat"), ("good morning", "Good  morning")];
    for (dp, (a, b)) in plan.plan.shared.iter().zip(texts) {
        for (who, text) in people.iter().zip([a, b]) {
            let draft = SegmentDraft { start_ms: 0, end_ms: 900, transcription: text.into(), ..Default::default() };
            app.create_segment(who, *dp, draft)?;
        }
    }

    let report = app.qa_report(&admin, project.id, "amara", "bo", None)?;
    for row in &report.rows {
        println!("{:<10} wer {:?} flagged {}", row.original_filename, row.wer, row.flagged);
    }
    Ok(())
}
