//! Runs every example binary that `cargo test` builds alongside this target.

use std::path::PathBuf;
use std::process::Command;

const EXAMPLES: [&str; 8] = [
    "admin_setup",
    "machine_ingest",
    "annotate",
    "media_ranges",
    "export",
    "wer_report",
    "session_expiry",
    "rest_api",
];

fn examples_dir() -> PathBuf {
    // target/<profile>/deps/<this test> -> target/<profile>/examples
    let exe = std::env::current_exe().unwrap();
    exe.parent().and_then(|deps| deps.parent()).unwrap().join("examples")
}

#[test]
fn every_example_runs_to_completion() {
    let dir = examples_dir();
    for name in EXAMPLES {
        let bin = dir.join(format!("{name}{}", std::env::consts::EXE_SUFFIX));
        let output = if bin.exists() {
            Command::new(&bin).output().unwrap()
        } else {
            Command::new(env!("CARGO"))
                .args(["run", "-q", "-p", "sonotate", "--example", name])
                .output()
                .unwrap()
        };
        assert!(
            output.status.success(),
            "example {name} failed:\n{}",
            String::from_utf8_lossy(&output.stderr)
        );
        assert!(!output.stdout.is_empty(), "example {name} printed nothing");
    }
}

#[test]
fn every_example_is_listed() {
    let src = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("examples");
    let mut found: Vec<String> = std::fs::read_dir(src)
        .unwrap()
        .filter_map(|e| e.ok()?.path().file_stem()?.to_str().map(str::to_owned))
        .collect();
    found.sort();
    let mut listed: Vec<String> = EXAMPLES.iter().map(|s| s.to_string()).collect();
    listed.sort();
    assert_eq!(found, listed);
}
