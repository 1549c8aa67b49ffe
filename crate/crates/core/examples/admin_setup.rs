//! Bootstraps an admin, then creates annotators, a project with a
//! single-choice and a multi-choice label, and rotates the project key.

use sonotate::domain::{Role, SelectionType};
use sonotate::{App, Principal};

fn main() -> sonotate::Result<()> {
    let app = App::in_memory();
    let root = app.bootstrap_admin("root", "change me please")?;
    let admin = Principal { user_id: root.id, role: root.role };

    let project = app.create_project(&admin, "Interviews")?;
    for name in ["amara", "bo"] {
        let user = app.create_user(&admin, name, "annotator pass", Role::Annotator)?;
        app.assign_user_to_project(&admin, user.id, project.id)?;
    }

    let speaker = app.create_label(&admin, project.id, "speaker", SelectionType::Single)?;
    for v in ["interviewer", "guest"] {
        app.create_label_value(&admin, speaker.id, v)?;
    }
    let noise = app.create_label(&admin, project.id, "noise", SelectionType::Multi)?;
    for v in ["music", "traffic", "crosstalk"] {
        app.create_label_value(&admin, noise.id, v)?;
    }

    let schema = app.project_schema(&admin, project.id)?;
    for label in &schema.labels {
        let values: Vec<&str> = label.values.iter().map(|v| v.value.as_str()).collect();
        println!("{} ({:?}): {}", label.name, label.selection_type, values.join(", "));
    }

    let old = project.api_key.unwrap_or_default();
    let rotated = app.regenerate_api_key(&admin, project.id)?;
    println!("api key rotated: {}... -> {}...", &old[..8], &rotated.api_key.unwrap_or_default()[..8]);
    for user in app.list_users(&admin)? {
        println!("user {} {:?}", user.username, user.role);
    }
    Ok(())
}
