//! Admin-only management of users, projects, memberships, label schemas and
//! api keys. Every mutating call checks the admin requirement before it
//! touches the store, so a rejected call leaves no trace.

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::app::App;
use crate::auth::{Principal, Requirement};
use crate::domain::*;
use crate::error::{Error, ErrorCode, Result};
use crate::text::normalize_name;

/// A user as exposed over the API. There is deliberately no digest field.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserView {
    pub id: UserId,
    pub username: String,
    pub role: Role,
    pub created_at: DateTime<Utc>,
}

impl From<&User> for UserView {
    fn from(u: &User) -> Self {
        Self {
            id: u.id,
            username: u.username.clone(),
            role: u.role,
            created_at: u.created_at,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProjectView {
    pub id: ProjectId,
    pub name: String,
    pub created_at: DateTime<Utc>,
    /// Present only for admin callers.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub api_key: Option<String>,
}

impl ProjectView {
    pub fn for_principal(p: &Project, principal: &Principal) -> Self {
        Self {
            id: p.id,
            name: p.name.clone(),
            created_at: p.created_at,
            api_key: principal.is_admin().then(|| p.api_key.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MembershipView {
    pub user_id: UserId,
    pub project_id: ProjectId,
}

impl App {
    fn require_admin(&self, principal: &Principal) -> Result<()> {
        self.authorize(principal, Requirement::Admin)
    }

    pub fn create_user(&self, principal: &Principal, username: &str, password: &str, role: Role) -> Result<UserView> {
        self.require_admin(principal)?;
        let username = normalize_name("username", username)?;
        if self.store.read().user_by_name(&username).is_some() {
            return Err(Error::conflict(format!("username {username:?} already exists")));
        }
        let digest = self.new_digest(password)?;
        let now = self.clock.now();
        self.store.write(|t| {
            let user = User {
                id: UserId(t.next_id()),
                username,
                credential_digest: digest,
                role,
                created_at: now,
            };
            t.insert_user(user.clone())?;
            Ok(UserView::from(&user))
        })
    }

    pub fn list_users(&self, principal: &Principal) -> Result<Vec<UserView>> {
        self.require_admin(principal)?;
        Ok(self.store.read().users().map(UserView::from).collect())
    }

    pub fn update_user_role(&self, principal: &Principal, user_id: UserId, role: Role) -> Result<UserView> {
        self.require_admin(principal)?;
        self.store.write(|t| {
            let user = t.user(user_id).ok_or_else(|| Error::not_found("user"))?;
            if user.role == Role::Admin && role != Role::Admin && t.admin_count() <= 1 {
                return Err(Error::new(ErrorCode::LastAdmin, "cannot demote the last admin"));
            }
            t.set_user_role(user_id, role).map(|u| UserView::from(&u))
        })
    }

    /// Deletes a user without assignments. Their live sessions stop verifying.
    pub fn delete_user(&self, principal: &Principal, user_id: UserId) -> Result<()> {
        self.require_admin(principal)?;
        self.store.write(|t| {
            let user = t.user(user_id).ok_or_else(|| Error::not_found("user"))?;
            if user.role == Role::Admin && t.admin_count() <= 1 {
                return Err(Error::new(ErrorCode::LastAdmin, "cannot delete the last admin"));
            }
            t.delete_user(user_id).map(drop)
        })
    }

    pub fn create_project(&self, principal: &Principal, name: &str) -> Result<ProjectView> {
        self.require_admin(principal)?;
        let name = normalize_name("project name", name)?;
        let now = self.clock.now();
        let api_key = self.fresh_api_key();
        self.store.write(|t| {
            let project = Project {
                id: ProjectId(t.next_id()),
                name,
                api_key,
                created_at: now,
            };
            t.insert_project(project.clone())?;
            Ok(ProjectView::for_principal(&project, principal))
        })
    }

    pub fn rename_project(&self, principal: &Principal, project_id: ProjectId, name: &str) -> Result<ProjectView> {
        self.require_admin(principal)?;
        let name = normalize_name("project name", name)?;
        self.store
            .write(|t| t.rename_project(project_id, name))
            .map(|p| ProjectView::for_principal(&p, principal))
    }

    /// Deletes a project and everything it owns, including stored audio.
    pub fn delete_project(&self, principal: &Principal, project_id: ProjectId) -> Result<()> {
        self.require_admin(principal)?;
        let stored = self.store.write(|t| t.delete_project(project_id))?;
        for name in stored {
            if let Err(e) = self.blobs.delete(&name) {
                tracing::warn!(blob = %name, error = %e, "failed to remove audio of deleted project");
            }
        }
        Ok(())
    }

    /// 64 lowercase hex characters, 256 bits from the service CSPRNG.
    pub(crate) fn fresh_api_key(&self) -> String {
        self.random_hex(32)
    }

    pub fn regenerate_api_key(&self, principal: &Principal, project_id: ProjectId) -> Result<ProjectView> {
        self.require_admin(principal)?;
        let api_key = self.fresh_api_key();
        self.store
            .write(|t| t.set_api_key(project_id, api_key))
            .map(|p| ProjectView::for_principal(&p, principal))
    }

    /// Idempotent: assigning an existing member again changes nothing.
    pub fn assign_user_to_project(&self, principal: &Principal, user_id: UserId, project_id: ProjectId) -> Result<MembershipView> {
        self.require_admin(principal)?;
        self.store.write(|t| t.add_membership(user_id, project_id))?;
        Ok(MembershipView { user_id, project_id })
    }

    pub fn create_label(&self, principal: &Principal, project_id: ProjectId, name: &str, selection_type: SelectionType) -> Result<Label> {
        self.require_admin(principal)?;
        let name = normalize_name("label name", name)?;
        self.store.write(|t| {
            let label = Label {
                id: LabelId(t.next_id()),
                project_id,
                name,
                selection_type,
            };
            t.insert_label(label.clone())?;
            Ok(label)
        })
    }

    pub fn create_label_value(&self, principal: &Principal, label_id: LabelId, value: &str) -> Result<LabelValue> {
        self.require_admin(principal)?;
        let value = normalize_name("label value", value)?;
        self.store.write(|t| {
            let value = LabelValue {
                id: LabelValueId(t.next_id()),
                label_id,
                value,
            };
            t.insert_label_value(value.clone())?;
            Ok(value)
        })
    }

    /// Refused with `ERR_IN_USE` while any segment selects the label.
    pub fn delete_label(&self, principal: &Principal, label_id: LabelId) -> Result<()> {
        self.require_admin(principal)?;
        self.store.write(|t| t.delete_label(label_id)).map(drop)
    }

    pub fn delete_label_value(&self, principal: &Principal, value_id: LabelValueId) -> Result<()> {
        self.require_admin(principal)?;
        self.store.write(|t| t.delete_label_value(value_id)).map(drop)
    }

    /// The label schema of a project, readable by its members.
    pub fn project_schema(&self, principal: &Principal, project_id: ProjectId) -> Result<ProjectSchema> {
        self.authorize(principal, Requirement::MemberOf(project_id))?;
        let tables = self.store.read();
        if tables.project(project_id).is_none() {
            return Err(Error::not_found("project"));
        }
        Ok(tables.schema(project_id))
    }

    /// Adds an assignment for an existing datapoint. The user must already
    /// be a member of the datapoint's project.
    pub fn assign_datapoint(&self, principal: &Principal, datapoint_id: DataPointId, username: &str) -> Result<Assignment> {
        self.require_admin(principal)?;
        let username = crate::text::normalize_text(username.trim());
        let now = self.clock.now();
        self.store.write(|t| {
            let user = t.user_by_name(&username).ok_or_else(|| {
                Error::new(ErrorCode::UnknownAssignee, format!("unknown user {username:?}"))
            })?;
            let user_id = user.id;
            if t.datapoint(datapoint_id).is_none() {
                return Err(Error::not_found("datapoint"));
            }
            if let Some(existing) = t.assignment_for(datapoint_id, user_id) {
                return Ok(existing.clone());
            }
            let assignment = Assignment {
                id: AssignmentId(t.next_id()),
                datapoint_id,
                user_id,
                status: AssignmentStatus::Pending,
                marked_for_review: false,
                updated_at: now,
            };
            t.insert_assignment(assignment.clone())?;
            Ok(assignment)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::app::Settings;
    use crate::auth::PasswordParams;
    use std::collections::HashSet;

    fn setup() -> (App, Principal) {
        let app = App::builder()
            .settings(Settings { password: PasswordParams::insecure_fast(), ..Settings::default() })
            .seed(7)
            .build()
            .unwrap();
        let admin = app.bootstrap_admin("admin", "s3cret-pass").unwrap();
        (app, Principal { user_id: admin.id, role: Role::Admin })
    }

    fn annotator(app: &App, root: &Principal, name: &str) -> Principal {
        let u = app.create_user(root, name, "password-123", Role::Annotator).unwrap();
        Principal { user_id: u.id, role: Role::Annotator }
    }

    #[test]
    fn create_user_rules() {
        let (app, root) = setup();
        let t1 = app.create_user(&root, "t1", "password-123", Role::Annotator).unwrap();
        assert_eq!(t1.role, Role::Annotator);
        assert_eq!(app.create_user(&root, "t1", "password-123", Role::Annotator).unwrap_err().code, ErrorCode::Conflict);
        assert_eq!(app.create_user(&root, "t2", "short", Role::Annotator).unwrap_err().code, ErrorCode::WeakPassword);
        let ann = Principal { user_id: t1.id, role: Role::Annotator };
        assert_eq!(app.create_user(&ann, "t3", "password-123", Role::Annotator).unwrap_err().code, ErrorCode::Forbidden);
    }

    #[test]
    fn usernames_compare_after_nfc() {
        let (app, root) = setup();
        app.create_user(&root, "Jos\u{00e9}", "password-123", Role::Annotator).unwrap();
        let err = app.create_user(&root, "Jose\u{0301}", "password-123", Role::Annotator).unwrap_err();
        assert_eq!(err.code, ErrorCode::Conflict);
        // byte comparison, no case folding
        app.create_user(&root, "jos\u{00e9}", "password-123", Role::Annotator).unwrap();
    }

    #[test]
    fn role_updates_and_last_admin_guard() {
        let (app, root) = setup();
        let t1 = annotator(&app, &root, "t1");
        assert_eq!(app.update_user_role(&root, t1.user_id, Role::Admin).unwrap().role, Role::Admin);
        assert_eq!(app.update_user_role(&root, UserId(999), Role::Admin).unwrap_err().code, ErrorCode::NotFound);
        // two admins now: root may step down, the remaining one may not
        app.update_user_role(&root, root.user_id, Role::Annotator).unwrap();
        let t1_admin = Principal { user_id: t1.user_id, role: Role::Admin };
        assert_eq!(app.update_user_role(&t1_admin, t1.user_id, Role::Annotator).unwrap_err().code, ErrorCode::LastAdmin);
        assert_eq!(app.delete_user(&t1_admin, t1.user_id).unwrap_err().code, ErrorCode::LastAdmin);
    }

    #[test]
    fn sole_admin_cannot_self_demote() {
        let (app, root) = setup();
        assert_eq!(app.update_user_role(&root, root.user_id, Role::Annotator).unwrap_err().code, ErrorCode::LastAdmin);
    }

    #[test]
    fn api_keys_are_64_hex_and_distinct() {
        let (app, root) = setup();
        let a = app.create_project(&root, "SOPI-L2").unwrap();
        let b = app.create_project(&root, "Other").unwrap();
        let ka = a.api_key.unwrap();
        assert_eq!(ka.len(), 64);
        assert!(ka.bytes().all(|c| c.is_ascii_hexdigit() && !c.is_ascii_uppercase()));
        assert_ne!(Some(ka), b.api_key);
        assert_eq!(app.create_project(&root, "SOPI-L2").unwrap_err().code, ErrorCode::Conflict);
    }

    #[test]
    fn ten_thousand_api_keys_do_not_collide() {
        let (app, _) = setup();
        let keys: HashSet<String> = (0..10_000).map(|_| app.fresh_api_key()).collect();
        assert_eq!(keys.len(), 10_000);
    }

    #[test]
    fn rotation_replaces_key() {
        let (app, root) = setup();
        let p = app.create_project(&root, "P").unwrap();
        let rotated = app.regenerate_api_key(&root, p.id).unwrap();
        assert_ne!(rotated.api_key, p.api_key);
        assert_eq!(app.regenerate_api_key(&root, ProjectId(999)).unwrap_err().code, ErrorCode::NotFound);
        let t = app.store.read();
        assert!(t.project_by_api_key(p.api_key.as_deref().unwrap()).is_none());
        assert!(t.project_by_api_key(rotated.api_key.as_deref().unwrap()).is_some());
    }

    #[test]
    fn memberships_are_idempotent() {
        let (app, root) = setup();
        let u = annotator(&app, &root, "u");
        let p = app.create_project(&root, "P").unwrap();
        app.assign_user_to_project(&root, u.user_id, p.id).unwrap();
        app.assign_user_to_project(&root, u.user_id, p.id).unwrap();
        let listed = app.list_projects(&u).unwrap();
        assert_eq!(listed.len(), 1);
        assert_eq!(listed[0].id, p.id);
        assert!(listed[0].api_key.is_none());
        assert_eq!(app.assign_user_to_project(&root, u.user_id, ProjectId(999)).unwrap_err().code, ErrorCode::NotFound);
    }

    #[test]
    fn label_names_are_project_scoped() {
        let (app, root) = setup();
        let p = app.create_project(&root, "P").unwrap();
        let q = app.create_project(&root, "Q").unwrap();
        let spk = app.create_label(&root, p.id, "speaker", SelectionType::Single).unwrap();
        assert_eq!(spk.selection_type, SelectionType::Single);
        app.create_label(&root, q.id, "speaker", SelectionType::Multi).unwrap();
        assert_eq!(app.create_label(&root, p.id, "speaker", SelectionType::Multi).unwrap_err().code, ErrorCode::Conflict);
        assert_eq!(app.create_label(&root, ProjectId(999), "x", SelectionType::Multi).unwrap_err().code, ErrorCode::NotFound);
    }

    #[test]
    fn label_values_are_label_scoped() {
        let (app, root) = setup();
        let p = app.create_project(&root, "P").unwrap();
        let spk = app.create_label(&root, p.id, "speaker", SelectionType::Single).unwrap();
        let other = app.create_label(&root, p.id, "other", SelectionType::Single).unwrap();
        app.create_label_value(&root, spk.id, "S1").unwrap();
        assert_eq!(app.create_label_value(&root, spk.id, "S1").unwrap_err().code, ErrorCode::Conflict);
        app.create_label_value(&root, other.id, "S1").unwrap();
        assert_eq!(app.create_label_value(&root, LabelId(999), "S1").unwrap_err().code, ErrorCode::NotFound);
    }

    #[test]
    fn members_see_the_schema_admins_built() {
        let (app, root) = setup();
        let u = annotator(&app, &root, "u");
        let outsider = annotator(&app, &root, "o");
        let p = app.create_project(&root, "P").unwrap();
        app.assign_user_to_project(&root, u.user_id, p.id).unwrap();
        let spk = app.create_label(&root, p.id, "speaker", SelectionType::Single).unwrap();
        let s1 = app.create_label_value(&root, spk.id, "S1").unwrap();
        let emo = app.create_label(&root, p.id, "emotion", SelectionType::Multi).unwrap();
        let happy = app.create_label_value(&root, emo.id, "happy").unwrap();
        let schema = app.project_schema(&u, p.id).unwrap();
        assert_eq!(
            schema,
            ProjectSchema {
                labels: vec![
                    LabelSchema {
                        id: spk.id,
                        name: "speaker".into(),
                        selection_type: SelectionType::Single,
                        values: vec![LabelValueSchema { id: s1.id, value: "S1".into() }],
                    },
                    LabelSchema {
                        id: emo.id,
                        name: "emotion".into(),
                        selection_type: SelectionType::Multi,
                        values: vec![LabelValueSchema { id: happy.id, value: "happy".into() }],
                    },
                ]
            }
        );
        assert_eq!(app.project_schema(&outsider, p.id).unwrap_err().code, ErrorCode::Forbidden);
    }

    #[test]
    fn non_admin_calls_mutate_nothing() {
        let (app, root) = setup();
        let u = annotator(&app, &root, "u");
        let p = app.create_project(&root, "P").unwrap();
        let l = app.create_label(&root, p.id, "speaker", SelectionType::Single).unwrap();
        let before = app.state_digest().unwrap();
        let results = [
            app.create_user(&u, "x", "password-123", Role::Admin).map(drop),
            app.update_user_role(&u, u.user_id, Role::Admin).map(drop),
            app.delete_user(&u, root.user_id),
            app.create_project(&u, "Q").map(drop),
            app.rename_project(&u, p.id, "Q").map(drop),
            app.delete_project(&u, p.id),
            app.regenerate_api_key(&u, p.id).map(drop),
            app.assign_user_to_project(&u, u.user_id, p.id).map(drop),
            app.create_label(&u, p.id, "x", SelectionType::Multi).map(drop),
            app.create_label_value(&u, l.id, "v").map(drop),
            app.delete_label(&u, l.id),
            app.list_users(&u).map(drop),
        ];
        for r in results {
            assert_eq!(r.unwrap_err().code, ErrorCode::Forbidden);
        }
        assert_eq!(app.state_digest().unwrap(), before);
    }

    #[test]
    fn rename_and_delete_project() {
        let (app, root) = setup();
        let p = app.create_project(&root, "P").unwrap();
        app.create_project(&root, "Q").unwrap();
        assert_eq!(app.rename_project(&root, p.id, "Q").unwrap_err().code, ErrorCode::Conflict);
        assert_eq!(app.rename_project(&root, p.id, "P2").unwrap().name, "P2");
        app.delete_project(&root, p.id).unwrap();
        assert_eq!(app.delete_project(&root, p.id).unwrap_err().code, ErrorCode::NotFound);
    }
}
