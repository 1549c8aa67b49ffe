//! Transactional entity store.
//!
//! Tables live in persistent (structurally shared) maps, so a transaction
//! works on a cheap copy of the current state and is published only if the
//! closure succeeds and the snapshot was persisted. Writers are serialized by
//! one mutex; readers take an `Arc` of the last committed state and never
//! block writers for longer than a pointer swap.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use im::{OrdMap, OrdSet};
use parking_lot::{Mutex, RwLock};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::domain::*;
use crate::error::{Error, ErrorCode, Result};
use crate::faults::{FaultInjector, FaultPoint};

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Tables {
    next_id: u64,
    users: OrdMap<UserId, User>,
    projects: OrdMap<ProjectId, Project>,
    memberships: OrdSet<(UserId, ProjectId)>,
    labels: OrdMap<LabelId, Label>,
    label_values: OrdMap<LabelValueId, LabelValue>,
    datapoints: OrdMap<DataPointId, DataPoint>,
    assignments: OrdMap<AssignmentId, Assignment>,
    segments: OrdMap<SegmentId, Segment>,
    #[serde(skip)]
    idx: Indexes,
}

/// Secondary indexes, rebuilt from the primary tables after loading.
#[derive(Debug, Clone, Default)]
struct Indexes {
    usernames: OrdMap<String, UserId>,
    project_names: OrdMap<String, ProjectId>,
    api_keys: OrdMap<String, ProjectId>,
    stored_names: OrdMap<String, DataPointId>,
    labels_by_project: OrdMap<ProjectId, OrdSet<LabelId>>,
    values_by_label: OrdMap<LabelId, OrdSet<LabelValueId>>,
    datapoints_by_project: OrdMap<ProjectId, OrdSet<DataPointId>>,
    assignment_by_pair: OrdMap<(DataPointId, UserId), AssignmentId>,
    assignments_by_datapoint: OrdMap<DataPointId, OrdSet<AssignmentId>>,
    assignments_by_user: OrdMap<UserId, OrdSet<AssignmentId>>,
    segments_by_assignment: OrdMap<AssignmentId, OrdSet<SegmentId>>,
}

fn add_to<K: Ord + Clone, V: Ord + Clone>(map: &mut OrdMap<K, OrdSet<V>>, key: K, value: V) {
    map.entry(key).or_default().insert(value);
}

fn remove_from<K: Ord + Clone, V: Ord + Clone>(map: &mut OrdMap<K, OrdSet<V>>, key: &K, value: &V) {
    if let Some(set) = map.get_mut(key) {
        set.remove(value);
        if set.is_empty() {
            map.remove(key);
        }
    }
}

fn members<K: Ord + Clone, V: Ord + Clone + Copy>(map: &OrdMap<K, OrdSet<V>>, key: &K) -> Vec<V> {
    map.get(key).map(|s| s.iter().copied().collect()).unwrap_or_default()
}

impl Tables {
    fn reindex(&mut self) {
        let mut idx = Indexes::default();
        for u in self.users.values() {
            idx.usernames.insert(u.username.clone(), u.id);
        }
        for p in self.projects.values() {
            idx.project_names.insert(p.name.clone(), p.id);
            idx.api_keys.insert(p.api_key.clone(), p.id);
        }
        for l in self.labels.values() {
            add_to(&mut idx.labels_by_project, l.project_id, l.id);
        }
        for v in self.label_values.values() {
            add_to(&mut idx.values_by_label, v.label_id, v.id);
        }
        for d in self.datapoints.values() {
            idx.stored_names.insert(d.stored_name.clone(), d.id);
            add_to(&mut idx.datapoints_by_project, d.project_id, d.id);
        }
        for a in self.assignments.values() {
            idx.assignment_by_pair.insert((a.datapoint_id, a.user_id), a.id);
            add_to(&mut idx.assignments_by_datapoint, a.datapoint_id, a.id);
            add_to(&mut idx.assignments_by_user, a.user_id, a.id);
        }
        for s in self.segments.values() {
            add_to(&mut idx.segments_by_assignment, s.assignment_id, s.id);
        }
        self.idx = idx;
    }

    pub fn next_id(&mut self) -> u64 {
        self.next_id += 1;
        self.next_id
    }

    // ---- users ----

    pub fn user(&self, id: UserId) -> Option<&User> {
        self.users.get(&id)
    }

    pub fn user_by_name(&self, username: &str) -> Option<&User> {
        self.idx.usernames.get(username).and_then(|id| self.users.get(id))
    }

    pub fn users(&self) -> impl Iterator<Item = &User> {
        self.users.values()
    }

    pub fn admin_count(&self) -> usize {
        self.users.values().filter(|u| u.role == Role::Admin).count()
    }

    pub fn insert_user(&mut self, user: User) -> Result<()> {
        if self.idx.usernames.contains_key(&user.username) {
            return Err(Error::conflict(format!("username {:?} already exists", user.username)));
        }
        self.idx.usernames.insert(user.username.clone(), user.id);
        self.users.insert(user.id, user);
        Ok(())
    }

    pub fn set_user_role(&mut self, id: UserId, role: Role) -> Result<User> {
        let user = self.users.get_mut(&id).ok_or_else(|| Error::not_found("user"))?;
        user.role = role;
        Ok(user.clone())
    }

    /// Removes a user and their memberships. Fails while assignments reference them.
    pub fn delete_user(&mut self, id: UserId) -> Result<User> {
        if !self.users.contains_key(&id) {
            return Err(Error::not_found("user"));
        }
        if self.idx.assignments_by_user.contains_key(&id) {
            return Err(Error::new(ErrorCode::InUse, "user still holds assignments"));
        }
        let user = self.users.remove(&id).expect("checked above");
        self.idx.usernames.remove(&user.username);
        self.memberships = self.memberships.iter().filter(|(u, _)| *u != id).cloned().collect();
        Ok(user)
    }

    // ---- projects & memberships ----

    pub fn project(&self, id: ProjectId) -> Option<&Project> {
        self.projects.get(&id)
    }

    pub fn project_by_api_key(&self, key: &str) -> Option<&Project> {
        self.idx.api_keys.get(key).and_then(|id| self.projects.get(id))
    }

    pub fn projects(&self) -> impl Iterator<Item = &Project> {
        self.projects.values()
    }

    pub fn insert_project(&mut self, project: Project) -> Result<()> {
        if self.idx.project_names.contains_key(&project.name) {
            return Err(Error::conflict(format!("project {:?} already exists", project.name)));
        }
        if self.idx.api_keys.contains_key(&project.api_key) {
            return Err(Error::conflict("api key collision"));
        }
        self.idx.project_names.insert(project.name.clone(), project.id);
        self.idx.api_keys.insert(project.api_key.clone(), project.id);
        self.projects.insert(project.id, project);
        Ok(())
    }

    pub fn rename_project(&mut self, id: ProjectId, name: String) -> Result<Project> {
        let current = self.projects.get(&id).ok_or_else(|| Error::not_found("project"))?;
        if current.name == name {
            return Ok(current.clone());
        }
        if self.idx.project_names.contains_key(&name) {
            return Err(Error::conflict(format!("project {name:?} already exists")));
        }
        let old = current.name.clone();
        self.idx.project_names.remove(&old);
        self.idx.project_names.insert(name.clone(), id);
        let project = self.projects.get_mut(&id).expect("checked above");
        project.name = name;
        Ok(project.clone())
    }

    pub fn set_api_key(&mut self, id: ProjectId, api_key: String) -> Result<Project> {
        if self.idx.api_keys.contains_key(&api_key) {
            return Err(Error::conflict("api key collision"));
        }
        let project = self.projects.get_mut(&id).ok_or_else(|| Error::not_found("project"))?;
        let old = std::mem::replace(&mut project.api_key, api_key.clone());
        let project = project.clone();
        self.idx.api_keys.remove(&old);
        self.idx.api_keys.insert(api_key, id);
        Ok(project)
    }

    /// Deletes a project with everything it owns. Returns the stored names of
    /// the removed datapoints so their blobs can be released.
    pub fn delete_project(&mut self, id: ProjectId) -> Result<Vec<String>> {
        let project = self.projects.remove(&id).ok_or_else(|| Error::not_found("project"))?;
        self.idx.project_names.remove(&project.name);
        self.idx.api_keys.remove(&project.api_key);
        self.memberships = self.memberships.iter().filter(|(_, p)| *p != id).cloned().collect();

        let mut stored = Vec::new();
        for dp in members(&self.idx.datapoints_by_project, &id) {
            stored.push(self.remove_datapoint(dp));
        }
        for label in members(&self.idx.labels_by_project, &id) {
            self.remove_label(label);
        }
        Ok(stored)
    }

    pub fn add_membership(&mut self, user: UserId, project: ProjectId) -> Result<()> {
        if !self.users.contains_key(&user) {
            return Err(Error::not_found("user"));
        }
        if !self.projects.contains_key(&project) {
            return Err(Error::not_found("project"));
        }
        self.memberships.insert((user, project));
        Ok(())
    }

    pub fn is_member(&self, user: UserId, project: ProjectId) -> bool {
        self.memberships.contains(&(user, project))
    }

    pub fn projects_of(&self, user: UserId) -> Vec<ProjectId> {
        self.memberships
            .iter()
            .filter(|(u, _)| *u == user)
            .map(|(_, p)| *p)
            .collect()
    }

    // ---- labels ----

    pub fn label(&self, id: LabelId) -> Option<&Label> {
        self.labels.get(&id)
    }

    pub fn label_value(&self, id: LabelValueId) -> Option<&LabelValue> {
        self.label_values.get(&id)
    }

    pub fn labels_of(&self, project: ProjectId) -> Vec<&Label> {
        members(&self.idx.labels_by_project, &project)
            .into_iter()
            .filter_map(|id| self.labels.get(&id))
            .collect()
    }

    pub fn values_of(&self, label: LabelId) -> Vec<&LabelValue> {
        members(&self.idx.values_by_label, &label)
            .into_iter()
            .filter_map(|id| self.label_values.get(&id))
            .collect()
    }

    pub fn insert_label(&mut self, label: Label) -> Result<()> {
        if !self.projects.contains_key(&label.project_id) {
            return Err(Error::not_found("project"));
        }
        if self.labels_of(label.project_id).iter().any(|l| l.name == label.name) {
            return Err(Error::conflict(format!("label {:?} already exists in project", label.name)));
        }
        add_to(&mut self.idx.labels_by_project, label.project_id, label.id);
        self.labels.insert(label.id, label);
        Ok(())
    }

    pub fn insert_label_value(&mut self, value: LabelValue) -> Result<()> {
        if !self.labels.contains_key(&value.label_id) {
            return Err(Error::not_found("label"));
        }
        if self.values_of(value.label_id).iter().any(|v| v.value == value.value) {
            return Err(Error::conflict(format!("value {:?} already exists for label", value.value)));
        }
        add_to(&mut self.idx.values_by_label, value.label_id, value.id);
        self.label_values.insert(value.id, value);
        Ok(())
    }

    fn segments_of_project(&self, project: ProjectId) -> impl Iterator<Item = &Segment> {
        members(&self.idx.datapoints_by_project, &project)
            .into_iter()
            .flat_map(|dp| members(&self.idx.assignments_by_datapoint, &dp))
            .flat_map(|a| members(&self.idx.segments_by_assignment, &a))
            .filter_map(|s| self.segments.get(&s))
    }

    pub fn delete_label(&mut self, id: LabelId) -> Result<Label> {
        let label = self.labels.get(&id).ok_or_else(|| Error::not_found("label"))?;
        if self.segments_of_project(label.project_id).any(|s| s.selections.contains_key(&id)) {
            return Err(Error::new(ErrorCode::InUse, "label is referenced by segments"));
        }
        Ok(self.remove_label(id))
    }

    pub fn delete_label_value(&mut self, id: LabelValueId) -> Result<LabelValue> {
        let value = self.label_values.get(&id).ok_or_else(|| Error::not_found("label value"))?;
        let label = &self.labels[&value.label_id];
        let in_use = self
            .segments_of_project(label.project_id)
            .any(|s| s.selections.get(&label.id).is_some_and(|vs| vs.contains(&id)));
        if in_use {
            return Err(Error::new(ErrorCode::InUse, "label value is referenced by segments"));
        }
        let value = self.label_values.remove(&id).expect("checked above");
        remove_from(&mut self.idx.values_by_label, &value.label_id, &id);
        Ok(value)
    }

    fn remove_label(&mut self, id: LabelId) -> Label {
        let label = self.labels.remove(&id).expect("label exists");
        for v in members(&self.idx.values_by_label, &id) {
            self.label_values.remove(&v);
        }
        self.idx.values_by_label.remove(&id);
        remove_from(&mut self.idx.labels_by_project, &label.project_id, &id);
        label
    }

    /// The project's label schema, labels and values in creation order.
    pub fn schema(&self, project: ProjectId) -> ProjectSchema {
        ProjectSchema {
            labels: self
                .labels_of(project)
                .into_iter()
                .map(|l| LabelSchema {
                    id: l.id,
                    name: l.name.clone(),
                    selection_type: l.selection_type,
                    values: self
                        .values_of(l.id)
                        .into_iter()
                        .map(|v| LabelValueSchema { id: v.id, value: v.value.clone() })
                        .collect(),
                })
                .collect(),
        }
    }

    // ---- datapoints ----

    pub fn datapoint(&self, id: DataPointId) -> Option<&DataPoint> {
        self.datapoints.get(&id)
    }

    pub fn datapoint_by_stored_name(&self, stored_name: &str) -> Option<&DataPoint> {
        self.idx.stored_names.get(stored_name).and_then(|id| self.datapoints.get(id))
    }

    pub fn stored_name_exists(&self, stored_name: &str) -> bool {
        self.idx.stored_names.contains_key(stored_name)
    }

    /// Datapoints of a project ordered by `(created_at, id)`.
    pub fn datapoints_of(&self, project: ProjectId) -> Vec<&DataPoint> {
        let mut dps: Vec<_> = members(&self.idx.datapoints_by_project, &project)
            .into_iter()
            .filter_map(|id| self.datapoints.get(&id))
            .collect();
        dps.sort_by_key(|d| (d.created_at, d.id));
        dps
    }

    pub fn stored_names(&self) -> impl Iterator<Item = &str> {
        self.idx.stored_names.keys().map(String::as_str)
    }

    pub fn insert_datapoint(&mut self, dp: DataPoint) -> Result<()> {
        if !self.projects.contains_key(&dp.project_id) {
            return Err(Error::not_found("project"));
        }
        if self.idx.stored_names.contains_key(&dp.stored_name) {
            return Err(Error::conflict("stored name collision"));
        }
        self.idx.stored_names.insert(dp.stored_name.clone(), dp.id);
        add_to(&mut self.idx.datapoints_by_project, dp.project_id, dp.id);
        self.datapoints.insert(dp.id, dp);
        Ok(())
    }

    fn remove_datapoint(&mut self, id: DataPointId) -> String {
        let dp = self.datapoints.remove(&id).expect("datapoint exists");
        for a in members(&self.idx.assignments_by_datapoint, &id) {
            self.remove_assignment(a);
        }
        self.idx.stored_names.remove(&dp.stored_name);
        remove_from(&mut self.idx.datapoints_by_project, &dp.project_id, &id);
        dp.stored_name
    }

    // ---- assignments ----

    pub fn assignment(&self, id: AssignmentId) -> Option<&Assignment> {
        self.assignments.get(&id)
    }

    pub fn assignment_for(&self, datapoint: DataPointId, user: UserId) -> Option<&Assignment> {
        self.idx
            .assignment_by_pair
            .get(&(datapoint, user))
            .and_then(|id| self.assignments.get(id))
    }

    pub fn assignments_of_datapoint(&self, datapoint: DataPointId) -> Vec<&Assignment> {
        members(&self.idx.assignments_by_datapoint, &datapoint)
            .into_iter()
            .filter_map(|id| self.assignments.get(&id))
            .collect()
    }

    pub fn assignments_of_user(&self, user: UserId) -> Vec<&Assignment> {
        members(&self.idx.assignments_by_user, &user)
            .into_iter()
            .filter_map(|id| self.assignments.get(&id))
            .collect()
    }

    pub fn insert_assignment(&mut self, a: Assignment) -> Result<()> {
        let dp = self.datapoints.get(&a.datapoint_id).ok_or_else(|| Error::not_found("datapoint"))?;
        if !self.users.contains_key(&a.user_id) {
            return Err(Error::not_found("user"));
        }
        if !self.is_member(a.user_id, dp.project_id) {
            return Err(Error::new(ErrorCode::NotMember, "assignee is not a project member"));
        }
        if self.idx.assignment_by_pair.contains_key(&(a.datapoint_id, a.user_id)) {
            return Err(Error::conflict("user already assigned to this datapoint"));
        }
        self.idx.assignment_by_pair.insert((a.datapoint_id, a.user_id), a.id);
        add_to(&mut self.idx.assignments_by_datapoint, a.datapoint_id, a.id);
        add_to(&mut self.idx.assignments_by_user, a.user_id, a.id);
        self.assignments.insert(a.id, a);
        Ok(())
    }

    pub fn update_assignment(&mut self, a: Assignment) -> Result<()> {
        match self.assignments.get(&a.id) {
            Some(cur) if cur.datapoint_id == a.datapoint_id && cur.user_id == a.user_id => {
                self.assignments.insert(a.id, a);
                Ok(())
            }
            Some(_) => Err(Error::internal("assignment owner cannot change")),
            None => Err(Error::not_found("assignment")),
        }
    }

    fn remove_assignment(&mut self, id: AssignmentId) {
        let a = self.assignments.remove(&id).expect("assignment exists");
        for s in members(&self.idx.segments_by_assignment, &id) {
            self.segments.remove(&s);
        }
        self.idx.segments_by_assignment.remove(&id);
        self.idx.assignment_by_pair.remove(&(a.datapoint_id, a.user_id));
        remove_from(&mut self.idx.assignments_by_datapoint, &a.datapoint_id, &id);
        remove_from(&mut self.idx.assignments_by_user, &a.user_id, &id);
    }

    // ---- segments ----

    pub fn segment(&self, id: SegmentId) -> Option<&Segment> {
        self.segments.get(&id)
    }

    /// Segments of an assignment ordered by `(start_ms, end_ms, id)`.
    pub fn segments_of(&self, assignment: AssignmentId) -> Vec<&Segment> {
        let mut segs: Vec<_> = members(&self.idx.segments_by_assignment, &assignment)
            .into_iter()
            .filter_map(|id| self.segments.get(&id))
            .collect();
        segs.sort_by_key(|s| (s.start_ms, s.end_ms, s.id));
        segs
    }

    pub fn insert_segment(&mut self, segment: Segment) -> Result<()> {
        if !self.assignments.contains_key(&segment.assignment_id) {
            return Err(Error::not_found("assignment"));
        }
        add_to(&mut self.idx.segments_by_assignment, segment.assignment_id, segment.id);
        self.segments.insert(segment.id, segment);
        Ok(())
    }

    pub fn update_segment(&mut self, segment: Segment) -> Result<()> {
        match self.segments.get(&segment.id) {
            Some(cur) if cur.assignment_id == segment.assignment_id => {
                self.segments.insert(segment.id, segment);
                Ok(())
            }
            Some(_) => Err(Error::internal("segment owner cannot change")),
            None => Err(Error::not_found("segment")),
        }
    }

    pub fn delete_segment(&mut self, id: SegmentId) -> Result<Segment> {
        let seg = self.segments.remove(&id).ok_or_else(|| Error::not_found("segment"))?;
        remove_from(&mut self.idx.segments_by_assignment, &seg.assignment_id, &id);
        Ok(seg)
    }
}

pub struct Store {
    current: RwLock<Arc<Tables>>,
    writer: Mutex<()>,
    snapshot_path: Option<PathBuf>,
    faults: Arc<FaultInjector>,
}

impl Store {
    pub fn in_memory(faults: Arc<FaultInjector>) -> Self {
        Self {
            current: RwLock::new(Arc::new(Tables::default())),
            writer: Mutex::new(()),
            snapshot_path: None,
            faults,
        }
    }

    /// Opens (or creates) a store persisted as a JSON snapshot at `path`.
    pub fn open(path: impl AsRef<Path>, faults: Arc<FaultInjector>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let mut tables = match fs::read(&path) {
            Ok(bytes) => serde_json::from_slice::<Tables>(&bytes)
                .map_err(|e| Error::internal(format!("corrupt store snapshot {}: {e}", path.display())))?,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Tables::default(),
            Err(e) => return Err(e.into()),
        };
        tables.reindex();
        Ok(Self {
            current: RwLock::new(Arc::new(tables)),
            writer: Mutex::new(()),
            snapshot_path: Some(path),
            faults,
        })
    }

    /// The last committed state.
    pub fn read(&self) -> Arc<Tables> {
        self.current.read().clone()
    }

    /// Runs `f` as one atomic transaction. Nothing is visible to readers
    /// unless `f` returns `Ok` and the new state was persisted.
    pub fn write<T>(&self, f: impl FnOnce(&mut Tables) -> Result<T>) -> Result<T> {
        let _guard = self.writer.lock();
        let mut next = Tables::clone(&self.current.read());
        let out = f(&mut next)?;
        self.faults.check(FaultPoint::Commit)?;
        if let Some(path) = &self.snapshot_path {
            persist(path, &next)?;
        }
        *self.current.write() = Arc::new(next);
        Ok(out)
    }

    /// SHA-256 over the canonical serialization of the committed state.
    pub fn digest(&self) -> String {
        let tables = self.read();
        let bytes = serde_json::to_vec(&*tables).expect("tables serialize");
        hex::encode(Sha256::digest(&bytes))
    }
}

fn persist(path: &Path, tables: &Tables) -> Result<()> {
    let bytes = serde_json::to_vec(tables).map_err(|e| Error::internal(e.to_string()))?;
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(&bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::Utc;

    fn user(t: &mut Tables, name: &str, role: Role) -> UserId {
        let id = UserId(t.next_id());
        t.insert_user(User {
            id,
            username: name.into(),
            credential_digest: "x".into(),
            role,
            created_at: Utc::now(),
        })
        .unwrap();
        id
    }

    fn project(t: &mut Tables, name: &str) -> ProjectId {
        let id = ProjectId(t.next_id());
        t.insert_project(Project {
            id,
            name: name.into(),
            api_key: format!("key-{name}"),
            created_at: Utc::now(),
        })
        .unwrap();
        id
    }

    #[test]
    fn failed_transaction_publishes_nothing() {
        let store = Store::in_memory(Default::default());
        store.write(|t| Ok(user(t, "a", Role::Admin))).unwrap();
        let before = store.digest();
        let err = store
            .write(|t| {
                user(t, "b", Role::Annotator);
                Err::<(), _>(Error::internal("boom"))
            })
            .unwrap_err();
        assert_eq!(err.code, ErrorCode::Internal);
        assert_eq!(store.digest(), before);
        assert!(store.read().user_by_name("b").is_none());
    }

    #[test]
    fn commit_fault_rolls_back() {
        let faults = Arc::new(FaultInjector::default());
        let store = Store::in_memory(faults.clone());
        faults.arm(FaultPoint::Commit);
        assert!(store.write(|t| Ok(user(t, "a", Role::Admin))).is_err());
        assert_eq!(store.read().users().count(), 0);
    }

    #[test]
    fn uniqueness_is_enforced_by_the_tables() {
        let store = Store::in_memory(Default::default());
        store.write(|t| Ok(user(t, "a", Role::Admin))).unwrap();
        let err = store
            .write(|t| {
                let id = UserId(t.next_id());
                t.insert_user(User {
                    id,
                    username: "a".into(),
                    credential_digest: "y".into(),
                    role: Role::Annotator,
                    created_at: Utc::now(),
                })
            })
            .unwrap_err();
        assert_eq!(err.code, ErrorCode::Conflict);
    }

    #[test]
    fn project_delete_cascades() {
        let store = Store::in_memory(Default::default());
        let stored = store
            .write(|t| {
                let u = user(t, "ann", Role::Annotator);
                let p = project(t, "P");
                t.add_membership(u, p)?;
                let l = LabelId(t.next_id());
                t.insert_label(Label { id: l, project_id: p, name: "spk".into(), selection_type: SelectionType::Single })?;
                let v = LabelValueId(t.next_id());
                t.insert_label_value(LabelValue { id: v, label_id: l, value: "S1".into() })?;
                let d = DataPointId(t.next_id());
                t.insert_datapoint(DataPoint {
                    id: d,
                    project_id: p,
                    original_filename: "a.wav".into(),
                    stored_name: "0123.wav".into(),
                    format: AudioFormat::Wav,
                    duration_ms: 1000,
                    reference_transcription: None,
                    created_at: Utc::now(),
                })?;
                let a = AssignmentId(t.next_id());
                t.insert_assignment(Assignment {
                    id: a,
                    datapoint_id: d,
                    user_id: u,
                    status: AssignmentStatus::Pending,
                    marked_for_review: false,
                    updated_at: Utc::now(),
                })?;
                let s = SegmentId(t.next_id());
                t.insert_segment(Segment {
                    id: s,
                    assignment_id: a,
                    start_ms: 0,
                    end_ms: 10,
                    transcription: "hi".into(),
                    selections: [(l, [v].into_iter().collect())].into_iter().collect(),
                    created_at: Utc::now(),
                    updated_at: Utc::now(),
                })?;
                assert_eq!(t.delete_label(l).unwrap_err().code, ErrorCode::InUse);
                assert_eq!(t.delete_label_value(v).unwrap_err().code, ErrorCode::InUse);
                assert_eq!(t.delete_user(u).unwrap_err().code, ErrorCode::InUse);
                t.delete_project(p)
            })
            .unwrap();
        assert_eq!(stored, vec!["0123.wav".to_string()]);
        let t = store.read();
        assert_eq!(t.projects().count(), 0);
        assert_eq!(t.stored_names().count(), 0);
        assert!(t.segments.is_empty() && t.assignments.is_empty() && t.labels.is_empty());
        assert!(t.label_values.is_empty() && t.memberships.is_empty());
        // the user no longer holds assignments, so deletion now succeeds
        drop(t);
        let ann = store.read().user_by_name("ann").unwrap().id;
        store.write(|t| t.delete_user(ann)).unwrap();
    }

    #[test]
    fn snapshot_survives_reopen() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("state.json");
        {
            let store = Store::open(&path, Default::default()).unwrap();
            store
                .write(|t| {
                    let u = user(t, "ann", Role::Annotator);
                    let p = project(t, "P");
                    t.add_membership(u, p)
                })
                .unwrap();
        }
        let store = Store::open(&path, Default::default()).unwrap();
        let t = store.read();
        let u = t.user_by_name("ann").unwrap().id;
        let p = t.project_by_api_key("key-P").unwrap().id;
        assert!(t.is_member(u, p));
        assert_eq!(t.projects_of(u), vec![p]);
    }
}
