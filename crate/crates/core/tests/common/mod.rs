#![allow(dead_code)]

use std::sync::Arc;

use axum::body::Body;
use axum::http::{header, HeaderMap, Method, Request, StatusCode};
use axum::Router;
use chrono::Duration;
use http_body_util::BodyExt;
use serde_json::Value;
use sonotate::audio::encode_wav_pcm16;
use sonotate::domain::*;
use sonotate::ingest::{IngestOutcome, IngestRequest};
use sonotate::{App, ManualClock, PasswordParams, Principal, Settings};
use tower::ServiceExt;

pub const PASSWORD: &str = "correct horse";

/// A WAV of `ms` milliseconds: 8 kHz mono 16-bit, so 16 bytes per ms.
pub fn wav(ms: u32) -> Vec<u8> {
    let samples: Vec<i16> = (0..ms * 8).map(|i| ((i % 64) as i16 - 32) * 256).collect();
    encode_wav_pcm16(8_000, 1, &samples)
}

pub fn app_with(clock: &ManualClock, ttl: Duration) -> App {
    App::builder()
        .settings(Settings {
            session_ttl: ttl,
            password: PasswordParams::insecure_fast(),
            token_secret: Some(b"fixture secret".to_vec()),
            ..Settings::default()
        })
        .clock(clock.clone())
        .seed(7)
        .build()
        .expect("app")
}

pub struct Response {
    pub status: StatusCode,
    pub headers: HeaderMap,
    pub body: Vec<u8>,
}

impl Response {
    pub fn json(&self) -> Value {
        serde_json::from_slice(&self.body).unwrap_or_else(|e| {
            panic!("body is not JSON ({e}): {}", String::from_utf8_lossy(&self.body))
        })
    }

    pub fn error_code(&self) -> Option<String> {
        serde_json::from_slice::<Value>(&self.body)
            .ok()
            .and_then(|v| v.get("error").and_then(Value::as_str).map(str::to_owned))
    }

    pub fn header(&self, name: &str) -> Option<&str> {
        self.headers.get(name).and_then(|v| v.to_str().ok())
    }
}

pub enum Payload {
    Empty,
    Json(Value),
    Multipart(Vec<Part>),
}

pub struct Part {
    pub name: &'static str,
    pub filename: Option<&'static str>,
    pub bytes: Vec<u8>,
}

impl Part {
    pub fn text(name: &'static str, value: impl Into<String>) -> Self {
        Part { name, filename: None, bytes: value.into().into_bytes() }
    }

    pub fn file(name: &'static str, filename: &'static str, bytes: Vec<u8>) -> Self {
        Part { name, filename: Some(filename), bytes }
    }
}

const BOUNDARY: &str = "sonotate-test-boundary-7d1f";

fn encode_multipart(parts: &[Part]) -> Vec<u8> {
    let mut out = Vec::new();
    for p in parts {
        out.extend_from_slice(format!("--{BOUNDARY}\r\n").as_bytes());
        match p.filename {
            Some(f) => out.extend_from_slice(
                format!("Content-Disposition: form-data; name=\"{}\"; filename=\"{f}\"\r\nContent-Type: application/octet-stream\r\n\r\n", p.name).as_bytes(),
            ),
            None => out.extend_from_slice(format!("Content-Disposition: form-data; name=\"{}\"\r\n\r\n", p.name).as_bytes()),
        }
        out.extend_from_slice(&p.bytes);
        out.extend_from_slice(b"\r\n");
    }
    out.extend_from_slice(format!("--{BOUNDARY}--\r\n").as_bytes());
    out
}

/// Drives the router in-process.
#[derive(Clone)]
pub struct Client {
    pub app: Arc<App>,
    pub router: Router,
}

impl Client {
    pub fn new(app: Arc<App>) -> Self {
        let router = sonotate::http::router(app.clone());
        Client { app, router }
    }

    pub async fn send(&self, method: Method, uri: &str, auth: Option<&str>, extra: &[(&str, &str)], payload: Payload) -> Response {
        let mut req = Request::builder().method(method).uri(uri);
        if let Some(a) = auth {
            req = req.header(header::AUTHORIZATION, a);
        }
        for (k, v) in extra {
            req = req.header(*k, *v);
        }
        let body = match payload {
            Payload::Empty => Body::empty(),
            Payload::Json(v) => {
                req = req.header(header::CONTENT_TYPE, "application/json");
                Body::from(serde_json::to_vec(&v).unwrap())
            }
            Payload::Multipart(parts) => {
                req = req.header(header::CONTENT_TYPE, format!("multipart/form-data; boundary={BOUNDARY}"));
                Body::from(encode_multipart(&parts))
            }
        };
        let resp = self.router.clone().oneshot(req.body(body).unwrap()).await.unwrap();
        let status = resp.status();
        let headers = resp.headers().clone();
        let body = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
        Response { status, headers, body }
    }

    pub async fn get(&self, uri: &str, token: Option<&str>) -> Response {
        let auth = token.map(|t| format!("Bearer {t}"));
        self.send(Method::GET, uri, auth.as_deref(), &[], Payload::Empty).await
    }

    pub async fn call(&self, method: Method, uri: &str, token: Option<&str>, body: Option<Value>) -> Response {
        let auth = token.map(|t| format!("Bearer {t}"));
        let payload = body.map(Payload::Json).unwrap_or(Payload::Empty);
        self.send(method, uri, auth.as_deref(), &[], payload).await
    }

    pub async fn login(&self, username: &str, password: &str) -> String {
        let r = self
            .call(Method::POST, "/auth/login", None, Some(serde_json::json!({"username": username, "password": password})))
            .await;
        assert_eq!(r.status, StatusCode::OK, "login {username}: {}", String::from_utf8_lossy(&r.body));
        r.json()["token"].as_str().unwrap().to_owned()
    }
}

/// One project with a single-choice and a multi-choice label, an admin, an
/// assigned member, an unassigned member, an outsider, and one 1 s datapoint
/// assigned to the member with one segment.
pub struct Fixture {
    pub clock: ManualClock,
    pub app: Arc<App>,
    pub client: Client,
    pub admin: Principal,
    pub member: Principal,
    pub idle_member: Principal,
    pub outsider: Principal,
    pub admin_token: String,
    pub member_token: String,
    pub outsider_token: String,
    pub project: ProjectId,
    pub speaker: LabelId,
    pub s1: LabelValueId,
    pub s2: LabelValueId,
    pub noise: LabelId,
    pub music: LabelValueId,
    pub traffic: LabelValueId,
    pub unused_label: LabelId,
    pub unused_value: LabelValueId,
    pub api_key: String,
    pub datapoint: IngestOutcome,
    pub segment: SegmentId,
}

impl Fixture {
    pub async fn new() -> Fixture {
        let clock = ManualClock::at_epoch();
        let app = Arc::new(app_with(&clock, Duration::hours(24)));
        let root = app.bootstrap_admin("root", PASSWORD).unwrap();
        let admin = Principal { user_id: root.id, role: Role::Admin };
        let user = |name: &str| app.create_user(&admin, name, PASSWORD, Role::Annotator).unwrap();
        let mia = user("mia");
        let ida = user("ida");
        let otto = user("otto");
        let project = app.create_project(&admin, "Fixture").unwrap();
        app.assign_user_to_project(&admin, mia.id, project.id).unwrap();
        app.assign_user_to_project(&admin, ida.id, project.id).unwrap();

        let speaker = app.create_label(&admin, project.id, "speaker", SelectionType::Single).unwrap();
        let s1 = app.create_label_value(&admin, speaker.id, "S1").unwrap();
        let s2 = app.create_label_value(&admin, speaker.id, "S2").unwrap();
        let noise = app.create_label(&admin, project.id, "noise", SelectionType::Multi).unwrap();
        let music = app.create_label_value(&admin, noise.id, "music").unwrap();
        let traffic = app.create_label_value(&admin, noise.id, "traffic").unwrap();
        let unused = app.create_label(&admin, project.id, "unused", SelectionType::Multi).unwrap();
        let unused_value = app.create_label_value(&admin, unused.id, "u1").unwrap();

        let api_key = project.api_key.clone().unwrap();
        let datapoint = app
            .ingest_datapoint(IngestRequest {
                api_key: api_key.clone(),
                original_filename: "one.wav".into(),
                audio: wav(1000),
                assignees: vec!["mia".into()],
                ..IngestRequest::default()
            })
            .unwrap();
        let member = Principal { user_id: mia.id, role: Role::Annotator };
        let segment = app
            .create_segment(
                &member,
                datapoint.datapoint_id,
                SegmentDraft {
                    start_ms: 0,
                    end_ms: 500,
                    transcription: "hi".into(),
                    selections: [(speaker.id, [s1.id].into())].into(),
                },
            )
            .unwrap();

        let client = Client::new(app.clone());
        let admin_token = client.login("root", PASSWORD).await;
        let member_token = client.login("mia", PASSWORD).await;
        let outsider_token = client.login("otto", PASSWORD).await;
        Fixture {
            clock,
            client,
            admin,
            member,
            idle_member: Principal { user_id: ida.id, role: Role::Annotator },
            outsider: Principal { user_id: otto.id, role: Role::Annotator },
            admin_token,
            member_token,
            outsider_token,
            project: project.id,
            speaker: speaker.id,
            s1: s1.id,
            s2: s2.id,
            noise: noise.id,
            music: music.id,
            traffic: traffic.id,
            unused_label: unused.id,
            unused_value: unused_value.id,
            api_key,
            datapoint,
            segment: segment.id,
            app,
        }
    }
}
