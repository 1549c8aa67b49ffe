//! Drives the REST router in-process: login, create a project, upload over
//! the key-authenticated endpoint, fetch the annotator's list.

use std::sync::Arc;

use axum::body::Body;
use axum::http::{header, Method, Request};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use sonotate::audio::encode_wav_pcm16;
use sonotate::App;
use tower::ServiceExt;

async fn call(router: &axum::Router, method: Method, uri: &str, auth: &str, ctype: &str, body: Vec<u8>) -> (u16, Value) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header(header::AUTHORIZATION, auth)
        .header(header::CONTENT_TYPE, ctype)
        .body(Body::from(body))
        .unwrap();
    let resp = router.clone().oneshot(req).await.unwrap();
    let status = resp.status().as_u16();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

#[tokio::main]
async fn main() -> sonotate::Result<()> {
    let app = Arc::new(App::in_memory());
    app.bootstrap_admin("root", "change me please")?;
    let router = sonotate::http::router(app);
    let json_body = |v: Value| serde_json::to_vec(&v).unwrap();
    let jt = "application/json";

    let (_, login) = call(&router, Method::POST, "/auth/login", "", jt, json_body(json!({"username": "root", "password": "change me please"}))).await;
    let admin = format!("Bearer {}", login["token"].as_str().unwrap_or_default());
    let (_, project) = call(&router, Method::POST, "/projects", &admin, jt, json_body(json!({"name": "Demo"}))).await;
    let (_, user) = call(&router, Method::POST, "/users", &admin, jt, json_body(json!({"username": "amara", "password": "annotator pass"}))).await;
    let members = format!("/projects/{}/users", project["id"]);
    call(&router, Method::POST, &members, &admin, jt, json_body(json!({"user_id": user["id"]}))).await;

    let boundary = "demo-boundary";
    let mut form = Vec::new();
    let mut field = |name: &str, filename: Option<&str>, bytes: &[u8]| {
        form.extend_from_slice(format!("--{boundary}\r\nContent-Disposition: form-data; name=\"{name}\"").as_bytes());
        if let Some(f) = filename {
            form.extend_from_slice(format!("; filename=\"{f}\"").as_bytes());
        }
        form.extend_from_slice(b"\r\n\r\n");
        form.extend_from_slice(bytes);
        form.extend_from_slice(b"\r\n");
    };
    field("audio_file", Some("hello.wav"), &encode_wav_pcm16(8_000, 1, &vec![0; 12_000]));
    field("original_filename", None, b"hello.wav");
    field("assigned_users", None, br#"["amara"]"#);
    field("segmentations", None, br#"[{"start_ms": 0, "end_ms": 700, "transcription": "hello"}]"#);
    form.extend_from_slice(format!("--{boundary}--\r\n").as_bytes());
    let key = project["api_key"].as_str().unwrap_or_default();
    let (status, created) = call(&router, Method::POST, "/api/data", key, &format!("multipart/form-data; boundary={boundary}"), form).await;
    println!("upload -> {status} {created}");

    let (_, login) = call(&router, Method::POST, "/auth/login", "", jt, json_body(json!({"username": "amara", "password": "annotator pass"}))).await;
    let amara = format!("Bearer {}", login["token"].as_str().unwrap_or_default());
    let list = format!("/projects/{}/data?category=pending", project["id"]);
    let (status, page) = call(&router, Method::GET, &list, &amara, jt, Vec::new()).await;
    println!("pending list -> {status} total {}", page["total"]);
    let (status, denied) = call(&router, Method::GET, "/users", &amara, jt, Vec::new()).await;
    println!("annotator lists users -> {status} {denied}");
    Ok(())
}
