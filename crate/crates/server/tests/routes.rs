use std::path::Path;
use std::sync::Arc;

use axum::body::{to_bytes, Body};
use axum::http::{Method, Request, StatusCode};
use serde_json::{json, Value};
use tokstore_server::{router, AppState};
use tower::ServiceExt;

async fn send(state: &Arc<AppState>, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let mut req = Request::builder().method(method).uri(uri);
    let body = match body {
        Some(v) => {
            req = req.header("content-type", "application/json");
            Body::from(v.to_string())
        }
        None => Body::empty(),
    };
    let resp = router(state.clone()).oneshot(req.body(body).unwrap()).await.unwrap();
    let status = resp.status();
    let bytes = to_bytes(resp.into_body(), usize::MAX).await.unwrap();
    let value = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap()
    };
    (status, value)
}

async fn synthetic_archive(state: &Arc<AppState>, dir: &Path, n: u64) -> String {
    let p = |name: &str| dir.join(name).to_string_lossy().into_owned();
    let (status, body) = send(
        state,
        Method::POST,
        "/synthetic",
        Some(json!({
            "spec": {"distribution": {"kind": "uniform"}, "n_images": n, "vocab": 40, "dim": 4, "classes": 3, "seed": 5},
            "tokens_out": p("tokens.bin"),
            "codebook_out": p("codebook.bin"),
            "labels_out": p("labels.bin"),
        })),
    )
    .await;
    assert_eq!(status, StatusCode::OK, "{body}");
    assert_eq!(body["n_images"], n);
    let (status, body) = send(
        state,
        Method::POST,
        "/pack",
        Some(json!({
            "tokens": p("tokens.bin"),
            "codebook": p("codebook.bin"),
            "labels": p("labels.bin"),
            "out": p("data.stok"),
        })),
    )
    .await;
    assert_eq!(status, StatusCode::OK, "{body}");
    assert_eq!(body["report"]["n_records"], n);
    p("data.stok")
}

#[tokio::test]
async fn health_reports_ok() {
    let state = Arc::new(AppState::default());
    let (status, body) = send(&state, Method::GET, "/health", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["status"], "ok");
}

#[tokio::test]
async fn pack_stats_and_records() {
    let dir = tempfile::tempdir().unwrap();
    let state = Arc::new(AppState::default());
    let archive = synthetic_archive(&state, dir.path(), 10).await;

    let (status, report) = send(&state, Method::POST, "/stats", Some(json!({"archive": archive}))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(report["bytes_per_record_uint16"], 2048.0);
    assert_eq!(report["index_bytes"], 8 * 11);

    let (status, info) = send(&state, Method::POST, "/archives", Some(json!({"path": archive}))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(info["header"]["records"], 10);
    let id = info["id"].as_str().unwrap().to_string();
    assert_eq!(state.open_archives(), 1);

    let (status, rec) = send(&state, Method::GET, &format!("/archives/{id}/records/3?original=true"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(rec["tokens"].as_array().unwrap().len(), 1024);
    assert!(rec["label"].as_u64().unwrap() < 3);

    let (status, err) = send(&state, Method::GET, &format!("/archives/{id}/records/10"), None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(err["category"], "index");
    assert_eq!(err["exit_code"], 6);

    let (status, q) = send(
        &state,
        Method::POST,
        &format!("/archives/{id}/quantize"),
        Some(json!({"vectors": [[0.0, 0.0, 0.0, 0.0]]})),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(q["codes"].as_array().unwrap().len(), 1);
    let (status, err) = send(
        &state,
        Method::POST,
        &format!("/archives/{id}/quantize"),
        Some(json!({"vectors": [[0.0]]})),
    )
    .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(err["category"], "input");

    let (status, _) = send(&state, Method::DELETE, &format!("/archives/{id}"), None).await;
    assert_eq!(status, StatusCode::NO_CONTENT);
    let (status, err) = send(&state, Method::GET, &format!("/archives/{id}"), None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(err["category"], "not_found");
}

#[tokio::test]
async fn corrupt_archive_is_a_format_error() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.stok");
    std::fs::write(&bad, b"NOPE this is not an archive at all").unwrap();
    let state = Arc::new(AppState::default());
    let (status, err) = send(&state, Method::POST, "/stats", Some(json!({"archive": bad}))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(err["category"], "format");
    assert_eq!(err["exit_code"], 5);

    let missing = dir.path().join("missing.stok");
    let (status, err) = send(&state, Method::POST, "/archives", Some(json!({"path": missing}))).await;
    assert_eq!(status, StatusCode::INTERNAL_SERVER_ERROR);
    assert_eq!(err["category"], "io");
}

#[tokio::test]
async fn sessions_iterate_seek_and_close() {
    let dir = tempfile::tempdir().unwrap();
    let state = Arc::new(AppState::default());
    let archive = synthetic_archive(&state, dir.path(), 9).await;
    let (status, info) = send(
        &state,
        Method::POST,
        "/sessions",
        Some(json!({"archive": archive, "config": {"batch_size": 4, "seed": 3}})),
    )
    .await;
    assert_eq!(status, StatusCode::OK, "{info}");
    assert_eq!(info["batches_per_epoch"], 2);
    assert_eq!(info["classes"], 3);
    let id = info["id"].as_str().unwrap().to_string();

    let next = format!("/sessions/{id}/next");
    let (_, first) = send(&state, Method::POST, &next, Some(json!(null))).await;
    let (_, second) = send(&state, Method::POST, &next, Some(json!(null))).await;
    let (_, done) = send(&state, Method::POST, &next, Some(json!(null))).await;
    assert_eq!(first["batch"]["shape"], json!([4, 4, 28, 28]));
    assert_eq!(second["batch"]["index"], 1);
    assert!(done["batch"].is_null());

    let (status, pos) = send(
        &state,
        Method::POST,
        &format!("/sessions/{id}/seek"),
        Some(json!({"epoch": 0, "batch_index": 1})),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(pos["position"], 1);
    let (_, again) = send(&state, Method::POST, &next, Some(json!(null))).await;
    assert_eq!(again, second);

    let (_, stats) = send(&state, Method::GET, &format!("/sessions/{id}/stats"), None).await;
    assert_eq!(stats["batches"], 3);
    assert_eq!(stats["tokens_decoded"], 12 * 1024);

    let (status, _) = send(&state, Method::DELETE, &format!("/sessions/{id}"), None).await;
    assert_eq!(status, StatusCode::NO_CONTENT);
    assert_eq!(state.open_sessions(), 0);
    let (status, _) = send(&state, Method::POST, &next, Some(json!(null))).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn invalid_session_config_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let state = Arc::new(AppState::default());
    let archive = synthetic_archive(&state, dir.path(), 2).await;
    let (status, err) = send(
        &state,
        Method::POST,
        "/sessions",
        Some(json!({"archive": archive, "config": {"batch_size": 0}})),
    )
    .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(err["category"], "config");
    assert_eq!(err["exit_code"], 4);
}

#[tokio::test]
async fn dump_batch_writes_files() {
    let dir = tempfile::tempdir().unwrap();
    let state = Arc::new(AppState::default());
    let archive = synthetic_archive(&state, dir.path(), 8).await;
    let out = dir.path().join("dumps");
    let (status, body) = send(
        &state,
        Method::POST,
        "/dump-batch",
        Some(json!({"archive": archive, "config": {"batch_size": 4, "seed": 7}, "count": 5, "out_dir": out})),
    )
    .await;
    assert_eq!(status, StatusCode::OK, "{body}");
    let batches = body["batches"].as_array().unwrap();
    assert_eq!(batches.len(), 2);
    for b in batches {
        for f in b["files"].as_array().unwrap() {
            assert!(Path::new(f.as_str().unwrap()).exists());
        }
    }
}
