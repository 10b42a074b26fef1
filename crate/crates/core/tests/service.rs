mod common;

use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use serde_json::{json, Value};
use tower::ServiceExt;

use wheelforge::designspace::{decode_png, png_bytes, Provenance};
use wheelforge::studio::{router, sha256_hex, AppState, Stage, Workspace};
use wheelforge::surrogate::stiffness;

fn app() -> Router {
    let (cfg, ws) = common::tiny_workspace();
    router(Arc::new(AppState::load(ws.clone(), cfg.explain.overlay_alpha).unwrap()))
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Vec<u8>) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => req
            .header("content-type", "application/json")
            .body(Body::from(serde_json::to_vec(&b).unwrap())),
        None => req.body(Body::empty()),
    }
    .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = axum::body::to_bytes(resp.into_body(), usize::MAX).await.unwrap();
    (status, bytes.to_vec())
}

async fn call_json(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let (s, b) = call(app, method, uri, body).await;
    (s, serde_json::from_slice(&b).unwrap())
}

async fn raw_post(app: &Router, uri: &str, body: &'static str) -> (StatusCode, Value) {
    let req = Request::post(uri).body(Body::from(body)).unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = axum::body::to_bytes(resp.into_body(), usize::MAX).await.unwrap();
    (status, serde_json::from_slice(&bytes).unwrap())
}

fn test_ids() -> Vec<(String, f64, f64)> {
    let (_, ws) = common::tiny_workspace();
    let mut r = csv::Reader::from_path(ws.stage_dir(Stage::Train).join("errors.csv")).unwrap();
    r.records()
        .map(|rec| {
            let rec = rec.unwrap();
            (rec[0].to_string(), rec[2].parse().unwrap(), rec[4].parse().unwrap())
        })
        .collect()
}

#[tokio::test]
async fn health_reports_version_and_model_hashes() {
    let (_, ws) = common::tiny_workspace();
    let (s, v) = call_json(&app(), "GET", "/v1/health", None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["version"], env!("CARGO_PKG_VERSION"));
    let ae = std::fs::read(ws.autoencoder_path()).unwrap();
    let ens = std::fs::read(ws.ensemble_path()).unwrap();
    assert_eq!(v["models"]["autoencoder"], sha256_hex(&ae));
    assert_eq!(v["models"]["ensemble"], sha256_hex(&ens));
}

#[tokio::test]
async fn map_rows_match_candidate_table() {
    let (_, ws) = common::tiny_workspace();
    let (s, v) = call_json(&app(), "GET", "/v1/map", None).await;
    assert_eq!(s, StatusCode::OK);
    let table = ws.candidates().unwrap();
    let rows = v["records"].as_array().unwrap();
    assert_eq!(rows.len(), table.len());
    assert_eq!(rows.len(), ws.corpus().unwrap().len());
    for (row, rec) in rows.iter().zip(&table) {
        assert_eq!(row["id"], rec.id.as_str());
        let k = stiffness(row["frequency_hz"].as_f64().unwrap(), row["mass_kg"].as_f64().unwrap());
        assert_eq!(row["stiffness"].as_f64().unwrap(), k);
    }
    let meta = &v["meta"];
    assert_eq!(meta["latent_dim"], ws.autoencoder().unwrap().latent_dim());
    assert!(!meta["pca"]["components"].as_array().unwrap().is_empty());
    assert_eq!(meta["frequency_ranges"].as_array().unwrap().len(), 2);
}

#[tokio::test]
async fn predict_by_id_matches_evaluation_output_exactly() {
    let app = app();
    let ids = test_ids();
    assert!(!ids.is_empty());
    for (id, f, m) in ids {
        let (s, v) = call_json(&app, "POST", "/v1/predict", Some(json!({ "design_id": id }))).await;
        assert_eq!(s, StatusCode::OK, "{v}");
        assert_eq!(v["frequency_hz"].as_f64().unwrap(), f);
        assert_eq!(v["mass_kg"].as_f64().unwrap(), m);
        assert_eq!(v["stiffness"].as_f64().unwrap(), stiffness(f, m));
    }
}

#[tokio::test]
async fn predict_from_uploaded_png_equals_predict_by_id() {
    let (_, ws) = common::tiny_workspace();
    let app = app();
    let corpus = ws.corpus().unwrap();
    let img = &corpus.items()[0];
    let png = B64.encode(png_bytes(img).unwrap());
    let (_, a) = call_json(&app, "POST", "/v1/predict", Some(json!({ "image": png }))).await;
    let (_, b) = call_json(&app, "POST", "/v1/predict", Some(json!({ "design_id": img.id() }))).await;
    assert_eq!(a, b);
}

#[tokio::test]
async fn decode_round_trip_is_served() {
    let (_, ws) = common::tiny_workspace();
    let app = app();
    let ae = ws.autoencoder().unwrap();
    let corpus = ws.corpus().unwrap();
    let design = &corpus.items()[1];
    let z = ae.encode(design).unwrap();
    let (s, v) = call_json(&app, "POST", "/v1/decode", Some(json!({ "z": z.z }))).await;
    assert_eq!(s, StatusCode::OK);
    let served = decode_png(&B64.decode(v["image"].as_str().unwrap()).unwrap(), "x", Provenance::Decoded).unwrap();
    let local = ae.reconstruct(design).unwrap();
    let local = decode_png(&png_bytes(&local).unwrap(), "x", Provenance::Decoded).unwrap();
    assert_eq!(served.pixels(), local.pixels());

    // z input to predict goes through the same decoder
    let (s, p) = call_json(&app, "POST", "/v1/predict", Some(json!({ "z": z.z }))).await;
    assert_eq!(s, StatusCode::OK);
    assert!(p["frequency_hz"].as_f64().unwrap() > 0.0);
}

#[tokio::test]
async fn gradcam_returns_heatmap_and_overlay_at_design_resolution() {
    let (_, ws) = common::tiny_workspace();
    let app = app();
    let id = ws.corpus().unwrap().items()[0].id().to_string();
    let (s, v) = call_json(&app, "POST", "/v1/gradcam", Some(json!({ "design_id": id, "alpha": 0.3 }))).await;
    assert_eq!(s, StatusCode::OK, "{v}");
    for key in ["heatmap_image", "overlay_image"] {
        let img = image::load_from_memory(&B64.decode(v[key].as_str().unwrap()).unwrap()).unwrap();
        assert_eq!((img.width(), img.height()), (32, 32));
    }
    let (s, _) = call_json(&app, "POST", "/v1/gradcam", Some(json!({ "design_id": id, "target": "mass" }))).await;
    assert_eq!(s, StatusCode::OK);
}

#[tokio::test]
async fn design_detail_and_mesh_download() {
    let (_, ws) = common::tiny_workspace();
    let app = app();
    let built = ws.builds().unwrap().into_iter().find(|b| b.ok()).unwrap();
    let (s, v) = call_json(&app, "GET", &format!("/v1/design/{}", built.id), None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["record"]["id"], built.id.as_str());
    assert_eq!(v["has_mesh"], true);
    let (s, stl) = call(&app, "GET", &format!("/v1/design/{}/mesh.stl", built.id), None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(stl, std::fs::read(ws.design_dir(&built.id).join("mesh.stl")).unwrap());
    let n = u32::from_le_bytes(stl[80..84].try_into().unwrap()) as usize;
    assert_eq!(stl.len(), 84 + 50 * n);
}

#[tokio::test]
async fn unknown_ids_are_404() {
    let app = app();
    for uri in ["/v1/design/nope", "/v1/design/nope/mesh.stl"] {
        assert_eq!(call(&app, "GET", uri, None).await.0, StatusCode::NOT_FOUND);
    }
    let (s, _) = call_json(&app, "POST", "/v1/predict", Some(json!({ "design_id": "nope" }))).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    let (s, _) = call_json(&app, "POST", "/v1/shortlist", Some(json!({ "id": "nope", "flag": true }))).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn malformed_bodies_are_400_with_field_errors() {
    let app = app();
    let (s, v) = raw_post(&app, "/v1/predict", "{not json").await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert!(v["fields"]["body"].is_string());

    let cases = [
        ("/v1/predict", json!({}), "design_id"),
        ("/v1/predict", json!({ "design_id": "a", "z": [0.0] }), "z"),
        ("/v1/predict", json!({ "image": "%%%" }), "image"),
        ("/v1/predict", json!({ "image": B64.encode(b"not a png") }), "image"),
        ("/v1/predict", json!({ "design_id": 3 }), "design_id"),
        ("/v1/predict", json!({ "design_id": "a", "extra": 1 }), "extra"),
        ("/v1/decode", json!({ "z": [1.0, 2.0] }), "z"),
        ("/v1/decode", json!({ "z": "abc" }), "z"),
        ("/v1/decode", json!({}), "z"),
        ("/v1/gradcam", json!({ "design_id": "a", "alpha": 2.0 }), "alpha"),
        ("/v1/gradcam", json!({ "design_id": "a", "target": "colour" }), "target"),
        ("/v1/shortlist", json!({ "id": "a" }), "flag"),
        ("/v1/shortlist", json!({ "flag": true }), "id"),
    ];
    for (uri, body, field) in cases {
        let (s, v) = call_json(&app, "POST", uri, Some(body.clone())).await;
        assert_eq!(s, StatusCode::BAD_REQUEST, "{uri} {body}");
        assert!(v["fields"][field].is_string(), "{uri} {body} -> {v}");
    }

    // wrong resolution
    let big = wheelforge::designspace::DesignImage::zeros("b", Provenance::Test, 64).unwrap();
    let (s, v) = call_json(&app, "POST", "/v1/predict", Some(json!({ "image": B64.encode(png_bytes(&big).unwrap()) }))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert!(v["fields"]["image"].is_string());
}

#[tokio::test]
async fn missing_models_give_503() {
    let dir = tempfile::tempdir().unwrap();
    let app = router(Arc::new(AppState::load(Workspace::new(dir.path()), 0.5).unwrap()));
    let (s, v) = call_json(&app, "GET", "/v1/health", None).await;
    assert_eq!(s, StatusCode::OK);
    assert!(v["models"]["ensemble"].is_null());
    for (uri, body) in [
        ("/v1/predict", json!({ "design_id": "a" })),
        ("/v1/decode", json!({ "z": [0.0] })),
        ("/v1/gradcam", json!({ "design_id": "a" })),
        ("/v1/shortlist", json!({ "id": "a", "flag": true })),
    ] {
        let (s, _) = call_json(&app, "POST", uri, Some(body)).await;
        assert_eq!(s, StatusCode::SERVICE_UNAVAILABLE, "{uri}");
    }
    assert_eq!(call(&app, "GET", "/v1/map", None).await.0, StatusCode::SERVICE_UNAVAILABLE);
}

#[tokio::test]
async fn shortlist_flags_persist_and_show_on_the_map() {
    let (cfg, ws) = common::tiny_workspace();
    let app = app();
    let id = ws.candidates().unwrap()[0].id.clone();
    let (s, v) = call_json(&app, "POST", "/v1/shortlist", Some(json!({ "id": id, "flag": true }))).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["shortlisted"], true);
    assert_eq!(ws.shortlist().unwrap().get(&id), Some(&true));
    let (_, map) = call_json(&app, "GET", "/v1/map", None).await;
    let row = map["records"].as_array().unwrap().iter().find(|r| r["id"] == id.as_str()).unwrap();
    assert_eq!(row["shortlisted"], true);

    // a fresh service reads the persisted flag
    let again = router(Arc::new(AppState::load(ws.clone(), cfg.explain.overlay_alpha).unwrap()));
    let (_, d) = call_json(&again, "GET", &format!("/v1/design/{id}"), None).await;
    assert_eq!(d["record"]["shortlisted"], true);

    let (_, v) = call_json(&app, "POST", "/v1/shortlist", Some(json!({ "id": id, "flag": false }))).await;
    assert_eq!(v["shortlisted"], false);
    assert_eq!(ws.shortlist().unwrap().get(&id), None);
}

#[tokio::test]
async fn pure_queries_are_idempotent() {
    let app = app();
    let a = call(&app, "GET", "/v1/health", None).await;
    let b = call(&app, "GET", "/v1/health", None).await;
    assert_eq!(a, b);
    let body = json!({ "z": vec![0.1; 8] });
    let a = call(&app, "POST", "/v1/decode", Some(body.clone())).await;
    let b = call(&app, "POST", "/v1/decode", Some(body)).await;
    assert_eq!(a, b);
}
