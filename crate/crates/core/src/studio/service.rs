use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use serde_json::{json, Map, Value};
use tokio::sync::Mutex;

use super::artifacts::{CandidateRecord, MapMeta};
use super::config::PipelineConfig;
use super::workspace::{sha256_hex, Stage, Workspace, TOOL_VERSION};
use crate::autoenc::{AutoencoderModel, LatentVector};
use crate::designspace::{decode_png, png_bytes, DesignImage, DesignSet, Provenance};
use crate::error::{Error, Result};
use crate::insight::{grad_cam_ensemble, overlay};
use crate::surrogate::{stiffness, EnsembleModel, Target};

/// Everything the service reads, loaded once at startup.
pub struct AppState {
    ws: Workspace,
    autoencoder: Option<(AutoencoderModel, String)>,
    ensemble: Option<(EnsembleModel, String)>,
    corpus: Option<DesignSet>,
    records: Option<Vec<CandidateRecord>>,
    meta: Option<MapMeta>,
    overlay_alpha: f64,
    /// Shortlist flags; the lock serializes writers.
    shortlist: Mutex<BTreeMap<String, bool>>,
}

fn hashed<T>(path: PathBuf, load: impl Fn(&std::path::Path) -> Result<T>) -> Option<(T, String)> {
    let bytes = std::fs::read(&path).ok()?;
    let model = load(&path).ok()?;
    Some((model, sha256_hex(&bytes)))
}

impl AppState {
    /// Loads whatever artifacts exist; missing ones turn the dependent endpoints into 503s.
    pub fn load(ws: Workspace, overlay_alpha: f64) -> Result<Self> {
        let done = |s: Stage| ws.manifest(s).ok().flatten().is_some();
        let autoencoder = if done(Stage::Reduce) {
            hashed(ws.autoencoder_path(), AutoencoderModel::load)
        } else {
            None
        };
        let ensemble = if done(Stage::Train) {
            hashed(ws.ensemble_path(), EnsembleModel::load)
        } else {
            None
        };
        let corpus = if done(Stage::Reduce) { ws.corpus().ok() } else { None };
        let (records, meta) = if done(Stage::Explain) {
            (Some(ws.candidates()?), Some(ws.map_meta()?))
        } else {
            (None, None)
        };
        let shortlist = Mutex::new(ws.shortlist()?);
        Ok(Self {
            ws,
            autoencoder,
            ensemble,
            corpus,
            records,
            meta,
            overlay_alpha,
            shortlist,
        })
    }
}

/// A JSON error response.
#[derive(Debug)]
struct ApiError {
    status: StatusCode,
    message: String,
    fields: Map<String, Value>,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
            fields: Map::new(),
        }
    }

    fn bad_field(field: &str, problem: impl Into<String>) -> Self {
        let mut e = Self::new(StatusCode::BAD_REQUEST, "malformed request body");
        e.fields.insert(field.into(), Value::String(problem.into()));
        e
    }

    fn unavailable(what: &str) -> Self {
        Self::new(
            StatusCode::SERVICE_UNAVAILABLE,
            format!("{what} is not available; run the pipeline first"),
        )
    }

    fn not_found(id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, format!("unknown design `{id}`"))
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::Validation(_) | Error::Dimension { .. } | Error::Image(_) => StatusCode::BAD_REQUEST,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        Self::new(status, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut body = json!({ "error": self.message });
        if !self.fields.is_empty() {
            body["fields"] = Value::Object(self.fields);
        }
        (self.status, Json(body)).into_response()
    }
}

type ApiResult<T> = std::result::Result<T, ApiError>;
type Shared = Arc<AppState>;

/// The `/v1` router over a loaded state.
pub fn router(state: Shared) -> Router {
    let v1 = Router::new()
        .route("/health", get(health))
        .route("/map", get(map))
        .route("/decode", post(decode))
        .route("/predict", post(predict))
        .route("/gradcam", post(gradcam))
        .route("/design/{id}", get(design))
        .route("/design/{id}/mesh.stl", get(mesh))
        .route("/shortlist", post(shortlist));
    Router::new().nest("/v1", v1).with_state(state)
}

/// Binds the configured address and serves until interrupted.
pub async fn serve(cfg: &PipelineConfig) -> Result<()> {
    let state = Arc::new(AppState::load(Workspace::new(cfg.workspace_root()), cfg.explain.overlay_alpha)?);
    let addr = format!("{}:{}", cfg.serve.bind, cfg.serve.port);
    let listener = tokio::net::TcpListener::bind(&addr)
        .await
        .map_err(|e| Error::io(&addr, e))?;
    eprintln!("listening on http://{addr}/v1");
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|e| Error::io(&addr, e))
}

fn body_object(bytes: &Bytes) -> ApiResult<Map<String, Value>> {
    match serde_json::from_slice::<Value>(bytes) {
        Ok(Value::Object(m)) => Ok(m),
        Ok(_) => Err(ApiError::bad_field("body", "expected a JSON object")),
        Err(e) => Err(ApiError::bad_field("body", format!("invalid JSON: {e}"))),
    }
}

fn reject_unknown(body: &Map<String, Value>, allowed: &[&str]) -> ApiResult<()> {
    let mut err = ApiError::new(StatusCode::BAD_REQUEST, "malformed request body");
    for k in body.keys() {
        if !allowed.contains(&k.as_str()) {
            err.fields.insert(k.clone(), "unknown field".into());
        }
    }
    if err.fields.is_empty() {
        Ok(())
    } else {
        Err(err)
    }
}

fn float_vec(body: &Map<String, Value>, field: &str) -> ApiResult<Vec<f64>> {
    let bad = || ApiError::bad_field(field, "expected an array of finite numbers");
    let arr = body.get(field).and_then(Value::as_array).ok_or_else(bad)?;
    arr.iter()
        .map(|v| v.as_f64().filter(|x| x.is_finite()).ok_or_else(bad))
        .collect()
}

fn string_field<'a>(body: &'a Map<String, Value>, field: &str) -> ApiResult<&'a str> {
    body.get(field)
        .and_then(Value::as_str)
        .ok_or_else(|| ApiError::bad_field(field, "expected a string"))
}

fn encode_png(image: &DesignImage) -> ApiResult<String> {
    Ok(B64.encode(png_bytes(image)?))
}

fn autoencoder(s: &AppState) -> ApiResult<&AutoencoderModel> {
    s.autoencoder.as_ref().map(|(m, _)| m).ok_or_else(|| ApiError::unavailable("autoencoder"))
}

fn ensemble(s: &AppState) -> ApiResult<&EnsembleModel> {
    s.ensemble.as_ref().map(|(m, _)| m).ok_or_else(|| ApiError::unavailable("surrogate ensemble"))
}

fn decode_z(s: &AppState, z: Vec<f64>) -> ApiResult<DesignImage> {
    let ae = autoencoder(s)?;
    if z.len() != ae.latent_dim() {
        return Err(ApiError::bad_field(
            "z",
            format!("expected {} values, got {}", ae.latent_dim(), z.len()),
        ));
    }
    Ok(ae.decode(&LatentVector { z }, "decoded")?.with_provenance(Provenance::Decoded))
}

fn design_image(s: &AppState, id: &str) -> ApiResult<DesignImage> {
    let corpus = s.corpus.as_ref().ok_or_else(|| ApiError::unavailable("design corpus"))?;
    corpus
        .get(id)
        .map(|(img, _)| img.clone())
        .ok_or_else(|| ApiError::not_found(id))
}

/// Resolves exactly one of the given image sources from a request body.
fn image_input(s: &AppState, body: &Map<String, Value>, sources: &[&str]) -> ApiResult<DesignImage> {
    let given: Vec<&str> = sources.iter().copied().filter(|k| body.contains_key(*k)).collect();
    if given.len() != 1 {
        let mut e = ApiError::new(
            StatusCode::BAD_REQUEST,
            format!("exactly one of {} is required", sources.join(", ")),
        );
        for k in sources {
            e.fields.insert((*k).into(), "exactly one image source is required".into());
        }
        return Err(e);
    }
    let img = match given[0] {
        "image" => {
            let b = B64
                .decode(string_field(body, "image")?)
                .map_err(|e| ApiError::bad_field("image", format!("invalid base64: {e}")))?;
            decode_png(&b, "upload", Provenance::Test)
                .map_err(|e| ApiError::bad_field("image", format!("not a valid design PNG: {e}")))?
        }
        "z" => decode_z(s, float_vec(body, "z")?)?,
        _ => design_image(s, string_field(body, "design_id")?)?,
    };
    let ens = ensemble(s)?;
    if img.size() != ens.input_size() {
        return Err(ApiError::bad_field(
            given[0],
            format!("image must be {0}x{0}, got {1}x{1}", ens.input_size(), img.size()),
        ));
    }
    Ok(img)
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> ApiResult<T> + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?
}

async fn health(State(s): State<Shared>) -> Json<Value> {
    Json(json!({
        "status": "ok",
        "version": TOOL_VERSION,
        "models": {
            "autoencoder": s.autoencoder.as_ref().map(|(_, h)| h),
            "ensemble": s.ensemble.as_ref().map(|(_, h)| h),
        },
        "candidates": s.records.as_ref().map_or(0, Vec::len),
    }))
}

async fn current_records(s: &AppState) -> ApiResult<Vec<CandidateRecord>> {
    let mut rows = s.records.clone().ok_or_else(|| ApiError::unavailable("candidate table"))?;
    let flags = s.shortlist.lock().await;
    for r in &mut rows {
        r.shortlisted = flags.get(&r.id).copied().unwrap_or(false);
    }
    Ok(rows)
}

async fn map(State(s): State<Shared>) -> ApiResult<Json<Value>> {
    let records = current_records(&s).await?;
    Ok(Json(json!({ "records": records, "meta": s.meta })))
}

async fn decode(State(s): State<Shared>, body: Bytes) -> ApiResult<Json<Value>> {
    let body = body_object(&body)?;
    reject_unknown(&body, &["z"])?;
    if !body.contains_key("z") {
        return Err(ApiError::bad_field("z", "required"));
    }
    let z = float_vec(&body, "z")?;
    blocking(move || {
        let img = decode_z(&s, z)?;
        Ok(Json(json!({ "image": encode_png(&img)? })))
    })
    .await
}

async fn predict(State(s): State<Shared>, body: Bytes) -> ApiResult<Json<Value>> {
    let body = body_object(&body)?;
    reject_unknown(&body, &["image", "z", "design_id"])?;
    blocking(move || {
        let img = image_input(&s, &body, &["image", "z", "design_id"])?;
        let p = ensemble(&s)?.predict(&img)?;
        Ok(Json(json!({
            "frequency_hz": p.frequency_hz,
            "mass_kg": p.mass_kg,
            "stiffness": stiffness(p.frequency_hz, p.mass_kg),
        })))
    })
    .await
}

async fn gradcam(State(s): State<Shared>, body: Bytes) -> ApiResult<Json<Value>> {
    let body = body_object(&body)?;
    reject_unknown(&body, &["image", "design_id", "target", "alpha"])?;
    let target = match body.get("target") {
        None => Target::Frequency,
        Some(v) => serde_json::from_value(v.clone())
            .map_err(|_| ApiError::bad_field("target", "expected \"frequency\" or \"mass\""))?,
    };
    let alpha = match body.get("alpha") {
        None => s.overlay_alpha,
        Some(v) => v
            .as_f64()
            .filter(|a| (0.0..=1.0).contains(a))
            .ok_or_else(|| ApiError::bad_field("alpha", "expected a number in [0, 1]"))?,
    };
    blocking(move || {
        let img = image_input(&s, &body, &["image", "design_id"])?;
        let g = grad_cam_ensemble(ensemble(&s)?, target, &img)?;
        let mut heat = std::io::Cursor::new(Vec::new());
        g.upsampled
            .to_gray8()
            .write_to(&mut heat, image::ImageFormat::Png)
            .map_err(Error::from)?;
        let mut over = std::io::Cursor::new(Vec::new());
        overlay(&g.upsampled, &img, alpha)?
            .write_to(&mut over, image::ImageFormat::Png)
            .map_err(Error::from)?;
        Ok(Json(json!({
            "heatmap_image": B64.encode(heat.into_inner()),
            "overlay_image": B64.encode(over.into_inner()),
            "max": g.upsampled.max(),
        })))
    })
    .await
}

async fn design(State(s): State<Shared>, UrlPath(id): UrlPath<String>) -> ApiResult<Json<Value>> {
    let records = current_records(&s).await?;
    let record = records
        .into_iter()
        .find(|r| r.id == id)
        .ok_or_else(|| ApiError::not_found(&id))?;
    let img = design_image(&s, &id)?;
    let mesh = s.ws.design_dir(&id).join("mesh.stl").exists();
    Ok(Json(json!({ "record": record, "image": encode_png(&img)?, "has_mesh": mesh })))
}

async fn mesh(State(s): State<Shared>, UrlPath(id): UrlPath<String>) -> ApiResult<Response> {
    if id.contains(['/', '\\']) || id.starts_with('.') {
        return Err(ApiError::not_found(&id));
    }
    let path = s.ws.design_dir(&id).join("mesh.stl");
    let bytes = std::fs::read(&path).map_err(|_| ApiError::not_found(&id))?;
    Ok(([(header::CONTENT_TYPE, "model/stl")], bytes).into_response())
}

async fn shortlist(State(s): State<Shared>, body: Bytes) -> ApiResult<Json<CandidateRecord>> {
    let body = body_object(&body)?;
    reject_unknown(&body, &["id", "flag"])?;
    let id = string_field(&body, "id")?.to_string();
    let flag = body
        .get("flag")
        .and_then(Value::as_bool)
        .ok_or_else(|| ApiError::bad_field("flag", "expected a boolean"))?;
    let records = s.records.as_ref().ok_or_else(|| ApiError::unavailable("candidate table"))?;
    let mut record = records
        .iter()
        .find(|r| r.id == id)
        .cloned()
        .ok_or_else(|| ApiError::not_found(&id))?;
    let mut flags = s.shortlist.lock().await;
    let mut next = flags.clone();
    if flag {
        next.insert(id, true);
    } else {
        next.remove(&id);
    }
    s.ws.write_shortlist(&next)?;
    *flags = next;
    record.shortlisted = flag;
    Ok(Json(record))
}
