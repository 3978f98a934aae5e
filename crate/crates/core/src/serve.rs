//! HTTP alert service over a trained detection model.
//!
//! Wraps an immutable [`TrainedModel`] in a small JSON-over-HTTP service:
//! every authenticated prediction request is answered with class scores and
//! logged as an [`Alert`] whose severity is derived from the top attack-class
//! score; analysts post ground-truth labels back as [`FeedbackEntry`] records;
//! accuracy over the most recent feedback window drives a retrain
//! recommendation ([`DriftReport`]).
//!
//! The service state is split in two layers so the business rules are
//! testable without sockets:
//!
//! * [`ServiceCore`] — model + config + the alert/feedback stores. All rule
//!   logic (authorization, id assignment, idempotent feedback, drift
//!   evaluation) lives here behind plain method calls.
//! * [`serve`] / [`router`] — an axum front end mapping the endpoints
//!   (`/v1/health`, `/v1/predict`, `/v1/feedback`, `/v1/drift`) onto the
//!   core, with API-key auth on everything except health.
//!
//! Both logs are newline-delimited JSON files (one serialized record per
//! line) under the configured log directory: `alerts.ndjson` and
//! `feedback.ndjson`. Alert ids are assigned under a single lock, so they
//! strictly increase even under concurrent requests.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs::File;
use std::io::Write as _;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::{SystemTime, UNIX_EPOCH};

use axum::extract::{DefaultBodyLimit, State};
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::detect::{self, PredictionResult, TrainedModel};
use crate::error::{Error, Result};
use crate::flows::{self, ColumnRole, FeatureSchema, FlowRecord};

/// Largest accepted request body. One flow record is a few kilobytes; a
/// megabyte leaves generous headroom while bounding memory per request.
pub const MAX_BODY_BYTES: usize = 1024 * 1024;

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

/// Alert severity. `None` is reserved for benign predictions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    None,
    Low,
    Medium,
    High,
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Severity::None => "none",
            Severity::Low => "low",
            Severity::Medium => "medium",
            Severity::High => "high",
        };
        f.write_str(s)
    }
}

/// Standard-operating-procedure playbook ids, one per non-benign severity.
/// The playbooks themselves are external documents; the service only
/// dispatches their identifiers.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SopTable {
    pub low: String,
    pub medium: String,
    pub high: String,
}

impl Default for SopTable {
    fn default() -> Self {
        SopTable {
            low: "SOP-LOW-1".to_string(),
            medium: "SOP-MED-1".to_string(),
            high: "SOP-HIGH-1".to_string(),
        }
    }
}

impl SopTable {
    /// The playbook id for a severity; `None` severity has no playbook.
    pub fn lookup(&self, severity: Severity) -> Option<String> {
        match severity {
            Severity::None => None,
            Severity::Low => Some(self.low.clone()),
            Severity::Medium => Some(self.medium.clone()),
            Severity::High => Some(self.high.clone()),
        }
    }
}

/// Service configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ServeConfig {
    /// Shared secret expected in the `X-Api-Key` header.
    pub api_key: String,
    /// Bind address, e.g. `127.0.0.1`.
    pub bind_addr: String,
    /// TCP port; 0 asks the OS for an ephemeral port.
    pub port: u16,
    /// Top attack-class score at or above which an alert is `high`.
    pub high_threshold: f64,
    /// Top attack-class score at or above which an alert is `medium`.
    pub medium_threshold: f64,
    pub sop_table: SopTable,
    /// Number of most-recent feedback pairs the drift report covers.
    pub feedback_window: usize,
    /// Window accuracy below this recommends retraining.
    pub accuracy_floor: f64,
    /// Class name treated as benign (no alert severity, no playbook).
    pub benign_class: String,
    /// Directory receiving `alerts.ndjson` and `feedback.ndjson`.
    pub log_dir: PathBuf,
}

impl ServeConfig {
    /// A config with the default thresholds (0.9 / 0.6), window (500),
    /// accuracy floor (0.95), benign class `BENIGN`, and an ephemeral
    /// loopback port.
    pub fn new(api_key: impl Into<String>, log_dir: impl Into<PathBuf>) -> Self {
        ServeConfig {
            api_key: api_key.into(),
            bind_addr: "127.0.0.1".to_string(),
            port: 0,
            high_threshold: 0.9,
            medium_threshold: 0.6,
            sop_table: SopTable::default(),
            feedback_window: 500,
            accuracy_floor: 0.95,
            benign_class: "BENIGN".to_string(),
            log_dir: log_dir.into(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.api_key.is_empty() {
            return Err(Error::Config("api_key must not be empty".to_string()));
        }
        if !(self.medium_threshold > 0.0
            && self.medium_threshold < self.high_threshold
            && self.high_threshold <= 1.0)
        {
            return Err(Error::Config(format!(
                "severity thresholds must satisfy 0 < medium < high <= 1, got medium {} high {}",
                self.medium_threshold, self.high_threshold
            )));
        }
        if self.feedback_window == 0 {
            return Err(Error::Config(
                "feedback_window must be at least 1".to_string(),
            ));
        }
        if !(0.0..=1.0).contains(&self.accuracy_floor) {
            return Err(Error::Config(format!(
                "accuracy_floor must be in [0, 1], got {}",
                self.accuracy_floor
            )));
        }
        if self.benign_class.is_empty() {
            return Err(Error::Config("benign_class must not be empty".to_string()));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Alerts, feedback, and the pure rules over them
// ---------------------------------------------------------------------------

/// One logged prediction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Alert {
    /// Strictly increasing across the service lifetime.
    pub alert_id: u64,
    /// Wall-clock receipt time, milliseconds since the Unix epoch.
    pub received_at_ms: u64,
    pub prediction: PredictionResult,
    pub severity: Severity,
    /// Present exactly when `severity` is not `none`.
    pub sop_id: Option<String>,
    pub model_version: String,
}

/// One analyst ground-truth label for an issued alert.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeedbackEntry {
    pub alert_id: u64,
    pub actual_label: String,
    /// Wall-clock receipt time, milliseconds since the Unix epoch.
    pub recorded_at_ms: u64,
}

/// Outcome of a feedback submission. Business rejections are values, not
/// errors, so the HTTP layer can map each to its status code.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum FeedbackOutcome {
    /// First feedback for this alert; the log grew by one line.
    Recorded,
    /// Identical (alert_id, actual_label) already recorded; log unchanged.
    Duplicate,
    /// No alert with this id was ever issued.
    UnknownAlert,
    /// The alert already has feedback with a different label.
    Conflict { existing: String },
}

/// Accuracy over recent feedback and the retrain recommendation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriftReport {
    /// Configured window size.
    pub feedback_window: usize,
    /// Matched (alert, feedback) pairs actually evaluated (≤ window).
    pub matched_pairs: usize,
    /// Pairs whose predicted class equals the feedback label.
    pub correct: usize,
    /// `correct / matched_pairs`; `None` when there are no pairs.
    pub accuracy: Option<f64>,
    /// True when fewer pairs than the window were available.
    pub low_sample: bool,
    /// True when accuracy is defined and below the configured floor.
    pub retrain_recommended: bool,
}

/// Maps a prediction to its alert severity and playbook id.
///
/// Benign predictions carry no severity and no playbook. Otherwise the
/// predicted class's own score — which is the top score by construction —
/// is compared against the configured thresholds. Pure: same prediction and
/// config always yield the same answer.
pub fn categorize(pred: &PredictionResult, cfg: &ServeConfig) -> (Severity, Option<String>) {
    if pred.predicted == cfg.benign_class {
        return (Severity::None, None);
    }
    let top = pred
        .classes
        .iter()
        .position(|c| *c == pred.predicted)
        .map(|i| pred.scores[i])
        .unwrap_or(0.0);
    let severity = if top >= cfg.high_threshold {
        Severity::High
    } else if top >= cfg.medium_threshold {
        Severity::Medium
    } else {
        Severity::Low
    };
    let sop = cfg.sop_table.lookup(severity);
    (severity, sop)
}

/// Scores recent feedback against the alerts it refers to.
///
/// Feedback entries are joined to alerts by id in submission order; the most
/// recent `cfg.feedback_window` matched pairs are scored. With fewer pairs
/// than the window the report covers what exists and sets `low_sample`; with
/// zero pairs the accuracy is undefined (`None`) and no retrain is
/// recommended.
pub fn evaluate_feedback(
    alerts: &[Alert],
    feedback: &[FeedbackEntry],
    cfg: &ServeConfig,
) -> DriftReport {
    let predicted_by_id: BTreeMap<u64, &str> = alerts
        .iter()
        .map(|a| (a.alert_id, a.prediction.predicted.as_str()))
        .collect();
    let outcomes: Vec<bool> = feedback
        .iter()
        .filter_map(|f| {
            predicted_by_id
                .get(&f.alert_id)
                .map(|p| *p == f.actual_label)
        })
        .collect();
    let start = outcomes.len().saturating_sub(cfg.feedback_window);
    let recent = &outcomes[start..];
    let matched_pairs = recent.len();
    let correct = recent.iter().filter(|&&ok| ok).count();
    let accuracy = (matched_pairs > 0).then(|| correct as f64 / matched_pairs as f64);
    DriftReport {
        feedback_window: cfg.feedback_window,
        matched_pairs,
        correct,
        accuracy,
        low_sample: matched_pairs < cfg.feedback_window,
        retrain_recommended: accuracy.is_some_and(|a| a < cfg.accuracy_floor),
    }
}

// ---------------------------------------------------------------------------
// JSON body → flow record
// ---------------------------------------------------------------------------

/// Builds a [`FlowRecord`] from a JSON object of column-name/value pairs.
///
/// Columns are recognized by the same normalization and role rules as CSV
/// ingestion, so a record that round-trips through a CSV row and one posted
/// as JSON encode identically. Values may be strings, numbers, or null
/// (missing); numeric cells follow the CSV sentinel rules (unparseable →
/// NaN, `Infinity` → +∞).
pub fn record_from_fields(fields: &serde_json::Map<String, Value>) -> Result<FlowRecord> {
    let mut seen: BTreeSet<String> = BTreeSet::new();
    let mut flow_id = None;
    let mut source_ip = String::new();
    let mut destination_ip = String::new();
    let mut source_port = None;
    let mut destination_port = None;
    let mut protocol = None;
    let mut timestamp = None;
    let mut label = None;
    let mut numeric: Vec<(String, f64)> = Vec::new();

    for (raw, value) in fields {
        let name = flows::normalize_header(raw);
        if name.is_empty() {
            return Err(Error::Schema(format!(
                "field `{raw}` normalizes to an empty column name"
            )));
        }
        if !seen.insert(name.to_ascii_lowercase()) {
            return Err(Error::Schema(format!("duplicate field `{name}`")));
        }
        let text = match value {
            Value::String(s) => s.trim().to_string(),
            Value::Number(n) => n.to_string(),
            Value::Null => String::new(),
            _ => {
                return Err(Error::Schema(format!(
                    "field `{raw}` must be a string, number, or null"
                )))
            }
        };
        let opt = (!text.is_empty()).then(|| text.clone());
        match flows::column_role(&name) {
            ColumnRole::FlowId => flow_id = opt,
            ColumnRole::SourceIp => source_ip = text,
            ColumnRole::DestinationIp => destination_ip = text,
            ColumnRole::Timestamp => timestamp = opt,
            ColumnRole::Label => label = opt,
            ColumnRole::SourcePort => {
                source_port = text.parse::<u32>().ok();
                numeric.push((name, flows::parse_numeric_cell(&text)));
            }
            ColumnRole::DestinationPort => {
                destination_port = text.parse::<u32>().ok();
                numeric.push((name, flows::parse_numeric_cell(&text)));
            }
            ColumnRole::Protocol => {
                protocol = text.parse::<u32>().ok();
                numeric.push((name, flows::parse_numeric_cell(&text)));
            }
            ColumnRole::Numeric => numeric.push((name, flows::parse_numeric_cell(&text))),
        }
    }

    let (numeric_names, values): (Vec<String>, Vec<f64>) = numeric.into_iter().unzip();
    Ok(FlowRecord {
        schema: Arc::new(FeatureSchema { numeric_names }),
        flow_id,
        source_ip,
        destination_ip,
        source_port,
        destination_port,
        protocol,
        timestamp,
        values,
        label,
    })
}

// ---------------------------------------------------------------------------
// Service core
// ---------------------------------------------------------------------------

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

fn sha256(bytes: &[u8]) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(bytes);
    h.finalize().into()
}

struct StoreInner {
    next_alert_id: u64,
    alerts: Vec<Alert>,
    index_by_id: BTreeMap<u64, usize>,
    feedback: Vec<FeedbackEntry>,
    label_by_alert: BTreeMap<u64, String>,
    alert_log: File,
    feedback_log: File,
}

/// The model, configuration, and logs behind the HTTP front end.
///
/// All mutation funnels through one internal lock, so alert ids strictly
/// increase and both NDJSON logs are append-only even under concurrent
/// requests. The model itself is never mutated.
pub struct ServiceCore {
    model: Arc<TrainedModel>,
    cfg: ServeConfig,
    key_digest: [u8; 32],
    alert_log_path: PathBuf,
    feedback_log_path: PathBuf,
    inner: Mutex<StoreInner>,
}

impl ServiceCore {
    /// Validates the config, creates the log directory and NDJSON files
    /// (appending if they already exist), and wraps the model.
    pub fn new(model: TrainedModel, cfg: ServeConfig) -> Result<ServiceCore> {
        cfg.validate()?;
        std::fs::create_dir_all(&cfg.log_dir).map_err(|e| Error::io(&cfg.log_dir, e))?;
        let alert_log_path = cfg.log_dir.join("alerts.ndjson");
        let feedback_log_path = cfg.log_dir.join("feedback.ndjson");
        let open = |p: &Path| {
            std::fs::OpenOptions::new()
                .create(true)
                .append(true)
                .open(p)
                .map_err(|e| Error::io(p, e))
        };
        let alert_log = open(&alert_log_path)?;
        let feedback_log = open(&feedback_log_path)?;
        let key_digest = sha256(cfg.api_key.as_bytes());
        Ok(ServiceCore {
            model: Arc::new(model),
            cfg,
            key_digest,
            alert_log_path,
            feedback_log_path,
            inner: Mutex::new(StoreInner {
                next_alert_id: 1,
                alerts: Vec::new(),
                index_by_id: BTreeMap::new(),
                feedback: Vec::new(),
                label_by_alert: BTreeMap::new(),
                alert_log,
                feedback_log,
            }),
        })
    }

    pub fn config(&self) -> &ServeConfig {
        &self.cfg
    }

    pub fn model_version(&self) -> &str {
        &self.model.version
    }

    pub fn alert_log_path(&self) -> &Path {
        &self.alert_log_path
    }

    pub fn feedback_log_path(&self) -> &Path {
        &self.feedback_log_path
    }

    /// True when the presented key matches the configured one. Digests are
    /// compared instead of the raw strings so the comparison length does not
    /// depend on how much of the secret matches.
    pub fn authorized(&self, presented: Option<&str>) -> bool {
        match presented {
            Some(key) => sha256(key.as_bytes()) == self.key_digest,
            None => false,
        }
    }

    /// Predicts one record, assigns the next alert id, and appends the alert
    /// to the log. Scoring runs outside the lock; only id assignment and the
    /// log append are serialized.
    pub fn predict_record(&self, record: &FlowRecord) -> Result<Alert> {
        let prediction = detect::predict(&self.model, record)?;
        let (severity, sop_id) = categorize(&prediction, &self.cfg);
        let mut inner = self.inner.lock().expect("service lock poisoned");
        let alert_id = inner.next_alert_id;
        inner.next_alert_id += 1;
        let alert = Alert {
            alert_id,
            received_at_ms: now_ms(),
            prediction,
            severity,
            sop_id,
            model_version: self.model.version.clone(),
        };
        let line = serde_json::to_string(&alert)
            .map_err(|e| Error::io(&self.alert_log_path, std::io::Error::other(e)))?;
        writeln!(inner.alert_log, "{line}").map_err(|e| Error::io(&self.alert_log_path, e))?;
        inner
            .alert_log
            .flush()
            .map_err(|e| Error::io(&self.alert_log_path, e))?;
        let idx = inner.alerts.len();
        inner.alerts.push(alert.clone());
        inner.index_by_id.insert(alert_id, idx);
        Ok(alert)
    }

    /// [`record_from_fields`] followed by [`Self::predict_record`].
    pub fn predict_fields(&self, fields: &serde_json::Map<String, Value>) -> Result<Alert> {
        let record = record_from_fields(fields)?;
        self.predict_record(&record)
    }

    /// Records analyst feedback for an issued alert.
    ///
    /// Exactly-once semantics: the first submission appends one log line;
    /// an identical resubmission is a no-op `Duplicate`; a different label
    /// for the same alert is a `Conflict` and the log stays unchanged.
    pub fn record_feedback(&self, alert_id: u64, actual_label: &str) -> Result<FeedbackOutcome> {
        let mut inner = self.inner.lock().expect("service lock poisoned");
        if !inner.index_by_id.contains_key(&alert_id) {
            return Ok(FeedbackOutcome::UnknownAlert);
        }
        match inner.label_by_alert.get(&alert_id) {
            Some(existing) if existing == actual_label => Ok(FeedbackOutcome::Duplicate),
            Some(existing) => Ok(FeedbackOutcome::Conflict {
                existing: existing.clone(),
            }),
            None => {
                let entry = FeedbackEntry {
                    alert_id,
                    actual_label: actual_label.to_string(),
                    recorded_at_ms: now_ms(),
                };
                let line = serde_json::to_string(&entry)
                    .map_err(|e| Error::io(&self.feedback_log_path, std::io::Error::other(e)))?;
                writeln!(inner.feedback_log, "{line}")
                    .map_err(|e| Error::io(&self.feedback_log_path, e))?;
                inner
                    .feedback_log
                    .flush()
                    .map_err(|e| Error::io(&self.feedback_log_path, e))?;
                inner.feedback.push(entry);
                inner
                    .label_by_alert
                    .insert(alert_id, actual_label.to_string());
                Ok(FeedbackOutcome::Recorded)
            }
        }
    }

    /// [`evaluate_feedback`] over a consistent snapshot of both logs.
    pub fn drift_report(&self) -> DriftReport {
        let inner = self.inner.lock().expect("service lock poisoned");
        evaluate_feedback(&inner.alerts, &inner.feedback, &self.cfg)
    }

    pub fn alert_count(&self) -> usize {
        self.inner
            .lock()
            .expect("service lock poisoned")
            .alerts
            .len()
    }

    pub fn alerts_snapshot(&self) -> Vec<Alert> {
        self.inner
            .lock()
            .expect("service lock poisoned")
            .alerts
            .clone()
    }

    pub fn feedback_snapshot(&self) -> Vec<FeedbackEntry> {
        self.inner
            .lock()
            .expect("service lock poisoned")
            .feedback
            .clone()
    }
}

// ---------------------------------------------------------------------------
// HTTP layer
// ---------------------------------------------------------------------------

/// The response body of `POST /v1/predict`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictResponse {
    pub alert_id: u64,
    pub classes: Vec<String>,
    pub scores: Vec<f64>,
    pub predicted: String,
    pub severity: Severity,
    pub sop_id: Option<String>,
    pub model_version: String,
}

impl PredictResponse {
    fn from_alert(alert: &Alert) -> Self {
        PredictResponse {
            alert_id: alert.alert_id,
            classes: alert.prediction.classes.clone(),
            scores: alert.prediction.scores.clone(),
            predicted: alert.prediction.predicted.clone(),
            severity: alert.severity,
            sop_id: alert.sop_id.clone(),
            model_version: alert.model_version.clone(),
        }
    }
}

fn error_response(status: StatusCode, message: impl Into<String>) -> Response {
    (status, Json(json!({ "error": message.into() }))).into_response()
}

fn api_key_from(headers: &HeaderMap) -> Option<&str> {
    headers.get("x-api-key").and_then(|v| v.to_str().ok())
}

// A ready-to-return `Response` is the natural rejection type in a handler,
// even though it is a large `Err` variant; this is cold-path only.
#[allow(clippy::result_large_err)]
fn parse_object(body: &str) -> std::result::Result<serde_json::Map<String, Value>, Response> {
    let value: Value = serde_json::from_str(body).map_err(|e| {
        error_response(
            StatusCode::BAD_REQUEST,
            format!("request body is not valid JSON: {e}"),
        )
    })?;
    match value {
        Value::Object(map) => Ok(map),
        _ => Err(error_response(
            StatusCode::BAD_REQUEST,
            "request body must be a JSON object",
        )),
    }
}

async fn health_handler(State(core): State<Arc<ServiceCore>>) -> Json<Value> {
    Json(json!({
        "status": "ok",
        "model_version": core.model_version(),
        "service_version": env!("CARGO_PKG_VERSION"),
    }))
}

async fn predict_handler(
    State(core): State<Arc<ServiceCore>>,
    headers: HeaderMap,
    body: String,
) -> Response {
    if !core.authorized(api_key_from(&headers)) {
        return error_response(StatusCode::UNAUTHORIZED, "invalid or missing API key");
    }
    let fields = match parse_object(&body) {
        Ok(f) => f,
        Err(resp) => return resp,
    };
    match core.predict_fields(&fields) {
        Ok(alert) => (StatusCode::OK, Json(PredictResponse::from_alert(&alert))).into_response(),
        Err(Error::Schema(msg)) => error_response(StatusCode::BAD_REQUEST, msg),
        Err(e) => error_response(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
    }
}

async fn feedback_handler(
    State(core): State<Arc<ServiceCore>>,
    headers: HeaderMap,
    body: String,
) -> Response {
    if !core.authorized(api_key_from(&headers)) {
        return error_response(StatusCode::UNAUTHORIZED, "invalid or missing API key");
    }
    let fields = match parse_object(&body) {
        Ok(f) => f,
        Err(resp) => return resp,
    };
    let Some(alert_id) = fields.get("alert_id").and_then(Value::as_u64) else {
        return error_response(
            StatusCode::BAD_REQUEST,
            "field `alert_id` must be a non-negative integer",
        );
    };
    let label = match fields.get("actual_label").and_then(Value::as_str) {
        Some(l) if !l.trim().is_empty() => l.trim(),
        _ => {
            return error_response(
                StatusCode::BAD_REQUEST,
                "field `actual_label` must be a non-empty string",
            )
        }
    };
    match core.record_feedback(alert_id, label) {
        Ok(FeedbackOutcome::Recorded) => (
            StatusCode::OK,
            Json(json!({ "status": "recorded", "alert_id": alert_id })),
        )
            .into_response(),
        Ok(FeedbackOutcome::Duplicate) => (
            StatusCode::OK,
            Json(json!({ "status": "duplicate", "alert_id": alert_id })),
        )
            .into_response(),
        Ok(FeedbackOutcome::UnknownAlert) => error_response(
            StatusCode::NOT_FOUND,
            format!("unknown alert_id {alert_id}"),
        ),
        Ok(FeedbackOutcome::Conflict { existing }) => error_response(
            StatusCode::CONFLICT,
            format!("alert {alert_id} already has feedback `{existing}`"),
        ),
        Err(e) => error_response(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
    }
}

async fn drift_handler(State(core): State<Arc<ServiceCore>>, headers: HeaderMap) -> Response {
    if !core.authorized(api_key_from(&headers)) {
        return error_response(StatusCode::UNAUTHORIZED, "invalid or missing API key");
    }
    (StatusCode::OK, Json(core.drift_report())).into_response()
}

/// The service router: health (unauthenticated), predict, feedback, drift.
/// Request bodies above [`MAX_BODY_BYTES`] are rejected with 413.
pub fn router(core: Arc<ServiceCore>) -> Router {
    Router::new()
        .route("/v1/health", get(health_handler))
        .route("/v1/predict", post(predict_handler))
        .route("/v1/feedback", post(feedback_handler))
        .route("/v1/drift", get(drift_handler))
        .layer(DefaultBodyLimit::max(MAX_BODY_BYTES))
        .with_state(core)
}

/// A running service: its bound address, state, and shutdown control.
pub struct ServiceHandle {
    pub addr: SocketAddr,
    pub core: Arc<ServiceCore>,
    shutdown_tx: Option<tokio::sync::oneshot::Sender<()>>,
    task: tokio::task::JoinHandle<std::io::Result<()>>,
}

impl ServiceHandle {
    /// Asks the server to stop accepting connections, finishes in-flight
    /// requests, and waits for the task to exit.
    pub async fn shutdown(mut self) -> Result<()> {
        if let Some(tx) = self.shutdown_tx.take() {
            let _ = tx.send(());
        }
        match self.task.await {
            Ok(Ok(())) => Ok(()),
            Ok(Err(e)) => Err(Error::io("service", e)),
            Err(e) => Err(Error::Config(format!("service task failed: {e}"))),
        }
    }
}

/// Binds the configured address and serves the router until
/// [`ServiceHandle::shutdown`] is called.
///
/// Returns as soon as the listener is bound, so callers can read the actual
/// port (useful with port 0). A busy port or unbindable address surfaces as
/// an I/O error.
pub async fn serve(core: Arc<ServiceCore>) -> Result<ServiceHandle> {
    let bind = format!("{}:{}", core.cfg.bind_addr, core.cfg.port);
    let listener = tokio::net::TcpListener::bind(&bind)
        .await
        .map_err(|e| Error::io(&bind, e))?;
    let addr = listener.local_addr().map_err(|e| Error::io(&bind, e))?;
    let (shutdown_tx, shutdown_rx) = tokio::sync::oneshot::channel::<()>();
    let app = router(core.clone());
    let task = tokio::spawn(async move {
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = shutdown_rx.await;
            })
            .await
    });
    Ok(ServiceHandle {
        addr,
        core,
        shutdown_tx: Some(shutdown_tx),
        task,
    })
}
