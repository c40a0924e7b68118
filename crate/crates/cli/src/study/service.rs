//! HTTP API for blinded pairwise voting.

use std::collections::HashMap;
use std::future::Future;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::Result;
use axum::body::Bytes;
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use tokio::net::TcpListener;

use super::session::{Role, Session, Side, StudyPool};
use super::votes::{latest_votes, read_votes, StudyReport, VoteKey, VoteLog, VoteRecord};

pub struct StudyState {
    pool: StudyPool,
    seed: u64,
    votes: Mutex<VoteBook>,
}

struct VoteBook {
    log: VoteLog,
    latest: HashMap<VoteKey, VoteRecord>,
    skipped_lines: usize,
}

impl StudyState {
    /// Replays any existing vote log so that restarts keep progress.
    pub fn new(pool: StudyPool, votes_path: PathBuf, seed: u64) -> Result<Self> {
        let (records, skipped_lines) = read_votes(&votes_path)?;
        let latest = latest_votes(records);
        let log = VoteLog::open(&votes_path)?;
        Ok(Self {
            pool,
            seed,
            votes: Mutex::new(VoteBook {
                log,
                latest,
                skipped_lines,
            }),
        })
    }

    fn session(&self, annotator: &str, factor: u32) -> Option<Session> {
        Session::build(&self.pool, annotator, factor, self.seed)
    }
}

struct ApiError(StatusCode, String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(serde_json::json!({ "error": self.1 }))).into_response()
    }
}

fn bad_request(msg: impl Into<String>) -> ApiError {
    ApiError(StatusCode::BAD_REQUEST, msg.into())
}

fn not_found(msg: impl Into<String>) -> ApiError {
    ApiError(StatusCode::NOT_FOUND, msg.into())
}

#[derive(Deserialize)]
struct SessionQuery {
    annotator: Option<String>,
    factor: Option<String>,
}

fn parse_session_query(q: &SessionQuery) -> Result<(String, u32), ApiError> {
    let annotator = q
        .annotator
        .as_deref()
        .map(str::trim)
        .filter(|a| !a.is_empty())
        .ok_or_else(|| bad_request("missing annotator"))?;
    let factor = q
        .factor
        .as_deref()
        .ok_or_else(|| bad_request("missing factor"))?
        .parse::<u32>()
        .map_err(|_| bad_request("factor must be a positive integer"))?;
    Ok((annotator.to_string(), factor))
}

#[derive(Serialize)]
struct PairView {
    index: usize,
    pair_id: String,
    original: String,
    left: String,
    right: String,
    voted: bool,
}

#[derive(Serialize)]
struct SessionView {
    annotator: String,
    factor: u32,
    total: usize,
    completed: usize,
    /// First unvoted pair, or `total` when the session is finished.
    next_index: usize,
    pairs: Vec<PairView>,
}

fn voted_flags(book: &VoteBook, s: &Session) -> Vec<bool> {
    s.pairs
        .iter()
        .map(|p| book.latest.contains_key(&(s.annotator.clone(), s.factor, p.pair_id.clone())))
        .collect()
}

async fn get_session(State(st): State<Arc<StudyState>>, Query(q): Query<SessionQuery>) -> Result<Json<SessionView>, ApiError> {
    let (annotator, factor) = parse_session_query(&q)?;
    let session = st.session(&annotator, factor).ok_or_else(|| not_found(format!("no study material for factor x{factor}")))?;
    let voted = voted_flags(&st.votes.lock().unwrap(), &session);
    let pairs = session
        .pairs
        .iter()
        .zip(&voted)
        .enumerate()
        .map(|(index, (p, &voted))| {
            let url = |role: &str| format!("/api/image/{}/{role}", p.pair_id);
            PairView {
                index,
                pair_id: p.pair_id.clone(),
                original: url("original"),
                left: url("left"),
                right: url("right"),
                voted,
            }
        })
        .collect();
    Ok(Json(SessionView {
        annotator,
        factor,
        total: session.pairs.len(),
        completed: voted.iter().filter(|v| **v).count(),
        next_index: voted.iter().position(|v| !v).unwrap_or(session.pairs.len()),
        pairs,
    }))
}

async fn get_image(
    State(st): State<Arc<StudyState>>,
    UrlPath((pair_id, role)): UrlPath<(String, String)>,
    Query(q): Query<SessionQuery>,
) -> Result<Response, ApiError> {
    let role: Role = role.parse().map_err(bad_request)?;
    let (annotator, factor) = parse_session_query(&q)?;
    let session = st.session(&annotator, factor).ok_or_else(|| not_found(format!("no study material for factor x{factor}")))?;
    let pair = session.pair(&pair_id).ok_or_else(|| not_found(format!("pair {pair_id} is not in this session")))?;
    let assets = st.pool.factors[&factor].iter().find(|a| a.pair_id == pair_id).expect("session pairs come from the pool");
    let path = assets.dir.join(pair.file_for(role));
    let bytes = tokio::fs::read(&path).await.map_err(|e| {
        log::error!("reading {}: {e}", path.display());
        ApiError(StatusCode::INTERNAL_SERVER_ERROR, "image unavailable".into())
    })?;
    Ok(([(header::CONTENT_TYPE, "image/png"), (header::CACHE_CONTROL, "no-store")], bytes).into_response())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct VoteRequest {
    annotator: String,
    factor: u32,
    pair_id: String,
    side: Side,
}

#[derive(Serialize)]
struct VoteAck {
    recorded: bool,
    completed: usize,
    total: usize,
}

async fn post_vote(State(st): State<Arc<StudyState>>, body: Bytes) -> Result<Json<VoteAck>, ApiError> {
    let req: VoteRequest = serde_json::from_slice(&body).map_err(|e| bad_request(format!("malformed vote: {e}")))?;
    let annotator = req.annotator.trim();
    if annotator.is_empty() {
        return Err(bad_request("missing annotator"));
    }
    let session = st
        .session(annotator, req.factor)
        .ok_or_else(|| not_found(format!("no study material for factor x{}", req.factor)))?;
    let pair = session
        .pair(&req.pair_id)
        .ok_or_else(|| not_found(format!("pair {} is not in this session", req.pair_id)))?;
    let names = &st.pool.factors[&req.factor].iter().find(|a| a.pair_id == req.pair_id).unwrap().methods;
    let timestamp = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as u64).unwrap_or(0);
    let record = VoteRecord {
        annotator_id: annotator.to_string(),
        factor: req.factor,
        pair_id: req.pair_id.clone(),
        chosen_side: req.side,
        chosen_method: pair.method_on(req.side, names),
        timestamp,
    };
    let mut book = st.votes.lock().unwrap();
    book.log.append(&record).map_err(|e| {
        log::error!("appending vote: {e:#}");
        ApiError(StatusCode::INTERNAL_SERVER_ERROR, "vote could not be stored".into())
    })?;
    book.latest.insert((record.annotator_id.clone(), record.factor, record.pair_id.clone()), record);
    let completed = voted_flags(&book, &session).iter().filter(|v| **v).count();
    Ok(Json(VoteAck {
        recorded: true,
        completed,
        total: session.pairs.len(),
    }))
}

async fn get_report(State(st): State<Arc<StudyState>>) -> Json<StudyReport> {
    let mut report = {
        let book = st.votes.lock().unwrap();
        StudyReport::from_latest(book.latest.values(), book.skipped_lines)
    };
    for (factor, pairs) in &st.pool.factors {
        report.include_methods(*factor, pairs.iter().flat_map(|p| [p.methods.method_a.as_str(), p.methods.method_b.as_str()]));
    }
    Json(report)
}

pub fn router(state: Arc<StudyState>) -> Router {
    Router::new()
        .route("/api/session", get(get_session))
        .route("/api/image/:pair_id/:role", get(get_image))
        .route("/api/vote", post(post_vote))
        .route("/api/report", get(get_report))
        .with_state(state)
}

/// Serves until `shutdown` resolves, then drains in-flight requests.
pub async fn serve(
    listener: TcpListener,
    state: Arc<StudyState>,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> Result<()> {
    axum::serve(listener, router(state)).with_graceful_shutdown(shutdown).await?;
    Ok(())
}
