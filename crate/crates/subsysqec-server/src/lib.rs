//! Axum service wrapping the simulation library.
//!
//! Quick structural queries answer synchronously; Monte Carlo estimations,
//! threshold searches, chain comparisons, and exhaustive fault-tolerance
//! verifications run as jobs on worker threads (each job parallelizes over
//! the rayon pool internally) with polled progress.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::{Arc, Mutex};

use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;

use subsysqec_client::api::{self, JobRequest, JobState};
use subsysqec_core::builders::{self, ChainVariant};
use subsysqec_core::circuit::{Circuit, Probe};
use subsysqec_core::code::SubsystemCode;
use subsysqec_core::engine::{trial_rng, verify_single_fault_tolerance, Engine, ProbeRunner};
use subsysqec_core::experiments::{
    chain_r, estimate_failure, pseudo_threshold, to_row, ChainConfig, CircuitFamily, Progress,
    ThresholdOptions,
};
use subsysqec_core::noise::{FaultAssignment, NoiseModel};

struct Job {
    state: JobState,
    progress: Progress,
    output: Option<api::JobOutput>,
    error: Option<String>,
}

#[derive(Clone, Default)]
pub struct AppState {
    jobs: Arc<Mutex<HashMap<String, Arc<Mutex<Job>>>>>,
}

struct AppError(StatusCode, String);

impl IntoResponse for AppError {
    fn into_response(self) -> Response {
        (self.0, Json(api::ErrorBody { error: self.1 })).into_response()
    }
}

fn bad_request(msg: impl Into<String>) -> AppError {
    AppError(StatusCode::BAD_REQUEST, msg.into())
}

pub fn router() -> Router {
    Router::new()
        .route("/api/v1/health", get(health))
        .route("/api/v1/code/info", get(code_info))
        .route("/api/v1/circuit/dump", get(circuit_dump))
        .route("/api/v1/jobs", post(create_job))
        .route("/api/v1/jobs/{id}", get(job_status))
        .route("/api/v1/jobs/{id}/result", get(job_result))
        .with_state(AppState::default())
}

/// Binds and serves until the process ends; returns the bound address once
/// listening (useful with port 0).
pub async fn bind(addr: SocketAddr) -> std::io::Result<(SocketAddr, BoundServer)> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    let local = listener.local_addr()?;
    Ok((local, BoundServer { listener }))
}

pub struct BoundServer {
    listener: tokio::net::TcpListener,
}

impl BoundServer {
    pub async fn serve(self) -> std::io::Result<()> {
        axum::serve(self.listener, router()).await
    }
}

async fn health() -> Json<serde_json::Value> {
    Json(serde_json::json!({ "status": "ok" }))
}

#[derive(Deserialize)]
struct CodeQuery {
    n1: u16,
    n2: u16,
}

async fn code_info(Query(q): Query<CodeQuery>) -> Result<Json<api::CodeInfo>, AppError> {
    let code = SubsystemCode::new(q.n1, q.n2).map_err(|e| bad_request(e.to_string()))?;
    let (t_z, t_x) = code.correctable_counts();
    Ok(Json(api::CodeInfo {
        n1: q.n1,
        n2: q.n2,
        n: code.n(),
        x_stabilizers: code.x_stabilizer_count(),
        z_stabilizers: code.z_stabilizer_count(),
        x_gauge: code.x_gauge_count(),
        z_gauge: code.z_gauge_count(),
        t_z,
        t_x,
        listing: code.generator_listing(),
    }))
}

#[derive(Deserialize)]
struct DumpQuery {
    name: String,
    format: Option<String>,
    n1: Option<u16>,
    n2: Option<u16>,
    col: Option<u16>,
    row: Option<u16>,
    rz: Option<u32>,
    rx: Option<u32>,
    passes: Option<u32>,
    n: Option<u32>,
    variant: Option<String>,
    probe: Option<String>,
}

fn parse_probe(s: Option<&str>) -> Result<Probe, AppError> {
    match s.unwrap_or("zero") {
        "zero" | "0" => Ok(Probe::Zero),
        "one" | "1" => Ok(Probe::One),
        "plus" | "+" => Ok(Probe::Plus),
        "minus" | "-" => Ok(Probe::Minus),
        other => Err(bad_request(format!("unknown probe {other:?}"))),
    }
}

fn build_named_circuit(q: &DumpQuery) -> Result<Circuit, AppError> {
    let n1 = q.n1.unwrap_or(5);
    let n2 = q.n2.unwrap_or(3);
    let rz = q.rz.unwrap_or(3);
    let rx = q.rx.unwrap_or(3);
    let probe = parse_probe(q.probe.as_deref())?;
    let code = || SubsystemCode::new(n1, n2).map_err(|e| bad_request(e.to_string()));
    let circuit = match q.name.as_str() {
        "z-syndrome-extraction" => {
            builders::z_syndrome_extraction(&code()?, q.col.unwrap_or(1))
        }
        "x-syndrome-extraction" => {
            builders::x_syndrome_extraction(&code()?, q.row.unwrap_or(1))
        }
        "ec-round" => builders::ec_round(&code()?, rz, rx),
        "encode" => builders::encode_logical(&code()?, probe),
        "convert-up" => builders::convert_up(),
        "convert-down" => builders::convert_down(q.passes.unwrap_or(3)),
        "memory-exrec" => builders::memory_exrec(&code()?, rz, rx, probe),
        "convert-up-exrec" => builders::convert_up_exrec(rz, rx, probe),
        "convert-down-exrec" => builders::convert_down_exrec(rz, rx, probe),
        "roundtrip" => builders::roundtrip_circuit(probe),
        "chain" => {
            let variant = match q.variant.as_deref().unwrap_or("plain-3x3") {
                "plain-3x3" | "plain" => ChainVariant::Plain33,
                "combined" => ChainVariant::Combined,
                other => return Err(bad_request(format!("unknown variant {other:?}"))),
            };
            builders::chain_circuit(variant, q.n.unwrap_or(1), rz, rx, probe)
        }
        other => return Err(bad_request(format!("unknown circuit builder {other:?}"))),
    }
    .map_err(|e| bad_request(e.to_string()))?;
    Ok(circuit)
}

async fn circuit_dump(Query(q): Query<DumpQuery>) -> Result<Json<api::CircuitDump>, AppError> {
    let circuit = build_named_circuit(&q)?;
    let format = q.format.clone().unwrap_or_else(|| "text".into());
    let (text, json) = match format.as_str() {
        "text" => (Some(circuit.dump_text()), None),
        "json" => (
            None,
            Some(serde_json::to_value(&circuit).map_err(|e| bad_request(e.to_string()))?),
        ),
        other => return Err(bad_request(format!("unknown format {other:?}"))),
    };
    Ok(Json(api::CircuitDump {
        name: q.name,
        locations: circuit.fault_location_count(),
        moments: circuit.moments.len(),
        peak_live: circuit.peak_live,
        text,
        json,
    }))
}

fn noise_from(pz: f64, px: Option<f64>, alpha: Option<f64>) -> Result<NoiseModel, String> {
    match (px, alpha) {
        (Some(px), None) => Ok(NoiseModel::from_rates(pz, px)),
        (None, Some(alpha)) if alpha > 0.0 => Ok(NoiseModel::from_alpha(pz, alpha)),
        (None, None) => Ok(NoiseModel::from_alpha(pz, 1.0)),
        _ => Err("give exactly one of px or alpha".into()),
    }
}

fn run_job(req: JobRequest, progress: &Progress) -> Result<api::JobOutput, String> {
    let mut out = api::JobOutput {
        rows: Vec::new(),
        csv: String::new(),
        chain: None,
        threshold: None,
        fault_tolerance: None,
        roundtrip: None,
    };
    match req {
        JobRequest::Exrec(p) => {
            let model = noise_from(p.pz, p.px, p.alpha)?;
            let family =
                CircuitFamily::MemoryExrec { n1: p.n1, n2: p.n2, rz: p.rz, rx: p.rx };
            let est = estimate_failure(&family, &model, p.trials, p.seed, progress)
                .map_err(|e| e.to_string())?;
            out.rows.push(to_row(&family, &model, p.seed, &est));
        }
        JobRequest::Threshold(p) => {
            let opts = ThresholdOptions { rz: p.rz, rx: p.rx, ..ThresholdOptions::default() };
            let res =
                pseudo_threshold(p.n1, p.n2, p.error_type, p.alpha, p.seed, &opts, progress)
                    .map_err(|e| e.to_string())?;
            out.rows = res.rows.clone();
            out.threshold = Some(res);
        }
        JobRequest::Chain(p) => {
            let cfg = ChainConfig {
                alpha: p.alpha,
                pz: p.pz,
                n_cycles: p.n_cycles,
                trials: p.trials,
                seed: p.seed,
                rz: p.rz,
                rx: p.rx,
            };
            match p.variant {
                None => {
                    let r = chain_r(&cfg, progress).map_err(|e| e.to_string())?;
                    out.rows.push(r.plain.clone());
                    out.rows.push(r.combined.clone());
                    out.chain = Some(r);
                }
                Some(variant) => {
                    let model = NoiseModel::from_alpha(p.pz, p.alpha);
                    let family = CircuitFamily::Chain {
                        variant,
                        n_cycles: p.n_cycles,
                        rz: p.rz,
                        rx: p.rx,
                    };
                    let est = estimate_failure(&family, &model, p.trials, p.seed, progress)
                        .map_err(|e| e.to_string())?;
                    out.rows.push(to_row(&family, &model, p.seed, &est));
                }
            }
        }
        JobRequest::VerifyConversion(p) => {
            let c33 = SubsystemCode::new(3, 3).map_err(|e| e.to_string())?;
            let c53 = SubsystemCode::new(5, 3).map_err(|e| e.to_string())?;
            let (name, circuits, code_out) = match p.direction {
                api::ConversionDirection::Up => (
                    "convert-up-exrec",
                    vec![
                        (Probe::Zero, builders::convert_up_exrec(3, 3, Probe::Zero)),
                        (Probe::Plus, builders::convert_up_exrec(3, 3, Probe::Plus)),
                    ],
                    &c53,
                ),
                api::ConversionDirection::Down => (
                    "convert-down-exrec",
                    vec![
                        (Probe::Zero, builders::convert_down_exrec(3, 3, Probe::Zero)),
                        (Probe::Plus, builders::convert_down_exrec(3, 3, Probe::Plus)),
                    ],
                    &c33,
                ),
            };
            let circuits: Vec<(Probe, Circuit)> = circuits
                .into_iter()
                .map(|(probe, c)| c.map(|c| (probe, c)))
                .collect::<Result<_, _>>()
                .map_err(|e| e.to_string())?;
            progress.add_total(
                circuits.iter().map(|(_, c)| c.single_fault_count() as u64).sum::<u64>()
                    * p.streams as u64,
            );
            let report =
                verify_single_fault_tolerance(name, circuits, code_out, p.streams, p.seed)
                    .map_err(|e| e.to_string())?;
            progress.tick(report.runs);
            out.fault_tolerance = Some(report);
        }
        JobRequest::VerifyRoundtrip(p) => {
            let c33 = SubsystemCode::new(3, 3).map_err(|e| e.to_string())?;
            let probes = [Probe::Zero, Probe::One, Probe::Plus, Probe::Minus];
            progress.add_total(p.trials * probes.len() as u64);
            let mut failures = 0u64;
            let mut engine = Engine::new();
            for (k, probe) in probes.iter().enumerate() {
                let circ = builders::roundtrip_circuit(*probe).map_err(|e| e.to_string())?;
                let runner = ProbeRunner::new(circ, &c33, *probe).map_err(|e| e.to_string())?;
                for t in 0..p.trials {
                    let mut rng = trial_rng(p.seed, (k as u64) << 48 | t);
                    let res = runner
                        .run_trial(&mut engine, &FaultAssignment::empty(), &mut rng)
                        .map_err(|e| e.to_string())?;
                    failures += res.failed as u64;
                    progress.tick(1);
                }
            }
            out.roundtrip = Some(api::RoundtripReport {
                trials_per_probe: p.trials,
                failures,
                probes: probes.iter().map(|p| format!("{p:?}")).collect(),
            });
        }
    }
    out.csv = subsysqec_core::experiments::write_csv(&out.rows);
    Ok(out)
}

async fn create_job(
    State(state): State<AppState>,
    Json(req): Json<JobRequest>,
) -> Result<Json<api::JobCreated>, AppError> {
    let id = uuid::Uuid::new_v4().to_string();
    let progress = Progress::new();
    let job = Arc::new(Mutex::new(Job {
        state: JobState::Queued,
        progress: progress.clone(),
        output: None,
        error: None,
    }));
    state.jobs.lock().unwrap().insert(id.clone(), job.clone());
    std::thread::spawn(move || {
        job.lock().unwrap().state = JobState::Running;
        let result = run_job(req, &progress);
        let mut j = job.lock().unwrap();
        match result {
            Ok(out) => {
                j.output = Some(out);
                j.state = JobState::Done;
            }
            Err(e) => {
                j.error = Some(e);
                j.state = JobState::Failed;
            }
        }
    });
    Ok(Json(api::JobCreated { id }))
}

fn lookup(state: &AppState, id: &str) -> Result<Arc<Mutex<Job>>, AppError> {
    state
        .jobs
        .lock()
        .unwrap()
        .get(id)
        .cloned()
        .ok_or_else(|| AppError(StatusCode::NOT_FOUND, format!("no job {id}")))
}

async fn job_status(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> Result<Json<api::JobStatus>, AppError> {
    let job = lookup(&state, &id)?;
    let j = job.lock().unwrap();
    let (done, total) = j.progress.snapshot();
    Ok(Json(api::JobStatus {
        id,
        state: j.state,
        progress_done: done,
        progress_total: total,
        error: j.error.clone(),
    }))
}

async fn job_result(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> Result<Json<api::JobOutput>, AppError> {
    let job = lookup(&state, &id)?;
    let j = job.lock().unwrap();
    match (&j.state, &j.output) {
        (JobState::Done, Some(out)) => Ok(Json(out.clone())),
        (JobState::Failed, _) => Err(AppError(
            StatusCode::INTERNAL_SERVER_ERROR,
            j.error.clone().unwrap_or_else(|| "job failed".into()),
        )),
        _ => Err(AppError(StatusCode::CONFLICT, "job still running".into())),
    }
}
