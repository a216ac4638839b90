//! Wire contract and blocking client for the subsysqec service.
//!
//! The server exposes quick queries synchronously (`/code/info`,
//! `/circuit/dump`) and runs simulations as jobs: submit, poll status, fetch
//! the result. All long-running requests are seeded and deterministic, so a
//! re-submitted job reproduces its CSV byte for byte apart from wall times.

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use subsysqec_core::builders::ChainVariant;
pub use subsysqec_core::engine::FaultToleranceReport;
pub use subsysqec_core::experiments::{
    ChainR, CrossoverResult, ErrorType, ResultRow, ThresholdResult,
};

pub mod api {
    use super::*;

    /// Parameters of a memory extended-rectangle estimation job.
    #[derive(Debug, Clone, Serialize, Deserialize)]
    pub struct ExrecParams {
        pub n1: u16,
        pub n2: u16,
        pub pz: f64,
        /// Exactly one of `px` / `alpha` must be given.
        pub px: Option<f64>,
        pub alpha: Option<f64>,
        pub trials: u64,
        pub seed: u64,
        pub rz: u32,
        pub rx: u32,
    }

    #[derive(Debug, Clone, Serialize, Deserialize)]
    pub struct ThresholdParams {
        pub n1: u16,
        pub n2: u16,
        pub error_type: ErrorType,
        pub alpha: f64,
        pub seed: u64,
        pub rz: u32,
        pub rx: u32,
    }

    #[derive(Debug, Clone, Serialize, Deserialize)]
    pub struct ChainParams {
        pub alpha: f64,
        pub pz: f64,
        pub n_cycles: u32,
        pub trials: u64,
        pub seed: u64,
        pub rz: u32,
        pub rx: u32,
        /// None runs both variants and reports R; Some limits to one.
        pub variant: Option<ChainVariant>,
    }

    #[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
    #[serde(rename_all = "lowercase")]
    pub enum ConversionDirection {
        Up,
        Down,
    }

    #[derive(Debug, Clone, Serialize, Deserialize)]
    pub struct VerifyConversionParams {
        pub direction: ConversionDirection,
        pub streams: u32,
        pub seed: u64,
    }

    #[derive(Debug, Clone, Serialize, Deserialize)]
    pub struct VerifyRoundtripParams {
        pub trials: u64,
        pub seed: u64,
    }

    /// Job submission body.
    #[derive(Debug, Clone, Serialize, Deserialize)]
    #[serde(tag = "kind", rename_all = "kebab-case")]
    pub enum JobRequest {
        Exrec(ExrecParams),
        Threshold(ThresholdParams),
        Chain(ChainParams),
        VerifyConversion(VerifyConversionParams),
        VerifyRoundtrip(VerifyRoundtripParams),
    }

    #[derive(Debug, Clone, Serialize, Deserialize)]
    pub struct JobCreated {
        pub id: String,
    }

    #[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
    #[serde(rename_all = "lowercase")]
    pub enum JobState {
        Queued,
        Running,
        Done,
        Failed,
    }

    #[derive(Debug, Clone, Serialize, Deserialize)]
    pub struct JobStatus {
        pub id: String,
        pub state: JobState,
        pub progress_done: u64,
        pub progress_total: u64,
        pub error: Option<String>,
    }

    /// Result of a roundtrip verification job.
    #[derive(Debug, Clone, Serialize, Deserialize)]
    pub struct RoundtripReport {
        pub trials_per_probe: u64,
        pub failures: u64,
        pub probes: Vec<String>,
    }

    /// Completed-job payload; exactly one of the fields is set, matching the
    /// submitted kind.
    #[derive(Debug, Clone, Serialize, Deserialize)]
    pub struct JobOutput {
        pub rows: Vec<ResultRow>,
        /// The rows rendered in the canonical CSV schema.
        pub csv: String,
        pub chain: Option<ChainR>,
        pub threshold: Option<ThresholdResult>,
        pub fault_tolerance: Option<FaultToleranceReport>,
        pub roundtrip: Option<RoundtripReport>,
    }

    #[derive(Debug, Clone, Serialize, Deserialize)]
    pub struct CodeInfo {
        pub n1: u16,
        pub n2: u16,
        pub n: usize,
        pub x_stabilizers: usize,
        pub z_stabilizers: usize,
        pub x_gauge: usize,
        pub z_gauge: usize,
        pub t_z: usize,
        pub t_x: usize,
        pub listing: String,
    }

    #[derive(Debug, Clone, Serialize, Deserialize)]
    pub struct CircuitDump {
        pub name: String,
        pub locations: usize,
        pub moments: usize,
        pub peak_live: usize,
        pub text: Option<String>,
        pub json: Option<serde_json::Value>,
    }

    #[derive(Debug, Clone, Serialize, Deserialize)]
    pub struct ErrorBody {
        pub error: String,
    }
}

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("transport: {0}")]
    Transport(#[from] reqwest::Error),
    #[error("server: {0}")]
    Server(String),
    #[error("job failed: {0}")]
    JobFailed(String),
}

pub type Result<T> = std::result::Result<T, ClientError>;

/// Blocking client for one server base URL.
pub struct Client {
    base: String,
    http: reqwest::blocking::Client,
}

impl Client {
    pub fn new(base: impl Into<String>) -> Self {
        let mut base = base.into();
        while base.ends_with('/') {
            base.pop();
        }
        Self {
            base,
            http: reqwest::blocking::Client::builder()
                .timeout(None)
                .build()
                .expect("client construction"),
        }
    }

    fn check<T: serde::de::DeserializeOwned>(resp: reqwest::blocking::Response) -> Result<T> {
        if resp.status().is_success() {
            Ok(resp.json()?)
        } else {
            let status = resp.status();
            let body: std::result::Result<api::ErrorBody, _> = resp.json();
            Err(ClientError::Server(match body {
                Ok(b) => b.error,
                Err(_) => format!("http status {status}"),
            }))
        }
    }

    pub fn health(&self) -> Result<()> {
        let _: serde_json::Value =
            Self::check(self.http.get(format!("{}/api/v1/health", self.base)).send()?)?;
        Ok(())
    }

    pub fn code_info(&self, n1: u16, n2: u16) -> Result<api::CodeInfo> {
        Self::check(
            self.http
                .get(format!("{}/api/v1/code/info", self.base))
                .query(&[("n1", n1), ("n2", n2)])
                .send()?,
        )
    }

    pub fn circuit_dump(
        &self,
        name: &str,
        params: &[(String, String)],
        format: &str,
    ) -> Result<api::CircuitDump> {
        let mut query: Vec<(String, String)> =
            vec![("name".into(), name.into()), ("format".into(), format.into())];
        query.extend(params.iter().cloned());
        Self::check(
            self.http
                .get(format!("{}/api/v1/circuit/dump", self.base))
                .query(&query)
                .send()?,
        )
    }

    pub fn submit(&self, req: &api::JobRequest) -> Result<api::JobCreated> {
        Self::check(self.http.post(format!("{}/api/v1/jobs", self.base)).json(req).send()?)
    }

    pub fn status(&self, id: &str) -> Result<api::JobStatus> {
        Self::check(self.http.get(format!("{}/api/v1/jobs/{id}", self.base)).send()?)
    }

    pub fn result(&self, id: &str) -> Result<api::JobOutput> {
        Self::check(self.http.get(format!("{}/api/v1/jobs/{id}/result", self.base)).send()?)
    }

    /// Submits a job and polls until completion, reporting progress.
    pub fn run_to_completion(
        &self,
        req: &api::JobRequest,
        poll: std::time::Duration,
        mut on_progress: impl FnMut(u64, u64),
    ) -> Result<api::JobOutput> {
        let created = self.submit(req)?;
        loop {
            let st = self.status(&created.id)?;
            on_progress(st.progress_done, st.progress_total);
            match st.state {
                api::JobState::Done => return self.result(&created.id),
                api::JobState::Failed => {
                    return Err(ClientError::JobFailed(
                        st.error.unwrap_or_else(|| "unknown".into()),
                    ))
                }
                _ => std::thread::sleep(poll),
            }
        }
    }
}
