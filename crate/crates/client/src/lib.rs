//! Async client for the tokstore HTTP service.

use reqwest::{Method, StatusCode};
use serde::de::DeserializeOwned;
use serde::Serialize;
use tokstore_wire::*;

#[derive(Debug, thiserror::Error)]
pub enum ClientError {
    /// The service answered with an error body.
    #[error("{} ({}): {}", body.category, status, body.message)]
    Api { status: u16, body: ErrorBody },
    #[error("request failed: {0}")]
    Transport(#[from] reqwest::Error),
    #[error("unexpected response ({status}): {message}")]
    Protocol { status: u16, message: String },
}

impl ClientError {
    /// Process exit code for this failure, stable per error category.
    pub fn exit_code(&self) -> i32 {
        match self {
            ClientError::Api { body, .. } => body.exit_code,
            ClientError::Transport(_) | ClientError::Protocol { .. } => EXIT_TRANSPORT,
        }
    }

    pub fn category(&self) -> &str {
        match self {
            ClientError::Api { body, .. } => &body.category,
            _ => "transport",
        }
    }
}

pub type Result<T> = std::result::Result<T, ClientError>;

#[derive(Debug, Clone)]
pub struct Client {
    http: reqwest::Client,
    base: String,
}

impl Client {
    /// `base` is the service root, e.g. `http://127.0.0.1:7070`.
    pub fn new(base: impl Into<String>) -> Self {
        Self {
            http: reqwest::Client::new(),
            base: base.into().trim_end_matches('/').to_string(),
        }
    }

    pub fn base_url(&self) -> &str {
        &self.base
    }

    async fn call<B: Serialize, T: DeserializeOwned>(
        &self,
        method: Method,
        path: &str,
        body: Option<&B>,
    ) -> Result<T> {
        let mut req = self.http.request(method, format!("{}{}", self.base, path));
        if let Some(b) = body {
            req = req.json(b);
        }
        let resp = req.send().await?;
        let status = resp.status();
        let bytes = resp.bytes().await?;
        if !status.is_success() {
            return Err(match serde_json::from_slice::<ErrorBody>(&bytes) {
                Ok(body) => ClientError::Api {
                    status: status.as_u16(),
                    body,
                },
                Err(_) => ClientError::Protocol {
                    status: status.as_u16(),
                    message: String::from_utf8_lossy(&bytes).into_owned(),
                },
            });
        }
        serde_json::from_slice(&bytes).map_err(|e| ClientError::Protocol {
            status: status.as_u16(),
            message: format!("undecodable body: {e}"),
        })
    }

    async fn post<B: Serialize, T: DeserializeOwned>(&self, path: &str, body: &B) -> Result<T> {
        self.call(Method::POST, path, Some(body)).await
    }

    async fn get<T: DeserializeOwned>(&self, path: &str) -> Result<T> {
        self.call::<(), T>(Method::GET, path, None).await
    }

    async fn delete(&self, path: &str) -> Result<()> {
        let resp = self
            .http
            .delete(format!("{}{}", self.base, path))
            .send()
            .await?;
        let status = resp.status();
        if status == StatusCode::NO_CONTENT || status.is_success() {
            return Ok(());
        }
        let bytes = resp.bytes().await?;
        Err(match serde_json::from_slice::<ErrorBody>(&bytes) {
            Ok(body) => ClientError::Api {
                status: status.as_u16(),
                body,
            },
            Err(_) => ClientError::Protocol {
                status: status.as_u16(),
                message: String::from_utf8_lossy(&bytes).into_owned(),
            },
        })
    }

    pub async fn health(&self) -> Result<Health> {
        self.get("/health").await
    }

    pub async fn pack(&self, req: &PackRequest) -> Result<PackResponse> {
        self.post("/pack", req).await
    }

    pub async fn unpack(&self, req: &UnpackRequest) -> Result<UnpackResponse> {
        self.post("/unpack", req).await
    }

    pub async fn stats(&self, req: &StatsRequest) -> Result<StorageReport> {
        self.post("/stats", req).await
    }

    pub async fn bench(&self, req: &BenchRequest) -> Result<BenchReport> {
        self.post("/bench", req).await
    }

    pub async fn synthetic(&self, req: &SyntheticRequest) -> Result<SyntheticResponse> {
        self.post("/synthetic", req).await
    }

    pub async fn dump_batch(&self, req: &DumpBatchRequest) -> Result<DumpBatchResponse> {
        self.post("/dump-batch", req).await
    }

    pub async fn open_archive(&self, req: &OpenArchiveRequest) -> Result<ArchiveInfo> {
        self.post("/archives", req).await
    }

    pub async fn archive_info(&self, id: &str) -> Result<ArchiveInfo> {
        self.get(&format!("/archives/{id}")).await
    }

    pub async fn close_archive(&self, id: &str) -> Result<()> {
        self.delete(&format!("/archives/{id}")).await
    }

    pub async fn record(&self, id: &str, index: u64, original: bool) -> Result<RecordResponse> {
        self.get(&format!("/archives/{id}/records/{index}?original={original}"))
            .await
    }

    pub async fn quantize(&self, id: &str, req: &QuantizeRequest) -> Result<QuantizeResponse> {
        self.post(&format!("/archives/{id}/quantize"), req).await
    }

    pub async fn create_session(&self, req: &CreateSessionRequest) -> Result<SessionInfo> {
        self.post("/sessions", req).await
    }

    pub async fn session_info(&self, id: &str) -> Result<SessionInfo> {
        self.get(&format!("/sessions/{id}")).await
    }

    pub async fn next_batch(&self, id: &str) -> Result<Option<BatchPayload>> {
        let resp: NextBatchResponse = self.post(&format!("/sessions/{id}/next"), &()).await?;
        Ok(resp.batch)
    }

    pub async fn seek(&self, id: &str, epoch: u64, batch_index: u64) -> Result<SessionInfo> {
        self.post(
            &format!("/sessions/{id}/seek"),
            &SeekRequest { epoch, batch_index },
        )
        .await
    }

    pub async fn session_stats(&self, id: &str) -> Result<PipelineStats> {
        self.get(&format!("/sessions/{id}/stats")).await
    }

    pub async fn close_session(&self, id: &str) -> Result<()> {
        self.delete(&format!("/sessions/{id}")).await
    }
}
