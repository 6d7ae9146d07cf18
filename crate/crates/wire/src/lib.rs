//! Request and response bodies for the tokstore HTTP service.
//!
//! Paths are interpreted on the server's filesystem. Tensors travel as
//! base64 of the little-endian dump format so they arrive bit-exact.

use std::path::PathBuf;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use tokstore::archive::ArchiveHeader;
use tokstore::corpus::SyntheticSpec;
use tokstore::pipeline::{Batch, PipelineConfig};
use tokstore::{ErrorCategory, WriteOptions};

pub use tokstore::bench::BenchReport;
pub use tokstore::pipeline::PipelineStats;
pub use tokstore::StorageReport;

/// Exit code for a session or archive handle the server does not know.
pub const EXIT_NOT_FOUND: i32 = 11;
/// Exit code when the service cannot be reached or answers garbage.
pub const EXIT_TRANSPORT: i32 = 12;
/// Exit code for failures inside the service itself.
pub const EXIT_INTERNAL: i32 = 13;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    /// An [`ErrorCategory`] name, or `not_found` / `internal`.
    pub category: String,
    pub exit_code: i32,
    pub message: String,
}

impl ErrorBody {
    pub fn from_category(category: ErrorCategory, message: impl Into<String>) -> Self {
        Self {
            category: category.as_str().to_string(),
            exit_code: category.exit_code(),
            message: message.into(),
        }
    }

    pub fn not_found(message: impl Into<String>) -> Self {
        Self {
            category: "not_found".into(),
            exit_code: EXIT_NOT_FOUND,
            message: message.into(),
        }
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self {
            category: "internal".into(),
            exit_code: EXIT_INTERNAL,
            message: message.into(),
        }
    }
}

impl From<&tokstore::Error> for ErrorBody {
    fn from(e: &tokstore::Error) -> Self {
        Self::from_category(e.category(), e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PackRequest {
    pub tokens: PathBuf,
    pub codebook: PathBuf,
    #[serde(default)]
    pub labels: Option<PathBuf>,
    pub out: PathBuf,
    #[serde(default)]
    pub options: WriteOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PackResponse {
    pub header: ArchiveHeader,
    pub report: StorageReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnpackRequest {
    pub archive: PathBuf,
    pub tokens_out: PathBuf,
    #[serde(default)]
    pub labels_out: Option<PathBuf>,
    #[serde(default)]
    pub codebook_out: Option<PathBuf>,
    /// Emit packed ranks instead of original code ids.
    #[serde(default)]
    pub ranked: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnpackResponse {
    pub records: u64,
    pub side: u16,
    pub vocab: u16,
    pub labels_written: bool,
    pub codebook_written: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatsRequest {
    pub archive: PathBuf,
}

fn default_sequential() -> usize {
    1000
}

fn default_random_reads() -> usize {
    1000
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenchRequest {
    pub archive: PathBuf,
    #[serde(default = "default_sequential")]
    pub sequential: usize,
    #[serde(default = "default_random_reads")]
    pub random_reads: usize,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticRequest {
    pub spec: SyntheticSpec,
    pub tokens_out: PathBuf,
    pub codebook_out: PathBuf,
    #[serde(default)]
    pub labels_out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyntheticResponse {
    pub n_images: u64,
    pub side: u32,
    pub vocab: u32,
    pub labels_written: bool,
}

fn default_count() -> u64 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DumpBatchRequest {
    pub archive: PathBuf,
    #[serde(default)]
    pub config: PipelineConfig,
    /// First batch index within `config.epoch`.
    #[serde(default)]
    pub first_batch: u64,
    #[serde(default = "default_count")]
    pub count: u64,
    pub out_dir: PathBuf,
    #[serde(default)]
    pub prefix: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DumpedBatch {
    pub epoch: u64,
    pub index: u64,
    pub shape: [u32; 4],
    pub files: Vec<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DumpBatchResponse {
    pub batches: Vec<DumpedBatch>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpenArchiveRequest {
    pub path: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArchiveInfo {
    pub id: String,
    pub path: PathBuf,
    pub header: ArchiveHeader,
    pub file_len: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordResponse {
    pub index: u64,
    pub side: u16,
    /// Row-major tokens, in original ids when `original` is set.
    pub tokens: Vec<u16>,
    pub label: Option<u16>,
    pub original: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantizeRequest {
    pub vectors: Vec<Vec<f32>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuantizeResponse {
    /// Nearest code per vector, as original code ids.
    pub codes: Vec<u16>,
    /// The same codes in packed-rank space.
    pub ranks: Vec<u16>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CreateSessionRequest {
    pub archive: PathBuf,
    #[serde(default)]
    pub config: PipelineConfig,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionInfo {
    pub id: String,
    pub epoch: u64,
    pub position: u64,
    pub batches_per_epoch: u64,
    pub classes: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeekRequest {
    pub epoch: u64,
    pub batch_index: u64,
}

/// Binary blob carried as base64 text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Blob(pub Vec<u8>);

impl Serialize for Blob {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&STANDARD.encode(&self.0))
    }
}

impl<'de> Deserialize<'de> for Blob {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        STANDARD
            .decode(text.as_bytes())
            .map(Blob)
            .map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchPayload {
    pub epoch: u64,
    pub index: u64,
    pub records: Vec<u64>,
    pub shape: [u32; 4],
    pub classes: usize,
    /// Tensor in dump format.
    pub tensor: Blob,
    /// Soft labels in dump format, shape `[batch, classes, 1, 1]`.
    pub labels: Option<Blob>,
}

impl From<&Batch> for BatchPayload {
    fn from(b: &Batch) -> Self {
        Self {
            epoch: b.epoch,
            index: b.index,
            records: b.records.clone(),
            shape: b.shape,
            classes: b.classes,
            tensor: Blob(b.tensor_dump()),
            labels: b.labels_dump().map(Blob),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NextBatchResponse {
    /// `None` once the epoch is exhausted.
    pub batch: Option<BatchPayload>,
}
