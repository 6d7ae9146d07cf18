use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use tokstore::adapter::AdapterVariant;
use tokstore::corpus::{SyntheticSpec, TokenDistribution};
use tokstore::pipeline::{AdapterSpec, Mode, PipelineConfig};
use tokstore::WriteOptions;
use tokstore_client::{Client, ClientError};
use tokstore_server::AppState;
use tokstore_wire::{
    BenchRequest, DumpBatchRequest, PackRequest, StatsRequest, SyntheticRequest, UnpackRequest,
};

/// Pack, inspect and stream visual-token archives.
///
/// Every command except `serve` talks to a tokstore service. Without
/// `--server` a private service is started on a loopback port for the
/// duration of the command.
#[derive(Debug, Parser)]
#[command(name = "tokstore", version)]
struct Cli {
    /// Base URL of a running service, e.g. http://127.0.0.1:7070
    #[arg(long, global = true, env = "TOKSTORE_SERVER")]
    server: Option<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Pack a raw token file into an archive and print its storage report.
    Pack(PackArgs),
    /// Expand an archive back into raw token, label and codebook files.
    Unpack(UnpackArgs),
    /// Print the storage report of an archive.
    Stats(StatsArgs),
    /// Measure sequential and random-access decode latency.
    Bench(BenchArgs),
    /// Write augmented batches in the tensor dump format.
    DumpBatch(DumpBatchArgs),
    /// Generate a seeded synthetic token corpus, codebook and labels.
    GenSynthetic(GenArgs),
    /// Run the HTTP service in the foreground.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
struct PackArgs {
    #[arg(long)]
    tokens: PathBuf,
    #[arg(long)]
    codebook: PathBuf,
    #[arg(long)]
    labels: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Store escape bytes without the Huffman stage.
    #[arg(long)]
    no_huffman: bool,
    /// Keep original indices instead of ranking them by popularity.
    #[arg(long)]
    no_remap: bool,
}

#[derive(Debug, Args)]
struct UnpackArgs {
    #[arg(long)]
    archive: PathBuf,
    #[arg(long)]
    tokens_out: PathBuf,
    #[arg(long)]
    labels_out: Option<PathBuf>,
    #[arg(long)]
    codebook_out: Option<PathBuf>,
    /// Emit packed ranks rather than original code ids.
    #[arg(long)]
    ranked: bool,
}

#[derive(Debug, Args)]
struct StatsArgs {
    #[arg(long)]
    archive: PathBuf,
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[arg(long)]
    archive: PathBuf,
    /// Records decoded in order from the start.
    #[arg(long, default_value_t = 1000)]
    sequential: usize,
    /// Single-record reads at random positions.
    #[arg(long, default_value_t = 1000)]
    random_reads: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Train,
    Eval,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum AdapterArg {
    Conv4,
    Conv2,
    Pointwise,
}

#[derive(Debug, Args)]
struct DumpBatchArgs {
    #[arg(long)]
    archive: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
    /// JSON pipeline configuration; the flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epoch: Option<u64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Worker threads; output does not depend on this.
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    classes: Option<usize>,
    #[arg(long, value_enum)]
    adapter: Option<AdapterArg>,
    #[arg(long, default_value_t = 768)]
    adapter_width: usize,
    #[arg(long, default_value_t = 0)]
    adapter_seed: u64,
    #[arg(long, default_value_t = 0)]
    first_batch: u64,
    #[arg(long, default_value_t = 1)]
    count: u64,
    #[arg(long)]
    prefix: Option<String>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum DistArg {
    Uniform,
    Zipf,
}

#[derive(Debug, Args)]
struct GenArgs {
    #[arg(long, value_enum, default_value = "uniform")]
    dist: DistArg,
    /// Zipf exponent.
    #[arg(long, default_value_t = 1.0)]
    s: f64,
    #[arg(long, default_value_t = 1000)]
    n_images: usize,
    #[arg(long, default_value_t = 32)]
    side: usize,
    #[arg(long, default_value_t = 391)]
    vocab: usize,
    #[arg(long, default_value_t = 32)]
    dim: usize,
    /// Label classes; 0 writes no labels.
    #[arg(long, default_value_t = 10)]
    classes: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    tokens_out: PathBuf,
    #[arg(long)]
    codebook_out: PathBuf,
    #[arg(long)]
    labels_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:7070")]
    listen: SocketAddr,
}

enum Failure {
    Client(ClientError),
    Local { code: i32, message: String },
}

impl From<ClientError> for Failure {
    fn from(e: ClientError) -> Self {
        Failure::Client(e)
    }
}

impl From<tokstore::Error> for Failure {
    fn from(e: tokstore::Error) -> Self {
        Failure::Local {
            code: e.category().exit_code(),
            message: format!("{}: {e}", e.category().as_str()),
        }
    }
}

/// Resolves against the current directory so a local service sees the same file.
fn absolute(p: &Path) -> PathBuf {
    std::path::absolute(p).unwrap_or_else(|_| p.to_path_buf())
}

fn print_kv(text: &str) {
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(text.as_bytes());
    let _ = out.flush();
}

fn load_config(args: &DumpBatchArgs) -> Result<PipelineConfig, Failure> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Failure::Local {
                code: tokstore::ErrorCategory::Io.exit_code(),
                message: format!("io: {}: {e}", path.display()),
            })?;
            serde_json::from_str(&text).map_err(|e| Failure::Local {
                code: tokstore::ErrorCategory::Config.exit_code(),
                message: format!("config: {}: {e}", path.display()),
            })?
        }
        None => PipelineConfig::default(),
    };
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if let Some(v) = args.epoch {
        cfg.epoch = v;
    }
    if let Some(v) = args.batch_size {
        cfg.batch_size = v;
    }
    if let Some(v) = args.mode {
        cfg.mode = match v {
            ModeArg::Train => Mode::Train,
            ModeArg::Eval => Mode::Eval,
        };
    }
    if let Some(v) = args.workers {
        cfg.workers = v;
    }
    if let Some(v) = args.classes {
        cfg.classes = Some(v);
    }
    if let Some(v) = args.adapter {
        cfg.adapter = Some(AdapterSpec {
            variant: match v {
                AdapterArg::Conv4 => AdapterVariant::Conv4,
                AdapterArg::Conv2 => AdapterVariant::Conv2,
                AdapterArg::Pointwise => AdapterVariant::Pointwise,
            },
            out_channels: args.adapter_width,
            seed: args.adapter_seed,
        });
    }
    cfg.validate()?;
    Ok(cfg)
}

async fn run(client: &Client, command: Command) -> Result<(), Failure> {
    match command {
        Command::Pack(a) => {
            let resp = client
                .pack(&PackRequest {
                    tokens: absolute(&a.tokens),
                    codebook: absolute(&a.codebook),
                    labels: a.labels.as_deref().map(absolute),
                    out: absolute(&a.out),
                    options: WriteOptions {
                        huffman: !a.no_huffman,
                        remap: !a.no_remap,
                    },
                })
                .await?;
            print_kv(&resp.report.to_key_values());
        }
        Command::Unpack(a) => {
            let resp = client
                .unpack(&UnpackRequest {
                    archive: absolute(&a.archive),
                    tokens_out: absolute(&a.tokens_out),
                    labels_out: a.labels_out.as_deref().map(absolute),
                    codebook_out: a.codebook_out.as_deref().map(absolute),
                    ranked: a.ranked,
                })
                .await?;
            print_kv(&format!(
                "n_records={}\nside={}\nvocab={}\nlabels_written={}\ncodebook_written={}\n",
                resp.records, resp.side, resp.vocab, resp.labels_written, resp.codebook_written
            ));
        }
        Command::Stats(a) => {
            let report = client
                .stats(&StatsRequest {
                    archive: absolute(&a.archive),
                })
                .await?;
            print_kv(&report.to_key_values());
        }
        Command::Bench(a) => {
            let report = client
                .bench(&BenchRequest {
                    archive: absolute(&a.archive),
                    sequential: a.sequential,
                    random_reads: a.random_reads,
                    seed: a.seed,
                })
                .await?;
            print_kv(&report.to_key_values());
        }
        Command::DumpBatch(a) => {
            let config = load_config(&a)?;
            let resp = client
                .dump_batch(&DumpBatchRequest {
                    archive: absolute(&a.archive),
                    config,
                    first_batch: a.first_batch,
                    count: a.count,
                    out_dir: absolute(&a.out_dir),
                    prefix: a.prefix,
                })
                .await?;
            let mut text = format!("batches={}\n", resp.batches.len());
            for b in &resp.batches {
                let shape = b.shape.map(|d| d.to_string()).join("x");
                text.push_str(&format!("batch={} epoch={} shape={shape}\n", b.index, b.epoch));
                for f in &b.files {
                    text.push_str(&format!("file={}\n", f.display()));
                }
            }
            print_kv(&text);
        }
        Command::GenSynthetic(a) => {
            let distribution = match a.dist {
                DistArg::Uniform => TokenDistribution::Uniform,
                DistArg::Zipf => TokenDistribution::Zipf { s: a.s },
            };
            let resp = client
                .synthetic(&SyntheticRequest {
                    spec: SyntheticSpec {
                        distribution,
                        n_images: a.n_images,
                        side: a.side,
                        vocab: a.vocab,
                        dim: a.dim,
                        classes: a.classes,
                        seed: a.seed,
                    },
                    tokens_out: absolute(&a.tokens_out),
                    codebook_out: absolute(&a.codebook_out),
                    labels_out: a.labels_out.as_deref().map(absolute),
                })
                .await?;
            print_kv(&format!(
                "n_images={}\nside={}\nvocab={}\nlabels_written={}\n",
                resp.n_images, resp.side, resp.vocab, resp.labels_written
            ));
        }
        Command::Serve(_) => unreachable!("handled before connecting"),
    }
    Ok(())
}

async fn serve(args: ServeArgs) -> Result<(), Failure> {
    tracing_subscriber::fmt().with_writer(std::io::stderr).init();
    let listener = tokio::net::TcpListener::bind(args.listen)
        .await
        .map_err(|e| Failure::Local {
            code: tokstore::ErrorCategory::Io.exit_code(),
            message: format!("io: cannot listen on {}: {e}", args.listen),
        })?;
    let addr = listener.local_addr().map_err(|e| Failure::Local {
        code: tokstore::ErrorCategory::Io.exit_code(),
        message: format!("io: {e}"),
    })?;
    print_kv(&format!("listening=http://{addr}\n"));
    tracing::info!("serving on {addr}");
    let state = Arc::new(AppState::default());
    tokio::select! {
        r = tokstore_server::serve_on(listener, state) => r.map_err(|e| Failure::Local {
            code: tokstore::ErrorCategory::Io.exit_code(),
            message: format!("io: {e}"),
        }),
        _ = tokio::signal::ctrl_c() => Ok(()),
    }
}

#[tokio::main]
async fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Serve(args) => serve(args).await,
        command => {
            let client = match cli.server {
                Some(url) => Ok(Client::new(url)),
                None => tokstore_server::spawn(SocketAddr::from(([127, 0, 0, 1], 0)))
                    .await
                    .map(|(addr, _)| Client::new(format!("http://{addr}")))
                    .map_err(|e| Failure::Local {
                        code: tokstore::ErrorCategory::Io.exit_code(),
                        message: format!("io: cannot start local service: {e}"),
                    }),
            };
            match client {
                Ok(client) => run(&client, command).await,
                Err(e) => Err(e),
            }
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Client(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
        Err(Failure::Local { code, message }) => {
            eprintln!("error: {message}");
            ExitCode::from(code as u8)
        }
    }
}
