//! Synchronous file-level operations behind the HTTP handlers.

use std::fs;
use std::sync::Arc;

use tokstore::archive::FileSource;
use tokstore::bench::{bench, BenchReport};
use tokstore::corpus::{generate, load_labels, save_labels, RawTokens};
use tokstore::pipeline::Pipeline;
use tokstore::{open_archive, write_archive_file, Codebook, Error, Result, TokenArchive};
use tokstore_wire::{
    BenchRequest, DumpBatchRequest, DumpBatchResponse, DumpedBatch, PackRequest, PackResponse,
    StatsRequest, StorageReport, SyntheticRequest, SyntheticResponse, UnpackRequest,
    UnpackResponse,
};

pub fn pack(req: &PackRequest) -> Result<PackResponse> {
    let raw = RawTokens::load(&req.tokens)?;
    let codebook = Codebook::load(&req.codebook)?;
    if raw.vocab != codebook.vocab() {
        return Err(Error::Input(format!(
            "token file declares vocabulary {}, codebook has {} codes",
            raw.vocab,
            codebook.vocab()
        )));
    }
    let labels = req.labels.as_ref().map(load_labels).transpose()?;
    let summary = write_archive_file(&req.out, &raw.grids, &codebook, labels.as_deref(), req.options)?;
    let report = open_archive(&req.out)?.stats()?;
    Ok(PackResponse {
        header: summary.header,
        report,
    })
}

pub fn unpack(req: &UnpackRequest) -> Result<UnpackResponse> {
    let archive = open_archive(&req.archive)?;
    let grids = (0..archive.len())
        .map(|i| {
            if req.ranked {
                archive.read_image(i)
            } else {
                archive.read_image_original(i)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let header = *archive.header();
    RawTokens::new(usize::from(header.side), usize::from(header.vocab), grids)?
        .save(&req.tokens_out)?;

    let labels_written = match (&req.labels_out, archive.labels()) {
        (Some(path), Some(labels)) => {
            save_labels(labels, path)?;
            true
        }
        _ => false,
    };
    if let Some(path) = &req.codebook_out {
        if req.ranked {
            archive.ranked_codebook().save(path)?;
        } else {
            archive.codebook().save(path)?;
        }
    }
    Ok(UnpackResponse {
        records: archive.len() as u64,
        side: header.side,
        vocab: header.vocab,
        labels_written,
        codebook_written: req.codebook_out.is_some(),
    })
}

pub fn stats(req: &StatsRequest) -> Result<StorageReport> {
    open_archive(&req.archive)?.stats()
}

pub fn run_bench(req: &BenchRequest) -> Result<BenchReport> {
    let archive = open_archive(&req.archive)?;
    bench(&archive, req.sequential, req.random_reads, req.seed)
}

pub fn synthetic(req: &SyntheticRequest) -> Result<SyntheticResponse> {
    let corpus = generate(&req.spec)?;
    corpus.tokens.save(&req.tokens_out)?;
    corpus.codebook.save(&req.codebook_out)?;
    let labels_written = match (&req.labels_out, &corpus.labels) {
        (Some(path), Some(labels)) => {
            save_labels(labels, path)?;
            true
        }
        _ => false,
    };
    Ok(SyntheticResponse {
        n_images: corpus.tokens.grids.len() as u64,
        side: corpus.tokens.side as u32,
        vocab: corpus.tokens.vocab as u32,
        labels_written,
    })
}

pub fn dump_batches(req: &DumpBatchRequest) -> Result<DumpBatchResponse> {
    let archive: Arc<TokenArchive<FileSource>> = Arc::new(open_archive(&req.archive)?);
    fs::create_dir_all(&req.out_dir).map_err(|e| Error::Io {
        position: 0,
        source: e,
    })?;
    let mut pipeline = Pipeline::new(archive, req.config.clone())?;
    let epoch = req.config.epoch;
    pipeline.seek(epoch, req.first_batch);
    let prefix = req.prefix.as_deref().unwrap_or("batch");
    let mut batches = Vec::new();
    for _ in 0..req.count {
        let Some(batch) = pipeline.next_batch()? else {
            break;
        };
        let stem = format!("{prefix}_e{epoch}_b{}", batch.index);
        let files = batch.write_dump(&req.out_dir, &stem)?;
        batches.push(DumpedBatch {
            epoch,
            index: batch.index,
            shape: batch.shape,
            files,
        });
    }
    Ok(DumpBatchResponse { batches })
}
