//! Deterministic batch producer over a [`TokenArchive`].
//!
//! Every random choice is drawn from a stream keyed by the pipeline seed,
//! the epoch and either the record index or the batch slot, so the bytes of
//! a batch depend only on `(seed, epoch, batch index)` and never on how many
//! worker threads prepared it.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adapter::{AdapterVariant, StemAdapter};
use crate::archive::{ByteSource, TokenArchive};
use crate::augment::{
    emb_noise, embed, one_hot, resize_bicubic, token_eda_rs, token_eda_sr, token_rrc,
    sample_cutmix_rect, cutmix_with_rect, AugmentConfig, CropBox, EmbeddingTensor, OneHotGrid,
    SwapOutcome,
};
use crate::codebook::{Codebook, SynonymTable};
use crate::error::{Error, Result};
use crate::rng;
use crate::tensor::{encode_dump, Tensor3};

const STREAM_SHUFFLE: u64 = 1;
const STREAM_SAMPLE: u64 = 2;
const STREAM_MIX: u64 = 3;
const STREAM_NOISE: u64 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Train,
    Eval,
}

/// Stem adapter appended after augmentation, initialised from `seed`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdapterSpec {
    pub variant: AdapterVariant,
    pub out_channels: usize,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub augment: AugmentConfig,
    pub batch_size: usize,
    pub epoch: u64,
    pub mode: Mode,
    pub seed: u64,
    pub adapter: Option<AdapterSpec>,
    /// Width of the soft-label rows. `None` uses the largest stored label plus one.
    pub classes: Option<usize>,
    /// Worker threads preparing samples. 0 uses every available core.
    pub workers: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            augment: AugmentConfig::default(),
            batch_size: 64,
            epoch: 0,
            mode: Mode::Train,
            seed: 0,
            adapter: None,
            classes: None,
            workers: 0,
        }
    }
}

impl PipelineConfig {
    /// Augmentation settings actually applied. Eval mode switches every stage off.
    pub fn effective_augment(&self) -> AugmentConfig {
        match self.mode {
            Mode::Train => self.augment.clone(),
            Mode::Eval => AugmentConfig {
                synonyms: self.augment.synonyms,
                renormalize: self.augment.renormalize,
                ..AugmentConfig::identity(self.augment.out_side)
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.augment.validate()?;
        if self.batch_size == 0 {
            return Err(Error::config("batch_size must be at least 1"));
        }
        if let Some(spec) = &self.adapter {
            if spec.out_channels == 0 {
                return Err(Error::config("adapter out_channels must be positive"));
            }
            spec.variant.output_side(self.augment.out_side)?;
        }
        if self.classes == Some(0) {
            return Err(Error::config("classes must be at least 1"));
        }
        Ok(())
    }
}

/// One batch of model inputs and soft labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub epoch: u64,
    pub index: u64,
    /// Archive record behind each row.
    pub records: Vec<u64>,
    /// `[batch, channels, height, width]`.
    pub shape: [u32; 4],
    pub data: Vec<f32>,
    /// Row-major `batch x classes`, absent for unlabeled archives.
    pub labels: Option<Vec<f32>>,
    pub classes: usize,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn tensor_dump(&self) -> Vec<u8> {
        encode_dump(self.shape, &self.data).expect("batch shape matches data")
    }

    /// Labels in the same dump format, shape `[batch, classes, 1, 1]`.
    pub fn labels_dump(&self) -> Option<Vec<u8>> {
        self.labels.as_ref().map(|l| {
            encode_dump([self.len() as u32, self.classes as u32, 1, 1], l)
                .expect("label shape matches data")
        })
    }

    /// Writes `<stem>.tensor.bin` and, when labels exist, `<stem>.labels.bin`.
    pub fn write_dump(&self, dir: &Path, stem: &str) -> Result<Vec<PathBuf>> {
        let mut written = Vec::new();
        let tensor_path = dir.join(format!("{stem}.tensor.bin"));
        std::fs::write(&tensor_path, self.tensor_dump()).map_err(|e| Error::io(0, e))?;
        written.push(tensor_path);
        if let Some(bytes) = self.labels_dump() {
            let label_path = dir.join(format!("{stem}.labels.bin"));
            std::fs::write(&label_path, bytes).map_err(|e| Error::io(0, e))?;
            written.push(label_path);
        }
        Ok(written)
    }
}

/// Counters accumulated since the pipeline was created.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PipelineStats {
    pub batches: u64,
    pub samples: u64,
    pub records_decoded: u64,
    pub tokens_decoded: u64,
    pub bytes_read: u64,
    pub sr_replaced: u64,
    pub rs_swapped: u64,
    /// Random swaps abandoned because no disjoint placement was found.
    pub rs_skipped: u64,
    pub cutmix_applied: u64,
    pub noise_applied: u64,
    /// Summed per-record decode time across workers.
    pub decode_seconds: f64,
}

impl PipelineStats {
    pub fn tokens_per_second(&self) -> f64 {
        if self.decode_seconds > 0.0 {
            self.tokens_decoded as f64 / self.decode_seconds
        } else {
            0.0
        }
    }
}

struct Prepared {
    embedding: EmbeddingTensor,
    label: Option<u16>,
    tokens: usize,
    bytes: usize,
    decode: Duration,
    sr_replaced: usize,
    swap: SwapOutcome,
}

pub struct Pipeline<S: ByteSource> {
    archive: Arc<TokenArchive<S>>,
    config: PipelineConfig,
    augment: AugmentConfig,
    codebook: Codebook,
    synonyms: Option<SynonymTable>,
    sigmas: (f64, f64),
    adapter: Option<StemAdapter<f32>>,
    classes: usize,
    pool: rayon::ThreadPool,
    epoch: u64,
    cursor: u64,
    order: Vec<u64>,
    stats: PipelineStats,
}

impl<S: ByteSource> std::fmt::Debug for Pipeline<S> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Pipeline")
            .field("config", &self.config)
            .field("epoch", &self.epoch)
            .field("cursor", &self.cursor)
            .finish_non_exhaustive()
    }
}

impl<S: ByteSource> Pipeline<S> {
    pub fn new(archive: Arc<TokenArchive<S>>, config: PipelineConfig) -> Result<Self> {
        config.validate()?;
        let augment = config.effective_augment();
        let labels = archive.labels();
        let needs_labels = config.mode == Mode::Train && augment.cutmix_prob > 0.0;
        if needs_labels && labels.is_none() {
            return Err(Error::config(
                "cutmix needs labels but the archive has none; set cutmix_prob = 0",
            ));
        }
        let classes = match (config.classes, labels) {
            (Some(c), Some(l)) => {
                if let Some(&bad) = l.iter().find(|&&y| usize::from(y) >= c) {
                    return Err(Error::config(format!(
                        "label {bad} does not fit in {c} classes"
                    )));
                }
                c
            }
            (Some(c), None) => c,
            (None, Some(l)) => l.iter().copied().max().map_or(1, |m| usize::from(m) + 1),
            (None, None) => 0,
        };

        let codebook = archive.ranked_codebook();
        let synonyms = if augment.sr_prob > 0.0 {
            let original = archive.codebook().build_synonyms(augment.synonyms)?;
            Some(original.translate(archive.permutation()))
        } else {
            None
        };
        let sigmas = augment.noise_sigmas(archive.codebook().mean_component_std());
        let adapter = config
            .adapter
            .map(|spec| {
                StemAdapter::init(spec.variant, codebook.dim(), spec.out_channels, spec.seed)
            })
            .transpose()?;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.workers)
            .build()
            .map_err(|e| Error::config(format!("worker pool: {e}")))?;

        let mut pipeline = Self {
            archive,
            epoch: config.epoch,
            config,
            augment,
            codebook,
            synonyms,
            sigmas,
            adapter,
            classes,
            pool,
            cursor: 0,
            order: Vec::new(),
            stats: PipelineStats::default(),
        };
        pipeline.seek(pipeline.epoch, 0);
        Ok(pipeline)
    }

    /// Replaces the seeded adapter with caller-provided weights.
    pub fn with_adapter(mut self, adapter: StemAdapter<f32>) -> Result<Self> {
        if adapter.in_channels() != self.codebook.dim() {
            return Err(Error::config(format!(
                "adapter expects {} channels, codebook has {}",
                adapter.in_channels(),
                self.codebook.dim()
            )));
        }
        adapter.variant().output_side(self.augment.out_side)?;
        self.adapter = Some(adapter);
        Ok(self)
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn archive(&self) -> &Arc<TokenArchive<S>> {
        &self.archive
    }

    pub fn stats(&self) -> &PipelineStats {
        &self.stats
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn epoch(&self) -> u64 {
        self.epoch
    }

    /// Index of the batch the next call to [`next_batch`](Self::next_batch) returns.
    pub fn position(&self) -> u64 {
        self.cursor
    }

    pub fn batches_per_epoch(&self) -> u64 {
        let n = self.archive.len() as u64;
        let b = self.config.batch_size as u64;
        match self.config.mode {
            Mode::Train => n / b,
            Mode::Eval => n.div_ceil(b),
        }
    }

    /// Record order for `epoch`: a seeded shuffle in train mode, sequential in eval.
    pub fn epoch_order(&self, epoch: u64) -> Vec<u64> {
        let mut order: Vec<u64> = (0..self.archive.len() as u64).collect();
        if self.config.mode == Mode::Train {
            order.shuffle(&mut rng::stream(self.config.seed, &[STREAM_SHUFFLE, epoch]));
        }
        order
    }

    /// Positions the pipeline so the next batch is `batch_index` of `epoch`.
    pub fn seek(&mut self, epoch: u64, batch_index: u64) {
        if epoch != self.epoch || self.order.len() != self.archive.len() {
            self.order = self.epoch_order(epoch);
        }
        self.epoch = epoch;
        self.cursor = batch_index;
    }

    /// Next batch of the current epoch, or `None` once it is exhausted.
    pub fn next_batch(&mut self) -> Result<Option<Batch>> {
        if self.cursor >= self.batches_per_epoch() {
            return Ok(None);
        }
        let b = self.config.batch_size;
        let start = self.cursor as usize * b;
        let end = (start + b).min(self.order.len());
        let records = self.order[start..end].to_vec();
        let batch = self.assemble(self.cursor, &records)?;
        self.cursor += 1;
        Ok(Some(batch))
    }

    /// Builds batch `index` of the current epoch from explicit records.
    fn assemble(&mut self, index: u64, records: &[u64]) -> Result<Batch> {
        let epoch = self.epoch;
        let prepared: Vec<Prepared> = self.pool.install(|| {
            records
                .par_iter()
                .map(|&r| self.prepare(epoch, r))
                .collect::<Result<_>>()
        })?;

        for p in &prepared {
            self.stats.records_decoded += 1;
            self.stats.tokens_decoded += p.tokens as u64;
            self.stats.bytes_read += p.bytes as u64;
            self.stats.decode_seconds += p.decode.as_secs_f64();
            self.stats.sr_replaced += p.sr_replaced as u64;
            match p.swap {
                SwapOutcome::Swapped { .. } => self.stats.rs_swapped += 1,
                SwapOutcome::Skipped => self.stats.rs_skipped += 1,
                SwapOutcome::NotApplied => {}
            }
        }

        let (mixed, noised) = self.pool.install(|| {
            (0..prepared.len())
                .into_par_iter()
                .map(|slot| self.mix_and_noise(epoch, index, slot, records[slot], &prepared))
                .collect::<Result<(Vec<_>, Vec<_>)>>()
        })?;

        let mut outputs = Vec::with_capacity(mixed.len());
        let mut label_rows = Vec::with_capacity(mixed.len());
        for ((tensor, label), applied) in mixed.into_iter().zip(noised) {
            if label.partner.is_some() {
                self.stats.cutmix_applied += 1;
            }
            if applied {
                self.stats.noise_applied += 1;
            }
            outputs.push(tensor);
            label_rows.push(label);
        }

        let outputs = match &self.adapter {
            Some(adapter) => self.pool.install(|| {
                outputs
                    .par_iter()
                    .map(|t| adapter.forward(t))
                    .collect::<Result<Vec<_>>>()
            })?,
            None => outputs,
        };

        let (c, h, w) = outputs
            .first()
            .map(Tensor3::shape)
            .unwrap_or((0, 0, 0));
        let mut data = Vec::with_capacity(outputs.len() * c * h * w);
        for t in &outputs {
            data.extend_from_slice(t.data());
        }

        let labels = self.archive.labels().map(|_| {
            let mut rows = vec![0.0f32; label_rows.len() * self.classes];
            for (row, l) in rows.chunks_mut(self.classes).zip(&label_rows) {
                let own = usize::from(l.own.expect("labeled archive"));
                match l.partner {
                    Some((other, lambda)) => {
                        row[own] += lambda as f32;
                        row[usize::from(other)] += (1.0 - lambda) as f32;
                    }
                    None => row[own] = 1.0,
                }
            }
            rows
        });

        self.stats.batches += 1;
        self.stats.samples += records.len() as u64;
        Ok(Batch {
            epoch,
            index,
            records: records.to_vec(),
            shape: [records.len() as u32, c as u32, h as u32, w as u32],
            data,
            labels,
            classes: self.classes,
        })
    }

    /// Decode, token augmentations, resized crop and embedding for one record.
    fn prepare(&self, epoch: u64, record: u64) -> Result<Prepared> {
        let started = Instant::now();
        let (mut grid, _) = self.archive.decode_record(record as usize)?;
        let decode = started.elapsed();
        let bytes = {
            let o = self.archive.offsets();
            (o[record as usize + 1] - o[record as usize]) as usize
        };
        let tokens = grid.tokens().len();

        let cfg = &self.augment;
        let mut r = rng::stream(self.config.seed, &[STREAM_SAMPLE, epoch, record]);
        let sr_replaced = match &self.synonyms {
            Some(syn) => token_eda_sr(&mut grid, syn, cfg.sr_prob, &mut r),
            None => 0,
        };
        let swap = token_eda_rs(&mut grid, cfg.rs_prob, &mut r);

        let hot = one_hot(&grid, self.codebook.vocab())?;
        let mut cropped = match self.config.mode {
            Mode::Train => token_rrc(&hot, cfg.rrc_scale, cfg.rrc_ratio, cfg.out_side, &mut r).0,
            Mode::Eval => {
                let n = grid.side();
                OneHotGrid(resize_bicubic(
                    &hot.0,
                    CropBox::full(n, n),
                    cfg.out_side,
                    cfg.out_side,
                ))
            }
        };
        if cfg.renormalize {
            cropped.renormalize();
        }
        let embedding = embed(&cropped, &self.codebook)?;
        Ok(Prepared {
            embedding,
            label: self.archive.label(record as usize),
            tokens,
            bytes,
            decode,
            sr_replaced,
            swap,
        })
    }

    fn mix_and_noise(
        &self,
        epoch: u64,
        batch: u64,
        slot: usize,
        record: u64,
        prepared: &[Prepared],
    ) -> Result<((Tensor3<f32>, RowLabel), bool)> {
        let cfg = &self.augment;
        let own = &prepared[slot];
        let mut label = RowLabel {
            own: own.label,
            partner: None,
        };
        let mut tensor = own.embedding.clone();

        let mut r = rng::stream(self.config.seed, &[STREAM_MIX, epoch, batch, slot as u64]);
        if cfg.cutmix_prob > 0.0 && r.random_bool(cfg.cutmix_prob) {
            let n = prepared.len();
            let mut partner = r.random_range(0..n);
            if partner == slot {
                partner = r.random_range(0..n);
            }
            let (_, h, w) = tensor.0.shape();
            let rect = sample_cutmix_rect(h, w, cfg.cutmix_alpha, &mut r)?;
            let (mixed, lambda) = cutmix_with_rect(&tensor, &prepared[partner].embedding, rect)?;
            tensor = mixed;
            if let Some(other) = prepared[partner].label {
                label.partner = Some((other, lambda));
            }
        }

        let mut r = rng::stream(self.config.seed, &[STREAM_NOISE, epoch, record]);
        let (sc, sf) = self.sigmas;
        let noised = emb_noise(&mut tensor, sc, sf, cfg.noise_prob, &mut r);
        Ok(((tensor.into_tensor(), label), noised))
    }
}

struct RowLabel {
    own: Option<u16>,
    /// Partner label and the weight `lambda` kept by `own`.
    partner: Option<(u16, f64)>,
}

impl<S: ByteSource> Iterator for Pipeline<S> {
    type Item = Result<Batch>;

    fn next(&mut self) -> Option<Self::Item> {
        self.next_batch().transpose()
    }
}
