//! Code vectors, nearest-code quantization, synonym tables and
//! popularity ranking.
//!
//! A [`Codebook`] stores `vocab` vectors of `dim` components, one per code,
//! contiguously (column-major when viewed as a `dim x vocab` matrix). Vectors
//! are kept in `f32`; all distance arithmetic accumulates in `f64`.

use std::cmp::Ordering;
use std::fs;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::le::{self, Cursor};

/// Largest vocabulary representable in the archive header.
pub const MAX_VOCAB: usize = u16::MAX as usize;

#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    dim: usize,
    vocab: usize,
    vectors: Vec<f32>,
    original_ids: Option<Vec<u32>>,
}

impl Codebook {
    /// Builds a codebook from `vocab` code vectors laid out one after another.
    pub fn new(dim: usize, vectors: Vec<f32>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::input("code dimension must be at least 1"));
        }
        if vectors.is_empty() || vectors.len() % dim != 0 {
            return Err(Error::input(format!(
                "{} values do not form whole vectors of dimension {dim}",
                vectors.len()
            )));
        }
        let vocab = vectors.len() / dim;
        if vocab > MAX_VOCAB {
            return Err(Error::input(format!(
                "vocabulary {vocab} exceeds the supported maximum {MAX_VOCAB}"
            )));
        }
        if let Some(pos) = vectors.iter().position(|v| !v.is_finite()) {
            return Err(Error::input(format!(
                "code {} component {} is not finite",
                pos / dim,
                pos % dim
            )));
        }
        Ok(Self {
            dim,
            vocab,
            vectors,
            original_ids: None,
        })
    }

    /// Attaches the mapping from local code index to the tokenizer's full vocabulary.
    pub fn with_original_ids(mut self, ids: Vec<u32>) -> Result<Self> {
        if ids.len() != self.vocab {
            return Err(Error::input(format!(
                "expected {} original ids, got {}",
                self.vocab,
                ids.len()
            )));
        }
        let mut sorted = ids.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::input("original ids must be distinct"));
        }
        self.original_ids = Some(ids);
        Ok(self)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn vocab(&self) -> usize {
        self.vocab
    }

    pub fn original_ids(&self) -> Option<&[u32]> {
        self.original_ids.as_deref()
    }

    /// All vectors, code-major.
    pub fn as_slice(&self) -> &[f32] {
        &self.vectors
    }

    #[inline]
    pub fn vector(&self, code: usize) -> &[f32] {
        &self.vectors[code * self.dim..(code + 1) * self.dim]
    }

    /// Returns a codebook whose column `r` is this codebook's column `order[r]`.
    pub fn reordered(&self, order: &[u16]) -> Result<Self> {
        if order.len() != self.vocab {
            return Err(Error::input("reorder length does not match vocabulary"));
        }
        let mut vectors = Vec::with_capacity(self.vectors.len());
        for &code in order {
            vectors.extend_from_slice(self.vector(usize::from(code)));
        }
        Ok(Self {
            dim: self.dim,
            vocab: self.vocab,
            vectors,
            original_ids: self
                .original_ids
                .as_ref()
                .map(|ids| order.iter().map(|&c| ids[usize::from(c)]).collect()),
        })
    }

    /// Mean over components of the per-component standard deviation across codes.
    pub fn mean_component_std(&self) -> f64 {
        let v = self.vocab as f64;
        let mut total = 0.0;
        for c in 0..self.dim {
            let mean = (0..self.vocab)
                .map(|k| f64::from(self.vector(k)[c]))
                .sum::<f64>()
                / v;
            let var = (0..self.vocab)
                .map(|k| {
                    let d = f64::from(self.vector(k)[c]) - mean;
                    d * d
                })
                .sum::<f64>()
                / v;
            total += var.sqrt();
        }
        total / self.dim as f64
    }

    /// Returns the index of the nearest code by squared Euclidean distance,
    /// breaking ties toward the lowest index.
    pub fn quantize(&self, vector: &[f32]) -> Result<u16> {
        if vector.len() != self.dim {
            return Err(Error::input(format!(
                "vector has {} components, codebook dimension is {}",
                vector.len(),
                self.dim
            )));
        }
        if let Some(pos) = vector.iter().position(|v| !v.is_finite()) {
            return Err(Error::input(format!("component {pos} is not finite")));
        }
        let mut best = 0usize;
        let mut best_dist = f64::INFINITY;
        for code in 0..self.vocab {
            let d = squared_distance(vector, self.vector(code));
            if d < best_dist {
                best = code;
                best_dist = d;
            }
        }
        Ok(best as u16)
    }

    /// Nearest `count` other codes for every code, sorted by distance.
    pub fn build_synonyms(&self, count: usize) -> Result<SynonymTable> {
        if count == 0 {
            return Err(Error::input("synonym count must be at least 1"));
        }
        let per_code = count.min(self.vocab - 1);
        let lists: Vec<Vec<u16>> = (0..self.vocab)
            .into_par_iter()
            .map(|code| {
                let anchor = self.vector(code);
                let mut cands: Vec<(f64, u16)> = (0..self.vocab)
                    .filter(|&other| other != code)
                    .map(|other| (squared_distance(anchor, self.vector(other)), other as u16))
                    .collect();
                let by_dist = |a: &(f64, u16), b: &(f64, u16)| {
                    a.0.partial_cmp(&b.0)
                        .unwrap_or(Ordering::Equal)
                        .then(a.1.cmp(&b.1))
                };
                if per_code < cands.len() {
                    cands.select_nth_unstable_by(per_code, by_dist);
                    cands.truncate(per_code);
                }
                cands.sort_unstable_by(by_dist);
                cands.into_iter().map(|(_, c)| c).collect()
            })
            .collect();
        Ok(SynonymTable {
            per_code,
            entries: lists.into_iter().flatten().collect(),
        })
    }

    /// Serializes as `dim: u32 | vocab: u32 | f32 vectors`, little-endian.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 + self.vectors.len() * 4);
        le::put_u32(&mut out, self.dim as u32);
        le::put_u32(&mut out, self.vocab as u32);
        le::put_f32s(&mut out, &self.vectors);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut cur = Cursor::new(bytes);
        let dim = cur.u32("codebook.dim")? as usize;
        let vocab = cur.u32("codebook.vocab")? as usize;
        if dim == 0 || vocab == 0 || vocab > MAX_VOCAB {
            return Err(Error::format(
                "codebook.header",
                0,
                format!("unsupported shape {dim} x {vocab}"),
            ));
        }
        let vectors = cur.f32s("codebook.vectors", dim * vocab)?;
        if cur.remaining() != 0 {
            return Err(Error::format(
                "codebook.vectors",
                cur.position(),
                format!("{} trailing bytes", cur.remaining()),
            ));
        }
        Self::new(dim, vectors)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(0, e))?;
        Self::from_bytes(&bytes)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(0, e))
    }
}

#[inline]
fn squared_distance(a: &[f32], b: &[f32]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = f64::from(x) - f64::from(y);
            d * d
        })
        .sum()
}

/// Per-code lists of the nearest other codes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SynonymTable {
    per_code: usize,
    entries: Vec<u16>,
}

impl SynonymTable {
    /// Number of synonyms held for every code (`min(s, V - 1)`).
    pub fn per_code(&self) -> usize {
        self.per_code
    }

    pub fn vocab(&self) -> usize {
        if self.per_code == 0 {
            // Only reachable for a one-code vocabulary.
            1
        } else {
            self.entries.len() / self.per_code
        }
    }

    #[inline]
    pub fn get(&self, code: u16) -> &[u16] {
        let start = usize::from(code) * self.per_code;
        &self.entries[start..start + self.per_code]
    }

    /// Re-expresses the table in the index space produced by `perm`.
    pub fn translate(&self, perm: &PopularityPermutation) -> Self {
        let vocab = perm.vocab();
        let mut entries = vec![0u16; self.entries.len()];
        for old in 0..vocab {
            let new = usize::from(perm.forward(old as u16));
            let dst = &mut entries[new * self.per_code..(new + 1) * self.per_code];
            for (d, &s) in dst.iter_mut().zip(self.get(old as u16)) {
                *d = perm.forward(s);
            }
        }
        Self {
            per_code: self.per_code,
            entries,
        }
    }
}

/// Bijection from original code index to popularity rank (0 = most frequent).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PopularityPermutation {
    forward: Vec<u16>,
    inverse: Vec<u16>,
    counts: Option<Vec<u64>>,
}

impl PopularityPermutation {
    pub fn identity(vocab: usize) -> Self {
        let forward: Vec<u16> = (0..vocab).map(|i| i as u16).collect();
        Self {
            inverse: forward.clone(),
            forward,
            counts: None,
        }
    }

    /// Ranks codes by non-increasing count; equal counts keep ascending index order.
    pub fn from_counts(counts: Vec<u64>) -> Result<Self> {
        if counts.is_empty() || counts.len() > MAX_VOCAB {
            return Err(Error::input(format!(
                "vocabulary size {} is not supported",
                counts.len()
            )));
        }
        let mut order: Vec<u16> = (0..counts.len()).map(|i| i as u16).collect();
        // Stable sort keeps ascending old index among equal counts, including zeros.
        order.sort_by(|&a, &b| counts[usize::from(b)].cmp(&counts[usize::from(a)]));
        let mut forward = vec![0u16; counts.len()];
        for (rank, &old) in order.iter().enumerate() {
            forward[usize::from(old)] = rank as u16;
        }
        Ok(Self {
            forward,
            inverse: order,
            counts: Some(counts),
        })
    }

    /// Rebuilds a permutation from its forward table, validating bijectivity.
    pub fn from_forward(forward: Vec<u16>) -> Result<Self> {
        let vocab = forward.len();
        if vocab == 0 || vocab > MAX_VOCAB {
            return Err(Error::input(format!("vocabulary size {vocab} is not supported")));
        }
        let mut inverse = vec![u16::MAX; vocab];
        for (old, &new) in forward.iter().enumerate() {
            let slot = inverse
                .get_mut(usize::from(new))
                .ok_or_else(|| Error::input(format!("rank {new} outside vocabulary {vocab}")))?;
            if *slot != u16::MAX {
                return Err(Error::input(format!("rank {new} assigned twice")));
            }
            *slot = old as u16;
        }
        Ok(Self {
            forward,
            inverse,
            counts: None,
        })
    }

    #[inline]
    pub fn vocab(&self) -> usize {
        self.forward.len()
    }

    /// Original index to rank.
    #[inline]
    pub fn forward(&self, old: u16) -> u16 {
        self.forward[usize::from(old)]
    }

    /// Rank to original index.
    #[inline]
    pub fn inverse(&self, rank: u16) -> u16 {
        self.inverse[usize::from(rank)]
    }

    pub fn forward_table(&self) -> &[u16] {
        &self.forward
    }

    pub fn inverse_table(&self) -> &[u16] {
        &self.inverse
    }

    /// Occurrence counts by original index, when built from a stream.
    pub fn counts(&self) -> Option<&[u64]> {
        self.counts.as_deref()
    }

    pub fn is_identity(&self) -> bool {
        self.forward.iter().enumerate().all(|(i, &r)| i == usize::from(r))
    }
}

/// Counts occurrences of each code; mergeable so shards can be counted in parallel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenCounter {
    counts: Vec<u64>,
}

impl TokenCounter {
    pub fn new(vocab: usize) -> Self {
        Self {
            counts: vec![0; vocab],
        }
    }

    pub fn add(&mut self, token: u16) -> Result<()> {
        let vocab = self.counts.len();
        let slot = self.counts.get_mut(usize::from(token)).ok_or_else(|| {
            Error::input(format!("token {token} outside vocabulary {vocab}"))
        })?;
        *slot += 1;
        Ok(())
    }

    pub fn merge(mut self, other: &TokenCounter) -> Self {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn into_counts(self) -> Vec<u64> {
        self.counts
    }
}

/// Counts a token stream and ranks codes by popularity.
pub fn rank_by_popularity(
    stream: impl IntoIterator<Item = u16>,
    vocab: usize,
) -> Result<PopularityPermutation> {
    let mut counter = TokenCounter::new(vocab);
    for t in stream {
        counter.add(t)?;
    }
    PopularityPermutation::from_counts(counter.into_counts())
}
