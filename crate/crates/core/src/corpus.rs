//! Raw token and label interchange files, and seeded synthetic corpora.
//!
//! Raw tokens: `N u64 | side u32 | vocab u32 | tokens u16 * N * side * side`.
//! Labels: `N u64 | labels u16 * N`. Both little-endian.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal, Zipf};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::codebook::{Codebook, MAX_VOCAB};
use crate::error::{Error, Result};
use crate::grid::TokenGrid;
use crate::le::{self, Cursor};
use crate::rng;

pub const RAW_HEADER_LEN: usize = 16;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawTokens {
    pub side: usize,
    pub vocab: usize,
    pub grids: Vec<TokenGrid>,
}

impl RawTokens {
    pub fn new(side: usize, vocab: usize, grids: Vec<TokenGrid>) -> Result<Self> {
        if side == 0 || vocab == 0 || vocab > MAX_VOCAB {
            return Err(Error::input(format!("invalid side {side} or vocabulary {vocab}")));
        }
        for (i, g) in grids.iter().enumerate() {
            if g.side() != side {
                return Err(Error::input(format!(
                    "grid {i} has side {}, expected {side}",
                    g.side()
                )));
            }
            g.check_vocab(vocab)?;
        }
        Ok(Self { side, vocab, grids })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let per = self.side * self.side;
        let mut out = Vec::with_capacity(RAW_HEADER_LEN + 2 * per * self.grids.len());
        le::put_u64(&mut out, self.grids.len() as u64);
        le::put_u32(&mut out, self.side as u32);
        le::put_u32(&mut out, self.vocab as u32);
        for g in &self.grids {
            for &t in g.tokens() {
                le::put_u16(&mut out, t);
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut cur = Cursor::new(bytes);
        let n = cur.u64("tokens.count")?;
        let side = cur.u32("tokens.side")? as usize;
        let vocab = cur.u32("tokens.vocab")? as usize;
        if side == 0 || side > u16::MAX as usize {
            return Err(Error::format("tokens.side", 8, format!("unsupported side {side}")));
        }
        if vocab == 0 || vocab > MAX_VOCAB {
            return Err(Error::format("tokens.vocab", 12, format!("unsupported vocabulary {vocab}")));
        }
        let per = side * side;
        let expected = n
            .checked_mul(2 * per as u64)
            .filter(|&b| b == cur.remaining() as u64)
            .ok_or_else(|| {
                Error::format(
                    "tokens.body",
                    RAW_HEADER_LEN as u64,
                    format!(
                        "{} body bytes do not hold {n} grids of {side}x{side}",
                        cur.remaining()
                    ),
                )
            })?;
        let tokens = cur.u16s("tokens.body", (expected / 2) as usize)?;
        let grids = tokens
            .chunks(per)
            .map(|c| TokenGrid::new(side, c.to_vec()))
            .collect::<Result<Vec<_>>>()?;
        for (i, g) in grids.iter().enumerate() {
            if let Some(m) = g.max_token().filter(|&m| usize::from(m) >= vocab) {
                return Err(Error::format(
                    "tokens.body",
                    (RAW_HEADER_LEN + 2 * per * i) as u64,
                    format!("grid {i} holds token {m}, vocabulary is {vocab}"),
                ));
            }
        }
        Ok(Self { side, vocab, grids })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&fs::read(path).map_err(|e| Error::io(0, e))?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(0, e))
    }
}

pub fn labels_to_bytes(labels: &[u16]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + 2 * labels.len());
    le::put_u64(&mut out, labels.len() as u64);
    for &l in labels {
        le::put_u16(&mut out, l);
    }
    out
}

pub fn labels_from_bytes(bytes: &[u8]) -> Result<Vec<u16>> {
    let mut cur = Cursor::new(bytes);
    let n = cur.u64("labels.count")?;
    if n.checked_mul(2) != Some(cur.remaining() as u64) {
        return Err(Error::format(
            "labels.body",
            8,
            format!("{} bytes do not hold {n} labels", cur.remaining()),
        ));
    }
    cur.u16s("labels.body", n as usize)
}

pub fn load_labels(path: impl AsRef<Path>) -> Result<Vec<u16>> {
    labels_from_bytes(&fs::read(path).map_err(|e| Error::io(0, e))?)
}

pub fn save_labels(labels: &[u16], path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, labels_to_bytes(labels)).map_err(|e| Error::io(0, e))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TokenDistribution {
    Uniform,
    /// Rank `k` drawn with weight `k^-s`; ranks are mapped to code ids by a
    /// seeded shuffle so the frequent codes are scattered over the vocabulary.
    Zipf { s: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSpec {
    pub distribution: TokenDistribution,
    pub n_images: usize,
    pub side: usize,
    pub vocab: usize,
    pub dim: usize,
    /// Label classes; 0 produces an unlabeled corpus.
    pub classes: usize,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            distribution: TokenDistribution::Uniform,
            n_images: 1000,
            side: 32,
            vocab: 391,
            dim: 32,
            classes: 10,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpus {
    pub tokens: RawTokens,
    pub codebook: Codebook,
    pub labels: Option<Vec<u16>>,
}

const STREAM_IDS: u64 = 1;
const STREAM_GRID: u64 = 2;
const STREAM_CODEBOOK: u64 = 3;
const STREAM_LABELS: u64 = 4;

pub fn generate(spec: &SyntheticSpec) -> Result<SyntheticCorpus> {
    if spec.side == 0 || spec.dim == 0 || spec.vocab == 0 || spec.vocab > MAX_VOCAB {
        return Err(Error::config(format!(
            "synthetic corpus needs positive side/dim and 1 <= vocab <= {MAX_VOCAB}"
        )));
    }
    if spec.classes > usize::from(u16::MAX) + 1 {
        return Err(Error::config("classes must fit in 16 bits"));
    }
    let per = spec.side * spec.side;
    let grids: Vec<TokenGrid> = match spec.distribution {
        TokenDistribution::Uniform => (0..spec.n_images)
            .into_par_iter()
            .map(|i| {
                let mut r = rng::stream(spec.seed, &[STREAM_GRID, i as u64]);
                let tokens = (0..per).map(|_| r.random_range(0..spec.vocab) as u16).collect();
                TokenGrid::new(spec.side, tokens).expect("square grid")
            })
            .collect(),
        TokenDistribution::Zipf { s } => {
            let zipf = Zipf::new(spec.vocab as f64, s)
                .map_err(|e| Error::config(format!("zipf exponent {s}: {e}")))?;
            let mut ids: Vec<u16> = (0..spec.vocab).map(|v| v as u16).collect();
            ids.shuffle(&mut rng::stream(spec.seed, &[STREAM_IDS]));
            (0..spec.n_images)
                .into_par_iter()
                .map(|i| {
                    let mut r = rng::stream(spec.seed, &[STREAM_GRID, i as u64]);
                    let tokens = (0..per)
                        .map(|_| {
                            let rank = zipf.sample(&mut r) as usize;
                            ids[rank.clamp(1, spec.vocab) - 1]
                        })
                        .collect();
                    TokenGrid::new(spec.side, tokens).expect("square grid")
                })
                .collect()
        }
    };

    let mut r = rng::stream(spec.seed, &[STREAM_CODEBOOK]);
    let vectors = (0..spec.dim * spec.vocab)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut r);
            z as f32
        })
        .collect();
    let codebook = Codebook::new(spec.dim, vectors)?;

    let labels = (spec.classes > 0).then(|| {
        let mut r = rng::stream(spec.seed, &[STREAM_LABELS]);
        (0..spec.n_images)
            .map(|_| r.random_range(0..spec.classes) as u16)
            .collect()
    });

    Ok(SyntheticCorpus {
        tokens: RawTokens::new(spec.side, spec.vocab, grids)?,
        codebook,
        labels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn raw_round_trip() {
        let grids = vec![
            TokenGrid::new(2, vec![0, 1, 2, 300]).unwrap(),
            TokenGrid::new(2, vec![4, 4, 4, 4]).unwrap(),
        ];
        let raw = RawTokens::new(2, 391, grids).unwrap();
        let bytes = raw.to_bytes();
        assert_eq!(bytes.len(), 16 + 16);
        assert_eq!(&bytes[..8], &2u64.to_le_bytes());
        assert_eq!(RawTokens::from_bytes(&bytes).unwrap(), raw);
    }

    #[test]
    fn raw_rejects_bad_input() {
        let raw = RawTokens::new(2, 10, vec![TokenGrid::filled(2, 9)]).unwrap();
        let bytes = raw.to_bytes();
        assert!(matches!(
            RawTokens::from_bytes(&bytes[..bytes.len() - 1]),
            Err(Error::Format { .. })
        ));
        let mut wrong_vocab = bytes.clone();
        wrong_vocab[12] = 5;
        assert!(matches!(RawTokens::from_bytes(&wrong_vocab), Err(Error::Format { .. })));
        assert!(RawTokens::from_bytes(&bytes[..10]).is_err());
        assert!(RawTokens::new(3, 10, vec![TokenGrid::filled(2, 0)]).is_err());
    }

    #[test]
    fn empty_raw_file() {
        let raw = RawTokens::new(32, 391, Vec::new()).unwrap();
        assert_eq!(RawTokens::from_bytes(&raw.to_bytes()).unwrap(), raw);
    }

    #[test]
    fn labels_round_trip() {
        let labels = vec![0u16, 999, 21000];
        assert_eq!(labels_from_bytes(&labels_to_bytes(&labels)).unwrap(), labels);
        assert!(labels_from_bytes(&labels_to_bytes(&labels)[..9]).is_err());
    }

    #[test]
    fn synthetic_is_seeded() {
        let spec = SyntheticSpec {
            distribution: TokenDistribution::Zipf { s: 1.0 },
            n_images: 20,
            ..Default::default()
        };
        let a = generate(&spec).unwrap();
        assert_eq!(a, generate(&spec).unwrap());
        let b = generate(&SyntheticSpec { seed: 1, ..spec }).unwrap();
        assert_ne!(a.tokens, b.tokens);
        assert_eq!(a.labels.as_ref().unwrap().len(), 20);
        assert!(a.labels.unwrap().iter().all(|&l| l < 10));
    }

    #[test]
    fn zipf_is_skewed() {
        let spec = SyntheticSpec {
            distribution: TokenDistribution::Zipf { s: 1.0 },
            n_images: 50,
            classes: 0,
            ..Default::default()
        };
        let corpus = generate(&spec).unwrap();
        let mut counts = vec![0u64; 391];
        for g in &corpus.tokens.grids {
            for &t in g.tokens() {
                counts[usize::from(t)] += 1;
            }
        }
        counts.sort_unstable_by(|a, b| b.cmp(a));
        // rank 1 carries roughly 1 / H(391) of the mass, about 15%
        let share = counts[0] as f64 / (50.0 * 1024.0);
        assert!((0.13..0.17).contains(&share), "{share}");
        assert!(corpus.labels.is_none());
    }
}
