//! The version-1 token archive.
//!
//! ```text
//! magic "STOK" | version u16 | unit bits u8 | flags u8 | vocab u16 | dim u16
//! | side u16 | reserved u16 | records u64                       (24 bytes)
//! codebook      f32 x dim*vocab
//! permutation   u16 x vocab          (FLAG_PERMUTATION)
//! code lengths  u8 x 256
//! labels        u16 x records        (FLAG_LABELS)
//! offsets       u64 x (records + 1)
//! payload
//! ```
//!
//! All integers are little-endian. Offsets are relative to the start of the
//! payload, so record `i` occupies `offsets[i]..offsets[i + 1]` and can be
//! decoded without touching any other record.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::codebook::{Codebook, PopularityPermutation, TokenCounter, MAX_VOCAB};
use crate::codec::{self, escape, HuffmanTable, ALPHABET, ESCAPE, UNIT_BITS};
use crate::error::{Error, Result};
use crate::grid::TokenGrid;
use crate::le::{self, Cursor};

pub const MAGIC: [u8; 4] = *b"STOK";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 24;

pub const FLAG_HUFFMAN: u8 = 1 << 0;
pub const FLAG_LABELS: u8 = 1 << 1;
pub const FLAG_PERMUTATION: u8 = 1 << 2;
const KNOWN_FLAGS: u8 = FLAG_HUFFMAN | FLAG_LABELS | FLAG_PERMUTATION;

// Records encoded per parallel work unit while packing.
const PACK_CHUNK: usize = 2048;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArchiveHeader {
    pub version: u16,
    pub unit_bits: u8,
    pub flags: u8,
    pub vocab: u16,
    pub dim: u16,
    pub side: u16,
    pub records: u64,
}

impl ArchiveHeader {
    pub fn huffman(&self) -> bool {
        self.flags & FLAG_HUFFMAN != 0
    }

    pub fn has_labels(&self) -> bool {
        self.flags & FLAG_LABELS != 0
    }

    pub fn has_permutation(&self) -> bool {
        self.flags & FLAG_PERMUTATION != 0
    }

    pub fn tokens_per_record(&self) -> usize {
        usize::from(self.side) * usize::from(self.side)
    }

    fn to_bytes(self) -> [u8; HEADER_LEN] {
        let mut out = Vec::with_capacity(HEADER_LEN);
        out.extend_from_slice(&MAGIC);
        le::put_u16(&mut out, self.version);
        out.push(self.unit_bits);
        out.push(self.flags);
        le::put_u16(&mut out, self.vocab);
        le::put_u16(&mut out, self.dim);
        le::put_u16(&mut out, self.side);
        le::put_u16(&mut out, 0);
        le::put_u64(&mut out, self.records);
        out.try_into().unwrap()
    }

    fn parse(bytes: &[u8]) -> Result<Self> {
        let mut cur = Cursor::new(bytes);
        if cur.take("magic", 4)? != MAGIC {
            return Err(Error::format("magic", 0, "not a token archive"));
        }
        let version = cur.u16("version")?;
        if version != VERSION {
            return Err(Error::format(
                "version",
                4,
                format!("unsupported version {version}"),
            ));
        }
        let unit_bits = cur.u8("unit_bits")?;
        if unit_bits != UNIT_BITS {
            return Err(Error::format(
                "unit_bits",
                6,
                format!("unsupported storage unit of {unit_bits} bits"),
            ));
        }
        let flags = cur.u8("flags")?;
        if flags & !KNOWN_FLAGS != 0 {
            return Err(Error::format("flags", 7, format!("unknown flags {flags:#04x}")));
        }
        let vocab = cur.u16("vocab")?;
        let dim = cur.u16("dim")?;
        let side = cur.u16("side")?;
        let reserved = cur.u16("reserved")?;
        let records = cur.u64("records")?;
        if vocab == 0 {
            return Err(Error::format("vocab", 8, "vocabulary is empty"));
        }
        if dim == 0 {
            return Err(Error::format("dim", 10, "code dimension is zero"));
        }
        if side == 0 {
            return Err(Error::format("side", 12, "grid side is zero"));
        }
        if reserved != 0 {
            return Err(Error::format("reserved", 14, "reserved field is not zero"));
        }
        Ok(Self {
            version,
            unit_bits,
            flags,
            vocab,
            dim,
            side,
            records,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct WriteOptions {
    /// Compress records with the shared Huffman table.
    pub huffman: bool,
    /// Reassign indices by popularity before encoding.
    pub remap: bool,
}

impl Default for WriteOptions {
    fn default() -> Self {
        Self {
            huffman: true,
            remap: true,
        }
    }
}

/// Byte frequencies of the escape stream implied by token counts.
/// Token `t` contributes `t / 255` escape bytes and one residual `t % 255`.
pub(crate) fn escape_byte_counts(token_counts: &[u64]) -> [u64; ALPHABET] {
    let mut counts = [0u64; ALPHABET];
    for (token, &c) in token_counts.iter().enumerate() {
        counts[usize::from(ESCAPE)] += c * (token / usize::from(ESCAPE)) as u64;
        counts[token % usize::from(ESCAPE)] += c;
    }
    counts
}

/// Everything needed to write the payload once pass one has run.
struct PackPlan {
    header: ArchiveHeader,
    permutation: PopularityPermutation,
    table: HuffmanTable,
}

fn plan(
    records: &[TokenGrid],
    codebook: &Codebook,
    labels: Option<&[u16]>,
    opts: WriteOptions,
) -> Result<PackPlan> {
    let vocab = codebook.vocab();
    let side = match records.first() {
        Some(g) => g.side(),
        None => 1,
    };
    if side > usize::from(u16::MAX) {
        return Err(Error::input(format!("grid side {side} does not fit the header")));
    }
    if codebook.dim() > usize::from(u16::MAX) || vocab > MAX_VOCAB {
        return Err(Error::input("codebook shape does not fit the header"));
    }
    if let Some(labels) = labels {
        if labels.len() != records.len() {
            return Err(Error::input(format!(
                "{} labels for {} records",
                labels.len(),
                records.len()
            )));
        }
    }

    // Pass one: shape checks and token popularity, counted in parallel shards.
    let counter = records
        .par_iter()
        .enumerate()
        .try_fold(
            || TokenCounter::new(vocab),
            |mut counter, (i, grid)| {
                if grid.side() != side {
                    return Err(Error::input(format!(
                        "record {i} has side {}, expected {side}",
                        grid.side()
                    )));
                }
                grid.check_vocab(vocab)
                    .map_err(|e| Error::input(format!("record {i}: {e}")))?;
                for &t in grid.tokens() {
                    counter.add(t)?;
                }
                Ok(counter)
            },
        )
        .try_reduce(|| TokenCounter::new(vocab), |a, b| Ok(a.merge(&b)))?;

    let permutation = if opts.remap {
        PopularityPermutation::from_counts(counter.counts().to_vec())?
    } else {
        PopularityPermutation::identity(vocab)
    };
    let mut ranked_counts = vec![0u64; vocab];
    for (old, &c) in counter.counts().iter().enumerate() {
        ranked_counts[usize::from(permutation.forward(old as u16))] = c;
    }
    let byte_counts = escape_byte_counts(&ranked_counts);
    let table = if opts.huffman && byte_counts.iter().any(|&c| c > 0) {
        HuffmanTable::build(&byte_counts)?
    } else {
        HuffmanTable::empty()
    };

    let mut flags = 0;
    if opts.huffman {
        flags |= FLAG_HUFFMAN;
    }
    if labels.is_some() {
        flags |= FLAG_LABELS;
    }
    if opts.remap {
        flags |= FLAG_PERMUTATION;
    }
    Ok(PackPlan {
        header: ArchiveHeader {
            version: VERSION,
            unit_bits: UNIT_BITS,
            flags,
            vocab: vocab as u16,
            dim: codebook.dim() as u16,
            side: side as u16,
            records: records.len() as u64,
        },
        permutation,
        table,
    })
}

fn encode_record(grid: &TokenGrid, plan: &PackPlan, scratch: &mut Vec<u8>, out: &mut Vec<u8>) {
    scratch.clear();
    for &t in grid.tokens() {
        let r = plan.permutation.forward(t);
        escape::escape_encode_into(&[r], scratch);
    }
    if plan.header.huffman() {
        plan.table
            .encode_into(scratch, out)
            .expect("table covers every byte counted in pass one");
    } else {
        out.extend_from_slice(scratch);
    }
}

fn record_size(grid: &TokenGrid, plan: &PackPlan) -> u64 {
    if plan.header.huffman() {
        let bits: u64 = grid
            .tokens()
            .iter()
            .map(|&t| {
                let r = usize::from(plan.permutation.forward(t));
                let escapes = (r / usize::from(ESCAPE)) as u64;
                escapes * u64::from(plan.table.length(ESCAPE))
                    + u64::from(plan.table.length((r % usize::from(ESCAPE)) as u8))
            })
            .sum();
        bits.div_ceil(8)
    } else {
        grid.tokens()
            .iter()
            .map(|&t| escape::encoded_len(plan.permutation.forward(t)) as u64)
            .sum()
    }
}

/// Summary returned by [`write_archive`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PackSummary {
    pub header: ArchiveHeader,
    pub total_bytes: u64,
    pub payload_bytes: u64,
}

/// Packs `records` into `out`. Identical inputs give identical bytes.
pub fn write_archive<W: Write>(
    out: W,
    records: &[TokenGrid],
    codebook: &Codebook,
    labels: Option<&[u16]>,
    opts: WriteOptions,
) -> Result<PackSummary> {
    let plan = plan(records, codebook, labels, opts)?;
    let mut w = PositionedWriter::new(out);

    let mut meta = Vec::new();
    meta.extend_from_slice(&plan.header.to_bytes());
    le::put_f32s(&mut meta, codebook.as_slice());
    if plan.header.has_permutation() {
        for &r in plan.permutation.forward_table() {
            le::put_u16(&mut meta, r);
        }
    }
    meta.extend_from_slice(plan.table.lengths());
    if let Some(labels) = labels {
        for &l in labels {
            le::put_u16(&mut meta, l);
        }
    }
    w.write(&meta)?;

    let sizes: Vec<u64> = records.par_iter().map(|g| record_size(g, &plan)).collect();
    let mut offsets = Vec::with_capacity((records.len() + 1) * 8);
    let mut acc = 0u64;
    le::put_u64(&mut offsets, 0);
    for s in &sizes {
        acc += s;
        le::put_u64(&mut offsets, acc);
    }
    w.write(&offsets)?;

    for (chunk_idx, chunk) in records.chunks(PACK_CHUNK).enumerate() {
        let encoded: Vec<Vec<u8>> = chunk
            .par_iter()
            .map_init(Vec::new, |scratch, g| {
                let mut out = Vec::new();
                encode_record(g, &plan, scratch, &mut out);
                out
            })
            .collect();
        for (j, rec) in encoded.iter().enumerate() {
            debug_assert_eq!(rec.len() as u64, sizes[chunk_idx * PACK_CHUNK + j]);
            w.write(rec)?;
        }
    }
    w.flush()?;
    Ok(PackSummary {
        header: plan.header,
        total_bytes: w.position,
        payload_bytes: acc,
    })
}

pub fn write_archive_file(
    path: impl AsRef<Path>,
    records: &[TokenGrid],
    codebook: &Codebook,
    labels: Option<&[u16]>,
    opts: WriteOptions,
) -> Result<PackSummary> {
    let file = File::create(path.as_ref()).map_err(|e| Error::io(0, e))?;
    write_archive(BufWriter::new(file), records, codebook, labels, opts)
}

struct PositionedWriter<W> {
    inner: W,
    position: u64,
}

impl<W: Write> PositionedWriter<W> {
    fn new(inner: W) -> Self {
        Self { inner, position: 0 }
    }

    fn write(&mut self, bytes: &[u8]) -> Result<()> {
        self.inner
            .write_all(bytes)
            .map_err(|e| Error::io(self.position, e))?;
        self.position += bytes.len() as u64;
        Ok(())
    }

    fn flush(&mut self) -> Result<()> {
        self.inner.flush().map_err(|e| Error::io(self.position, e))
    }
}

/// Positional read access to archive bytes. Implementations must allow
/// concurrent reads through a shared reference.
pub trait ByteSource: Send + Sync {
    fn len(&self) -> u64;

    fn read_exact_at(&self, offset: u64, buf: &mut [u8]) -> io::Result<()>;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug)]
pub struct FileSource {
    file: File,
    len: u64,
}

impl FileSource {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let file = File::open(path.as_ref()).map_err(|e| Error::io(0, e))?;
        let len = file.metadata().map_err(|e| Error::io(0, e))?.len();
        Ok(Self { file, len })
    }
}

impl ByteSource for FileSource {
    fn len(&self) -> u64 {
        self.len
    }

    #[cfg(unix)]
    fn read_exact_at(&self, offset: u64, buf: &mut [u8]) -> io::Result<()> {
        std::os::unix::fs::FileExt::read_exact_at(&self.file, buf, offset)
    }

    #[cfg(windows)]
    fn read_exact_at(&self, mut offset: u64, mut buf: &mut [u8]) -> io::Result<()> {
        use std::os::windows::fs::FileExt;
        while !buf.is_empty() {
            match self.file.seek_read(buf, offset)? {
                0 => return Err(io::ErrorKind::UnexpectedEof.into()),
                n => {
                    buf = &mut buf[n..];
                    offset += n as u64;
                }
            }
        }
        Ok(())
    }
}

impl ByteSource for Vec<u8> {
    fn len(&self) -> u64 {
        self.as_slice().len() as u64
    }

    fn read_exact_at(&self, offset: u64, buf: &mut [u8]) -> io::Result<()> {
        read_from_slice(self, offset, buf)
    }
}

impl ByteSource for Arc<[u8]> {
    fn len(&self) -> u64 {
        (**self).len() as u64
    }

    fn read_exact_at(&self, offset: u64, buf: &mut [u8]) -> io::Result<()> {
        read_from_slice(self, offset, buf)
    }
}

fn read_from_slice(data: &[u8], offset: u64, buf: &mut [u8]) -> io::Result<()> {
    let start = usize::try_from(offset).map_err(|_| io::ErrorKind::UnexpectedEof)?;
    let end = start
        .checked_add(buf.len())
        .filter(|&e| e <= data.len())
        .ok_or(io::ErrorKind::UnexpectedEof)?;
    buf.copy_from_slice(&data[start..end]);
    Ok(())
}

/// An opened archive. Metadata is resident; record bytes are read on demand.
#[derive(Debug)]
pub struct TokenArchive<S = FileSource> {
    header: ArchiveHeader,
    codebook: Codebook,
    permutation: PopularityPermutation,
    table: HuffmanTable,
    labels: Option<Vec<u16>>,
    offsets: Vec<u64>,
    payload_start: u64,
    source: S,
}

/// Opens an archive file.
pub fn open_archive(path: impl AsRef<Path>) -> Result<TokenArchive<FileSource>> {
    TokenArchive::from_source(FileSource::open(path)?)
}

impl<S: ByteSource> TokenArchive<S> {
    pub fn from_source(source: S) -> Result<Self> {
        let file_len = source.len();
        let mut head = [0u8; HEADER_LEN];
        if file_len < HEADER_LEN as u64 {
            return Err(Error::format(
                "header",
                0,
                format!("file is {file_len} bytes, header needs {HEADER_LEN}"),
            ));
        }
        source
            .read_exact_at(0, &mut head)
            .map_err(|e| Error::io(0, e))?;
        let header = ArchiveHeader::parse(&head)?;

        let vocab = usize::from(header.vocab);
        let dim = usize::from(header.dim);
        let n = usize::try_from(header.records)
            .map_err(|_| Error::format("records", 16, "record count does not fit in memory"))?;
        let meta_len = (dim as u64 * vocab as u64 * 4)
            + if header.has_permutation() { vocab as u64 * 2 } else { 0 }
            + ALPHABET as u64
            + if header.has_labels() { n as u64 * 2 } else { 0 }
            + (n as u64 + 1) * 8;
        let payload_start = HEADER_LEN as u64 + meta_len;
        if payload_start > file_len {
            return Err(Error::format(
                "offsets",
                file_len,
                format!("metadata needs {payload_start} bytes, file has {file_len}"),
            ));
        }
        let mut meta = vec![0u8; meta_len as usize];
        source
            .read_exact_at(HEADER_LEN as u64, &mut meta)
            .map_err(|e| Error::io(HEADER_LEN as u64, e))?;
        let mut cur = Cursor::with_base(&meta, HEADER_LEN as u64);

        let vectors_at = cur.position();
        let vectors = cur.f32s("codebook", dim * vocab)?;
        let codebook = Codebook::new(dim, vectors)
            .map_err(|e| Error::format("codebook", vectors_at, e.to_string()))?;

        let permutation = if header.has_permutation() {
            let at = cur.position();
            let forward = cur.u16s("permutation", vocab)?;
            PopularityPermutation::from_forward(forward)
                .map_err(|e| Error::format("permutation", at, e.to_string()))?
        } else {
            PopularityPermutation::identity(vocab)
        };

        let lengths_at = cur.position();
        let lengths: [u8; ALPHABET] = cur.take("code_lengths", ALPHABET)?.try_into().unwrap();
        let table = HuffmanTable::from_lengths(lengths)
            .map_err(|e| Error::format("code_lengths", lengths_at, e.to_string()))?;
        if !header.huffman() && !table.is_empty() {
            return Err(Error::format(
                "code_lengths",
                lengths_at,
                "code lengths present but Huffman flag is clear",
            ));
        }

        let labels = if header.has_labels() {
            Some(cur.u16s("labels", n)?)
        } else {
            None
        };

        let offsets_at = cur.position();
        let offsets = cur.u64s("offsets", n + 1)?;
        let payload_len = file_len - payload_start;
        if offsets[0] != 0 {
            return Err(Error::format("offsets", offsets_at, "first offset is not zero"));
        }
        if let Some(i) = offsets.windows(2).position(|w| w[1] < w[0]) {
            return Err(Error::format(
                "offsets",
                offsets_at + 8 * (i as u64 + 1),
                format!("offset {} decreases", i + 1),
            ));
        }
        if offsets[n] != payload_len {
            return Err(Error::format(
                "offsets",
                offsets_at + 8 * n as u64,
                format!(
                    "final offset {} does not match payload length {payload_len}",
                    offsets[n]
                ),
            ));
        }
        if header.huffman() && table.is_empty() && payload_len > 0 {
            return Err(Error::format(
                "code_lengths",
                lengths_at,
                "payload present but the code table is empty",
            ));
        }

        Ok(Self {
            header,
            codebook,
            permutation,
            table,
            labels,
            offsets,
            payload_start,
            source,
        })
    }

    pub fn header(&self) -> &ArchiveHeader {
        &self.header
    }

    pub fn len(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Codebook in original index order.
    pub fn codebook(&self) -> &Codebook {
        &self.codebook
    }

    /// Codebook reordered so column `r` belongs to packed rank `r`.
    pub fn ranked_codebook(&self) -> Codebook {
        self.codebook
            .reordered(self.permutation.inverse_table())
            .expect("permutation matches vocabulary")
    }

    pub fn permutation(&self) -> &PopularityPermutation {
        &self.permutation
    }

    pub fn table(&self) -> &HuffmanTable {
        &self.table
    }

    pub fn labels(&self) -> Option<&[u16]> {
        self.labels.as_deref()
    }

    pub fn label(&self, index: usize) -> Option<u16> {
        self.labels.as_ref().and_then(|l| l.get(index).copied())
    }

    pub fn offsets(&self) -> &[u64] {
        &self.offsets
    }

    /// Absolute file offset where record bytes begin.
    pub fn payload_start(&self) -> u64 {
        self.payload_start
    }

    pub fn file_len(&self) -> u64 {
        self.source.len()
    }

    pub fn source(&self) -> &S {
        &self.source
    }

    fn check_index(&self, index: usize) -> Result<()> {
        if index >= self.len() {
            return Err(Error::Index {
                index: index as u64,
                len: self.len() as u64,
            });
        }
        Ok(())
    }

    /// Raw stored bytes of record `index`.
    pub fn read_record_bytes(&self, index: usize) -> Result<Vec<u8>> {
        self.check_index(index)?;
        let start = self.offsets[index];
        let end = self.offsets[index + 1];
        let mut buf = vec![0u8; (end - start) as usize];
        let at = self.payload_start + start;
        self.source
            .read_exact_at(at, &mut buf)
            .map_err(|e| Error::io(at, e))?;
        Ok(buf)
    }

    /// Decodes record `index` in packed-rank index space.
    pub fn read_image(&self, index: usize) -> Result<TokenGrid> {
        let (grid, _) = self.decode_record(index)?;
        Ok(grid)
    }

    /// Decodes record `index` and translates it back to original code ids.
    pub fn read_image_original(&self, index: usize) -> Result<TokenGrid> {
        let grid = self.read_image(index)?;
        Ok(grid.map(|r| self.permutation.inverse(r)))
    }

    pub fn read_labeled(&self, index: usize) -> Result<(TokenGrid, Option<u16>)> {
        Ok((self.read_image(index)?, self.label(index)))
    }

    /// Decodes a record, also returning the length of its escape-byte stream.
    pub fn decode_record(&self, index: usize) -> Result<(TokenGrid, usize)> {
        let bytes = self.read_record_bytes(index)?;
        let count = self.header.tokens_per_record();
        let corrupt = |e: Error| Error::Corruption {
            record: index as u64,
            reason: e.to_string(),
        };
        let mut tokens = Vec::with_capacity(count);
        let escaped_len = if self.header.huffman() {
            codec::decode_image_into(&bytes, &self.table, count, &mut tokens).map_err(corrupt)?
        } else {
            codec::decode_escaped_into(&bytes, count, &mut tokens).map_err(corrupt)?;
            bytes.len()
        };
        let vocab = usize::from(self.header.vocab);
        if let Some(pos) = tokens.iter().position(|&t| usize::from(t) >= vocab) {
            return Err(Error::Corruption {
                record: index as u64,
                reason: format!("token {} at {pos} outside vocabulary {vocab}", tokens[pos]),
            });
        }
        let grid = TokenGrid::new(usize::from(self.header.side), tokens).map_err(corrupt)?;
        Ok((grid, escaped_len))
    }

    /// Storage accounting for the whole archive. Decodes every record.
    pub fn stats(&self) -> Result<StorageReport> {
        let vocab = usize::from(self.header.vocab);
        let per_record = self.header.tokens_per_record();
        let (counter, escaped_total) = (0..self.len())
            .into_par_iter()
            .try_fold(
                || (TokenCounter::new(vocab), 0u64),
                |(mut counter, escaped), i| {
                    let (grid, escaped_len) = self.decode_record(i)?;
                    for &t in grid.tokens() {
                        counter.add(t)?;
                    }
                    Ok::<_, Error>((counter, escaped + escaped_len as u64))
                },
            )
            .try_reduce(
                || (TokenCounter::new(vocab), 0),
                |a, b| Ok((a.0.merge(&b.0), a.1 + b.1)),
            )?;
        let n = self.len() as f64;
        let mean = |total: f64| if self.is_empty() { 0.0 } else { total / n };
        let payload = self.offsets[self.len()];
        let entropy_bits = if self.is_empty() {
            0.0
        } else {
            codec::entropy(counter.counts())?
        };
        Ok(StorageReport {
            n_records: self.len() as u64,
            grid_side: self.header.side,
            vocab: self.header.vocab,
            total_bytes: self.file_len(),
            payload_bytes: payload,
            index_bytes: 8 * (self.len() as u64 + 1),
            bytes_per_record_uint16: 2.0 * per_record as f64,
            bytes_per_record_escape: mean(escaped_total as f64),
            bytes_per_record_huffman: mean(payload as f64),
            bytes_per_record_optimal: per_record as f64 * (vocab as f64).log2() / 8.0,
            bytes_per_record_entropy: per_record as f64 * entropy_bits / 8.0,
            entropy_bits,
        })
    }
}

/// Storage accounting in the same columns as the uint16 / escape / Huffman /
/// optimum comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StorageReport {
    pub n_records: u64,
    pub grid_side: u16,
    pub vocab: u16,
    pub total_bytes: u64,
    pub payload_bytes: u64,
    pub index_bytes: u64,
    pub bytes_per_record_uint16: f64,
    /// Mean escape-encoded size before the Huffman stage.
    pub bytes_per_record_escape: f64,
    /// Mean stored record size (equal to the escape size when Huffman is off).
    pub bytes_per_record_huffman: f64,
    /// Uniform-population optimum: `side^2 * log2(vocab) / 8`.
    pub bytes_per_record_optimal: f64,
    /// Empirical optimum: `side^2 * H(p) / 8` for the archive's token distribution.
    pub bytes_per_record_entropy: f64,
    /// Empirical token entropy in bits per token.
    pub entropy_bits: f64,
}

impl StorageReport {
    /// Line-delimited `key=value` rendering.
    pub fn to_key_values(&self) -> String {
        format!(
            "n_records={}\ntotal_bytes={}\npayload_bytes={}\nindex_bytes={}\n\
             bytes_per_record_uint16={:.3}\nbytes_per_record_escape={:.3}\n\
             bytes_per_record_huffman={:.3}\nbytes_per_record_optimal={:.3}\n\
             bytes_per_record_entropy={:.3}\nentropy_bits={:.6}\n",
            self.n_records,
            self.total_bytes,
            self.payload_bytes,
            self.index_bytes,
            self.bytes_per_record_uint16,
            self.bytes_per_record_escape,
            self.bytes_per_record_huffman,
            self.bytes_per_record_optimal,
            self.bytes_per_record_entropy,
            self.entropy_bits,
        )
    }
}

/// Reads a whole archive file into memory and opens it.
pub fn open_archive_in_memory(path: impl AsRef<Path>) -> Result<TokenArchive<Arc<[u8]>>> {
    let bytes = fs::read(path).map_err(|e| Error::io(0, e))?;
    TokenArchive::from_source(Arc::from(bytes))
}
