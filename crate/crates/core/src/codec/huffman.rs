//! Canonical Huffman coding over the byte alphabet.
//!
//! A table is fully described by its 256 code lengths (0 = symbol absent).
//! Codes are assigned in (length, symbol) order and written most significant
//! bit first; the final partial byte of a stream is zero-padded.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

pub const ALPHABET: usize = 256;

/// Longest code the decoder accepts. Builds that would exceed it are
/// rebuilt from flattened counts.
pub const MAX_CODE_LEN: u8 = 32;

const LOOKUP_BITS: u32 = 10;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HuffmanTable {
    lengths: [u8; ALPHABET],
    codes: [u32; ALPHABET],
    decoder: Decoder,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Decoder {
    // (symbol, length) for every LOOKUP_BITS-bit prefix; length 0 = needs the slow path.
    lookup: Vec<(u8, u8)>,
    // Canonical decoding state per length.
    first_code: [u32; MAX_CODE_LEN as usize + 1],
    first_index: [u32; MAX_CODE_LEN as usize + 1],
    count: [u32; MAX_CODE_LEN as usize + 1],
    sorted_symbols: Vec<u8>,
    max_len: u8,
}

impl HuffmanTable {
    /// Builds an optimal canonical table for the given byte frequencies.
    pub fn build(counts: &[u64; ALPHABET]) -> Result<Self> {
        if counts.iter().all(|&c| c == 0) {
            return Err(Error::input("cannot build a Huffman table from all-zero counts"));
        }
        let mut weights = *counts;
        loop {
            let lengths = code_lengths(&weights);
            if lengths.iter().all(|&l| l <= MAX_CODE_LEN) {
                return Self::from_lengths(lengths);
            }
            for w in weights.iter_mut().filter(|w| **w > 0) {
                *w = (*w >> 1).max(1);
            }
        }
    }

    /// A table with no symbols, used by archives that hold no payload bytes.
    pub fn empty() -> Self {
        Self::from_lengths([0; ALPHABET]).expect("empty table is valid")
    }

    /// Reconstructs the canonical code from lengths, checking the Kraft inequality.
    pub fn from_lengths(lengths: [u8; ALPHABET]) -> Result<Self> {
        if let Some(&l) = lengths.iter().find(|&&l| l > MAX_CODE_LEN) {
            return Err(Error::format(
                "huffman.lengths",
                0,
                format!("code length {l} exceeds {MAX_CODE_LEN}"),
            ));
        }
        let kraft: u64 = lengths
            .iter()
            .filter(|&&l| l > 0)
            .map(|&l| 1u64 << (MAX_CODE_LEN - l))
            .sum();
        if kraft > 1u64 << MAX_CODE_LEN {
            return Err(Error::format(
                "huffman.lengths",
                0,
                "code lengths violate the Kraft inequality",
            ));
        }

        let mut sorted_symbols: Vec<u8> = (0..ALPHABET)
            .filter(|&s| lengths[s] > 0)
            .map(|s| s as u8)
            .collect();
        sorted_symbols.sort_by_key(|&s| (lengths[usize::from(s)], s));

        let mut count = [0u32; MAX_CODE_LEN as usize + 1];
        for &s in &sorted_symbols {
            count[usize::from(lengths[usize::from(s)])] += 1;
        }
        let mut first_code = [0u32; MAX_CODE_LEN as usize + 1];
        let mut first_index = [0u32; MAX_CODE_LEN as usize + 1];
        let mut code: u64 = 0;
        let mut index = 0u32;
        for len in 1..=MAX_CODE_LEN as usize {
            code = (code + u64::from(count[len - 1])) << 1;
            first_code[len] = code as u32;
            first_index[len] = index;
            index += count[len];
        }

        let mut codes = [0u32; ALPHABET];
        for len in 1..=MAX_CODE_LEN as usize {
            let start = first_index[len] as usize;
            for (offset, &s) in sorted_symbols[start..start + count[len] as usize]
                .iter()
                .enumerate()
            {
                codes[usize::from(s)] = first_code[len] + offset as u32;
            }
        }

        let max_len = sorted_symbols
            .last()
            .map(|&s| lengths[usize::from(s)])
            .unwrap_or(0);
        let mut lookup = vec![(0u8, 0u8); 1 << LOOKUP_BITS];
        for &s in &sorted_symbols {
            let len = u32::from(lengths[usize::from(s)]);
            if len <= LOOKUP_BITS {
                let shift = LOOKUP_BITS - len;
                let base = (codes[usize::from(s)] << shift) as usize;
                for slot in &mut lookup[base..base + (1 << shift)] {
                    *slot = (s, len as u8);
                }
            }
        }

        Ok(Self {
            lengths,
            codes,
            decoder: Decoder {
                lookup,
                first_code,
                first_index,
                count,
                sorted_symbols,
                max_len,
            },
        })
    }

    pub fn lengths(&self) -> &[u8; ALPHABET] {
        &self.lengths
    }

    #[inline]
    pub fn length(&self, symbol: u8) -> u8 {
        self.lengths[usize::from(symbol)]
    }

    /// Canonical code of `symbol`, right-aligned in the low `length` bits.
    #[inline]
    pub fn code(&self, symbol: u8) -> u32 {
        self.codes[usize::from(symbol)]
    }

    pub fn is_empty(&self) -> bool {
        self.decoder.sorted_symbols.is_empty()
    }

    /// Total encoded size in bits of a stream with these byte counts.
    pub fn weighted_length(&self, counts: &[u64; ALPHABET]) -> u64 {
        counts
            .iter()
            .zip(&self.lengths)
            .map(|(&c, &l)| c * u64::from(l))
            .sum()
    }

    /// Number of payload bits needed for `bytes`.
    pub fn encoded_bits(&self, bytes: &[u8]) -> Result<u64> {
        bytes.iter().try_fold(0u64, |acc, &b| match self.length(b) {
            0 => Err(Error::TableMismatch { symbol: b }),
            l => Ok(acc + u64::from(l)),
        })
    }

    pub fn encode(&self, bytes: &[u8]) -> Result<Vec<u8>> {
        let mut out = Vec::with_capacity(bytes.len());
        self.encode_into(bytes, &mut out)?;
        Ok(out)
    }

    /// Appends the byte-padded bitstream for `bytes` to `out`.
    pub fn encode_into(&self, bytes: &[u8], out: &mut Vec<u8>) -> Result<()> {
        let mut acc: u64 = 0;
        let mut filled: u32 = 0;
        for &b in bytes {
            let len = u32::from(self.length(b));
            if len == 0 {
                return Err(Error::TableMismatch { symbol: b });
            }
            acc = (acc << len) | u64::from(self.code(b));
            filled += len;
            while filled >= 8 {
                filled -= 8;
                out.push((acc >> filled) as u8);
            }
            acc &= (1u64 << filled) - 1;
        }
        if filled > 0 {
            out.push((acc << (8 - filled)) as u8);
        }
        Ok(())
    }

    pub fn decode(&self, bits: &[u8], expected_len: usize) -> Result<Vec<u8>> {
        let mut out = Vec::with_capacity(expected_len);
        self.decode_into(bits, expected_len, &mut out)?;
        Ok(out)
    }

    /// Decodes exactly `expected_len` symbols from `bits`, appending them to `out`.
    pub fn decode_into(&self, bits: &[u8], expected_len: usize, out: &mut Vec<u8>) -> Result<()> {
        if expected_len == 0 {
            return Ok(());
        }
        let mut produced = 0usize;
        self.decode_with(bits, |sym| {
            out.push(sym);
            produced += 1;
            Ok(produced < expected_len)
        })
        .map_err(|e| match e {
            Error::Truncation(_) => Error::Truncation(format!(
                "bitstream exhausted after {produced} of {expected_len} symbols"
            )),
            other => other,
        })?;
        Ok(())
    }

    /// Feeds decoded symbols to `sink` until it returns `Ok(false)`.
    /// Returns the number of bits consumed.
    pub fn decode_with(
        &self,
        bits: &[u8],
        mut sink: impl FnMut(u8) -> Result<bool>,
    ) -> Result<usize> {
        if self.is_empty() {
            return Err(Error::Truncation(
                "table has no symbols but output was expected".to_string(),
            ));
        }
        let dec = &self.decoder;
        let mut reader = BitReader::new(bits);
        loop {
            let (peek, avail) = reader.peek(LOOKUP_BITS);
            let (sym, len) = dec.lookup[peek as usize];
            let sym = if len > 0 && u32::from(len) <= avail {
                reader.consume(u32::from(len));
                sym
            } else {
                self.decode_slow(&mut reader)?
            };
            if !sink(sym)? {
                return Ok(reader.bit_pos);
            }
        }
    }

    // Extends the code one bit at a time against the canonical length tables.
    fn decode_slow(&self, reader: &mut BitReader<'_>) -> Result<u8> {
        let dec = &self.decoder;
        let mut code: u32 = 0;
        for len in 1..=usize::from(dec.max_len) {
            let bit = reader
                .next_bit()
                .ok_or_else(|| Error::Truncation("bitstream exhausted".to_string()))?;
            code = (code << 1) | bit;
            let offset = code.wrapping_sub(dec.first_code[len]);
            if code >= dec.first_code[len] && offset < dec.count[len] {
                return Ok(dec.sorted_symbols[(dec.first_index[len] + offset) as usize]);
            }
        }
        Err(Error::InvalidCode(format!(
            "no code matches the bits before bit {}",
            reader.bit_pos
        )))
    }
}

/// Huffman code lengths for the given weights. Ties in the merge queue are
/// broken by node creation order, so the result is deterministic.
fn code_lengths(weights: &[u64; ALPHABET]) -> [u8; ALPHABET] {
    let mut lengths = [0u8; ALPHABET];
    let present: Vec<usize> = (0..ALPHABET).filter(|&s| weights[s] > 0).collect();
    match present.len() {
        0 => return lengths,
        1 => {
            lengths[present[0]] = 1;
            return lengths;
        }
        _ => {}
    }

    // Nodes 0..ALPHABET are leaves; internal nodes are appended after them.
    let mut parent: Vec<usize> = vec![usize::MAX; ALPHABET];
    let mut heap: BinaryHeap<Reverse<(u64, usize)>> =
        present.iter().map(|&s| Reverse((weights[s], s))).collect();
    while heap.len() > 1 {
        let Reverse((w1, a)) = heap.pop().unwrap();
        let Reverse((w2, b)) = heap.pop().unwrap();
        let node = parent.len();
        parent.push(usize::MAX);
        parent[a] = node;
        parent[b] = node;
        heap.push(Reverse((w1 + w2, node)));
    }

    let mut depth = vec![0u32; parent.len()];
    for node in (0..parent.len()).rev() {
        if parent[node] != usize::MAX {
            depth[node] = depth[parent[node]] + 1;
        }
    }
    for &s in &present {
        lengths[s] = depth[s].min(u32::from(u8::MAX)) as u8;
    }
    lengths
}

struct BitReader<'a> {
    bytes: &'a [u8],
    bit_pos: usize,
}

impl<'a> BitReader<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, bit_pos: 0 }
    }

    fn remaining(&self) -> usize {
        self.bytes.len() * 8 - self.bit_pos
    }

    /// Next `n` bits (n <= 25) left-aligned into an `n`-bit value, zero-filled
    /// past the end, with the number of real bits available.
    #[inline]
    fn peek(&self, n: u32) -> (u32, u32) {
        let byte = self.bit_pos / 8;
        let mut window: u32 = 0;
        for i in 0..4 {
            window = (window << 8) | u32::from(*self.bytes.get(byte + i).unwrap_or(&0));
        }
        let shifted = window << (self.bit_pos % 8);
        let avail = self.remaining().min(n as usize) as u32;
        (shifted >> (32 - n), avail)
    }

    #[inline]
    fn consume(&mut self, n: u32) {
        self.bit_pos += n as usize;
    }

    #[inline]
    fn next_bit(&mut self) -> Option<u32> {
        let byte = *self.bytes.get(self.bit_pos / 8)?;
        let bit = (byte >> (7 - self.bit_pos % 8)) & 1;
        self.bit_pos += 1;
        Some(u32::from(bit))
    }
}

/// Byte histogram.
pub fn byte_counts(bytes: &[u8]) -> [u64; ALPHABET] {
    let mut counts = [0u64; ALPHABET];
    for &b in bytes {
        counts[usize::from(b)] += 1;
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn counts_of(pairs: &[(u8, u64)]) -> [u64; ALPHABET] {
        let mut c = [0u64; ALPHABET];
        for &(s, n) in pairs {
            c[usize::from(s)] = n;
        }
        c
    }

    #[test]
    fn two_equiprobable_symbols() {
        let t = HuffmanTable::build(&counts_of(&[(b'a', 5), (b'b', 5)])).unwrap();
        assert_eq!(t.length(b'a'), 1);
        assert_eq!(t.length(b'b'), 1);
    }

    #[test]
    fn two_leaf_tree() {
        let counts = counts_of(&[(b'a', 3), (b'b', 1)]);
        let t = HuffmanTable::build(&counts).unwrap();
        assert_eq!((t.length(b'a'), t.length(b'b')), (1, 1));
        let bits = t.encode(b"aaab").unwrap();
        assert_eq!(t.encoded_bits(b"aaab").unwrap(), 4);
        assert_eq!(bits.len(), 1);
        // a = 0, b = 1, padded with zeros: 0001_0000
        assert_eq!(bits, vec![0b0001_0000]);
        assert_eq!(t.decode(&bits, 4).unwrap(), b"aaab");
    }

    #[test]
    fn four_symbol_lengths() {
        let counts = counts_of(&[(b'a', 4), (b'b', 2), (b'c', 1), (b'd', 1)]);
        let t = HuffmanTable::build(&counts).unwrap();
        let lens: Vec<u8> = b"abcd".iter().map(|&s| t.length(s)).collect();
        assert_eq!(lens, vec![1, 2, 3, 3]);
        assert_eq!(t.weighted_length(&counts), 14);
    }

    #[test]
    fn single_symbol_gets_one_bit() {
        let t = HuffmanTable::build(&counts_of(&[(7, 1024)])).unwrap();
        assert_eq!(t.length(7), 1);
        let stream = vec![7u8; 1024];
        let bits = t.encode(&stream).unwrap();
        assert_eq!(bits.len(), 128);
        assert!(bits.iter().all(|&b| b == 0));
        assert_eq!(t.decode(&bits, 1024).unwrap(), stream);
        // the unused code 1 is rejected
        assert!(matches!(t.decode(&[0x80], 1), Err(Error::InvalidCode(_))));
    }

    /// Golden vector for the normative bit layout: lengths {a:1, b:2, c:3, d:3}
    /// give codes a=0, b=10, c=110, d=111, packed MSB-first.
    #[test]
    fn golden_bitstream() {
        let t = HuffmanTable::build(&counts_of(&[(b'a', 4), (b'b', 2), (b'c', 1), (b'd', 1)]))
            .unwrap();
        assert_eq!(t.code(b'a'), 0b0);
        assert_eq!(t.code(b'b'), 0b10);
        assert_eq!(t.code(b'c'), 0b110);
        assert_eq!(t.code(b'd'), 0b111);
        // "dcba" = 111 110 10 0 -> 1111_1010 0(pad 0000000)
        assert_eq!(t.encode(b"dcba").unwrap(), vec![0b1111_1010, 0b0000_0000]);
        // "abcdd" = 0 10 110 111 111 -> 0101_1011 1111_0000
        assert_eq!(t.encode(b"abcdd").unwrap(), vec![0b0101_1011, 0b1111_0000]);
    }

    #[test]
    fn equal_lengths_ordered_by_symbol() {
        let t = HuffmanTable::build(&counts_of(&[(9, 1), (3, 1), (200, 1), (1, 1)])).unwrap();
        assert_eq!(
            [t.code(1), t.code(3), t.code(9), t.code(200)],
            [0b00, 0b01, 0b10, 0b11]
        );
    }

    #[test]
    fn empty_input_and_errors() {
        let t = HuffmanTable::build(&counts_of(&[(1, 1), (2, 1)])).unwrap();
        assert!(t.encode(&[]).unwrap().is_empty());
        assert!(t.decode(&[], 0).unwrap().is_empty());
        assert!(matches!(t.encode(&[3]), Err(Error::TableMismatch { symbol: 3 })));
        assert!(matches!(t.decode(&[0b0100_0000], 9), Err(Error::Truncation(_))));
        assert!(HuffmanTable::build(&[0; ALPHABET]).is_err());
    }

    #[test]
    fn kraft_violation_rejected() {
        let mut lengths = [0u8; ALPHABET];
        lengths[0] = 1;
        lengths[1] = 1;
        lengths[2] = 1;
        assert!(HuffmanTable::from_lengths(lengths).is_err());
    }

    #[test]
    fn long_codes_are_capped() {
        // Fibonacci weights force a maximally skewed tree of depth 39.
        let mut counts = [0u64; ALPHABET];
        let (mut a, mut b) = (1u64, 1u64);
        for slot in counts.iter_mut().take(40) {
            *slot = a;
            (a, b) = (b, a + b);
        }
        let t = HuffmanTable::build(&counts).unwrap();
        assert!(t.lengths().iter().all(|&l| l <= MAX_CODE_LEN));
        let stream: Vec<u8> = (0..40u8).chain(0..40).collect();
        let bits = t.encode(&stream).unwrap();
        assert_eq!(t.decode(&bits, stream.len()).unwrap(), stream);
    }

    #[test]
    fn random_round_trip_10k() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let data: Vec<u8> = (0..10_000).map(|_| rng.random()).collect();
        let t = HuffmanTable::build(&byte_counts(&data)).unwrap();
        let bits = t.encode(&data).unwrap();
        assert_eq!(bits.len() as u64, t.encoded_bits(&data).unwrap().div_ceil(8));
        assert_eq!(t.decode(&bits, data.len()).unwrap(), data);
    }

    proptest! {
        #[test]
        fn round_trip_skewed(data in prop::collection::vec(prop_oneof![
            8 => 0u8..4, 1 => any::<u8>()], 1..2000)) {
            let t = HuffmanTable::build(&byte_counts(&data)).unwrap();
            let bits = t.encode(&data).unwrap();
            prop_assert_eq!(t.decode(&bits, data.len()).unwrap(), data);
        }

        #[test]
        fn lengths_round_trip_canonically(data in prop::collection::vec(any::<u8>(), 1..500)) {
            let t = HuffmanTable::build(&byte_counts(&data)).unwrap();
            let rebuilt = HuffmanTable::from_lengths(*t.lengths()).unwrap();
            prop_assert_eq!(rebuilt, t);
        }
    }
}
