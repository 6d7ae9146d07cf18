//! Token encoding: escape bytes followed by a shared canonical Huffman code.

pub mod entropy;
pub mod escape;
pub mod huffman;

pub use entropy::{entropy, entropy_bound_bits};
pub use escape::{escape_decode, escape_encode, ESCAPE, UNIT_BITS};
pub use huffman::{byte_counts, HuffmanTable, ALPHABET};

use crate::error::{Error, Result};

/// One image's compressed tokens.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedRecord {
    /// Byte-padded Huffman bitstream.
    pub bits: Vec<u8>,
    /// Length of the escape-byte stream before Huffman coding.
    pub escaped_len: usize,
}

pub fn encode_image(tokens: &[u16], table: &HuffmanTable) -> Result<EncodedRecord> {
    let escaped = escape_encode(tokens);
    let bits = table.encode(&escaped)?;
    Ok(EncodedRecord {
        bits,
        escaped_len: escaped.len(),
    })
}

/// Decodes `token_count` tokens from a Huffman bitstream. The stream must end
/// with at most seven zero padding bits.
pub fn decode_image(bits: &[u8], table: &HuffmanTable, token_count: usize) -> Result<Vec<u16>> {
    let mut out = Vec::with_capacity(token_count);
    decode_image_into(bits, table, token_count, &mut out)?;
    Ok(out)
}

pub fn decode_image_into(
    bits: &[u8],
    table: &HuffmanTable,
    token_count: usize,
    out: &mut Vec<u16>,
) -> Result<usize> {
    if token_count == 0 {
        return if bits.is_empty() {
            Ok(0)
        } else {
            Err(Error::InvalidCode("bits present for an empty record".into()))
        };
    }
    let start = out.len();
    let mut escaped_len = 0usize;
    let mut acc: u32 = 0;
    let consumed = table.decode_with(bits, |sym| {
        escaped_len += 1;
        acc += u32::from(sym);
        if sym == ESCAPE {
            return Ok(true);
        }
        let token = u16::try_from(acc)
            .map_err(|_| Error::InvalidCode(format!("decoded index {acc} exceeds 16 bits")))?;
        out.push(token);
        acc = 0;
        Ok(out.len() - start < token_count)
    })?;
    check_padding(bits, consumed)?;
    Ok(escaped_len)
}

/// Decodes a record stored without the Huffman stage.
pub fn decode_escaped_into(bytes: &[u8], token_count: usize, out: &mut Vec<u16>) -> Result<()> {
    let start = out.len();
    escape::escape_decode_into(bytes, out)?;
    let got = out.len() - start;
    if got != token_count {
        return Err(Error::InvalidCode(format!(
            "record holds {got} tokens, expected {token_count}"
        )));
    }
    Ok(())
}

fn check_padding(bits: &[u8], consumed: usize) -> Result<()> {
    let total = bits.len() * 8;
    if total - consumed >= 8 {
        return Err(Error::InvalidCode(format!(
            "{} unused bytes after the last token",
            (total - consumed) / 8
        )));
    }
    if consumed % 8 != 0 {
        let last = bits[bits.len() - 1];
        let pad_bits = 8 - consumed % 8;
        if last & ((1u8 << pad_bits) - 1) != 0 {
            return Err(Error::InvalidCode("non-zero padding bits".into()));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn table_for(tokens: &[u16]) -> HuffmanTable {
        HuffmanTable::build(&byte_counts(&escape_encode(tokens))).unwrap()
    }

    #[test]
    fn all_zero_grid() {
        let tokens = vec![0u16; 1024];
        let escaped = escape_encode(&tokens);
        assert!(escaped.iter().all(|&b| b == 0));
        let t = table_for(&tokens);
        let rec = encode_image(&tokens, &t).unwrap();
        assert_eq!(rec.escaped_len, 1024);
        assert_eq!(rec.bits.len(), 128);
        assert_eq!(decode_image(&rec.bits, &t, 1024).unwrap(), tokens);
    }

    #[test]
    fn constant_390_grid() {
        let tokens = vec![390u16; 1024];
        let escaped = escape_encode(&tokens);
        assert_eq!(escaped.len(), 2048);
        assert!(escaped.chunks(2).all(|p| p == [255, 135]));
        let t = table_for(&tokens);
        let rec = encode_image(&tokens, &t).unwrap();
        assert_eq!(decode_image(&rec.bits, &t, 1024).unwrap(), tokens);
    }

    #[test]
    fn random_grids_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let grids: Vec<Vec<u16>> = (0..20)
            .map(|_| (0..1024).map(|_| rng.random_range(0..391)).collect())
            .collect();
        let all: Vec<u16> = grids.concat();
        let t = table_for(&all);
        for g in &grids {
            let rec = encode_image(g, &t).unwrap();
            assert_eq!(decode_image(&rec.bits, &t, g.len()).unwrap(), *g);
        }
    }

    #[test]
    fn short_and_padded_streams_fail() {
        let tokens: Vec<u16> = (0..100).map(|i| (i * 7 % 391) as u16).collect();
        let t = table_for(&tokens);
        let rec = encode_image(&tokens, &t).unwrap();
        let truncated = &rec.bits[..rec.bits.len() - 2];
        assert!(matches!(
            decode_image(truncated, &t, 100),
            Err(Error::Truncation(_) | Error::InvalidCode(_))
        ));
        let mut extended = rec.bits.clone();
        extended.push(0);
        assert!(matches!(decode_image(&extended, &t, 100), Err(Error::InvalidCode(_))));
    }

    #[test]
    fn escaped_records_check_count() {
        let mut out = Vec::new();
        decode_escaped_into(&escape_encode(&[1, 300]), 2, &mut out).unwrap();
        assert_eq!(out, vec![1, 300]);
        assert!(decode_escaped_into(&[1, 2, 3], 2, &mut Vec::new()).is_err());
    }
}
