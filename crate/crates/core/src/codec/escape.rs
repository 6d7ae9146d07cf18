//! Escape-byte token encoding.
//!
//! Every index `i` is written as `floor(i / 255)` escape bytes (`0xFF`)
//! followed by the residual `i mod 255`. Indices below 255 therefore cost one
//! byte, indices in `[255, 510)` two bytes, and so on.

use crate::error::{Error, Result};

/// Sentinel byte announcing that 255 more is added to the running value.
pub const ESCAPE: u8 = u8::MAX;

/// Bits per storage unit. Only byte units are supported.
pub const UNIT_BITS: u8 = 8;

/// Number of bytes `token` occupies once escape-encoded.
#[inline]
pub fn encoded_len(token: u16) -> usize {
    usize::from(token) / usize::from(ESCAPE) + 1
}

/// Appends the escape encoding of `tokens` to `out`.
pub fn escape_encode_into(tokens: &[u16], out: &mut Vec<u8>) {
    for &t in tokens {
        let mut rest = t;
        while rest >= u16::from(ESCAPE) {
            out.push(ESCAPE);
            rest -= u16::from(ESCAPE);
        }
        out.push(rest as u8);
    }
}

pub fn escape_encode(tokens: &[u16]) -> Vec<u8> {
    let mut out = Vec::with_capacity(tokens.len() + tokens.len() / 2);
    escape_encode_into(tokens, &mut out);
    out
}

/// Inverse of [`escape_encode`].
pub fn escape_decode(bytes: &[u8]) -> Result<Vec<u16>> {
    let mut out = Vec::with_capacity(bytes.len());
    escape_decode_into(bytes, &mut out)?;
    Ok(out)
}

pub fn escape_decode_into(bytes: &[u8], out: &mut Vec<u16>) -> Result<()> {
    let mut acc: u32 = 0;
    for &b in bytes {
        acc += u32::from(b);
        if b != ESCAPE {
            let token = u16::try_from(acc).map_err(|_| {
                Error::input(format!("decoded index {acc} does not fit in 16 bits"))
            })?;
            out.push(token);
            acc = 0;
        }
    }
    if bytes.last() == Some(&ESCAPE) {
        return Err(Error::Truncation(
            "stream ends inside an escape run".to_string(),
        ));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn encode_examples() {
        assert_eq!(escape_encode(&[0]), vec![0]);
        assert_eq!(escape_encode(&[254, 255, 390]), vec![254, 255, 0, 255, 135]);
        assert_eq!(escape_encode(&[510]), vec![255, 255, 0]);
        assert_eq!(escape_encode(&[u16::MAX]), {
            let mut v = vec![255; 257];
            v.push(0);
            v
        });
    }

    #[test]
    fn decode_examples() {
        assert_eq!(escape_decode(&[254, 255, 0, 255, 135]).unwrap(), vec![254, 255, 390]);
        assert_eq!(escape_decode(&[]).unwrap(), Vec::<u16>::new());
        assert!(matches!(escape_decode(&[255]), Err(Error::Truncation(_))));
        assert!(matches!(escape_decode(&[3, 255, 255]), Err(Error::Truncation(_))));
    }

    #[test]
    fn decode_rejects_overflow() {
        let mut v = vec![255u8; 258];
        v.push(0);
        assert!(matches!(escape_decode(&v), Err(Error::Input(_))));
    }

    #[test]
    fn encoded_len_matches() {
        for t in [0u16, 254, 255, 509, 510, 1000, u16::MAX] {
            assert_eq!(escape_encode(&[t]).len(), encoded_len(t));
        }
    }

    proptest! {
        #[test]
        fn lossless(tokens in prop::collection::vec(any::<u16>(), 0..200)) {
            prop_assert_eq!(escape_decode(&escape_encode(&tokens)).unwrap(), tokens);
        }
    }
}
