//! Dense channel-major 3-D tensors and the shared tensor dump format.
//!
//! A dump is four little-endian `u32` dimensions followed by the values as
//! little-endian `f32`, row-major over those dimensions.

use num_traits::Float;

use crate::error::{Error, Result};
use crate::le::{self, Cursor};

/// `channels x height x width` values, channel-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3<T> {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<T>,
}

impl<T: Float> Tensor3<T> {
    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Self {
            channels,
            height,
            width,
            data: vec![T::zero(); channels * height * width],
        }
    }

    pub fn from_vec(channels: usize, height: usize, width: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != channels * height * width {
            return Err(Error::input(format!(
                "{} values do not fill a {channels}x{height}x{width} tensor",
                data.len()
            )));
        }
        Ok(Self {
            channels,
            height,
            width,
            data,
        })
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize, usize) {
        (self.channels, self.height, self.width)
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.channels
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn data(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn plane(&self, c: usize) -> &[T] {
        let n = self.height * self.width;
        &self.data[c * n..(c + 1) * n]
    }

    #[inline]
    pub fn plane_mut(&mut self, c: usize) -> &mut [T] {
        let n = self.height * self.width;
        &mut self.data[c * n..(c + 1) * n]
    }

    #[inline]
    pub fn at(&self, c: usize, y: usize, x: usize) -> T {
        self.data[(c * self.height + y) * self.width + x]
    }

    #[inline]
    pub fn at_mut(&mut self, c: usize, y: usize, x: usize) -> &mut T {
        &mut self.data[(c * self.height + y) * self.width + x]
    }

    pub fn map<U: Float>(&self, f: impl Fn(T) -> U) -> Tensor3<U> {
        Tensor3 {
            channels: self.channels,
            height: self.height,
            width: self.width,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// `alpha * self + beta * other`.
    pub fn axpby(&self, alpha: T, other: &Self, beta: T) -> Result<Self> {
        if self.shape() != other.shape() {
            return Err(Error::input("tensor shapes differ"));
        }
        Ok(Self {
            channels: self.channels,
            height: self.height,
            width: self.width,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| alpha * a + beta * b)
                .collect(),
        })
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.data
            .iter()
            .zip(&other.data)
            .fold(T::zero(), |m, (&a, &b)| m.max((a - b).abs()))
    }
}

/// Encodes values with a 4-dimension header.
pub fn encode_dump(dims: [u32; 4], values: &[f32]) -> Result<Vec<u8>> {
    let expected: u64 = dims.iter().map(|&d| u64::from(d)).product();
    if expected != values.len() as u64 {
        return Err(Error::input(format!(
            "dump shape {dims:?} needs {expected} values, got {}",
            values.len()
        )));
    }
    let mut out = Vec::with_capacity(16 + values.len() * 4);
    for d in dims {
        le::put_u32(&mut out, d);
    }
    le::put_f32s(&mut out, values);
    Ok(out)
}

/// Parses a dump into its shape and values.
pub fn decode_dump(bytes: &[u8]) -> Result<([u32; 4], Vec<f32>)> {
    let mut cur = Cursor::new(bytes);
    let mut dims = [0u32; 4];
    for d in &mut dims {
        *d = cur.u32("dump.shape")?;
    }
    let count: u64 = dims.iter().map(|&d| u64::from(d)).product();
    let count = usize::try_from(count)
        .map_err(|_| Error::format("dump.shape", 0, "shape too large"))?;
    let values = cur.f32s("dump.values", count)?;
    if cur.remaining() != 0 {
        return Err(Error::format(
            "dump.values",
            cur.position(),
            format!("{} trailing bytes", cur.remaining()),
        ));
    }
    Ok((dims, values))
}

impl Tensor3<f32> {
    /// Dump with shape `[1, channels, height, width]`.
    pub fn to_dump(&self) -> Vec<u8> {
        encode_dump(
            [1, self.channels as u32, self.height as u32, self.width as u32],
            &self.data,
        )
        .expect("shape matches data")
    }

    pub fn from_dump(bytes: &[u8]) -> Result<Self> {
        let (dims, values) = decode_dump(bytes)?;
        if dims[0] != 1 {
            return Err(Error::format("dump.shape", 0, "expected a single tensor"));
        }
        Self::from_vec(dims[1] as usize, dims[2] as usize, dims[3] as usize, values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dump_round_trip() {
        let t = Tensor3::from_vec(2, 1, 3, vec![1.0f32, -2.0, 3.5, 0.0, 1e-8, 7.0]).unwrap();
        let bytes = t.to_dump();
        assert_eq!(&bytes[..16], &[1, 0, 0, 0, 2, 0, 0, 0, 1, 0, 0, 0, 3, 0, 0, 0]);
        assert_eq!(&bytes[16..20], &1.0f32.to_le_bytes());
        assert_eq!(Tensor3::from_dump(&bytes).unwrap(), t);
        assert!(Tensor3::<f32>::from_dump(&bytes[..bytes.len() - 1]).is_err());
    }

    #[test]
    fn shape_checks() {
        assert!(Tensor3::from_vec(2, 2, 2, vec![0.0f32; 7]).is_err());
        assert!(encode_dump([2, 1, 1, 1], &[1.0]).is_err());
    }
}
