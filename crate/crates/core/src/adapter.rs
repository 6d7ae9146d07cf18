//! Stem adapter: a single strided convolution mapping `dim x m x m` token
//! embeddings to the `width x k x k` grid a vision transformer expects after
//! its patch stem.

use num_traits::{Float, NumCast};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::le::{self, Cursor};
use crate::rng;
use crate::tensor::Tensor3;

/// Standard deviation of the initial weights.
pub const INIT_STD: f64 = 0.02;
/// Initial weights are redrawn until they fall inside `[-INIT_BOUND, INIT_BOUND]`.
pub const INIT_BOUND: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdapterVariant {
    /// 4x4 kernel, stride 2, padding 1.
    Conv4,
    /// 2x2 kernel, stride 2, no padding.
    Conv2,
    /// 1x1 projection, for inputs already at the target side.
    Pointwise,
}

impl AdapterVariant {
    pub fn kernel(self) -> usize {
        match self {
            AdapterVariant::Conv4 => 4,
            AdapterVariant::Conv2 => 2,
            AdapterVariant::Pointwise => 1,
        }
    }

    pub fn stride(self) -> usize {
        match self {
            AdapterVariant::Conv4 | AdapterVariant::Conv2 => 2,
            AdapterVariant::Pointwise => 1,
        }
    }

    pub fn padding(self) -> usize {
        match self {
            AdapterVariant::Conv4 => 1,
            AdapterVariant::Conv2 | AdapterVariant::Pointwise => 0,
        }
    }

    /// Output side for input side `m`, or an error when it is not integral.
    pub fn output_side(self, m: usize) -> Result<usize> {
        let padded = m + 2 * self.padding();
        let k = self.kernel();
        if m == 0 || padded < k || (padded - k) % self.stride() != 0 {
            return Err(Error::config(format!(
                "{self:?} (kernel {k}, stride {}, padding {}) does not tile an input of side {m}",
                self.stride(),
                self.padding()
            )));
        }
        Ok((padded - k) / self.stride() + 1)
    }

    fn code(self) -> u32 {
        match self {
            AdapterVariant::Conv4 => 0,
            AdapterVariant::Conv2 => 1,
            AdapterVariant::Pointwise => 2,
        }
    }

    fn from_code(code: u32) -> Option<Self> {
        match code {
            0 => Some(AdapterVariant::Conv4),
            1 => Some(AdapterVariant::Conv2),
            2 => Some(AdapterVariant::Pointwise),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StemAdapter<T> {
    variant: AdapterVariant,
    in_channels: usize,
    out_channels: usize,
    /// `out x in x kernel x kernel`.
    weights: Vec<T>,
    bias: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdapterGrads<T> {
    pub input: Tensor3<T>,
    pub weights: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Float + Send + Sync> StemAdapter<T> {
    pub fn new(
        variant: AdapterVariant,
        in_channels: usize,
        out_channels: usize,
        weights: Vec<T>,
        bias: Vec<T>,
    ) -> Result<Self> {
        let k = variant.kernel();
        if in_channels == 0 || out_channels == 0 {
            return Err(Error::config("adapter channel counts must be positive"));
        }
        if weights.len() != out_channels * in_channels * k * k {
            return Err(Error::input(format!(
                "expected {} weights, got {}",
                out_channels * in_channels * k * k,
                weights.len()
            )));
        }
        if bias.len() != out_channels {
            return Err(Error::input(format!(
                "expected {out_channels} biases, got {}",
                bias.len()
            )));
        }
        Ok(Self {
            variant,
            in_channels,
            out_channels,
            weights,
            bias,
        })
    }

    pub fn zeros(variant: AdapterVariant, in_channels: usize, out_channels: usize) -> Self {
        let k = variant.kernel();
        Self::new(
            variant,
            in_channels,
            out_channels,
            vec![T::zero(); out_channels * in_channels * k * k],
            vec![T::zero(); out_channels],
        )
        .expect("consistent shapes")
    }

    /// Truncated-normal weights (std [`INIT_STD`], cut at ±[`INIT_BOUND`]) and zero bias.
    pub fn init(
        variant: AdapterVariant,
        in_channels: usize,
        out_channels: usize,
        seed: u64,
    ) -> Result<Self> {
        let k = variant.kernel();
        let mut r = rng::stream(seed, &[0x5745_4947_4854]);
        let weights = (0..out_channels * in_channels * k * k)
            .map(|_| loop {
                let z: f64 = StandardNormal.sample(&mut r);
                let w = z * INIT_STD;
                if w.abs() <= INIT_BOUND {
                    break <T as NumCast>::from(w).expect("finite weight");
                }
            })
            .collect();
        Self::new(
            variant,
            in_channels,
            out_channels,
            weights,
            vec![T::zero(); out_channels],
        )
    }

    pub fn variant(&self) -> AdapterVariant {
        self.variant
    }

    pub fn in_channels(&self) -> usize {
        self.in_channels
    }

    pub fn out_channels(&self) -> usize {
        self.out_channels
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [T] {
        &mut self.weights
    }

    pub fn bias(&self) -> &[T] {
        &self.bias
    }

    pub fn bias_mut(&mut self) -> &mut [T] {
        &mut self.bias
    }

    /// Converts weights to another float type.
    pub fn cast<U: Float + Send + Sync>(&self) -> StemAdapter<U> {
        let conv = |v: &T| <U as NumCast>::from(*v).expect("representable");
        StemAdapter {
            variant: self.variant,
            in_channels: self.in_channels,
            out_channels: self.out_channels,
            weights: self.weights.iter().map(conv).collect(),
            bias: self.bias.iter().map(conv).collect(),
        }
    }

    #[inline]
    fn w(&self, o: usize, i: usize, ky: usize, kx: usize) -> T {
        let k = self.variant.kernel();
        self.weights[((o * self.in_channels + i) * k + ky) * k + kx]
    }

    fn check_input(&self, x: &Tensor3<T>) -> Result<usize> {
        let (c, h, w) = x.shape();
        if c != self.in_channels {
            return Err(Error::input(format!(
                "input has {c} channels, adapter expects {}",
                self.in_channels
            )));
        }
        if h != w {
            return Err(Error::input(format!("input is {h}x{w}, expected a square")));
        }
        self.variant.output_side(h)
    }

    /// Input coordinate hit by output position `out` and kernel tap `tap`.
    #[inline]
    fn source(&self, out: usize, tap: usize, side: usize) -> Option<usize> {
        let pos = (out * self.variant.stride() + tap) as isize - self.variant.padding() as isize;
        (0..side as isize).contains(&pos).then_some(pos as usize)
    }

    /// Strided cross-correlation plus bias.
    pub fn forward(&self, x: &Tensor3<T>) -> Result<Tensor3<T>> {
        let out_side = self.check_input(x)?;
        let side = x.height();
        let k = self.variant.kernel();
        let plane_len = out_side * out_side;
        let mut data = vec![T::zero(); self.out_channels * plane_len];
        data.par_chunks_mut(plane_len)
            .enumerate()
            .for_each(|(o, plane)| {
                for oy in 0..out_side {
                    for ox in 0..out_side {
                        let mut acc = self.bias[o];
                        for i in 0..self.in_channels {
                            for ky in 0..k {
                                let Some(iy) = self.source(oy, ky, side) else {
                                    continue;
                                };
                                for kx in 0..k {
                                    let Some(ix) = self.source(ox, kx, side) else {
                                        continue;
                                    };
                                    acc = acc + self.w(o, i, ky, kx) * x.at(i, iy, ix);
                                }
                            }
                        }
                        plane[oy * out_side + ox] = acc;
                    }
                }
            });
        Tensor3::from_vec(self.out_channels, out_side, out_side, data)
    }

    /// Gradients of `sum(grad_out * forward(x))` with respect to input,
    /// weights and bias.
    pub fn backward(&self, x: &Tensor3<T>, grad_out: &Tensor3<T>) -> Result<AdapterGrads<T>> {
        let out_side = self.check_input(x)?;
        if grad_out.shape() != (self.out_channels, out_side, out_side) {
            return Err(Error::input(format!(
                "output gradient has shape {:?}, expected {:?}",
                grad_out.shape(),
                (self.out_channels, out_side, out_side)
            )));
        }
        let side = x.height();
        let k = self.variant.kernel();

        let bias: Vec<T> = (0..self.out_channels)
            .map(|o| grad_out.plane(o).iter().fold(T::zero(), |a, &g| a + g))
            .collect();

        let per_out = self.in_channels * k * k;
        let mut weights = vec![T::zero(); self.out_channels * per_out];
        weights
            .par_chunks_mut(per_out)
            .enumerate()
            .for_each(|(o, gw)| {
                for i in 0..self.in_channels {
                    for ky in 0..k {
                        for kx in 0..k {
                            let mut acc = T::zero();
                            for oy in 0..out_side {
                                let Some(iy) = self.source(oy, ky, side) else {
                                    continue;
                                };
                                for ox in 0..out_side {
                                    let Some(ix) = self.source(ox, kx, side) else {
                                        continue;
                                    };
                                    acc = acc + grad_out.at(o, oy, ox) * x.at(i, iy, ix);
                                }
                            }
                            gw[(i * k + ky) * k + kx] = acc;
                        }
                    }
                }
            });

        let mut input = Tensor3::zeros(self.in_channels, side, side);
        input
            .data_mut()
            .par_chunks_mut(side * side)
            .enumerate()
            .for_each(|(i, gx)| {
                for o in 0..self.out_channels {
                    for oy in 0..out_side {
                        for ky in 0..k {
                            let Some(iy) = self.source(oy, ky, side) else {
                                continue;
                            };
                            for ox in 0..out_side {
                                let g = grad_out.at(o, oy, ox);
                                for kx in 0..k {
                                    let Some(ix) = self.source(ox, kx, side) else {
                                        continue;
                                    };
                                    let cell = &mut gx[iy * side + ix];
                                    *cell = *cell + g * self.w(o, i, ky, kx);
                                }
                            }
                        }
                    }
                }
            });

        Ok(AdapterGrads {
            input,
            weights,
            bias,
        })
    }
}

impl StemAdapter<f32> {
    /// `variant u32 | out u32 | in u32 | kernel u32 | weights f32... | bias f32...`
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + 4 * (self.weights.len() + self.bias.len()));
        le::put_u32(&mut out, self.variant.code());
        le::put_u32(&mut out, self.out_channels as u32);
        le::put_u32(&mut out, self.in_channels as u32);
        le::put_u32(&mut out, self.variant.kernel() as u32);
        le::put_f32s(&mut out, &self.weights);
        le::put_f32s(&mut out, &self.bias);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut cur = Cursor::new(bytes);
        let code = cur.u32("adapter.variant")?;
        let variant = AdapterVariant::from_code(code)
            .ok_or_else(|| Error::format("adapter.variant", 0, format!("unknown variant {code}")))?;
        let out_channels = cur.u32("adapter.out")? as usize;
        let in_channels = cur.u32("adapter.in")? as usize;
        let kernel = cur.u32("adapter.kernel")? as usize;
        if kernel != variant.kernel() {
            return Err(Error::format(
                "adapter.kernel",
                12,
                format!("kernel {kernel} does not match {variant:?}"),
            ));
        }
        let weights = cur.f32s("adapter.weights", out_channels * in_channels * kernel * kernel)?;
        let bias = cur.f32s("adapter.bias", out_channels)?;
        if cur.remaining() != 0 {
            return Err(Error::format(
                "adapter.bias",
                cur.position(),
                format!("{} trailing bytes", cur.remaining()),
            ));
        }
        Self::new(variant, in_channels, out_channels, weights, bias)
    }
}
