//! Random resized crop over one-hot channels with Keys bicubic resampling.

use rand::Rng;

use super::onehot::OneHotGrid;
use crate::tensor::Tensor3;

/// Keys cubic convolution parameter.
const CUBIC_A: f64 = -0.5;

/// Scale/ratio draws before falling back to a center crop.
const CROP_ATTEMPTS: usize = 10;

/// Crop window as `(top, left, height, width)` in source cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CropBox {
    pub top: usize,
    pub left: usize,
    pub height: usize,
    pub width: usize,
}

impl CropBox {
    pub fn full(height: usize, width: usize) -> Self {
        Self {
            top: 0,
            left: 0,
            height,
            width,
        }
    }
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    if lo < hi {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

/// Samples a crop with area fraction in `scale` and aspect ratio (w/h) in
/// `ratio`, falling back to the largest centered crop with a valid ratio.
pub fn sample_crop<R: Rng + ?Sized>(
    height: usize,
    width: usize,
    scale: (f64, f64),
    ratio: (f64, f64),
    rng: &mut R,
) -> CropBox {
    let area = (height * width) as f64;
    let (log_lo, log_hi) = (ratio.0.ln(), ratio.1.ln());
    for _ in 0..CROP_ATTEMPTS {
        let target = area * uniform(rng, scale.0, scale.1);
        let aspect = uniform(rng, log_lo, log_hi).exp();
        let w = (target * aspect).sqrt().round() as usize;
        let h = (target / aspect).sqrt().round() as usize;
        if 0 < w && w <= width && 0 < h && h <= height {
            let top = rng.random_range(0..=height - h);
            let left = rng.random_range(0..=width - w);
            return CropBox {
                top,
                left,
                height: h,
                width: w,
            };
        }
    }
    let in_ratio = width as f64 / height as f64;
    let (w, h) = if in_ratio < ratio.0 {
        (width, ((width as f64 / ratio.0).round() as usize).max(1))
    } else if in_ratio > ratio.1 {
        (((height as f64 * ratio.1).round() as usize).max(1), height)
    } else {
        (width, height)
    };
    CropBox {
        top: (height - h) / 2,
        left: (width - w) / 2,
        height: h,
        width: w,
    }
}

fn cubic(x: f64) -> f64 {
    let x = x.abs();
    if x <= 1.0 {
        ((CUBIC_A + 2.0) * x - (CUBIC_A + 3.0)) * x * x + 1.0
    } else if x < 2.0 {
        ((CUBIC_A * x - 5.0 * CUBIC_A) * x + 8.0 * CUBIC_A) * x - 4.0 * CUBIC_A
    } else {
        0.0
    }
}

/// Mirror index into `[0, len)` without repeating the edge sample.
fn reflect(i: isize, len: usize) -> usize {
    if len == 1 {
        return 0;
    }
    let period = 2 * (len as isize - 1);
    let m = i.rem_euclid(period);
    if m < len as isize {
        m as usize
    } else {
        (period - m) as usize
    }
}

/// Four taps and weights per output coordinate. The last weight is set to
/// `1 - (w0 + w1 + w2)` so that summing the taps in order gives exactly 1,
/// which makes constant fields survive resampling bit-for-bit.
fn taps(in_len: usize, out_len: usize) -> Vec<([usize; 4], [f64; 4])> {
    let scale = in_len as f64 / out_len as f64;
    (0..out_len)
        .map(|o| {
            let src = (o as f64 + 0.5) * scale - 0.5;
            let base = src.floor();
            let t = src - base;
            let base = base as isize;
            let w0 = cubic(1.0 + t);
            let w1 = cubic(t);
            let w2 = cubic(1.0 - t);
            let w3 = 1.0 - ((w0 + w1) + w2);
            let idx = [
                reflect(base - 1, in_len),
                reflect(base, in_len),
                reflect(base + 1, in_len),
                reflect(base + 2, in_len),
            ];
            (idx, [w0, w1, w2, w3])
        })
        .collect()
}

/// Bicubic resize of every channel in `crop` of `src` to `out_h x out_w`.
/// When the crop already has the output size the values are copied unchanged.
pub fn resize_bicubic(src: &Tensor3<f32>, crop: CropBox, out_h: usize, out_w: usize) -> Tensor3<f32> {
    let (channels, _, src_w) = src.shape();
    let mut out = Tensor3::zeros(channels, out_h, out_w);
    let copy = crop.height == out_h && crop.width == out_w;
    let col_taps = taps(crop.width, out_w);
    let row_taps = taps(crop.height, out_h);
    let mut rows = vec![0.0f64; crop.height * out_w];
    for c in 0..channels {
        let plane = src.plane(c);
        let window = |r: usize| {
            let start = (crop.top + r) * src_w + crop.left;
            &plane[start..start + crop.width]
        };
        if (0..crop.height).all(|r| window(r).iter().all(|&v| v == 0.0)) {
            continue;
        }
        let dst = out.plane_mut(c);
        if copy {
            for r in 0..crop.height {
                dst[r * out_w..(r + 1) * out_w].copy_from_slice(window(r));
            }
            continue;
        }
        for r in 0..crop.height {
            let line = window(r);
            for (x, (idx, w)) in col_taps.iter().enumerate() {
                let mut acc = 0.0f64;
                for k in 0..4 {
                    acc += w[k] * f64::from(line[idx[k]]);
                }
                rows[r * out_w + x] = acc;
            }
        }
        for (y, (idx, w)) in row_taps.iter().enumerate() {
            for x in 0..out_w {
                let mut acc = 0.0f64;
                for k in 0..4 {
                    acc += w[k] * rows[idx[k] * out_w + x];
                }
                dst[y * out_w + x] = acc as f32;
            }
        }
    }
    out
}

/// Random resized crop of a one-hot grid to `out_side x out_side`.
pub fn token_rrc<R: Rng + ?Sized>(
    grid: &OneHotGrid,
    scale: (f64, f64),
    ratio: (f64, f64),
    out_side: usize,
    rng: &mut R,
) -> (OneHotGrid, CropBox) {
    let (_, h, w) = grid.0.shape();
    let crop = sample_crop(h, w, scale, ratio, rng);
    (
        OneHotGrid(resize_bicubic(&grid.0, crop, out_side, out_side)),
        crop,
    )
}
