use rand::Rng;
use rand_distr::{Beta, Distribution};

use super::embed::EmbeddingTensor;
use crate::error::{Error, Result};

/// Half-open rectangle `[top, bottom) x [left, right)` on the spatial grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CutRect {
    pub top: usize,
    pub left: usize,
    pub bottom: usize,
    pub right: usize,
}

impl CutRect {
    pub fn area(&self) -> usize {
        (self.bottom - self.top) * (self.right - self.left)
    }

    pub fn contains(&self, y: usize, x: usize) -> bool {
        (self.top..self.bottom).contains(&y) && (self.left..self.right).contains(&x)
    }
}

/// Draws the CutMix box: side fractions `sqrt(1 - lambda0)` with
/// `lambda0 ~ Beta(alpha, alpha)`, centre uniform, clipped to the grid.
pub fn sample_cutmix_rect<R: Rng + ?Sized>(
    height: usize,
    width: usize,
    alpha: f64,
    rng: &mut R,
) -> Result<CutRect> {
    let beta = Beta::new(alpha, alpha)
        .map_err(|e| Error::config(format!("cutmix alpha {alpha}: {e}")))?;
    let lambda0: f64 = beta.sample(rng);
    let cut = (1.0 - lambda0).max(0.0).sqrt();
    let cut_w = (width as f64 * cut) as usize;
    let cut_h = (height as f64 * cut) as usize;
    let cx = rng.random_range(0..width) as isize;
    let cy = rng.random_range(0..height) as isize;
    let clip = |v: isize, hi: usize| v.clamp(0, hi as isize) as usize;
    Ok(CutRect {
        top: clip(cy - (cut_h / 2) as isize, height),
        bottom: clip(cy + (cut_h / 2) as isize, height),
        left: clip(cx - (cut_w / 2) as isize, width),
        right: clip(cx + (cut_w / 2) as isize, width),
    })
}

/// Copies every channel of `rect` from `b` into `a`. Returns the mixed tensor
/// and the area-corrected weight `1 - area / (h * w)` of `a`'s label.
pub fn cutmix_with_rect(
    a: &EmbeddingTensor,
    b: &EmbeddingTensor,
    rect: CutRect,
) -> Result<(EmbeddingTensor, f64)> {
    if a.0.shape() != b.0.shape() {
        return Err(Error::input(format!(
            "cutmix shapes differ: {:?} vs {:?}",
            a.0.shape(),
            b.0.shape()
        )));
    }
    let (channels, h, w) = a.0.shape();
    if rect.bottom > h || rect.right > w || rect.top > rect.bottom || rect.left > rect.right {
        return Err(Error::input(format!("cut rectangle {rect:?} outside {h}x{w}")));
    }
    let mut out = a.0.clone();
    for c in 0..channels {
        for y in rect.top..rect.bottom {
            let row = (c * h + y) * w;
            out.data_mut()[row + rect.left..row + rect.right]
                .copy_from_slice(&b.0.data()[row + rect.left..row + rect.right]);
        }
    }
    let lambda = 1.0 - rect.area() as f64 / (h * w) as f64;
    Ok((EmbeddingTensor(out), lambda))
}

/// Token-CutMix with a freshly sampled box.
pub fn token_cutmix<R: Rng + ?Sized>(
    a: &EmbeddingTensor,
    b: &EmbeddingTensor,
    alpha: f64,
    rng: &mut R,
) -> Result<(EmbeddingTensor, f64, CutRect)> {
    let (_, h, w) = a.0.shape();
    let rect = sample_cutmix_rect(h, w, alpha, rng)?;
    let (mixed, lambda) = cutmix_with_rect(a, b, rect)?;
    Ok((mixed, lambda, rect))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use crate::tensor::Tensor3;

    fn filled(v: f32) -> EmbeddingTensor {
        EmbeddingTensor(Tensor3::from_vec(3, 28, 28, vec![v; 3 * 28 * 28]).unwrap())
    }

    #[test]
    fn zero_area_keeps_a() {
        let (a, b) = (filled(1.0), filled(2.0));
        let rect = CutRect { top: 5, left: 5, bottom: 5, right: 9 };
        let (out, lambda) = cutmix_with_rect(&a, &b, rect).unwrap();
        assert_eq!(out, a);
        assert_eq!(lambda, 1.0);
    }

    #[test]
    fn full_cut_gives_b() {
        let (a, b) = (filled(1.0), filled(2.0));
        let rect = CutRect { top: 0, left: 0, bottom: 28, right: 28 };
        let (out, lambda) = cutmix_with_rect(&a, &b, rect).unwrap();
        assert_eq!(out, b);
        assert_eq!(lambda, 0.0);
    }

    #[test]
    fn quarter_patch() {
        let rect = CutRect { top: 7, left: 0, bottom: 21, right: 14 };
        let (_, lambda) = cutmix_with_rect(&filled(0.0), &filled(1.0), rect).unwrap();
        assert_eq!(lambda, 0.75);
    }

    #[test]
    fn sampled_rects_obey_area_law() {
        let mut r = rng::stream(3, &[]);
        let (a, b) = (filled(-1.0), filled(1.0));
        for _ in 0..200 {
            let (out, lambda, rect) = token_cutmix(&a, &b, 1.0, &mut r).unwrap();
            assert_eq!(lambda, 1.0 - rect.area() as f64 / 784.0);
            let from_b = out.0.data().iter().filter(|&&v| v == 1.0).count();
            assert_eq!(from_b, 3 * rect.area());
        }
    }

    #[test]
    fn shape_mismatch() {
        let small = EmbeddingTensor(Tensor3::zeros(3, 4, 4));
        assert!(token_cutmix(&filled(0.0), &small, 1.0, &mut rng::stream(0, &[])).is_err());
    }
}
