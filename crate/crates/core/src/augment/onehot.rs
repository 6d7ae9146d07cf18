use crate::error::Result;
use crate::grid::TokenGrid;
use crate::tensor::Tensor3;

/// Per-position code weights, `vocab x height x width`.
#[derive(Debug, Clone, PartialEq)]
pub struct OneHotGrid(pub Tensor3<f32>);

impl OneHotGrid {
    pub fn vocab(&self) -> usize {
        self.0.channels()
    }

    pub fn tensor(&self) -> &Tensor3<f32> {
        &self.0
    }

    /// Sum of weights over channels at each position, row-major.
    pub fn channel_sums(&self) -> Vec<f64> {
        let (c, h, w) = self.0.shape();
        let mut sums = vec![0.0f64; h * w];
        for ch in 0..c {
            for (s, &v) in sums.iter_mut().zip(self.0.plane(ch)) {
                *s += f64::from(v);
            }
        }
        sums
    }

    /// Highest-weight code per position (lowest index on ties).
    pub fn argmax(&self) -> TokenGrid {
        let (c, h, w) = self.0.shape();
        let mut best = vec![(f32::NEG_INFINITY, 0u16); h * w];
        for ch in 0..c {
            for (b, &v) in best.iter_mut().zip(self.0.plane(ch)) {
                if v > b.0 {
                    *b = (v, ch as u16);
                }
            }
        }
        debug_assert_eq!(h, w);
        TokenGrid::new(h, best.into_iter().map(|(_, k)| k).collect())
            .expect("square one-hot grid")
    }

    /// Divides every position by its channel sum; positions summing to zero are left alone.
    pub fn renormalize(&mut self) {
        let sums = self.channel_sums();
        let c = self.0.channels();
        for ch in 0..c {
            for (v, &s) in self.0.plane_mut(ch).iter_mut().zip(&sums) {
                if s != 0.0 {
                    *v = (f64::from(*v) / s) as f32;
                }
            }
        }
    }
}

pub fn one_hot(grid: &TokenGrid, vocab: usize) -> Result<OneHotGrid> {
    grid.check_vocab(vocab)?;
    let n = grid.side();
    let mut t = Tensor3::zeros(vocab, n, n);
    for (pos, &k) in grid.tokens().iter().enumerate() {
        t.plane_mut(usize::from(k))[pos] = 1.0;
    }
    Ok(OneHotGrid(t))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_grid_fills_one_channel() {
        let oh = one_hot(&TokenGrid::filled(4, 2), 5).unwrap();
        assert!(oh.0.plane(2).iter().all(|&v| v == 1.0));
        for c in [0, 1, 3, 4] {
            assert!(oh.0.plane(c).iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn sums_and_argmax() {
        let g = TokenGrid::new(3, vec![0, 4, 2, 2, 1, 3, 4, 4, 0]).unwrap();
        let oh = one_hot(&g, 5).unwrap();
        assert!(oh.channel_sums().iter().all(|&s| s == 1.0));
        assert_eq!(oh.argmax(), g);
        assert!(one_hot(&g, 4).is_err());
    }
}
