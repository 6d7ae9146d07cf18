use super::onehot::OneHotGrid;
use crate::codebook::Codebook;
use crate::error::{Error, Result};
use crate::tensor::Tensor3;

/// `dim x side x side` codebook mixture.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTensor(pub Tensor3<f32>);

impl EmbeddingTensor {
    pub fn tensor(&self) -> &Tensor3<f32> {
        &self.0
    }

    pub fn into_tensor(self) -> Tensor3<f32> {
        self.0
    }
}

/// Mixes codebook vectors by the weights at each position:
/// `e[:, y, x] = sum_c w[c, y, x] * codebook[c]`.
pub fn embed(weights: &OneHotGrid, codebook: &Codebook) -> Result<EmbeddingTensor> {
    let (vocab, h, w) = weights.0.shape();
    if vocab != codebook.vocab() {
        return Err(Error::input(format!(
            "weights have {vocab} channels, codebook has {} codes",
            codebook.vocab()
        )));
    }
    let dim = codebook.dim();
    let cells = h * w;
    let mut acc = vec![0.0f64; dim * cells];
    for c in 0..vocab {
        let plane = weights.0.plane(c);
        let vector = codebook.vector(c);
        for (pos, &wt) in plane.iter().enumerate() {
            if wt == 0.0 {
                continue;
            }
            let wt = f64::from(wt);
            for (d, &v) in vector.iter().enumerate() {
                acc[d * cells + pos] += wt * f64::from(v);
            }
        }
    }
    let data = acc.into_iter().map(|v| v as f32).collect();
    Ok(EmbeddingTensor(Tensor3::from_vec(dim, h, w, data)?))
}
