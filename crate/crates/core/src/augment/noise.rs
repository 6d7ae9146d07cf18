use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::embed::EmbeddingTensor;

/// With probability `prob`, adds a per-channel Gaussian offset (std
/// `sigma_channel`, broadcast over space) and then element-wise Gaussian
/// noise (std `sigma_full`). Returns whether noise was applied.
pub fn emb_noise<R: Rng + ?Sized>(
    e: &mut EmbeddingTensor,
    sigma_channel: f64,
    sigma_full: f64,
    prob: f64,
    rng: &mut R,
) -> bool {
    if prob <= 0.0 || !rng.random_bool(prob) {
        return false;
    }
    let channels = e.0.channels();
    if sigma_channel > 0.0 {
        for c in 0..channels {
            let z: f64 = StandardNormal.sample(rng);
            let offset = sigma_channel * z;
            for v in e.0.plane_mut(c) {
                *v = (f64::from(*v) + offset) as f32;
            }
        }
    }
    if sigma_full > 0.0 {
        for v in e.0.data_mut() {
            let z: f64 = StandardNormal.sample(rng);
            *v = (f64::from(*v) + sigma_full * z) as f32;
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use crate::tensor::Tensor3;

    fn ramp() -> EmbeddingTensor {
        EmbeddingTensor(
            Tensor3::from_vec(4, 5, 5, (0..100).map(|i| i as f32 * 0.1 - 3.0).collect()).unwrap(),
        )
    }

    #[test]
    fn zero_sigmas_are_identity() {
        let mut e = ramp();
        assert!(emb_noise(&mut e, 0.0, 0.0, 1.0, &mut rng::stream(0, &[])));
        assert_eq!(e, ramp());
        let mut e = ramp();
        assert!(!emb_noise(&mut e, 1.0, 1.0, 0.0, &mut rng::stream(0, &[])));
        assert_eq!(e, ramp());
    }

    #[test]
    fn channel_noise_is_spatially_constant() {
        let mut e = ramp();
        emb_noise(&mut e, 0.7, 0.0, 1.0, &mut rng::stream(1, &[]));
        let before = ramp();
        for c in 0..4 {
            let diffs: Vec<f32> = e.0.plane(c).iter().zip(before.0.plane(c)).map(|(a, b)| a - b).collect();
            assert!(diffs.iter().all(|d| (d - diffs[0]).abs() < 1e-5));
            assert!(diffs[0].abs() > 0.0);
        }
    }

    #[test]
    fn full_noise_variance() {
        let mut r = rng::stream(2, &[]);
        let n = 100_000usize;
        let mut e = EmbeddingTensor(Tensor3::zeros(1, 1, n));
        emb_noise(&mut e, 0.0, 1.0, 1.0, &mut r);
        let mean = e.0.data().iter().map(|&v| f64::from(v)).sum::<f64>() / n as f64;
        let var = e.0.data().iter().map(|&v| (f64::from(v) - mean).powi(2)).sum::<f64>()
            / (n - 1) as f64;
        assert!((var - 1.0).abs() < 0.05, "{var}");
    }
}
