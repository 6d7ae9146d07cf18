//! Token-space augmentations.
//!
//! The stages run in a fixed order and the types enforce it: synonym
//! replacement and random swap act on [`TokenGrid`](crate::TokenGrid)s, the
//! resized crop acts on [`OneHotGrid`]s, and CutMix and embedding noise act
//! on [`EmbeddingTensor`]s.

mod cutmix;
mod eda;
mod embed;
mod noise;
mod onehot;
mod rrc;

pub use cutmix::{cutmix_with_rect, sample_cutmix_rect, token_cutmix, CutRect};
pub use eda::{swap_regions, token_eda_rs, token_eda_sr, SwapOutcome};
pub use embed::{embed, EmbeddingTensor};
pub use noise::emb_noise;
pub use onehot::{one_hot, OneHotGrid};
pub use rrc::{resize_bicubic, sample_crop, token_rrc, CropBox};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentConfig {
    /// Per-position synonym replacement probability.
    pub sr_prob: f64,
    /// Probability of swapping two square regions.
    pub rs_prob: f64,
    /// Synonyms kept per code.
    pub synonyms: usize,
    pub rrc_scale: (f64, f64),
    pub rrc_ratio: (f64, f64),
    /// Output side of the resized crop.
    pub out_side: usize,
    pub cutmix_alpha: f64,
    pub cutmix_prob: f64,
    pub noise_prob: f64,
    /// Standard deviation of the per-channel offset. `None` derives it from the codebook.
    pub sigma_channel: Option<f64>,
    /// Standard deviation of the element-wise noise. `None` derives it from the codebook.
    pub sigma_full: Option<f64>,
    /// Divide interpolated weights by their channel sum before embedding.
    pub renormalize: bool,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            sr_prob: 0.25,
            rs_prob: 0.25,
            synonyms: 5,
            rrc_scale: (0.08, 1.0),
            rrc_ratio: (3.0 / 4.0, 4.0 / 3.0),
            out_side: 28,
            cutmix_alpha: 1.0,
            cutmix_prob: 1.0,
            noise_prob: 0.5,
            sigma_channel: None,
            sigma_full: None,
            renormalize: false,
        }
    }
}

/// Noise scale used when a sigma is left unset, relative to the codebook's
/// mean per-component standard deviation.
pub const DEFAULT_NOISE_SCALE: f64 = 0.1;

impl AugmentConfig {
    /// Every stage switched to its identity setting.
    pub fn identity(out_side: usize) -> Self {
        Self {
            sr_prob: 0.0,
            rs_prob: 0.0,
            rrc_scale: (1.0, 1.0),
            rrc_ratio: (1.0, 1.0),
            out_side,
            cutmix_prob: 0.0,
            noise_prob: 0.0,
            sigma_channel: Some(0.0),
            sigma_full: Some(0.0),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, p) in [
            ("sr_prob", self.sr_prob),
            ("rs_prob", self.rs_prob),
            ("cutmix_prob", self.cutmix_prob),
            ("noise_prob", self.noise_prob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::config(format!("{name} = {p} is not a probability")));
            }
        }
        let (s0, s1) = self.rrc_scale;
        if !(s0 > 0.0 && s0 <= s1 && s1 <= 1.0) {
            return Err(Error::config(format!(
                "rrc_scale ({s0}, {s1}) must satisfy 0 < lo <= hi <= 1"
            )));
        }
        let (r0, r1) = self.rrc_ratio;
        if !(r0 > 0.0 && r0 <= r1 && r1.is_finite()) {
            return Err(Error::config(format!(
                "rrc_ratio ({r0}, {r1}) must satisfy 0 < lo <= hi"
            )));
        }
        if self.out_side == 0 {
            return Err(Error::config("out_side must be at least 1"));
        }
        if !(self.cutmix_alpha > 0.0 && self.cutmix_alpha.is_finite()) {
            return Err(Error::config("cutmix_alpha must be positive"));
        }
        if self.synonyms == 0 {
            return Err(Error::config("synonyms must be at least 1"));
        }
        for (name, s) in [
            ("sigma_channel", self.sigma_channel),
            ("sigma_full", self.sigma_full),
        ] {
            if let Some(s) = s {
                if !(s >= 0.0 && s.is_finite()) {
                    return Err(Error::config(format!("{name} = {s} must be >= 0")));
                }
            }
        }
        Ok(())
    }

    /// Resolves unset sigmas against a codebook's spread.
    pub fn noise_sigmas(&self, codebook_spread: f64) -> (f64, f64) {
        let default = DEFAULT_NOISE_SCALE * codebook_spread;
        (
            self.sigma_channel.unwrap_or(default),
            self.sigma_full.unwrap_or(default),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        AugmentConfig::default().validate().unwrap();
        AugmentConfig::identity(32).validate().unwrap();
    }

    #[test]
    fn rejects_bad_values() {
        let bad = [
            AugmentConfig { sr_prob: 1.5, ..Default::default() },
            AugmentConfig { rrc_scale: (0.5, 0.1), ..Default::default() },
            AugmentConfig { rrc_ratio: (0.0, 1.0), ..Default::default() },
            AugmentConfig { sigma_full: Some(-1.0), ..Default::default() },
            AugmentConfig { out_side: 0, ..Default::default() },
            AugmentConfig { cutmix_alpha: 0.0, ..Default::default() },
        ];
        for cfg in bad {
            assert!(matches!(cfg.validate(), Err(Error::Config(_))), "{cfg:?}");
        }
    }

    #[test]
    fn sigma_defaults_scale_with_codebook() {
        let cfg = AugmentConfig::default();
        assert_eq!(cfg.noise_sigmas(2.0), (0.2, 0.2));
        let cfg = AugmentConfig { sigma_full: Some(1.0), ..Default::default() };
        assert_eq!(cfg.noise_sigmas(2.0), (0.2, 1.0));
    }
}
