use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pattern {
    ParallelLines,
    Elbows,
    Serpentine,
}

/// Generator parameters. Lengths are in pixels, intensities in [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub image_size: usize,
    pub pattern: Pattern,
    pub pitch: f64,
    pub line_width: f64,
    /// Line direction in degrees; 90 gives vertical lines.
    pub orientation: f64,
    pub roughness_sigma: f64,
    pub roughness_corr_len: f64,
    /// Full width at half maximum of the edge bloom.
    pub bloom_width: f64,
    pub bloom_gain: f64,
    pub blur_sigma: f64,
    pub noise_sigma: f64,
    pub vertical_contrast: f64,
    /// Half-angle of the cone around the scan axis where contrast is reduced.
    pub contrast_cone_deg: f64,
    pub process_bias: f64,
    pub defocus_extra_blur: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            image_size: 256,
            pattern: Pattern::ParallelLines,
            pitch: 32.0,
            line_width: 14.0,
            orientation: 90.0,
            roughness_sigma: 1.0,
            roughness_corr_len: 10.0,
            bloom_width: 3.0,
            bloom_gain: 0.4,
            blur_sigma: 1.0,
            noise_sigma: 0.03,
            vertical_contrast: 0.6,
            contrast_cone_deg: 20.0,
            process_bias: 0.0,
            defocus_extra_blur: 0.0,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.pitch,
            self.line_width,
            self.orientation,
            self.roughness_sigma,
            self.roughness_corr_len,
            self.bloom_width,
            self.bloom_gain,
            self.blur_sigma,
            self.noise_sigma,
            self.vertical_contrast,
            self.contrast_cone_deg,
            self.process_bias,
            self.defocus_extra_blur,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return Err(Error::config("synth", "all parameters must be finite"));
        }
        if self.image_size < 16 {
            return Err(Error::config("image_size", "must be at least 16"));
        }
        if !(self.line_width > 0.0) {
            return Err(Error::config("line_width", "must be positive"));
        }
        if !(self.pitch > self.line_width) {
            return Err(Error::config(
                "pitch",
                format!("pitch {} must exceed line_width {}", self.pitch, self.line_width),
            ));
        }
        if self.roughness_sigma < 0.0 {
            return Err(Error::config("roughness_sigma", "must be non-negative"));
        }
        if self.roughness_corr_len < 1.0 {
            return Err(Error::config("roughness_corr_len", "must be at least 1"));
        }
        if !(self.vertical_contrast > 0.0 && self.vertical_contrast <= 1.0) {
            return Err(Error::config("vertical_contrast", "must lie in (0, 1]"));
        }
        if self.bloom_width < 0.0 || self.bloom_gain < 0.0 {
            return Err(Error::config("bloom", "width and gain must be non-negative"));
        }
        if self.blur_sigma < 0.0 || self.defocus_extra_blur < 0.0 || self.noise_sigma < 0.0 {
            return Err(Error::config("blur_sigma", "blur and noise must be non-negative"));
        }
        if self.line_width + self.process_bias <= 0.0 {
            return Err(Error::config("process_bias", "bias erases the lines"));
        }
        if self.line_width + self.process_bias >= self.pitch {
            return Err(Error::config("process_bias", "biased lines touch their neighbours"));
        }
        Ok(())
    }
}
