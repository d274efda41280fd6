use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Optics and deflection parameters that set the physical size of a profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanGeometry {
    pub k1: f64,
    /// Wavelength, nm.
    pub lambda: f64,
    pub na: f64,
    /// Extra margin around the resolution limit, nm.
    pub delta_offset: f64,
    /// Deflection field width at unit magnification, nm.
    pub d_deflection: f64,
    pub m_mag: f64,
    pub n_px: u32,
}

impl Default for ScanGeometry {
    fn default() -> Self {
        Self {
            k1: 0.61,
            lambda: 193.0,
            na: 1.35,
            delta_offset: 25.0,
            d_deflection: 1.024e7,
            m_mag: 1.0e4,
            n_px: 1024,
        }
    }
}

impl ScanGeometry {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("k1", self.k1),
            ("lambda", self.lambda),
            ("na", self.na),
            ("d_deflection", self.d_deflection),
            ("m_mag", self.m_mag),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(name, format!("must be positive, got {v}")));
            }
        }
        if self.na > 1.6 {
            return Err(Error::config("na", format!("{} exceeds the immersion bound 1.6", self.na)));
        }
        if !(self.delta_offset.is_finite() && self.delta_offset >= 0.0) {
            return Err(Error::config("delta_offset", "must be non-negative"));
        }
        if self.n_px == 0 {
            return Err(Error::config("n_px", "must be at least 1"));
        }
        Ok(())
    }

    /// Pixel size in nm.
    pub fn pixel_size(&self) -> f64 {
        self.d_deflection / self.m_mag / self.n_px as f64
    }

    pub fn rayleigh_limit(&self) -> f64 {
        self.k1 * self.lambda / self.na
    }
}

/// Smallest odd value at least `s`.
pub fn odd_scan(s: usize) -> usize {
    if s % 2 == 0 {
        s + 1
    } else {
        s
    }
}

/// Profile length in pixels: the resolution limit plus offset in pixels,
/// rounded up and made odd.
pub fn compute_scan_size(g: &ScanGeometry) -> Result<usize> {
    g.validate()?;
    let raw = (g.rayleigh_limit() + g.delta_offset) / g.pixel_size();
    // absorb rounding noise so exact integers do not tip over
    let s = (raw - 1e-9).ceil().max(1.0) as usize;
    Ok(odd_scan(s))
}
