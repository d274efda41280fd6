use serde::{Deserialize, Serialize};

use super::scan::{compute_scan_size, odd_scan, ScanGeometry};
use crate::error::{Error, Result};
use crate::imgcore::{angle_of, bilinear_clamped, GrayImage, PointF, Vec2};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RefineConfig {
    /// Explicit profile length; made odd. Takes precedence over `geometry`.
    pub s_scan: Option<usize>,
    pub geometry: Option<ScanGeometry>,
    /// Displacement clamp in px; `None` means a quarter of the scan size.
    pub t_max: Option<f64>,
    /// Half-width of the brightest-pixel search; `None` means a sixth of the scan size.
    pub center_window: Option<usize>,
    pub drop_out_of_bounds: bool,
    pub arc_spacing: f64,
    pub align: bool,
    pub orientation_feature: bool,
    pub normalize: bool,
    pub normal_window: usize,
    /// Fixed rotation applied to every normal at inference, degrees.
    pub normal_perturbation_deg: f64,
}

impl Default for RefineConfig {
    fn default() -> Self {
        Self {
            s_scan: Some(30),
            geometry: None,
            t_max: None,
            center_window: None,
            drop_out_of_bounds: true,
            arc_spacing: 1.0,
            align: true,
            orientation_feature: true,
            normalize: true,
            normal_window: 3,
            normal_perturbation_deg: 0.0,
        }
    }
}

impl RefineConfig {
    pub fn with_scan(s_scan: usize) -> Self {
        Self {
            s_scan: Some(s_scan),
            ..Self::default()
        }
    }

    pub fn scan_size(&self) -> Result<usize> {
        match (self.s_scan, &self.geometry) {
            (Some(s), _) => Ok(odd_scan(s)),
            (None, Some(g)) => compute_scan_size(g),
            (None, None) => Err(Error::config("s_scan", "neither s_scan nor geometry is set")),
        }
    }

    pub fn t_max(&self) -> Result<f64> {
        Ok(self.t_max.unwrap_or(self.scan_size()? as f64 / 4.0))
    }

    pub fn center_window(&self) -> Result<usize> {
        Ok(self.center_window.unwrap_or(self.scan_size()? / 6))
    }

    pub fn input_dim(&self) -> Result<usize> {
        Ok(self.scan_size()? + if self.orientation_feature { 2 } else { 0 })
    }

    pub fn validate(&self) -> Result<()> {
        let s = self.scan_size()?;
        if s < 3 {
            return Err(Error::config("s_scan", format!("{s} is below 3")));
        }
        let t = self.t_max()?;
        if !(t > 0.0 && t < s as f64 / 2.0) {
            return Err(Error::config("t_max", format!("{t} outside (0, {})", s as f64 / 2.0)));
        }
        let cw = self.center_window()?;
        if cw > (s - 1) / 2 {
            return Err(Error::config("center_window", format!("{cw} exceeds the half profile {}", (s - 1) / 2)));
        }
        if !(self.arc_spacing.is_finite() && self.arc_spacing > 0.0) {
            return Err(Error::config("arc_spacing", "must be positive"));
        }
        if self.normal_window == 0 {
            return Err(Error::config("normal_window", "must be at least 1"));
        }
        Ok(())
    }
}

/// Intensities sampled along a contour normal, centred on `base_point`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    pub values: Vec<f64>,
    pub point_index: usize,
    pub base_point: PointF,
    pub normal: Vec2,
    /// Move along the normal applied by alignment, px.
    pub center_shift: f64,
    pub label: Option<f64>,
    /// Some sample fell outside the image.
    pub dropped: bool,
}

impl Profile {
    pub fn center(&self) -> usize {
        (self.values.len() - 1) / 2
    }

    /// Centre after alignment.
    pub fn aligned_point(&self) -> PointF {
        self.base_point + self.normal * self.center_shift
    }
}

fn sample_at(img: &GrayImage, base: PointF, normal: Vec2, s_scan: usize) -> (Vec<f64>, bool) {
    let c = ((s_scan - 1) / 2) as f64;
    let (mx, my) = ((img.width() - 1) as f64, (img.height() - 1) as f64);
    let mut oob = false;
    let values = (0..s_scan)
        .map(|j| {
            let p = base + normal * (j as f64 - c);
            if p.x < 0.0 || p.y < 0.0 || p.x > mx || p.y > my {
                oob = true;
            }
            bilinear_clamped(img, p)
        })
        .collect();
    (values, oob)
}

/// Sample `s_scan` values at unit steps along `normal` around `base`.
/// Out-of-image samples are clamped to the border and mark the profile dropped
/// when `drop_oob` is set.
pub fn sample_profile(
    img: &GrayImage,
    point_index: usize,
    base: PointF,
    normal: Vec2,
    s_scan: usize,
    drop_oob: bool,
) -> Profile {
    let (values, oob) = sample_at(img, base, normal, s_scan);
    Profile {
        values,
        point_index,
        base_point: base,
        normal,
        center_shift: 0.0,
        label: None,
        dropped: drop_oob && oob,
    }
}

/// Index of the maximum within `±window` of the centre; ties go to the index
/// nearest the centre, then the smaller index.
pub fn windowed_argmax(values: &[f64], window: usize) -> usize {
    let c = (values.len() - 1) / 2;
    let lo = c.saturating_sub(window);
    let hi = (c + window).min(values.len() - 1);
    let mut best = c;
    for j in lo..=hi {
        let (v, b) = (values[j], values[best]);
        let closer = j.abs_diff(c) < best.abs_diff(c) || (j.abs_diff(c) == best.abs_diff(c) && j < best);
        if v > b || (v == b && closer) {
            best = j;
        }
    }
    best
}

/// Move the profile centre onto the brightest pixel within `center_window`
/// of it and re-sample the image there.
pub fn align_brightest(img: &GrayImage, p: &Profile, center_window: usize, drop_oob: bool) -> Profile {
    let s = p.values.len();
    let c = p.center();
    let mut out = p.clone();
    let k = windowed_argmax(&out.values, center_window);
    if k != c {
        out.center_shift += k as f64 - c as f64;
        let (values, oob) = sample_at(img, out.aligned_point(), out.normal, s);
        out.values = values;
        out.dropped = drop_oob && oob;
    }
    out
}

/// Network input for a profile: optionally z-normalized values, then the sine
/// and cosine of the normal angle. `None` for a flat profile under normalization.
pub fn profile_features(p: &Profile, cfg: &RefineConfig) -> Option<Vec<f64>> {
    let n = p.values.len() as f64;
    let mut f: Vec<f64> = if cfg.normalize {
        let mean = p.values.iter().sum::<f64>() / n;
        let var = p.values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        if var.sqrt() < 1e-9 {
            return None;
        }
        let sd = var.sqrt();
        p.values.iter().map(|v| (v - mean) / sd).collect()
    } else {
        p.values.clone()
    };
    if cfg.orientation_feature {
        let a = angle_of(p.normal);
        f.push(a.sin());
        f.push(a.cos());
    }
    Some(f)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_image_constant_profile() {
        let img = GrayImage::filled(40, 40, 0.3);
        let p = sample_profile(&img, 0, PointF::new(20.0, 20.0), Vec2::new(0.6, 0.8), 31, true);
        assert!(p.values.iter().all(|&v| (v - 0.3).abs() < 1e-15));
        assert!(!p.dropped);
        assert!(profile_features(&p, &RefineConfig::default()).is_none());
    }

    #[test]
    fn step_edge_reproduced() {
        let img = GrayImage::from_fn(60, 20, |x, _| if x < 30 { 0.2 } else { 0.8 });
        let p = sample_profile(&img, 0, PointF::new(29.5, 10.0), Vec2::new(1.0, 0.0), 11, true);
        // samples at x = 24.5 .. 34.5; the one straddling the step interpolates
        for (j, &v) in p.values.iter().enumerate() {
            let x = 24.5 + j as f64;
            let want = if x < 29.0 { 0.2 } else if x > 30.0 { 0.8 } else { 0.5 };
            assert!((v - want).abs() < 1e-12, "{j} {v}");
        }
    }

    #[test]
    fn near_border_is_dropped() {
        let img = GrayImage::filled(40, 40, 0.3);
        let p = sample_profile(&img, 0, PointF::new(1.0, 20.0), Vec2::new(1.0, 0.0), 31, true);
        assert!(p.dropped);
        let q = sample_profile(&img, 0, PointF::new(1.0, 20.0), Vec2::new(1.0, 0.0), 31, false);
        assert!(!q.dropped);
        assert_eq!(q.values.len(), 31);
    }

    fn peak_image(peaks: &[(usize, f64)]) -> GrayImage {
        GrayImage::from_fn(41, 5, |x, _| peaks.iter().find(|(px, _)| *px == x).map_or(0.1, |p| p.1))
    }

    #[test]
    fn centred_peak_no_shift() {
        let img = peak_image(&[(20, 0.9)]);
        let p = sample_profile(&img, 0, PointF::new(20.0, 2.0), Vec2::new(1.0, 0.0), 11, true);
        let a = align_brightest(&img, &p, 3, true);
        assert_eq!(a.center_shift, 0.0);
        assert_eq!(a.values, p.values);
    }

    #[test]
    fn peak_left_of_centre() {
        let img = peak_image(&[(19, 0.9)]);
        let p = sample_profile(&img, 0, PointF::new(20.0, 2.0), Vec2::new(1.0, 0.0), 11, true);
        let a = align_brightest(&img, &p, 3, true);
        assert_eq!(a.center_shift, -1.0);
        assert_eq!(windowed_argmax(&a.values, 3), a.center());
        assert_eq!(a.values[a.center()], 0.9);
    }

    #[test]
    fn equal_peaks_pick_smaller_index() {
        let img = peak_image(&[(18, 0.9), (22, 0.9)]);
        let p = sample_profile(&img, 0, PointF::new(20.0, 2.0), Vec2::new(1.0, 0.0), 11, true);
        let a = align_brightest(&img, &p, 3, true);
        assert_eq!(a.center_shift, -2.0);
    }

    #[test]
    fn single_shift_ignores_peaks_beyond_window() {
        let img = peak_image(&[(23, 0.5), (26, 0.9)]);
        let p = sample_profile(&img, 0, PointF::new(20.0, 2.0), Vec2::new(1.0, 0.0), 11, true);
        let a = align_brightest(&img, &p, 3, true);
        assert_eq!(a.center_shift, 3.0);
        assert_eq!(a.values[a.center()], 0.5);
    }

    #[test]
    fn config_defaults() {
        let c = RefineConfig::default();
        assert_eq!(c.scan_size().unwrap(), 31);
        assert_eq!(c.t_max().unwrap(), 7.75);
        assert_eq!(c.center_window().unwrap(), 5);
        assert_eq!(c.input_dim().unwrap(), 33);
        c.validate().unwrap();
        let bad = RefineConfig {
            t_max: Some(20.0),
            ..c
        };
        assert!(bad.validate().is_err());
    }
}
