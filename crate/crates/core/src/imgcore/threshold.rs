use super::image::{BinaryMask, GrayImage, Rect};
use crate::error::{Error, Result};

const BINS: usize = 256;

#[inline]
fn bin_of(v: f64) -> usize {
    ((v * 255.0).round() as usize).min(BINS - 1)
}

/// Otsu's threshold over a 256-bin histogram of `roi` (whole image when `None`).
///
/// Pixels with value strictly greater than the returned threshold form the
/// bright class. The threshold sits halfway between the last dark bin and the
/// first bright bin; ties in between-class variance go to the lowest split.
pub fn otsu_threshold(img: &GrayImage, roi: Option<Rect>) -> Result<f64> {
    let roi = roi.unwrap_or_else(|| Rect::full(img));
    if !roi.is_valid_in(img.width(), img.height()) {
        return Err(Error::config(
            "roi",
            format!("{roi:?} not inside {}x{}", img.width(), img.height()),
        ));
    }
    let mut hist = [0u64; BINS];
    for y in roi.y0..roi.y1 {
        for x in roi.x0..roi.x1 {
            hist[bin_of(img.get(x, y))] += 1;
        }
    }
    let split = otsu_split(&hist).ok_or(Error::DegenerateHistogram)?;
    Ok((split as f64 + 0.5) / 255.0)
}

/// Index `k` maximizing between-class variance for classes `[0, k]` and `(k, 255]`.
fn otsu_split(hist: &[u64; BINS]) -> Option<usize> {
    if hist.iter().filter(|&&c| c > 0).count() < 2 {
        return None;
    }
    let total: u64 = hist.iter().sum();
    let sum_all: f64 = hist
        .iter()
        .enumerate()
        .map(|(i, &c)| i as f64 * c as f64)
        .sum();
    let mut w0 = 0u64;
    let mut sum0 = 0.0;
    let mut best = (f64::NEG_INFINITY, 0usize);
    for k in 0..BINS - 1 {
        w0 += hist[k];
        sum0 += k as f64 * hist[k] as f64;
        let w1 = total - w0;
        if w0 == 0 || w1 == 0 {
            continue;
        }
        let m0 = sum0 / w0 as f64;
        let m1 = (sum_all - sum0) / w1 as f64;
        let between = w0 as f64 * w1 as f64 * (m0 - m1) * (m0 - m1);
        if between > best.0 {
            best = (between, k);
        }
    }
    Some(best.1)
}

/// Pixels strictly above `t` (optionally only within `roi`).
pub fn threshold_above(img: &GrayImage, t: f64) -> BinaryMask {
    BinaryMask::from_fn(img.width(), img.height(), |x, y| img.get(x, y) > t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bimodal_threshold_separates() {
        let img = GrayImage::from_fn(10, 10, |x, _| if x < 4 { 0.1 } else { 0.9 });
        let t = otsu_threshold(&img, None).unwrap();
        assert!(t > 0.1 && t < 0.9, "{t}");
    }

    #[test]
    fn fifty_fifty_mixture_exact_foreground() {
        let img = GrayImage::from_fn(8, 8, |x, y| if (x + y) % 2 == 0 { 0.2 } else { 0.8 });
        let t = otsu_threshold(&img, None).unwrap();
        let fg = threshold_above(&img, t);
        let expected = BinaryMask::from_fn(8, 8, |x, y| (x + y) % 2 == 1);
        assert_eq!(fg, expected);
    }

    /// Exhaustive oracle: try every split point and compare variance.
    #[test]
    fn agrees_with_exhaustive_scan() {
        let mut rng = crate::rng::Rng::new(21);
        for _ in 0..20 {
            let img = GrayImage::from_fn(12, 9, |_, _| {
                if rng.uniform() < 0.4 {
                    0.2 + 0.1 * rng.normal()
                } else {
                    0.7 + 0.1 * rng.normal()
                }
            });
            let t = otsu_threshold(&img, None).unwrap();
            let vals: Vec<f64> = img.data().iter().map(|&v| (v * 255.0).round()).collect();
            let score = |k: f64| {
                let (a, b): (Vec<f64>, Vec<f64>) = vals.iter().partition(|&&v| v <= k);
                if a.is_empty() || b.is_empty() {
                    return f64::NEG_INFINITY;
                }
                let ma = a.iter().sum::<f64>() / a.len() as f64;
                let mb = b.iter().sum::<f64>() / b.len() as f64;
                a.len() as f64 * b.len() as f64 * (ma - mb).powi(2)
            };
            let best = (0..255).map(|k| score(k as f64)).fold(f64::NEG_INFINITY, f64::max);
            let k = (t * 255.0 - 0.5).round();
            assert!((score(k) - best).abs() <= 1e-9 * best.abs());
        }
    }

    #[test]
    fn constant_roi_is_degenerate() {
        let img = GrayImage::filled(5, 5, 0.3);
        assert!(matches!(
            otsu_threshold(&img, None),
            Err(Error::DegenerateHistogram)
        ));
    }

    #[test]
    fn roi_restricts_histogram() {
        let img = GrayImage::from_fn(10, 1, |x, _| if x < 5 { 0.5 } else { x as f64 / 10.0 });
        assert!(otsu_threshold(&img, Some(Rect::new(0, 0, 5, 1))).is_err());
        assert!(otsu_threshold(&img, Some(Rect::new(4, 0, 10, 1))).is_ok());
    }
}
