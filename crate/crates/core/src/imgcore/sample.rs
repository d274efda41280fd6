use super::image::{PointF, ScalarField};
use crate::error::{Error, Result};

/// Bilinear interpolation of the four pixels around `p`.
///
/// Pixel `(i, j)` sits at coordinate `(i, j)`, so lattice points return the
/// stored value exactly. `p` must lie in `[0, w-1] × [0, h-1]`.
pub fn bilinear_sample<F: ScalarField + ?Sized>(field: &F, p: PointF) -> Result<f64> {
    let (w, h) = (field.width(), field.height());
    let out = || Error::OutOfBounds {
        x: p.x,
        y: p.y,
        width: w,
        height: h,
    };
    if w == 0 || h == 0 || !p.is_finite() {
        return Err(out());
    }
    let max_x = (w - 1) as f64;
    let max_y = (h - 1) as f64;
    if p.x < 0.0 || p.y < 0.0 || p.x > max_x || p.y > max_y {
        return Err(out());
    }
    Ok(bilinear_unchecked(field, p))
}

/// Bilinear sample with coordinates clamped into the raster.
pub fn bilinear_clamped<F: ScalarField + ?Sized>(field: &F, p: PointF) -> f64 {
    let max_x = (field.width() - 1) as f64;
    let max_y = (field.height() - 1) as f64;
    let q = PointF::new(p.x.clamp(0.0, max_x), p.y.clamp(0.0, max_y));
    bilinear_unchecked(field, q)
}

#[inline]
fn bilinear_unchecked<F: ScalarField + ?Sized>(field: &F, p: PointF) -> f64 {
    let (w, h) = (field.width(), field.height());
    let x0 = (p.x.floor() as usize).min(w.saturating_sub(2));
    let y0 = (p.y.floor() as usize).min(h.saturating_sub(2));
    let x1 = (x0 + 1).min(w - 1);
    let y1 = (y0 + 1).min(h - 1);
    let fx = p.x - x0 as f64;
    let fy = p.y - y0 as f64;
    let top = field.value(x0, y0) * (1.0 - fx) + field.value(x1, y0) * fx;
    let bottom = field.value(x0, y1) * (1.0 - fx) + field.value(x1, y1) * fx;
    top * (1.0 - fy) + bottom * fy
}
