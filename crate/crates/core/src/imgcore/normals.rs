use super::contour::Contour;
use super::image::{PointF, Vec2};
use crate::error::{Error, Result};

/// Fill per-point unit normals from a central difference over `±window` points.
///
/// The normal is the tangent rotated by −90° (`(t.y, −t.x)`), which points to
/// the right of travel. For traced contours (foreground on the left) that is
/// outward, from groove interior to background.
pub fn estimate_normals(contour: &Contour, window: usize) -> Result<Contour> {
    let n = contour.points.len();
    let needed = 2 * window + 1;
    if window == 0 || n < needed || n < 3 {
        return Err(Error::ContourTooShort { points: n, needed });
    }
    let pts = &contour.points;
    let mut normals = Vec::with_capacity(n);
    for i in 0..n {
        let mut tangent = None;
        // Fall back to narrower windows if the wide difference degenerates.
        for w in (1..=window).rev() {
            let t = pts[(i + w) % n] - pts[(i + n - w) % n];
            if let Some(t) = t.normalized() {
                tangent = Some(t);
                break;
            }
        }
        let t = tangent.ok_or_else(|| {
            Error::Degenerate(format!("coincident points around contour index {i}"))
        })?;
        normals.push(Vec2::new(t.y, -t.x));
    }
    Ok(Contour {
        points: contour.points.clone(),
        normals,
        closed: contour.closed,
    })
}

/// Angle of a unit vector in radians, in `(-π, π]`.
pub fn angle_of(v: Vec2) -> f64 {
    v.y.atan2(v.x)
}

/// Rotate every normal by the same angle (degrees); used for robustness studies.
pub fn perturb_normals(contour: &Contour, degrees: f64) -> Contour {
    let a = degrees.to_radians();
    Contour {
        points: contour.points.clone(),
        normals: contour
            .normals
            .iter()
            .map(|&n| PointF::rotated(n, a))
            .collect(),
        closed: contour.closed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imgcore::{bilinear_sample, trace_contours, BinaryMask};

    fn circle(n: usize, r: f64, c: PointF) -> Contour {
        Contour::from_points(
            (0..n)
                .map(|k| {
                    let a = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
                    c + PointF::new(a.cos(), a.sin()) * r
                })
                .collect(),
        )
    }

    #[test]
    fn circle_normals_are_radial() {
        let c = PointF::new(50.0, 50.0);
        for window in 1..=5 {
            let contour = estimate_normals(&circle(120, 20.0, c), window).unwrap();
            for (p, nrm) in contour.points.iter().zip(&contour.normals) {
                assert!((nrm.norm() - 1.0).abs() < 1e-6);
                let radial = (*p - c).normalized().unwrap();
                let angle = nrm.dot(radial).clamp(-1.0, 1.0).acos().to_degrees();
                assert!(angle < 2.0, "window {window}: {angle}");
            }
        }
    }

    #[test]
    fn square_edge_midpoints_axis_aligned() {
        // counterclockwise square, 4 points per side
        let mut pts = Vec::new();
        for k in 0..4 {
            pts.push(PointF::new(k as f64, 0.0));
        }
        for k in 0..4 {
            pts.push(PointF::new(4.0, k as f64));
        }
        for k in 0..4 {
            pts.push(PointF::new(4.0 - k as f64, 4.0));
        }
        for k in 0..4 {
            pts.push(PointF::new(0.0, 4.0 - k as f64));
        }
        let c = estimate_normals(&Contour::from_points(pts), 1).unwrap();
        assert_eq!(c.normals[2], Vec2::new(0.0, -1.0));
        assert_eq!(c.normals[6], Vec2::new(1.0, 0.0));
        assert_eq!(c.normals[10], Vec2::new(0.0, 1.0));
        assert_eq!(c.normals[14], Vec2::new(-1.0, 0.0));
    }

    #[test]
    fn reversing_order_flips_normals() {
        let base = circle(60, 10.0, PointF::new(20.0, 20.0));
        let fwd = estimate_normals(&base, 3).unwrap();
        let mut rev_pts = base.points.clone();
        rev_pts.reverse();
        let rev = estimate_normals(&Contour::from_points(rev_pts), 3).unwrap();
        let n = fwd.len();
        for i in 0..n {
            let j = n - 1 - i;
            assert!((fwd.normals[i] + rev.normals[j]).norm() < 1e-12);
        }
    }

    #[test]
    fn too_short_contour_errors() {
        let c = circle(6, 3.0, PointF::new(5.0, 5.0));
        assert!(matches!(
            estimate_normals(&c, 3),
            Err(Error::ContourTooShort { points: 6, needed: 7 })
        ));
    }

    #[test]
    fn traced_normals_point_outward() {
        let m = BinaryMask::from_fn(60, 60, |x, y| {
            let (dx, dy) = (x as f64 - 30.0, y as f64 - 28.0);
            (dx * dx) / 300.0 + (dy * dy) / 120.0 < 1.0 || ((10..50).contains(&x) && (45..52).contains(&y))
        });
        for c in trace_contours(&m) {
            for (p, nrm) in c.points.iter().zip(&c.normals) {
                assert!((nrm.norm() - 1.0).abs() < 1e-6);
                let inside = bilinear_sample(&m, *p - *nrm * 0.5).unwrap();
                let outside = bilinear_sample(&m, *p + *nrm * 0.5).unwrap();
                assert!(outside < inside, "at {p:?}: {inside} -> {outside}");
            }
        }
    }
}
