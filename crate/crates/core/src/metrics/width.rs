//! Local line width along a skeleton.

use crate::imgcore::{fit_line_ls, neighbour_count, prune_spurs, skeletonize, BinaryMask, PointF, Vec2};

/// Pixel coverage at `p` by bilinear interpolation, background outside.
fn coverage(mask: &BinaryMask, p: PointF) -> f64 {
    let (x0, y0) = (p.x.floor(), p.y.floor());
    let (fx, fy) = (p.x - x0, p.y - y0);
    let (xi, yi) = (x0 as i64, y0 as i64);
    let v = |dx: i64, dy: i64| f64::from(u8::from(mask.get_or_false(xi + dx, yi + dy)));
    (1.0 - fy) * ((1.0 - fx) * v(0, 0) + fx * v(1, 0)) + fy * ((1.0 - fx) * v(0, 1) + fx * v(1, 1))
}

const STEP: f64 = 0.25;

/// Distance from `p` along `dir` to the 0.5 level of the mask coverage.
fn half_run(mask: &BinaryMask, p: PointF, dir: Vec2, max: f64) -> f64 {
    let mut prev = coverage(mask, p);
    if prev < 0.5 {
        return 0.0;
    }
    let mut t = 0.0;
    while t < max {
        let next_t = t + STEP;
        let v = coverage(mask, p + dir * next_t);
        if v < 0.5 {
            return t + STEP * (prev - 0.5) / (prev - v);
        }
        prev = v;
        t = next_t;
    }
    max
}

/// Width of the foreground run through `p` perpendicular to `tangent`; 0 when
/// `p` itself is background.
pub fn run_width(mask: &BinaryMask, p: PointF, tangent: Vec2) -> f64 {
    let n = Vec2::new(-tangent.y, tangent.x);
    let max = (mask.width() + mask.height()) as f64;
    if coverage(mask, p) < 0.5 {
        return 0.0;
    }
    half_run(mask, p, n, max) + half_run(mask, p, -n, max)
}

/// One skeleton sample: pixel, local tangent from a line fit over nearby
/// skeleton pixels, and whether it sits close to a skeleton end.
#[derive(Debug, Clone, Copy)]
pub struct SkeletonSite {
    pub x: usize,
    pub y: usize,
    pub tangent: Vec2,
}

pub fn skeleton_of(mask: &BinaryMask, prune_len: usize) -> BinaryMask {
    prune_spurs(&skeletonize(mask), prune_len)
}

/// Tangent from skeleton pixels within `±half` of `(x, y)`.
pub fn local_tangent(skel: &BinaryMask, x: usize, y: usize, half: i64) -> Vec2 {
    let mut pts = Vec::new();
    for dy in -half..=half {
        for dx in -half..=half {
            let (xx, yy) = (x as i64 + dx, y as i64 + dy);
            if skel.get_or_false(xx, yy) {
                pts.push(PointF::new(xx as f64, yy as f64));
            }
        }
    }
    fit_line_ls(&pts).map_or(Vec2::new(1.0, 0.0), |l| l.direction)
}

pub fn skeleton_sites(skel: &BinaryMask, half: i64) -> Vec<SkeletonSite> {
    skel.foreground()
        .map(|(x, y)| SkeletonSite {
            x,
            y,
            tangent: local_tangent(skel, x, y, half),
        })
        .collect()
}

pub fn skeleton_endpoints(skel: &BinaryMask) -> Vec<(usize, usize)> {
    skel.foreground()
        .filter(|&(x, y)| neighbour_count(skel, x, y) <= 1)
        .collect()
}
