use crate::imgcore::{BinaryMask, PointF};

/// Even-odd scanline fill of closed polygons, sampled at pixel centres.
pub fn rasterize_mask(polygons: &[Vec<PointF>], width: usize, height: usize) -> BinaryMask {
    let mut mask = BinaryMask::empty(width, height);
    let mut xs: Vec<f64> = Vec::new();
    for y in 0..height {
        let yc = y as f64;
        xs.clear();
        for poly in polygons {
            let n = poly.len();
            if n < 3 {
                continue;
            }
            for i in 0..n {
                let (a, b) = (poly[i], poly[(i + 1) % n]);
                // half-open in y so shared vertices count once
                if (a.y <= yc && yc < b.y) || (b.y <= yc && yc < a.y) {
                    let t = (yc - a.y) / (b.y - a.y);
                    xs.push(a.x + t * (b.x - a.x));
                }
            }
        }
        xs.sort_by(f64::total_cmp);
        for pair in xs.chunks_exact(2) {
            let x0 = pair[0].ceil().max(0.0);
            let x1 = pair[1].min(width as f64);
            let mut x = x0;
            while x < x1 {
                mask.set(x as usize, y, true);
                x += 1.0;
            }
        }
    }
    mask
}

fn segments_cross(a: PointF, b: PointF, c: PointF, d: PointF) -> bool {
    let o = |p: PointF, q: PointF, r: PointF| (q - p).cross(r - p);
    let (d1, d2, d3, d4) = (o(a, b, c), o(a, b, d), o(c, d, a), o(c, d, b));
    d1 * d2 < 0.0 && d3 * d4 < 0.0
}

/// Whether any two non-adjacent edges of the closed polygon properly cross.
pub fn is_self_intersecting(poly: &[PointF]) -> bool {
    let n = poly.len();
    if n < 4 {
        return false;
    }
    // bounding-box sweep keeps this near-linear for contour-like shapes
    let mut edges: Vec<(f64, f64, usize)> = (0..n)
        .map(|i| {
            let (a, b) = (poly[i], poly[(i + 1) % n]);
            (a.x.min(b.x), a.x.max(b.x), i)
        })
        .collect();
    edges.sort_by(|p, q| p.0.total_cmp(&q.0));
    for (k, &(_, hi, i)) in edges.iter().enumerate() {
        for &(lo2, _, j) in &edges[k + 1..] {
            if lo2 > hi {
                break;
            }
            let adjacent = i.abs_diff(j) == 1 || i.abs_diff(j) == n - 1;
            if adjacent {
                continue;
            }
            if segments_cross(poly[i], poly[(i + 1) % n], poly[j], poly[(j + 1) % n]) {
                return true;
            }
        }
    }
    false
}
