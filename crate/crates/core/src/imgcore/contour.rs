//! Sub-pixel boundary tracing.
//!
//! Boundaries follow the 0.5-isoline of the mask read as a 0/1 field with
//! pixel `(i, j)` centred at `(i, j)`: every vertex is the midpoint between a
//! foreground pixel and a 4-adjacent background pixel. Saddle cells join the
//! diagonal foreground pair, so each 8-connected component has exactly one
//! outer loop. Loops run with the foreground on the left of travel in x/y
//! coordinates (positive shoelace area); holes run the other way and are
//! discarded.

use std::collections::HashMap;

use super::image::{BinaryMask, PointF, Vec2};
use super::normals::estimate_normals;

/// Ordered closed point sequence with one unit normal per point.
#[derive(Debug, Clone, PartialEq)]
pub struct Contour {
    pub points: Vec<PointF>,
    pub normals: Vec<Vec2>,
    pub closed: bool,
}

impl Contour {
    /// Closed contour with normals left empty; fill them with [`estimate_normals`].
    pub fn from_points(points: Vec<PointF>) -> Self {
        Self {
            points,
            normals: Vec::new(),
            closed: true,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn has_normals(&self) -> bool {
        !self.points.is_empty() && self.normals.len() == self.points.len()
    }

    pub fn signed_area(&self) -> f64 {
        signed_area(&self.points)
    }

    pub fn perimeter(&self) -> f64 {
        perimeter(&self.points)
    }

    /// Same loop traversed the other way (normals negated to stay per-point).
    pub fn reversed(&self) -> Contour {
        let mut points = self.points.clone();
        points.reverse();
        let mut normals: Vec<Vec2> = self.normals.iter().map(|&n| -n).collect();
        normals.reverse();
        Contour {
            points,
            normals,
            closed: self.closed,
        }
    }
}

/// Shoelace area; positive for counterclockwise order in x/y coordinates.
pub fn signed_area(points: &[PointF]) -> f64 {
    let n = points.len();
    if n < 3 {
        return 0.0;
    }
    let mut acc = 0.0;
    for i in 0..n {
        acc += points[i].cross(points[(i + 1) % n]);
    }
    acc / 2.0
}

pub fn perimeter(points: &[PointF]) -> f64 {
    let n = points.len();
    (0..n).map(|i| points[i].distance(points[(i + 1) % n])).sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceOptions {
    /// Arc-length spacing of the resampled contour points.
    pub spacing: f64,
    /// Half-window used to fill normals after tracing.
    pub normal_window: usize,
}

impl Default for TraceOptions {
    fn default() -> Self {
        Self {
            spacing: 1.0,
            normal_window: 3,
        }
    }
}

/// Outer boundary of every foreground component, resampled to 1 px spacing.
pub fn trace_contours(mask: &BinaryMask) -> Vec<Contour> {
    trace_contours_with(mask, &TraceOptions::default())
}

pub fn trace_contours_with(mask: &BinaryMask, opts: &TraceOptions) -> Vec<Contour> {
    trace_polygons(mask)
        .into_iter()
        .map(|poly| {
            let points = resample_closed(&poly, opts.spacing);
            let window = opts.normal_window.min((points.len() - 1) / 2).max(1);
            let contour = Contour::from_points(points);
            estimate_normals(&contour, window).expect("window chosen to fit the contour")
        })
        .collect()
}

/// Outer isoline loops before resampling, in raster order of their first cell.
pub fn trace_polygons(mask: &BinaryMask) -> Vec<Vec<PointF>> {
    trace_loops(mask)
        .into_iter()
        .filter(|l| signed_area(l) > 0.0)
        .collect()
}

/// All isoline loops, outer (positive area) and holes (negative area).
pub fn trace_loops(mask: &BinaryMask) -> Vec<Vec<PointF>> {
    let (w, h) = (mask.width() as i64, mask.height() as i64);
    let fg = |x: i64, y: i64| mask.get_or_false(x, y);

    // Vertex keys are doubled coordinates so midpoints stay integral.
    let mut next: HashMap<(i64, i64), (i64, i64)> = HashMap::new();
    let mut order: Vec<(i64, i64)> = Vec::new();
    for cy in -1..h {
        for cx in -1..w {
            let corners = [
                fg(cx, cy),
                fg(cx + 1, cy),
                fg(cx + 1, cy + 1),
                fg(cx, cy + 1),
            ];
            if corners.iter().all(|&c| c) || !corners.iter().any(|&c| c) {
                continue;
            }
            // Edge k joins corner k to corner k+1 (counterclockwise in x/y).
            let mids = [
                (2 * cx + 1, 2 * cy),
                (2 * cx + 2, 2 * cy + 1),
                (2 * cx + 1, 2 * cy + 2),
                (2 * cx, 2 * cy + 1),
            ];
            for k in 0..4 {
                let (from, to) = (corners[k], corners[(k + 1) % 4]);
                if !(from && !to) {
                    continue;
                }
                // Pair each exit with the next entry going round the cell;
                // in saddles this joins the diagonal foreground pixels.
                let end = (1..4)
                    .map(|s| (k + s) % 4)
                    .find(|&e| !corners[e] && corners[(e + 1) % 4])
                    .expect("every exit has a matching entry");
                next.insert(mids[k], mids[end]);
                order.push(mids[k]);
            }
        }
    }

    let mut loops = Vec::new();
    let mut visited: HashMap<(i64, i64), ()> = HashMap::with_capacity(next.len());
    for start in order {
        if visited.contains_key(&start) {
            continue;
        }
        let mut pts = Vec::new();
        let mut cur = start;
        loop {
            visited.insert(cur, ());
            pts.push(PointF::new(cur.0 as f64 / 2.0, cur.1 as f64 / 2.0));
            cur = next[&cur];
            if cur == start {
                break;
            }
        }
        loops.push(pts);
    }
    loops
}

/// Resample a closed polyline at uniform arc length (at least 3 points).
pub fn resample_closed(points: &[PointF], spacing: f64) -> Vec<PointF> {
    let n = points.len();
    if n < 2 {
        return points.to_vec();
    }
    let total = perimeter(points);
    let count = ((total / spacing).round() as usize).max(3);
    let step = total / count as f64;
    let mut out = Vec::with_capacity(count);
    let mut seg = 0usize;
    let mut seg_start = 0.0;
    let mut seg_len = points[0].distance(points[1 % n]);
    for k in 0..count {
        let target = k as f64 * step;
        while seg_start + seg_len < target && seg < n - 1 {
            seg_start += seg_len;
            seg += 1;
            seg_len = points[seg].distance(points[(seg + 1) % n]);
        }
        let a = points[seg];
        let b = points[(seg + 1) % n];
        let t = if seg_len > 0.0 {
            ((target - seg_start) / seg_len).clamp(0.0, 1.0)
        } else {
            0.0
        };
        out.push(a + (b - a) * t);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imgcore::{connected_components, Connectivity};

    #[test]
    fn empty_mask_no_contours() {
        assert!(trace_contours(&BinaryMask::empty(8, 8)).is_empty());
    }

    #[test]
    fn single_pixel_is_diamond() {
        let mut m = BinaryMask::empty(3, 3);
        m.set(1, 1, true);
        let polys = trace_polygons(&m);
        assert_eq!(polys.len(), 1);
        assert_eq!(polys[0].len(), 4);
        assert!((signed_area(&polys[0]) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn rectangle_area_close_to_pixel_count() {
        for (w, h) in [(5usize, 3usize), (20, 7), (12, 40)] {
            let m = BinaryMask::from_fn(50, 50, |x, y| (4..4 + w).contains(&x) && (6..6 + h).contains(&y));
            let cs = trace_contours(&m);
            assert_eq!(cs.len(), 1);
            let area = cs[0].signed_area();
            assert!((area - (w * h) as f64).abs() <= 1.5, "{w}x{h}: {area}");
        }
    }

    #[test]
    fn two_components_two_contours() {
        let m = BinaryMask::from_fn(20, 10, |x, y| (y > 2 && y < 7) && (x < 5 || x > 12));
        assert_eq!(trace_contours(&m).len(), 2);
    }

    #[test]
    fn holes_are_not_reported() {
        let m = BinaryMask::from_fn(12, 12, |x, y| {
            (2..10).contains(&x) && (2..10).contains(&y) && !((5..7).contains(&x) && (5..7).contains(&y))
        });
        assert_eq!(trace_polygons(&m).len(), 1);
        assert_eq!(trace_loops(&m).len(), 2);
    }

    #[test]
    fn diagonal_pair_is_one_loop() {
        let m = BinaryMask::from_fn(4, 4, |x, y| (x, y) == (1, 1) || (x, y) == (2, 2));
        assert_eq!(connected_components(&m, Connectivity::Eight).count(), 1);
        assert_eq!(trace_polygons(&m).len(), 1);
    }

    #[test]
    fn points_are_uniformly_spaced() {
        let m = BinaryMask::from_fn(40, 40, |x, y| {
            let (dx, dy) = (x as f64 - 20.0, y as f64 - 20.0);
            dx * dx + dy * dy < 100.0
        });
        let c = &trace_contours(&m)[0];
        let n = c.len();
        let step = c.perimeter() / n as f64;
        assert!((step - 1.0).abs() < 0.05);
        for i in 0..n {
            let d = c.points[i].distance(c.points[(i + 1) % n]);
            assert!(d <= 1.05 && d > 0.6, "{d}");
        }
    }
}
