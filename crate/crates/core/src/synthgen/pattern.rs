use serde::{Deserialize, Serialize};

use super::spec::{Pattern, SynthSpec};
use crate::error::{Error, Result};
use crate::imgcore::{PointF, Vec2};

/// Groove centreline. Ends are flat caps; interior vertices are rounded on the
/// outer side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polyline {
    pub points: Vec<PointF>,
}

/// Closest-point query result against a polyline.
#[derive(Debug, Clone, Copy)]
pub struct Nearest {
    pub distance: f64,
    /// Arc length of the closest point from the first vertex.
    pub arc: f64,
    /// +1 on the left of travel (`cross(tangent, q − p) > 0`), −1 otherwise.
    pub side: f64,
    pub tangent: Vec2,
    /// Distance past a free end along the end tangent (0 when not beyond).
    pub beyond_end: f64,
    /// Distance from the closest point to the nearer free end along the line.
    pub to_end: f64,
}

impl Polyline {
    pub fn new(points: Vec<PointF>) -> Self {
        Self { points }
    }

    pub fn length(&self) -> f64 {
        self.points.windows(2).map(|w| w[0].distance(w[1])).sum()
    }

    /// Point and unit left normal at arc length `s` (clamped to the ends).
    pub fn at(&self, s: f64) -> (PointF, Vec2) {
        let mut acc = 0.0;
        let last = self.points.len() - 2;
        for (i, w) in self.points.windows(2).enumerate() {
            let len = w[0].distance(w[1]);
            if s <= acc + len || i == last {
                let d = (w[1] - w[0]) * (1.0 / len);
                let t = (s - acc).clamp(0.0, len);
                return (w[0] + d * t, Vec2::new(-d.y, d.x));
            }
            acc += len;
        }
        unreachable!("polyline has at least one segment")
    }

    pub fn nearest(&self, q: PointF) -> Nearest {
        let n_seg = self.points.len() - 1;
        let total = self.length();
        let mut best: Option<Nearest> = None;
        let mut acc = 0.0;
        for (i, w) in self.points.windows(2).enumerate() {
            let (a, b) = (w[0], w[1]);
            let len = a.distance(b);
            let d = (b - a) * (1.0 / len);
            let raw = (q - a).dot(d);
            let t = raw.clamp(0.0, len);
            let p = a + d * t;
            let dist = q.distance(p);
            let beyond_end = if i == 0 && raw < 0.0 {
                -raw
            } else if i == n_seg - 1 && raw > len {
                raw - len
            } else {
                0.0
            };
            let arc = acc + t;
            let side = if d.cross(q - p) >= 0.0 { 1.0 } else { -1.0 };
            let cand = Nearest {
                distance: if beyond_end > 0.0 { (q - p).dot(Vec2::new(-d.y, d.x)).abs() } else { dist },
                arc,
                side,
                tangent: d,
                beyond_end,
                to_end: arc.min(total - arc),
            };
            let key = |n: &Nearest| n.distance.hypot(n.beyond_end);
            if best.as_ref().map_or(true, |b| key(&cand) < key(b)) {
                best = Some(cand);
            }
            acc += len;
        }
        best.expect("polyline has at least one segment")
    }
}

fn half_groove(spec: &SynthSpec) -> f64 {
    0.5 * (spec.line_width + spec.process_bias.max(0.0)) + 1.0
}

/// An axis-aligned arm at `c` is either well inside the image or entirely outside.
fn arm_clear(c: f64, size: f64, spec: &SynthSpec) -> Option<bool> {
    let hw = half_groove(spec);
    let outside = 0.5 * (spec.pitch + spec.line_width);
    if c >= hw && c <= size - 1.0 - hw {
        Some(true)
    } else if c < -outside || c > size - 1.0 + outside {
        Some(false)
    } else {
        None
    }
}

fn extent(spec: &SynthSpec) -> f64 {
    spec.image_size as f64 * std::f64::consts::SQRT_2 + 2.0 * spec.pitch
}

/// Parallel lines at `orientation`, spanning past the image, offset by `phase`.
fn parallel_lines(spec: &SynthSpec, phase: f64) -> Result<Vec<Polyline>> {
    let size = spec.image_size as f64;
    if 2.0 * spec.pitch > size {
        return Err(Error::PatternDoesNotFit {
            size: spec.image_size,
            reason: format!("pitch {} leaves fewer than two lines", spec.pitch),
        });
    }
    let theta = spec.orientation.to_radians();
    let d = Vec2::new(theta.cos(), theta.sin());
    let nrm = Vec2::new(-d.y, d.x);
    let c = PointF::new(size / 2.0, size / 2.0);
    let half = extent(spec) / 2.0;
    let k_max = (half / spec.pitch).ceil() as i64;
    let mut lines = Vec::new();
    for k in -k_max..=k_max {
        let off = (k as f64 + phase) * spec.pitch;
        let m = c + nrm * off;
        // grooves grazing the border would break into slivers under roughness
        if off.abs() > size / 2.0 - half_groove(spec) {
            continue;
        }
        lines.push(Polyline::new(vec![m - d * half, m + d * half]));
    }
    Ok(lines)
}

/// Nested L shapes whose corners step along the anti-diagonal by one pitch.
fn elbows(spec: &SynthSpec, phase: f64) -> Result<Vec<Polyline>> {
    let size = spec.image_size as f64;
    if 3.0 * spec.pitch > size {
        return Err(Error::PatternDoesNotFit {
            size: spec.image_size,
            reason: format!("pitch {} leaves no room for nested elbows", spec.pitch),
        });
    }
    let ext = extent(spec);
    let c = size / 2.0 + phase * spec.pitch;
    let k_max = (size / spec.pitch).ceil() as i64 + 1;
    let mut lines = Vec::new();
    for k in -k_max..=k_max {
        let cx = c + k as f64 * spec.pitch;
        let cy = c - k as f64 * spec.pitch;
        let (Some(vx), Some(hy)) = (arm_clear(cx, size, spec), arm_clear(cy, size, spec)) else {
            continue;
        };
        // the vertical arm spans y < cy, the horizontal arm x > cx
        let vertical_visible = vx && cy > 0.0;
        let horizontal_visible = hy && cx < size;
        if !(vertical_visible || horizontal_visible) {
            continue;
        }
        lines.push(Polyline::new(vec![
            PointF::new(cx, -ext),
            PointF::new(cx, cy),
            PointF::new(size + ext, cy),
        ]));
    }
    if lines.len() < 2 {
        return Err(Error::PatternDoesNotFit {
            size: spec.image_size,
            reason: "fewer than two elbows visible".into(),
        });
    }
    Ok(lines)
}

/// One meander of horizontal runs joined alternately at the right and left.
fn serpentine(spec: &SynthSpec, phase: f64) -> Result<Vec<Polyline>> {
    let size = spec.image_size as f64;
    let margin = spec.line_width.max(4.0);
    let y0 = margin + spec.line_width / 2.0 + phase * (spec.pitch - spec.line_width) * 0.5;
    let (xl, xr) = (margin + spec.line_width / 2.0, size - margin - spec.line_width / 2.0);
    let mut ys = Vec::new();
    let mut y = y0;
    while y + spec.line_width / 2.0 + margin <= size {
        ys.push(y);
        y += spec.pitch;
    }
    if ys.len() < 2 || xr - xl < 2.0 * spec.pitch {
        return Err(Error::PatternDoesNotFit {
            size: spec.image_size,
            reason: format!("pitch {} leaves fewer than two meander runs", spec.pitch),
        });
    }
    let mut pts = Vec::new();
    for (k, &yk) in ys.iter().enumerate() {
        if k % 2 == 0 {
            pts.push(PointF::new(xl, yk));
            pts.push(PointF::new(xr, yk));
        } else {
            pts.push(PointF::new(xr, yk));
            pts.push(PointF::new(xl, yk));
        }
    }
    Ok(vec![Polyline::new(pts)])
}

pub fn build_pattern(spec: &SynthSpec, phase: f64) -> Result<Vec<Polyline>> {
    match spec.pattern {
        Pattern::ParallelLines => parallel_lines(spec, phase),
        Pattern::Elbows => elbows(spec, phase),
        Pattern::Serpentine => serpentine(spec, phase),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nearest_on_straight_segment() {
        let l = Polyline::new(vec![PointF::new(0.0, 0.0), PointF::new(10.0, 0.0)]);
        let n = l.nearest(PointF::new(4.0, 3.0));
        assert!((n.distance - 3.0).abs() < 1e-12);
        assert!((n.arc - 4.0).abs() < 1e-12);
        assert_eq!(n.side, 1.0);
        assert_eq!(n.beyond_end, 0.0);
        let m = l.nearest(PointF::new(4.0, -2.0));
        assert_eq!(m.side, -1.0);
        let e = l.nearest(PointF::new(12.0, 1.0));
        assert!((e.beyond_end - 2.0).abs() < 1e-12);
        assert!((e.distance - 1.0).abs() < 1e-12);
    }

    #[test]
    fn at_walks_arc_length() {
        let l = Polyline::new(vec![PointF::new(0.0, 0.0), PointF::new(10.0, 0.0), PointF::new(10.0, 5.0)]);
        let (p, n) = l.at(12.0);
        assert!((p.x - 10.0).abs() < 1e-12 && (p.y - 2.0).abs() < 1e-12);
        assert!((n.x + 1.0).abs() < 1e-12);
        assert!((l.length() - 15.0).abs() < 1e-12);
    }

    #[test]
    fn too_large_pitch_does_not_fit() {
        for pattern in [Pattern::ParallelLines, Pattern::Elbows, Pattern::Serpentine] {
            let s = SynthSpec {
                image_size: 64,
                pitch: 40.0,
                line_width: 10.0,
                pattern,
                ..SynthSpec::default()
            };
            assert!(matches!(build_pattern(&s, 0.0), Err(Error::PatternDoesNotFit { .. })), "{pattern:?}");
        }
    }

    #[test]
    fn line_count_matches_pitch() {
        let s = SynthSpec {
            image_size: 128,
            pitch: 32.0,
            orientation: 90.0,
            ..SynthSpec::default()
        };
        let lines = build_pattern(&s, 0.0).unwrap();
        // centres at 64 + k*32, kept while the groove stays clear of the border
        let xs: Vec<f64> = lines.iter().map(|l| l.points[0].x.round()).collect();
        assert_eq!(xs, vec![96.0, 64.0, 32.0]);
    }
}
