//! Line edge and line width roughness about total-least-squares reference lines.

use serde::{Deserialize, Serialize};

use super::width::{skeleton_of, skeleton_sites};
use crate::error::{Error, Result};
use crate::imgcore::{
    connected_components, fit_line_ls, trace_polygons, BinaryMask, Connectivity, Line, PointF, Vec2,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RoughConfig {
    /// Shortest straight skeleton run that gets a reference line.
    pub min_run: usize,
    pub prune_len: usize,
    /// Half-size of the window used to classify skeleton direction.
    pub direction_half: i64,
    /// Samples closer than this multiple of the mean width to a run end are skipped.
    pub end_trim_widths: f64,
}

impl Default for RoughConfig {
    fn default() -> Self {
        Self {
            min_run: 32,
            prune_len: 10,
            direction_half: 4,
            end_trim_widths: 1.0,
        }
    }
}

/// Range, mean absolute and mean square of a residual series.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SeriesStats {
    pub range: f64,
    pub mean_abs: f64,
    pub mean_sq: f64,
    pub count: usize,
}

/// Statistics of edge offsets about their own mean.
pub fn edge_stats(offsets: &[f64]) -> SeriesStats {
    if offsets.is_empty() {
        return SeriesStats::default();
    }
    let n = offsets.len() as f64;
    let mean = offsets.iter().sum::<f64>() / n;
    let res: Vec<f64> = offsets.iter().map(|v| v - mean).collect();
    let (lo, hi) = res
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    SeriesStats {
        range: hi - lo,
        mean_abs: res.iter().map(|v| v.abs()).sum::<f64>() / n,
        mean_sq: res.iter().map(|v| v * v).sum::<f64>() / n,
        count: offsets.len(),
    }
}

/// Width statistics: range of the widths, deviations about the mean width.
pub fn width_stats(widths: &[f64]) -> SeriesStats {
    edge_stats(widths)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RoughReport {
    pub r_e: f64,
    pub r_ea: f64,
    pub r_eq2: f64,
    pub r_w: f64,
    pub r_wa: f64,
    pub r_wq2: f64,
    pub edge_samples: usize,
    pub width_samples: usize,
}

impl RoughReport {
    /// Sample-weighted mean of per-edge and per-run statistics.
    pub fn pooled(edges: &[SeriesStats], widths: &[SeriesStats]) -> Self {
        let wmean = |s: &[SeriesStats], f: fn(&SeriesStats) -> f64| -> (f64, usize) {
            let n: usize = s.iter().map(|e| e.count).sum();
            if n == 0 {
                return (0.0, 0);
            }
            (s.iter().map(|e| f(e) * e.count as f64).sum::<f64>() / n as f64, n)
        };
        let (r_e, ne) = wmean(edges, |s| s.range);
        let (r_ea, _) = wmean(edges, |s| s.mean_abs);
        let (r_eq2, _) = wmean(edges, |s| s.mean_sq);
        let (r_w, nw) = wmean(widths, |s| s.range);
        let (r_wa, _) = wmean(widths, |s| s.mean_abs);
        let (r_wq2, _) = wmean(widths, |s| s.mean_sq);
        Self {
            r_e,
            r_ea,
            r_eq2,
            r_w,
            r_wa,
            r_wq2,
            edge_samples: ne,
            width_samples: nw,
        }
    }
}

/// Offsets of the two edges (left and right of the line direction) sampled
/// by perpendicular rays, one per unit of arc length.
#[derive(Debug, Clone, Default)]
pub struct RunEdges {
    pub line: Option<Line>,
    pub left: Vec<f64>,
    pub right: Vec<f64>,
    pub widths: Vec<f64>,
}

/// Smallest positive ray parameter where `origin + t·dir` meets any polygon edge.
fn ray_hit(polys: &[Vec<PointF>], origin: PointF, dir: Vec2, max_t: f64) -> Option<f64> {
    let mut best: Option<f64> = None;
    for poly in polys {
        let n = poly.len();
        for i in 0..n {
            let (a, b) = (poly[i], poly[(i + 1) % n]);
            let e = b - a;
            let denom = dir.cross(e);
            if denom.abs() < 1e-12 {
                continue;
            }
            let ao = a - origin;
            let t = ao.cross(e) / denom;
            let u = ao.cross(dir) / denom;
            if t > 0.0 && t <= max_t && (0.0..=1.0).contains(&u) && best.map_or(true, |b| t < b) {
                best = Some(t);
            }
        }
    }
    best
}

/// Straight skeleton runs of one component, grouped by dominant direction.
fn straight_runs(component: &BinaryMask, cfg: &RoughConfig) -> Vec<Vec<PointF>> {
    let skel = skeleton_of(component, cfg.prune_len);
    let (w, h) = (skel.width(), skel.height());
    let mut horiz = BinaryMask::empty(w, h);
    let mut vert = BinaryMask::empty(w, h);
    for s in skeleton_sites(&skel, cfg.direction_half) {
        if s.tangent.x.abs() >= s.tangent.y.abs() - 1e-9 {
            horiz.set(s.x, s.y, true);
        } else {
            vert.set(s.x, s.y, true);
        }
    }
    let mut runs = Vec::new();
    for m in [&horiz, &vert] {
        let labels = connected_components(m, Connectivity::Eight);
        let mut groups: Vec<Vec<PointF>> = vec![Vec::new(); labels.count()];
        for (x, y) in m.foreground() {
            groups[labels.get(x, y) as usize - 1].push(PointF::new(x as f64, y as f64));
        }
        runs.extend(groups.into_iter().filter(|g| g.len() >= cfg.min_run));
    }
    runs
}

/// Edge offsets for every straight run of every component of `mask`.
pub fn sample_edges(mask: &BinaryMask, cfg: &RoughConfig) -> Vec<RunEdges> {
    let labels = connected_components(mask, Connectivity::Eight);
    let mut out = Vec::new();
    let max_t = (mask.width() + mask.height()) as f64;
    for label in 1..=labels.count() as u32 {
        let comp = labels.mask_of(label);
        let polys = trace_polygons(&comp);
        for run in straight_runs(&comp, cfg) {
            let Ok(line) = fit_line_ls(&run) else { continue };
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for p in &run {
                let s = line.position(*p);
                lo = lo.min(s);
                hi = hi.max(s);
            }
            let nrm = line.normal();
            // first pass for a width estimate used in end trimming
            let probe = |s: f64| -> Option<(f64, f64)> {
                let o = line.at(s);
                let l = ray_hit(&polys, o, nrm, max_t)?;
                let r = ray_hit(&polys, o, -nrm, max_t)?;
                Some((l, r))
            };
            let mid: Vec<f64> = (0..=8)
                .filter_map(|k| probe(lo + (hi - lo) * k as f64 / 8.0).map(|(l, r)| l + r))
                .collect();
            if mid.is_empty() {
                continue;
            }
            let mut sorted = mid.clone();
            sorted.sort_by(f64::total_cmp);
            let width_est = sorted[sorted.len() / 2];
            let trim = cfg.end_trim_widths * width_est;
            let mut edges = RunEdges {
                line: Some(line),
                ..RunEdges::default()
            };
            // unit grid centred on the run so the samples do not depend on the line's sign
            let mid_s = 0.5 * (lo + hi);
            let half_k = ((0.5 * (hi - lo) - trim).max(-1.0)).floor() as i64;
            for k in -half_k..=half_k {
                if let Some((l, r)) = probe(mid_s + k as f64) {
                    edges.left.push(l);
                    edges.right.push(-r);
                    edges.widths.push(l + r);
                }
            }
            if edges.widths.len() >= 2 {
                out.push(edges);
            }
        }
    }
    out
}

/// LER/LWR statistics pooled over all straight runs of `mask`.
pub fn roughness(mask: &BinaryMask, cfg: &RoughConfig) -> Result<RoughReport> {
    let runs = sample_edges(mask, cfg);
    if runs.is_empty() {
        return Err(Error::NoLineComponent(format!(
            "no straight run of at least {} px in a {}x{} mask",
            cfg.min_run,
            mask.width(),
            mask.height()
        )));
    }
    let mut edges = Vec::new();
    let mut widths = Vec::new();
    for r in &runs {
        edges.push(edge_stats(&r.left));
        edges.push(edge_stats(&r.right));
        widths.push(width_stats(&r.widths));
    }
    Ok(RoughReport::pooled(&edges, &widths))
}
