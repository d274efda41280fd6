use serde::{Deserialize, Serialize};

use super::seg::check_dims;
use super::width::{run_width, skeleton_endpoints, skeleton_of, skeleton_sites};
use crate::error::{Error, Result};
use crate::imgcore::{connected_components, BinaryMask, Connectivity, PointF};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ElecConfig {
    /// Shared pixels needed for a gt/pred component pair to count as linked.
    pub min_overlap: usize,
    /// Relative width deviation that makes a skeleton site significant.
    pub tau_rel: f64,
    /// Minimum number of connected significant sites forming one ESD defect.
    pub min_run: usize,
    /// Skeleton spur length removed before measuring.
    pub prune_len: usize,
    /// Half-size of the window used for skeleton tangents.
    pub tangent_half: i64,
}

impl Default for ElecConfig {
    fn default() -> Self {
        Self {
            min_overlap: 5,
            tau_rel: 0.5,
            min_run: 3,
            prune_len: 10,
            tangent_half: 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OsccReport {
    pub opens: usize,
    pub shorts: usize,
    pub total: usize,
}

/// Opens and shorts from the bipartite overlap graph of gt and pred components.
pub fn oscc(pred: &BinaryMask, gt: &BinaryMask, min_overlap: usize) -> Result<OsccReport> {
    check_dims(pred, gt)?;
    let lp = connected_components(pred, Connectivity::Eight);
    let lg = connected_components(gt, Connectivity::Eight);
    let (np, ng) = (lp.count(), lg.count());
    let mut overlap = std::collections::HashMap::<(u32, u32), usize>::new();
    for (&a, &b) in lg.as_slice().iter().zip(lp.as_slice()) {
        if a > 0 && b > 0 {
            *overlap.entry((a, b)).or_default() += 1;
        }
    }
    let mut deg_g = vec![0usize; ng + 1];
    let mut deg_p = vec![0usize; np + 1];
    for (&(g, p), &n) in &overlap {
        if n >= min_overlap {
            deg_g[g as usize] += 1;
            deg_p[p as usize] += 1;
        }
    }
    let count = |deg: &[usize]| -> usize {
        deg[1..]
            .iter()
            .map(|&d| if d == 0 { 1 } else { d - 1 })
            .sum()
    };
    let opens = count(&deg_g);
    let shorts = count(&deg_p);
    Ok(OsccReport {
        opens,
        shorts,
        total: opens + shorts,
    })
}

/// Per-site widths of `gt` and `pred` measured along the gt skeleton normals.
pub fn paired_widths(pred: &BinaryMask, gt: &BinaryMask, cfg: &ElecConfig) -> Vec<(usize, usize, f64, f64)> {
    let skel = skeleton_of(gt, cfg.prune_len);
    skeleton_sites(&skel, cfg.tangent_half)
        .into_iter()
        .map(|s| {
            let p = PointF::new(s.x as f64, s.y as f64);
            (s.x, s.y, run_width(gt, p, s.tangent), run_width(pred, p, s.tangent))
        })
        .collect()
}

/// Number of connected runs of significant width deviations along the gt skeleton.
pub fn esd(pred: &BinaryMask, gt: &BinaryMask, cfg: &ElecConfig) -> Result<usize> {
    check_dims(pred, gt)?;
    let mut flagged = BinaryMask::empty(gt.width(), gt.height());
    for (x, y, wg, wp) in paired_widths(pred, gt, cfg) {
        if wg > 0.0 && (wp - wg).abs() > cfg.tau_rel * wg {
            flagged.set(x, y, true);
        }
    }
    let labels = connected_components(&flagged, Connectivity::Eight);
    Ok(labels.sizes()[1..].iter().filter(|&&n| n >= cfg.min_run).count())
}

/// Mean local width over skeleton sites, excluding sites within one local
/// width of a skeleton end.
pub fn cd(mask: &BinaryMask, cfg: &ElecConfig) -> Result<f64> {
    if mask.is_empty() {
        return Err(Error::Degenerate("critical dimension of an empty mask".into()));
    }
    let skel = skeleton_of(mask, cfg.prune_len);
    let ends = skeleton_endpoints(&skel);
    let sites = skeleton_sites(&skel, cfg.tangent_half);
    let mut all = Vec::with_capacity(sites.len());
    let mut interior = Vec::with_capacity(sites.len());
    for s in sites {
        let p = PointF::new(s.x as f64, s.y as f64);
        let w = run_width(mask, p, s.tangent);
        all.push(w);
        let near_end = ends.iter().any(|&(ex, ey)| {
            let d = PointF::new(ex as f64, ey as f64).distance(p);
            d < w
        });
        if !near_end {
            interior.push(w);
        }
    }
    let pick = if interior.is_empty() { &all } else { &interior };
    Ok(pick.iter().sum::<f64>() / pick.len() as f64)
}
