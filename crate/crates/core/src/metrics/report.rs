//! Per-image and corpus evaluation reports.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::elec::{cd, esd, oscc, ElecConfig};
use super::rough::{roughness, RoughConfig, RoughReport};
use super::seg::{seg_metrics, SegReport};
use crate::error::{Error, Result};
use crate::imgcore::{load_mask, BinaryMask};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub elec: ElecConfig,
    pub rough: RoughConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ElecReport {
    pub oscc: usize,
    pub opens: usize,
    pub shorts: usize,
    pub esd: usize,
    pub cd_pred: f64,
    pub cd_gt: f64,
    pub cd_err: f64,
}

/// Signed roughness errors, pred minus gt.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RoughError {
    pub re: f64,
    pub rea: f64,
    pub req2: f64,
    pub rw: f64,
    pub rwa: f64,
    pub rwq2: f64,
}

impl RoughError {
    pub fn between(pred: &RoughReport, gt: &RoughReport) -> Self {
        Self {
            re: pred.r_e - gt.r_e,
            rea: pred.r_ea - gt.r_ea,
            req2: pred.r_eq2 - gt.r_eq2,
            rw: pred.r_w - gt.r_w,
            rwa: pred.r_wa - gt.r_wa,
            rwq2: pred.r_wq2 - gt.r_wq2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairReport {
    pub id: String,
    pub seg: SegReport,
    pub elec: ElecReport,
    /// `None` when either mask has no straight run long enough to measure.
    pub rough: Option<RoughError>,
}

fn cd_or_zero(mask: &BinaryMask, cfg: &ElecConfig) -> Result<f64> {
    if mask.is_empty() {
        return Ok(0.0);
    }
    cd(mask, cfg)
}

pub fn evaluate_pair(id: &str, pred: &BinaryMask, gt: &BinaryMask, cfg: &EvalConfig) -> Result<PairReport> {
    let seg = seg_metrics(pred, gt)?;
    let o = oscc(pred, gt, cfg.elec.min_overlap)?;
    let cd_pred = cd_or_zero(pred, &cfg.elec)?;
    let cd_gt = cd_or_zero(gt, &cfg.elec)?;
    let elec = ElecReport {
        oscc: o.total,
        opens: o.opens,
        shorts: o.shorts,
        esd: esd(pred, gt, &cfg.elec)?,
        cd_pred,
        cd_gt,
        cd_err: cd_pred - cd_gt,
    };
    let rough = match (roughness(pred, &cfg.rough), roughness(gt, &cfg.rough)) {
        (Ok(p), Ok(g)) => Some(RoughError::between(&p, &g)),
        (Err(Error::NoLineComponent(_)), _) | (_, Err(Error::NoLineComponent(_))) => None,
        (Err(e), _) | (_, Err(e)) => return Err(e),
    };
    Ok(PairReport {
        id: id.to_string(),
        seg,
        elec,
        rough,
    })
}

/// Corpus means in report column order. Segmentation values are fractions.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CorpusMeans {
    pub iou: f64,
    pub pa: f64,
    pub f1: f64,
    pub oscc: f64,
    pub esd: f64,
    pub cd_err: f64,
    pub re: f64,
    pub rea: f64,
    pub req2: f64,
    pub rw: f64,
    pub rwa: f64,
    pub rwq2: f64,
    pub images: usize,
    pub rough_images: usize,
}

impl CorpusMeans {
    /// Means over `reports`; `abs` takes absolute values of the error columns first.
    pub fn of(reports: &[PairReport], abs: bool) -> Self {
        let f = |v: f64| if abs { v.abs() } else { v };
        let n = reports.len();
        let mean = |g: &dyn Fn(&PairReport) -> f64| -> f64 {
            if n == 0 {
                0.0
            } else {
                reports.iter().map(g).sum::<f64>() / n as f64
            }
        };
        let rough: Vec<RoughError> = reports.iter().filter_map(|r| r.rough).collect();
        let rmean = |g: &dyn Fn(&RoughError) -> f64| -> f64 {
            if rough.is_empty() {
                0.0
            } else {
                rough.iter().map(|r| f(g(r))).sum::<f64>() / rough.len() as f64
            }
        };
        Self {
            iou: mean(&|r| r.seg.iou),
            pa: mean(&|r| r.seg.pa),
            f1: mean(&|r| r.seg.f1),
            oscc: mean(&|r| r.elec.oscc as f64),
            esd: mean(&|r| r.elec.esd as f64),
            cd_err: mean(&|r| f(r.elec.cd_err)),
            re: rmean(&|r| r.re),
            rea: rmean(&|r| r.rea),
            req2: rmean(&|r| r.req2),
            rw: rmean(&|r| r.rw),
            rwa: rmean(&|r| r.rwa),
            rwq2: rmean(&|r| r.rwq2),
            images: n,
            rough_images: rough.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EvalSummary {
    pub per_image: Vec<PairReport>,
    pub corpus: CorpusMeans,
    pub corpus_abs: CorpusMeans,
    /// Ids with a missing pred or gt file.
    pub missing: Vec<String>,
    /// Ids whose files were present but could not be evaluated.
    pub failed: Vec<(String, String)>,
}

impl EvalSummary {
    pub fn from_reports(mut per_image: Vec<PairReport>) -> Self {
        per_image.sort_by(|a, b| a.id.cmp(&b.id));
        Self {
            corpus: CorpusMeans::of(&per_image, false),
            corpus_abs: CorpusMeans::of(&per_image, true),
            per_image,
            ..Self::default()
        }
    }
}

/// Evaluate in-memory pairs in parallel; results are ordered by id.
pub fn evaluate_pairs(pairs: &[(String, BinaryMask, BinaryMask)], cfg: &EvalConfig) -> EvalSummary {
    let results: Vec<(String, Result<PairReport>)> = pairs
        .par_iter()
        .map(|(id, p, g)| (id.clone(), evaluate_pair(id, p, g, cfg)))
        .collect();
    collect(results, Vec::new())
}

fn collect(results: Vec<(String, Result<PairReport>)>, missing: Vec<String>) -> EvalSummary {
    let mut ok = Vec::new();
    let mut failed = Vec::new();
    for (id, r) in results {
        match r {
            Ok(rep) => ok.push(rep),
            Err(e) => failed.push((id, e.to_string())),
        }
    }
    let mut s = EvalSummary::from_reports(ok);
    failed.sort();
    s.failed = failed;
    s.missing = missing;
    s.missing.sort();
    s
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairPaths {
    pub id: String,
    pub pred: PathBuf,
    pub gt: PathBuf,
}

/// Evaluate pairs of mask files. Missing files are listed and skipped.
pub fn evaluate_files(pairs: &[PairPaths], cfg: &EvalConfig) -> EvalSummary {
    let (present, absent): (Vec<&PairPaths>, Vec<&PairPaths>) =
        pairs.iter().partition(|p| p.pred.is_file() && p.gt.is_file());
    let results: Vec<(String, Result<PairReport>)> = present
        .par_iter()
        .map(|p| {
            let r = load_mask(&p.pred)
                .and_then(|pred| load_mask(&p.gt).map(|gt| (pred, gt)))
                .and_then(|(pred, gt)| evaluate_pair(&p.id, &pred, &gt, cfg));
            (p.id.clone(), r)
        })
        .collect();
    collect(results, absent.into_iter().map(|p| p.id.clone()).collect())
}

fn png_stems(dir: &Path) -> Result<Vec<String>> {
    let rd = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut out = Vec::new();
    for entry in rd {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("png")) {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                out.push(stem.to_string());
            }
        }
    }
    out.sort();
    Ok(out)
}

/// Pair `<pred_dir>/<id>.png` with `<gt_dir>/<id>.png` over the union of ids.
pub fn pair_flat_dirs(pred_dir: &Path, gt_dir: &Path) -> Result<Vec<PairPaths>> {
    let mut ids = png_stems(gt_dir)?;
    ids.extend(png_stems(pred_dir)?);
    ids.sort();
    ids.dedup();
    Ok(ids
        .into_iter()
        .map(|id| PairPaths {
            pred: pred_dir.join(format!("{id}.png")),
            gt: gt_dir.join(format!("{id}.png")),
            id,
        })
        .collect())
}

pub const TABLE_COLUMNS: [&str; 12] = [
    "IoU", "PA", "F1", "OSCC", "ESD", "CD", "R_E", "R_Ea", "R_Eq2", "R_W", "R_Wa", "R_Wq2",
];

/// Text table with one row per labelled summary; segmentation scores ×100.
pub fn format_table(rows: &[(&str, &CorpusMeans)]) -> String {
    let label_w = rows.iter().map(|(l, _)| l.len()).max().unwrap_or(0).max(6);
    let mut s = format!("{:label_w$}", "method");
    for c in TABLE_COLUMNS {
        let _ = write!(s, " {c:>8}");
    }
    s.push('\n');
    for (label, m) in rows {
        let _ = write!(s, "{label:label_w$}");
        let vals = [
            m.iou * 100.0,
            m.pa * 100.0,
            m.f1 * 100.0,
            m.oscc,
            m.esd,
            m.cd_err,
            m.re,
            m.rea,
            m.req2,
            m.rw,
            m.rwa,
            m.rwq2,
        ];
        for v in vals {
            let _ = write!(s, " {v:>8.3}");
        }
        s.push('\n');
    }
    s
}

/// Write `report.json` and `report.txt` into `dir`.
pub fn write_report(summary: &EvalSummary, dir: &Path, label: &str) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let json_path = dir.join("report.json");
    let json = serde_json::to_vec_pretty(summary).map_err(|e| Error::Json {
        path: json_path.clone(),
        source: e,
    })?;
    std::fs::write(&json_path, json).map_err(|e| Error::io(&json_path, e))?;
    let mut text = format_table(&[(label, &summary.corpus), (&format!("{label} |err|"), &summary.corpus_abs)]);
    if !summary.missing.is_empty() {
        let _ = writeln!(text, "missing: {}", summary.missing.join(", "));
    }
    for (id, msg) in &summary.failed {
        let _ = writeln!(text, "failed: {id}: {msg}");
    }
    let txt_path = dir.join("report.txt");
    std::fs::write(&txt_path, text).map_err(|e| Error::io(&txt_path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imgcore::save_mask;

    fn bars(shift: usize) -> BinaryMask {
        BinaryMask::from_fn(120, 100, |x, y| {
            (10..110).contains(&x) && ((20 + shift..32).contains(&y) || (60..72 + shift).contains(&y))
        })
    }

    #[test]
    fn identical_pairs_give_perfect_rows() {
        let pairs: Vec<_> = (0..3).map(|i| (format!("s{i}"), bars(0), bars(0))).collect();
        let s = evaluate_pairs(&pairs, &EvalConfig::default());
        let c = s.corpus;
        assert_eq!((c.iou, c.pa, c.f1), (1.0, 1.0, 1.0));
        assert_eq!((c.oscc, c.esd, c.cd_err), (0.0, 0.0, 0.0));
        assert_eq!((c.re, c.rea, c.req2, c.rw, c.rwa, c.rwq2), (0.0, 0.0, 0.0, 0.0, 0.0, 0.0));
        assert_eq!(c.images, 3);
        assert_eq!(c.rough_images, 3);
    }

    #[test]
    fn single_image_corpus_is_that_image() {
        let s = evaluate_pairs(&[("a".into(), bars(2), bars(0))], &EvalConfig::default());
        let r = &s.per_image[0];
        assert_eq!(s.corpus.iou, r.seg.iou);
        assert_eq!(s.corpus.cd_err, r.elec.cd_err);
        assert_eq!(s.corpus.re, r.rough.unwrap().re);
    }

    #[test]
    fn three_image_mean_by_hand() {
        let pairs = vec![
            ("a".to_string(), bars(0), bars(0)),
            ("b".to_string(), bars(2), bars(0)),
            ("c".to_string(), bars(4), bars(0)),
        ];
        let s = evaluate_pairs(&pairs, &EvalConfig::default());
        let ious: Vec<f64> = s.per_image.iter().map(|r| r.seg.iou).collect();
        let cds: Vec<f64> = s.per_image.iter().map(|r| r.elec.cd_err).collect();
        assert!((s.corpus.iou - (ious[0] + ious[1] + ious[2]) / 3.0).abs() < 1e-12);
        assert!((s.corpus.cd_err - (cds[0] + cds[1] + cds[2]) / 3.0).abs() < 1e-12);
        // shift 2 and 4 both shrink the top bar and grow the bottom: cd error near zero,
        // while the absolute aggregate stays non-negative
        assert!(s.corpus_abs.cd_err >= s.corpus.cd_err.abs() - 1e-12);
        assert_eq!(s.per_image.iter().map(|r| r.id.as_str()).collect::<Vec<_>>(), ["a", "b", "c"]);
    }

    #[test]
    fn no_line_component_drops_rough_only() {
        let dot = BinaryMask::from_fn(40, 40, |x, y| (10..16).contains(&x) && (10..16).contains(&y));
        let r = evaluate_pair("d", &dot, &dot, &EvalConfig::default()).unwrap();
        assert!(r.rough.is_none());
        assert_eq!(r.seg.iou, 1.0);
    }

    #[test]
    fn missing_files_listed_and_rest_evaluated() {
        let dir = tempfile::tempdir().unwrap();
        let (pd, gd) = (dir.path().join("pred"), dir.path().join("gt"));
        std::fs::create_dir_all(&pd).unwrap();
        std::fs::create_dir_all(&gd).unwrap();
        for id in ["a", "b"] {
            save_mask(&bars(0), gd.join(format!("{id}.png"))).unwrap();
        }
        save_mask(&bars(0), pd.join("a.png")).unwrap();
        save_mask(&bars(0), pd.join("z.png")).unwrap();
        let pairs = pair_flat_dirs(&pd, &gd).unwrap();
        let s = evaluate_files(&pairs, &EvalConfig::default());
        assert_eq!(s.per_image.len(), 1);
        assert_eq!(s.missing, vec!["b".to_string(), "z".to_string()]);
        write_report(&s, &dir.path().join("out"), "test").unwrap();
        let text = std::fs::read_to_string(dir.path().join("out/report.txt")).unwrap();
        assert!(text.contains("missing: b, z"));
        let back: EvalSummary =
            serde_json::from_slice(&std::fs::read(dir.path().join("out/report.json")).unwrap()).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn table_has_columns_in_order() {
        let t = format_table(&[("x", &CorpusMeans::default())]);
        let header = t.lines().next().unwrap();
        let cols: Vec<&str> = header.split_whitespace().skip(1).collect();
        assert_eq!(cols, TABLE_COLUMNS);
    }
}
