use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::curate::{
    curate_oracle, latest_decisions, read_decisions, write_decisions, CurationDecision, CurationMode,
};
use super::prompt::{bboxes_from_layout, DEFAULT_MARGIN, DEFAULT_MIN_AREA};
use super::segmenter::Segmenter;
use crate::error::{Error, Result};
use crate::imgcore::{save_mask, BinaryMask, GrayImage};
use crate::metrics::seg_metrics;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BootstrapConfig {
    pub iterations: usize,
    pub epochs_per_iter: usize,
    pub curation: CurationMode,
    /// Fraction of curation decisions flipped at every iteration.
    pub noise_injection_rate: f64,
    pub noise_seed: u64,
    /// In human mode, train on reviewed samples only instead of waiting for all.
    pub allow_partial_review: bool,
    pub bbox_min_area: usize,
    pub bbox_margin: usize,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self {
            iterations: 3,
            epochs_per_iter: 3,
            curation: CurationMode::default(),
            noise_injection_rate: 0.0,
            noise_seed: 99,
            allow_partial_review: false,
            bbox_min_area: DEFAULT_MIN_AREA,
            bbox_margin: DEFAULT_MARGIN,
        }
    }
}

impl BootstrapConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::config("iterations", "must be at least 1"));
        }
        if self.epochs_per_iter == 0 {
            return Err(Error::config("epochs_per_iter", "must be at least 1"));
        }
        if let CurationMode::Oracle { iou_threshold } = self.curation {
            if !(iou_threshold > 0.0 && iou_threshold < 1.0) {
                return Err(Error::config("iou_threshold", format!("{iou_threshold} outside (0, 1)")));
            }
        }
        if !(0.0..=0.3).contains(&self.noise_injection_rate) {
            return Err(Error::config(
                "noise_injection_rate",
                format!("{} outside [0, 0.3]", self.noise_injection_rate),
            ));
        }
        Ok(())
    }
}

/// One corpus image for the coarse stage.
#[derive(Debug, Clone)]
pub struct BootstrapItem {
    pub id: String,
    pub sem: GrayImage,
    pub layout: BinaryMask,
    pub gt: Option<BinaryMask>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskSource {
    Prompted,
    Predicted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum IterationStatus {
    Complete,
    AwaitingCuration { reviewed: usize, total: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationReport {
    pub iteration: usize,
    pub source: MaskSource,
    pub generated: usize,
    pub accepted: usize,
    pub rejected: usize,
    pub unreviewed: usize,
    /// Mean IoU of the generated masks against gt, where gt exists.
    pub mean_iou: Option<f64>,
    pub status: IterationStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapReport {
    pub iterations: Vec<IterationReport>,
    pub complete: bool,
}

impl BootstrapReport {
    pub fn accepted_counts(&self) -> Vec<usize> {
        self.iterations.iter().map(|r| r.accepted).collect()
    }

    /// Iteration parked for human review, if any.
    pub fn awaiting(&self) -> Option<&IterationReport> {
        self.iterations
            .iter()
            .find(|r| matches!(r.status, IterationStatus::AwaitingCuration { .. }))
    }
}

pub fn iteration_dir(run: &Path, k: usize) -> PathBuf {
    run.join(format!("iter{k}"))
}

fn write_json<T: Serialize>(path: &Path, v: &T) -> Result<()> {
    let bytes = serde_json::to_vec_pretty(v).map_err(|e| Error::Json {
        path: path.to_path_buf(),
        source: e,
    })?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn read_iteration(dir: &Path) -> Result<Option<IterationReport>> {
    let path = dir.join("report.json");
    match fs::read(&path) {
        Ok(b) => serde_json::from_slice(&b).map(Some).map_err(|e| Error::Json { path, source: e }),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(Error::io(&path, e)),
    }
}

/// Generate masks for every item: box prompts on iteration 1, prompt-free afterwards.
pub fn generate_masks(items: &[BootstrapItem], seg: &dyn Segmenter, iteration: usize, cfg: &BootstrapConfig) -> Result<Vec<BinaryMask>> {
    items
        .par_iter()
        .map(|it| {
            if iteration == 1 {
                let boxes = bboxes_from_layout(&it.layout, cfg.bbox_min_area, cfg.bbox_margin);
                seg.generate_prompted(&it.sem, &boxes)
            } else {
                seg.predict(&it.sem)
            }
        })
        .collect()
}

fn curate(
    items: &[BootstrapItem],
    masks: &[BinaryMask],
    iteration: usize,
    cfg: &BootstrapConfig,
    dir: Option<&Path>,
) -> Result<(Vec<Option<bool>>, usize)> {
    match &cfg.curation {
        CurationMode::Oracle { iou_threshold } => {
            let triples = items
                .iter()
                .zip(masks)
                .map(|(it, m)| {
                    let gt = it.gt.as_ref().ok_or_else(|| {
                        Error::config("curation", format!("oracle mode needs gt for sample {}", it.id))
                    })?;
                    Ok((it.id.as_str(), m, gt))
                })
                .collect::<Result<Vec<_>>>()?;
            let seed = cfg.noise_seed.wrapping_add(iteration as u64);
            let decisions = curate_oracle(&triples, *iou_threshold, cfg.noise_injection_rate, seed)?;
            if let Some(d) = dir {
                write_decisions(&d.join("decisions.jsonl"), &decisions)?;
            }
            Ok((decisions.iter().map(|d| Some(d.accepted)).collect(), 0))
        }
        CurationMode::Human => {
            let dir = dir.ok_or_else(|| Error::config("curation", "human mode needs a run directory"))?;
            let all: Vec<CurationDecision> = read_decisions(&dir.join("decisions.jsonl"))?.unwrap_or_default();
            let latest = latest_decisions(&all);
            let out: Vec<Option<bool>> = items.iter().map(|it| latest.get(&it.id).map(|d| d.accepted)).collect();
            let missing = out.iter().filter(|d| d.is_none()).count();
            Ok((out, missing))
        }
    }
}

/// Iterated generate, curate, retrain-from-initial loop. With a run
/// directory, finished iterations are reloaded rather than recomputed and a
/// human-mode run stops at the first iteration that lacks decisions.
pub fn bootstrap_run(
    items: &[BootstrapItem],
    seg: &mut dyn Segmenter,
    cfg: &BootstrapConfig,
    run_dir: Option<&Path>,
) -> Result<BootstrapReport> {
    cfg.validate()?;
    if items.is_empty() {
        return Err(Error::EmptyDataset("bootstrap corpus is empty".into()));
    }
    let mut reports = Vec::new();
    for k in 1..=cfg.iterations {
        let dir = run_dir.map(|r| iteration_dir(r, k));
        if let Some(d) = &dir {
            if let Some(rep) = read_iteration(d)? {
                let weights = d.join("weights.lsnn");
                if rep.status == IterationStatus::Complete && weights.is_file() {
                    let bytes = fs::read(&weights).map_err(|e| Error::io(&weights, e))?;
                    seg.load_state(&bytes)?;
                    reports.push(rep);
                    continue;
                }
            }
            fs::create_dir_all(d.join("masks")).map_err(|e| Error::io(d, e))?;
        }
        let masks = generate_masks(items, &*seg, k, cfg)?;
        if let Some(d) = &dir {
            items
                .par_iter()
                .zip(&masks)
                .try_for_each(|(it, m)| save_mask(m, d.join("masks").join(format!("{}.png", it.id))))?;
        }
        let ious: Vec<f64> = items
            .iter()
            .zip(&masks)
            .filter_map(|(it, m)| it.gt.as_ref().map(|g| seg_metrics(m, g).map(|r| r.iou)))
            .collect::<Result<_>>()?;
        let mean_iou = (!ious.is_empty()).then(|| ious.iter().sum::<f64>() / ious.len() as f64);
        let (decisions, unreviewed) = curate(items, &masks, k, cfg, dir.as_deref())?;
        let accepted = decisions.iter().filter(|d| **d == Some(true)).count();
        let rejected = decisions.iter().filter(|d| **d == Some(false)).count();
        let mut rep = IterationReport {
            iteration: k,
            source: if k == 1 { MaskSource::Prompted } else { MaskSource::Predicted },
            generated: masks.len(),
            accepted,
            rejected,
            unreviewed,
            mean_iou,
            status: IterationStatus::Complete,
        };
        if unreviewed > 0 && !cfg.allow_partial_review {
            rep.status = IterationStatus::AwaitingCuration {
                reviewed: items.len() - unreviewed,
                total: items.len(),
            };
            if let Some(d) = &dir {
                write_json(&d.join("report.json"), &rep)?;
            }
            reports.push(rep);
            return Ok(BootstrapReport {
                iterations: reports,
                complete: false,
            });
        }
        if accepted == 0 {
            if let Some(d) = &dir {
                write_json(&d.join("report.json"), &rep)?;
            }
            return Err(Error::BootstrapAborted {
                iteration: k,
                reason: format!("no accepted masks among {} generated", masks.len()),
            });
        }
        let train: Vec<(&GrayImage, &BinaryMask)> = items
            .iter()
            .zip(&masks)
            .zip(&decisions)
            .filter(|(_, d)| **d == Some(true))
            .map(|((it, m), _)| (&it.sem, m))
            .collect();
        seg.retrain(&train, cfg.epochs_per_iter, true)?;
        if let Some(d) = &dir {
            let w = d.join("weights.lsnn");
            fs::write(&w, seg.state_bytes()).map_err(|e| Error::io(&w, e))?;
            write_json(&d.join("report.json"), &rep)?;
        }
        log::info!("bootstrap iteration {k}: accepted {accepted}/{}", masks.len());
        reports.push(rep);
    }
    Ok(BootstrapReport {
        iterations: reports,
        complete: true,
    })
}
