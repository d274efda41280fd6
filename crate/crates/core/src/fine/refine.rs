use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::profile::{align_brightest, profile_features, sample_profile, Profile, RefineConfig};
use super::raster::{is_self_intersecting, rasterize_mask};
use crate::error::{Error, Result};
use crate::imgcore::{
    bilinear_clamped, connected_components, perturb_normals, trace_contours_with, BinaryMask, Connectivity,
    Contour, GrayImage, PointF, TraceOptions, Vec2,
};
use crate::nnet::{train, Activation, Dataset, LossKind, MlpParams, Optimizer, TrainConfig, Trained};
use crate::rng::Rng;

/// Outer contours of every 8-connected component, one per component in label
/// order. Components too small to carry normals yield `None`.
pub fn component_contours(mask: &BinaryMask, cfg: &RefineConfig) -> Vec<(BinaryMask, Option<Contour>)> {
    let labels = connected_components(mask, Connectivity::Eight);
    let boxes = labels.bounding_boxes();
    let (w, h) = (mask.width(), mask.height());
    let opts = TraceOptions {
        spacing: cfg.arc_spacing,
        normal_window: cfg.normal_window,
    };
    boxes
        .iter()
        .enumerate()
        .map(|(i, b)| {
            let label = i as u32 + 1;
            let comp = labels.mask_of(label);
            let r = b.inflated(1, w, h);
            let sub = BinaryMask::from_fn(r.width(), r.height(), |x, y| labels.get(x + r.x0, y + r.y0) == label);
            let off = PointF::new(r.x0 as f64, r.y0 as f64);
            let contour = trace_contours_with(&sub, &opts).into_iter().next().and_then(|c| {
                (c.len() > 2 * cfg.normal_window).then(|| Contour {
                    points: c.points.iter().map(|&p| p + off).collect(),
                    normals: c.normals,
                    closed: true,
                })
            });
            (comp, contour)
        })
        .collect()
}

/// Signed distance along `normal` from `p` to the nearest 0.5 crossing of the
/// mask indicator, within `±t_max`. Positive is along the normal.
pub fn edge_offset(gt: &BinaryMask, p: PointF, normal: Vec2, t_max: f64) -> Option<f64> {
    let step = 0.25;
    let reach = t_max + 1.0;
    let n = (2.0 * reach / step).round() as i64;
    let f = |t: f64| bilinear_clamped(gt, p + normal * t) - 0.5;
    let mut best: Option<f64> = None;
    let mut t0 = -reach;
    let mut f0 = f(t0);
    for k in 1..=n {
        let t1 = -reach + k as f64 * step;
        let f1 = f(t1);
        if f0 == 0.0 || (f0 < 0.0) != (f1 < 0.0) {
            let root = if f0 == f1 { t0 } else { t0 + (t1 - t0) * f0 / (f0 - f1) };
            if best.map_or(true, |b| root.abs() < b.abs()) {
                best = Some(root);
            }
        }
        t0 = t1;
        f0 = f1;
    }
    best.filter(|b| b.abs() <= t_max)
}

/// Sampled and optionally aligned profile for every contour point.
pub fn contour_profiles(contour: &Contour, img: &GrayImage, cfg: &RefineConfig) -> Result<Vec<Profile>> {
    let s = cfg.scan_size()?;
    let cw = cfg.center_window()?;
    Ok(contour
        .points
        .iter()
        .zip(&contour.normals)
        .enumerate()
        .map(|(i, (&p, &n))| {
            let prof = sample_profile(img, i, p, n, s, cfg.drop_out_of_bounds);
            if cfg.align {
                align_brightest(img, &prof, cw, cfg.drop_out_of_bounds)
            } else {
                prof
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainingSetStats {
    pub points: usize,
    pub dropped_bounds: usize,
    pub dropped_flat: usize,
    pub dropped_no_edge: usize,
    pub kept: usize,
}

/// Labelled profiles of one image: coarse contour points sampled on `sem`,
/// labelled by the gt edge offset from the aligned point.
pub fn image_training_profiles(
    sem: &GrayImage,
    coarse: &BinaryMask,
    gt: &BinaryMask,
    cfg: &RefineConfig,
) -> Result<(Vec<(Profile, Vec<f64>)>, TrainingSetStats)> {
    let t_max = cfg.t_max()?;
    let mut stats = TrainingSetStats::default();
    let mut out = Vec::new();
    let comps = component_contours(coarse, cfg);
    for contour in comps.into_iter().filter_map(|(_, c)| c) {
        for mut p in contour_profiles(&contour, sem, cfg)? {
            stats.points += 1;
            if p.dropped {
                stats.dropped_bounds += 1;
                continue;
            }
            let Some(label) = edge_offset(gt, p.aligned_point(), p.normal, t_max) else {
                stats.dropped_no_edge += 1;
                continue;
            };
            let Some(f) = profile_features(&p, cfg) else {
                stats.dropped_flat += 1;
                continue;
            };
            p.label = Some(label);
            out.push((p, f));
        }
    }
    stats.kept = out.len();
    Ok((out, stats))
}

/// Training set over many images, subsampled to at most `max_profiles` rows.
pub fn build_training_set(
    triples: &[(&GrayImage, &BinaryMask, &BinaryMask)],
    cfg: &RefineConfig,
    max_profiles: usize,
    seed: u64,
) -> Result<(Dataset, TrainingSetStats)> {
    cfg.validate()?;
    let per_image: Vec<Result<(Vec<(Profile, Vec<f64>)>, TrainingSetStats)>> = triples
        .par_iter()
        .map(|(sem, coarse, gt)| image_training_profiles(sem, coarse, gt, cfg))
        .collect();
    let mut rows: Vec<(f64, Vec<f64>)> = Vec::new();
    let mut stats = TrainingSetStats::default();
    for r in per_image {
        let (profiles, s) = r?;
        stats.points += s.points;
        stats.dropped_bounds += s.dropped_bounds;
        stats.dropped_flat += s.dropped_flat;
        stats.dropped_no_edge += s.dropped_no_edge;
        rows.extend(profiles.into_iter().map(|(p, f)| (p.label.unwrap_or(0.0), f)));
    }
    if rows.is_empty() {
        return Err(Error::EmptyDataset(format!(
            "no labelled profiles from {} images ({} points: {} out of bounds, {} without a gt edge, {} flat)",
            triples.len(),
            stats.points,
            stats.dropped_bounds,
            stats.dropped_no_edge,
            stats.dropped_flat
        )));
    }
    let mut keep: Vec<usize> = if rows.len() > max_profiles {
        Rng::new(seed).sample_indices(rows.len(), max_profiles)
    } else {
        (0..rows.len()).collect()
    };
    keep.sort_unstable();
    let mut data = Dataset::new(cfg.input_dim()?, 1);
    for i in keep {
        data.push(&rows[i].1, &[rows[i].0])?;
    }
    stats.kept = data.len();
    Ok((data, stats))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FineTrainConfig {
    pub hidden: Vec<usize>,
    pub max_profiles: usize,
    /// Seed of the draw that caps the training set at `max_profiles`.
    pub sample_seed: u64,
    pub init_seed: u64,
    pub train: TrainConfig,
}

impl Default for FineTrainConfig {
    fn default() -> Self {
        Self {
            hidden: vec![256, 192],
            max_profiles: 12_000,
            sample_seed: 5,
            init_seed: 7,
            train: TrainConfig {
                learning_rate: 1e-3,
                batch_size: 64,
                epochs: 50,
                seed: 11,
                optimizer: Optimizer::adamw_default(),
                loss: LossKind::Mse,
                patience: None,
            },
        }
    }
}

pub fn fine_layer_dims(cfg: &RefineConfig, hidden: &[usize]) -> Result<Vec<usize>> {
    let mut dims = vec![cfg.input_dim()?];
    dims.extend_from_slice(hidden);
    dims.push(1);
    Ok(dims)
}

pub fn train_fine(data: &Dataset, cfg: &RefineConfig, tcfg: &FineTrainConfig) -> Result<Trained> {
    let init = MlpParams::init(&fine_layer_dims(cfg, &tcfg.hidden)?, Activation::Relu, tcfg.init_seed)?;
    train(&init, data, None, &tcfg.train)
}

#[derive(Debug, Clone)]
pub struct RefinedContour {
    pub contour: Contour,
    /// Original positions and normals, for boundedness checks.
    pub original: Contour,
    pub center_shifts: Vec<f64>,
    pub displacements: Vec<f64>,
    pub dropped: usize,
}

/// Move every point along its normal by the alignment shift plus the clamped
/// predicted displacement. Point count and order are preserved.
pub fn refine_contour(contour: &Contour, img: &GrayImage, params: &MlpParams, cfg: &RefineConfig) -> Result<RefinedContour> {
    let t_max = cfg.t_max()?;
    let dim = cfg.input_dim()?;
    if params.input_dim() != dim || params.output_dim() != 1 {
        return Err(Error::DimensionMismatch(format!(
            "network is {}->{}, profiles need {dim}->1",
            params.input_dim(),
            params.output_dim()
        )));
    }
    let profiles = contour_profiles(contour, img, cfg)?;
    let mut inputs = Vec::with_capacity(profiles.len() * dim);
    let mut rows = Vec::with_capacity(profiles.len());
    for (i, p) in profiles.iter().enumerate() {
        if p.dropped {
            continue;
        }
        if let Some(f) = profile_features(p, cfg) {
            inputs.extend_from_slice(&f);
            rows.push(i);
        }
    }
    let mut displacements = vec![0.0; profiles.len()];
    if !rows.is_empty() {
        let cache = params.forward_batch(&inputs, rows.len())?;
        for (&i, &d) in rows.iter().zip(cache.output()) {
            displacements[i] = d.clamp(-t_max, t_max);
        }
    }
    let points = profiles
        .iter()
        .zip(&displacements)
        .map(|(p, &d)| p.aligned_point() + p.normal * d)
        .collect();
    Ok(RefinedContour {
        contour: Contour {
            points,
            normals: contour.normals.clone(),
            closed: contour.closed,
        },
        original: contour.clone(),
        center_shifts: profiles.iter().map(|p| p.center_shift).collect(),
        dropped: profiles.len() - rows.len(),
        displacements,
    })
}

#[derive(Debug, Clone)]
pub struct RefineOutcome {
    pub mask: BinaryMask,
    pub contours: Vec<RefinedContour>,
    /// Components whose refined contour crossed itself.
    pub self_intersecting: usize,
    /// Components kept at their coarse pixels to preserve connectivity.
    pub reverted: usize,
}

/// Trace, refine and rasterize every component of `coarse`. A component whose
/// refined shape splits, vanishes or touches another keeps its coarse pixels,
/// so the component count never changes.
pub fn refine_mask(coarse: &BinaryMask, img: &GrayImage, params: &MlpParams, cfg: &RefineConfig) -> Result<RefineOutcome> {
    if !coarse.same_dims(img) {
        return Err(Error::DimensionMismatch(format!(
            "mask {}x{} vs image {}x{}",
            coarse.width(),
            coarse.height(),
            img.width(),
            img.height()
        )));
    }
    cfg.validate()?;
    let (w, h) = (coarse.width(), coarse.height());
    let comps = component_contours(coarse, cfg);
    let mut refined_contours = Vec::new();
    let mut self_intersecting = 0;
    let mut shapes: Vec<BinaryMask> = Vec::with_capacity(comps.len());
    let mut coarse_shapes: Vec<BinaryMask> = Vec::with_capacity(comps.len());
    let mut is_refined = Vec::with_capacity(comps.len());
    for (comp, contour) in comps {
        let shape = match contour {
            Some(c) => {
                let c = if cfg.normal_perturbation_deg != 0.0 {
                    perturb_normals(&c, cfg.normal_perturbation_deg)
                } else {
                    c
                };
                let r = refine_contour(&c, img, params, cfg)?;
                if is_self_intersecting(&r.contour.points) {
                    self_intersecting += 1;
                }
                let m = rasterize_mask(std::slice::from_ref(&r.contour.points), w, h);
                refined_contours.push(r);
                let single = !m.is_empty() && connected_components(&m, Connectivity::Eight).count() == 1;
                if single {
                    Some(m)
                } else {
                    None
                }
            }
            None => None,
        };
        is_refined.push(shape.is_some());
        shapes.push(shape.unwrap_or_else(|| comp.clone()));
        coarse_shapes.push(comp);
    }
    let n = shapes.len();
    loop {
        let mut union = BinaryMask::empty(w, h);
        for s in &shapes {
            union = union.union(s);
        }
        let labels = connected_components(&union, Connectivity::Eight);
        if labels.count() == n {
            let reverted = is_refined.iter().filter(|&&r| !r).count();
            return Ok(RefineOutcome {
                mask: union,
                contours: refined_contours,
                self_intersecting,
                reverted,
            });
        }
        let owner: Vec<u32> = shapes
            .iter()
            .map(|s| s.foreground().next().map_or(0, |(x, y)| labels.get(x, y)))
            .collect();
        let mut changed = false;
        for i in 0..n {
            if is_refined[i] && owner.iter().enumerate().any(|(j, &o)| j != i && o == owner[i]) {
                shapes[i] = coarse_shapes[i].clone();
                is_refined[i] = false;
                changed = true;
            }
        }
        if !changed {
            // only coarse shapes remain merged, which cannot happen for distinct components
            return Err(Error::Degenerate("component guard failed to separate coarse components".into()));
        }
    }
}
