use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::prompt::{prompt_segment_classical, BBox};
use crate::error::{Error, Result};
use crate::imgcore::{morphology, otsu_threshold, BinaryMask, GrayImage, MorphOp};
use crate::nnet::{params_from_bytes, params_to_bytes, train, Activation, Dataset, LossKind, MlpParams, Optimizer, TrainConfig};
use crate::rng::Rng;

/// Promptable and prompt-free segmentation with retraining from a fixed
/// initial state.
pub trait Segmenter: Send + Sync {
    fn name(&self) -> &'static str;

    fn generate_prompted(&self, image: &GrayImage, boxes: &[BBox]) -> Result<BinaryMask>;

    fn predict(&self, image: &GrayImage) -> Result<BinaryMask>;

    /// Train on image/mask pairs. With `from_initial` training starts from the
    /// stored initial state, otherwise from the current one.
    fn retrain(&mut self, data: &[(&GrayImage, &BinaryMask)], epochs: usize, from_initial: bool) -> Result<()>;

    /// Serialized current state (empty for stateless segmenters).
    fn state_bytes(&self) -> Vec<u8>;

    fn load_state(&mut self, bytes: &[u8]) -> Result<()>;
}

/// Stateless stand-in: box prompts via Otsu per box, prompt-free via Otsu over
/// the whole image.
#[derive(Debug, Clone, Copy, Default)]
pub struct ClassicalSegmenter;

impl Segmenter for ClassicalSegmenter {
    fn name(&self) -> &'static str {
        "classical"
    }

    fn generate_prompted(&self, image: &GrayImage, boxes: &[BBox]) -> Result<BinaryMask> {
        prompt_segment_classical(image, boxes)
    }

    fn predict(&self, image: &GrayImage) -> Result<BinaryMask> {
        let t = otsu_threshold(image, None)?;
        let dark = BinaryMask::from_fn(image.width(), image.height(), |x, y| image.get(x, y) <= t);
        morphology(&dark, MorphOp::Open, 1)
    }

    fn retrain(&mut self, _data: &[(&GrayImage, &BinaryMask)], _epochs: usize, _from_initial: bool) -> Result<()> {
        Ok(())
    }

    fn state_bytes(&self) -> Vec<u8> {
        Vec::new()
    }

    fn load_state(&mut self, _bytes: &[u8]) -> Result<()> {
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PatchMlpConfig {
    pub radius: usize,
    pub hidden: Vec<usize>,
    pub pixels_per_image: usize,
    pub init_seed: u64,
    pub sample_seed: u64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub lambda_mix: f64,
    pub open_radius: usize,
}

impl Default for PatchMlpConfig {
    fn default() -> Self {
        Self {
            radius: 5,
            hidden: vec![64, 32],
            pixels_per_image: 1500,
            init_seed: 17,
            sample_seed: 23,
            learning_rate: 2e-3,
            batch_size: 128,
            lambda_mix: 0.5,
            open_radius: 1,
        }
    }
}

impl PatchMlpConfig {
    pub fn input_dim(&self) -> usize {
        let side = 2 * self.radius + 1;
        side * side + 2
    }

    pub fn layer_dims(&self) -> Vec<usize> {
        let mut d = vec![self.input_dim()];
        d.extend_from_slice(&self.hidden);
        d.push(1);
        d
    }
}

/// Per-pixel classifier over z-scored intensity patches plus pixel coordinates.
#[derive(Debug, Clone)]
pub struct PatchMlpSegmenter {
    cfg: PatchMlpConfig,
    initial: MlpParams,
    params: MlpParams,
}

struct Standardized {
    w: usize,
    h: usize,
    data: Vec<f64>,
}

impl Standardized {
    fn new(img: &GrayImage) -> Self {
        let (m, s) = (img.mean(), img.std());
        let s = if s > 1e-9 { s } else { 1.0 };
        Self {
            w: img.width(),
            h: img.height(),
            data: img.data().iter().map(|v| (v - m) / s).collect(),
        }
    }

    fn push_features(&self, x: usize, y: usize, r: usize, out: &mut Vec<f64>) {
        let r = r as i64;
        for dy in -r..=r {
            let yy = (y as i64 + dy).clamp(0, self.h as i64 - 1) as usize;
            let row = &self.data[yy * self.w..(yy + 1) * self.w];
            for dx in -r..=r {
                let xx = (x as i64 + dx).clamp(0, self.w as i64 - 1) as usize;
                out.push(row[xx]);
            }
        }
        let nx = if self.w > 1 { x as f64 / (self.w - 1) as f64 } else { 0.5 };
        let ny = if self.h > 1 { y as f64 / (self.h - 1) as f64 } else { 0.5 };
        out.push(2.0 * nx - 1.0);
        out.push(2.0 * ny - 1.0);
    }
}

impl PatchMlpSegmenter {
    pub fn new(cfg: PatchMlpConfig) -> Result<Self> {
        let initial = MlpParams::init(&cfg.layer_dims(), Activation::Relu, cfg.init_seed)?;
        Ok(Self {
            params: initial.clone(),
            initial,
            cfg,
        })
    }

    pub fn config(&self) -> &PatchMlpConfig {
        &self.cfg
    }

    pub fn params(&self) -> &MlpParams {
        &self.params
    }

    pub fn initial_params(&self) -> &MlpParams {
        &self.initial
    }

    pub fn set_params(&mut self, params: MlpParams) -> Result<()> {
        if params.layer_dims() != self.initial.layer_dims() {
            return Err(Error::DimensionMismatch(format!(
                "segmenter expects layers {:?}, got {:?}",
                self.initial.layer_dims(),
                params.layer_dims()
            )));
        }
        self.params = params;
        Ok(())
    }

    /// Foreground probability for every pixel, row-major.
    pub fn probabilities(&self, image: &GrayImage) -> Result<Vec<f64>> {
        let st = Standardized::new(image);
        let (w, h) = (image.width(), image.height());
        let dim = self.cfg.input_dim();
        let rows_per_chunk = (4096 / w.max(1)).max(1);
        let chunks: Vec<Result<Vec<f64>>> = (0..h)
            .step_by(rows_per_chunk)
            .collect::<Vec<_>>()
            .par_iter()
            .map(|&y0| {
                let y1 = (y0 + rows_per_chunk).min(h);
                let mut feats = Vec::with_capacity((y1 - y0) * w * dim);
                for y in y0..y1 {
                    for x in 0..w {
                        st.push_features(x, y, self.cfg.radius, &mut feats);
                    }
                }
                let cache = self.params.forward_batch(&feats, (y1 - y0) * w)?;
                Ok(cache.output().iter().map(|&z| crate::nnet::sigmoid(z)).collect())
            })
            .collect();
        let mut out = Vec::with_capacity(w * h);
        for c in chunks {
            out.extend(c?);
        }
        Ok(out)
    }

    fn dataset(&self, data: &[(&GrayImage, &BinaryMask)]) -> Result<Dataset> {
        let mut ds = Dataset::new(self.cfg.input_dim(), 1);
        let mut rng = Rng::new(self.cfg.sample_seed);
        let mut feats = Vec::with_capacity(self.cfg.input_dim());
        for (img, mask) in data {
            if !mask.same_dims(*img) {
                return Err(Error::DimensionMismatch(format!(
                    "mask {}x{} vs image {}x{}",
                    mask.width(),
                    mask.height(),
                    img.width(),
                    img.height()
                )));
            }
            let st = Standardized::new(img);
            let n = img.width() * img.height();
            let mut picks = rng.sample_indices(n, self.cfg.pixels_per_image);
            picks.sort_unstable();
            for i in picks {
                let (x, y) = (i % img.width(), i / img.width());
                feats.clear();
                st.push_features(x, y, self.cfg.radius, &mut feats);
                ds.push(&feats, &[if mask.get(x, y) { 1.0 } else { 0.0 }])?;
            }
        }
        Ok(ds)
    }
}

impl Segmenter for PatchMlpSegmenter {
    fn name(&self) -> &'static str {
        "patch-mlp"
    }

    /// Prompted masks come from the classical box segmenter; the network is
    /// only used prompt-free.
    fn generate_prompted(&self, image: &GrayImage, boxes: &[BBox]) -> Result<BinaryMask> {
        prompt_segment_classical(image, boxes)
    }

    fn predict(&self, image: &GrayImage) -> Result<BinaryMask> {
        let p = self.probabilities(image)?;
        let m = BinaryMask::new(image.width(), image.height(), p.iter().map(|&v| v > 0.5).collect())?;
        if self.cfg.open_radius == 0 {
            return Ok(m);
        }
        morphology(&m, MorphOp::Open, self.cfg.open_radius)
    }

    fn retrain(&mut self, data: &[(&GrayImage, &BinaryMask)], epochs: usize, from_initial: bool) -> Result<()> {
        if data.is_empty() {
            return Err(Error::EmptyDataset("no curated masks to train on".into()));
        }
        let ds = self.dataset(data)?;
        let start = if from_initial { &self.initial } else { &self.params };
        let tcfg = TrainConfig {
            learning_rate: self.cfg.learning_rate,
            batch_size: self.cfg.batch_size,
            epochs,
            seed: self.cfg.sample_seed ^ 0x5eed,
            optimizer: Optimizer::adamw_default(),
            loss: LossKind::DiceCe {
                lambda_mix: self.cfg.lambda_mix,
            },
            patience: None,
        };
        let trained = train(start, &ds, None, &tcfg)?;
        self.params = trained.params;
        Ok(())
    }

    fn state_bytes(&self) -> Vec<u8> {
        params_to_bytes(&self.params)
    }

    fn load_state(&mut self, bytes: &[u8]) -> Result<()> {
        self.set_params(params_from_bytes(bytes)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(seed: u64) -> (GrayImage, BinaryMask) {
        let mut rng = Rng::new(seed);
        let x0 = 8 + rng.below(10);
        let m = BinaryMask::from_fn(40, 40, |x, _| (x0..x0 + 8).contains(&x));
        let img = GrayImage::from_fn(40, 40, |x, y| {
            let base = if m.get(x, y) { 0.25 } else { 0.45 };
            base + 0.02 * (((x * 31 + y * 17 + seed as usize) % 7) as f64 - 3.0)
        });
        (img, m)
    }

    fn small_cfg() -> PatchMlpConfig {
        PatchMlpConfig {
            radius: 2,
            hidden: vec![8],
            pixels_per_image: 300,
            ..PatchMlpConfig::default()
        }
    }

    #[test]
    fn parameter_layout_matches_spec_default() {
        assert_eq!(PatchMlpConfig::default().layer_dims(), vec![123, 64, 32, 1]);
    }

    #[test]
    fn learns_dark_groove_and_is_deterministic() {
        let data: Vec<(GrayImage, BinaryMask)> = (0..4).map(toy).collect();
        let pairs: Vec<(&GrayImage, &BinaryMask)> = data.iter().map(|(i, m)| (i, m)).collect();
        let mut a = PatchMlpSegmenter::new(small_cfg()).unwrap();
        a.retrain(&pairs, 15, true).unwrap();
        let (img, gt) = toy(9);
        let p = a.predict(&img).unwrap();
        let iou = crate::metrics::seg_metrics(&p, &gt).unwrap().iou;
        assert!(iou > 0.8, "{iou}");
        assert_eq!(a.predict(&img).unwrap(), p);
        let mut b = PatchMlpSegmenter::new(small_cfg()).unwrap();
        b.retrain(&pairs, 15, true).unwrap();
        assert_eq!(a.state_bytes(), b.state_bytes());
    }

    #[test]
    fn from_initial_ignores_current_state() {
        let data: Vec<(GrayImage, BinaryMask)> = (0..2).map(toy).collect();
        let pairs: Vec<(&GrayImage, &BinaryMask)> = data.iter().map(|(i, m)| (i, m)).collect();
        let mut a = PatchMlpSegmenter::new(small_cfg()).unwrap();
        a.retrain(&pairs, 2, true).unwrap();
        let once = a.state_bytes();
        a.retrain(&pairs, 2, true).unwrap();
        assert_eq!(a.state_bytes(), once);
        a.retrain(&pairs, 2, false).unwrap();
        assert_ne!(a.state_bytes(), once);
    }

    #[test]
    fn empty_curated_set_is_error() {
        let mut a = PatchMlpSegmenter::new(small_cfg()).unwrap();
        assert!(matches!(a.retrain(&[], 1, true), Err(Error::EmptyDataset(_))));
    }

    #[test]
    fn state_round_trip() {
        let mut a = PatchMlpSegmenter::new(small_cfg()).unwrap();
        let data: Vec<(GrayImage, BinaryMask)> = (0..2).map(toy).collect();
        let pairs: Vec<(&GrayImage, &BinaryMask)> = data.iter().map(|(i, m)| (i, m)).collect();
        a.retrain(&pairs, 1, true).unwrap();
        let mut b = PatchMlpSegmenter::new(small_cfg()).unwrap();
        b.load_state(&a.state_bytes()).unwrap();
        assert_eq!(b.params(), a.params());
    }
}
