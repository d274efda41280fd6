use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::pattern::Polyline;
use super::render::{gen_sample, EdgeTruth, SynthSample};
use super::spec::{Pattern, SynthSpec};
use crate::error::{Error, Result};
use crate::imgcore::{load_image, load_mask, save_image, save_mask, BinaryMask, GrayImage};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stratum {
    Easy,
    Medium,
    Hard,
    Extreme,
}

impl Stratum {
    pub const ALL: [Stratum; 4] = [Stratum::Easy, Stratum::Medium, Stratum::Hard, Stratum::Extreme];

    pub fn as_str(self) -> &'static str {
        match self {
            Stratum::Easy => "easy",
            Stratum::Medium => "medium",
            Stratum::Hard => "hard",
            Stratum::Extreme => "extreme",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StratumCounts {
    pub easy: usize,
    pub medium: usize,
    pub hard: usize,
    pub extreme: usize,
}

impl Default for StratumCounts {
    fn default() -> Self {
        Self {
            easy: 50,
            medium: 10,
            hard: 10,
            extreme: 10,
        }
    }
}

impl StratumCounts {
    pub fn get(&self, s: Stratum) -> usize {
        match s {
            Stratum::Easy => self.easy,
            Stratum::Medium => self.medium,
            Stratum::Hard => self.hard,
            Stratum::Extreme => self.extreme,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusConfig {
    pub template: SynthSpec,
    pub train: usize,
    pub val: usize,
    pub test: StratumCounts,
    pub seed_base: u64,
    /// Orientations cycled through the easy family.
    pub orientations: Vec<f64>,
    pub medium_pitch_scale: f64,
    pub medium_width_scale: f64,
    pub extreme_bias: f64,
    pub extreme_defocus: f64,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        Self {
            template: SynthSpec::default(),
            train: 60,
            val: 10,
            test: StratumCounts::default(),
            seed_base: 1000,
            orientations: vec![90.0, 0.0],
            medium_pitch_scale: 1.25,
            medium_width_scale: 1.3,
            extreme_bias: 2.0,
            extreme_defocus: 1.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusEntry {
    pub id: String,
    pub split: Split,
    pub stratum: Stratum,
    pub spec: SynthSpec,
}

impl CorpusEntry {
    pub fn dir(&self, root: &Path) -> PathBuf {
        root.join(self.split.as_str()).join(&self.id)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub version: u32,
    pub config: CorpusConfig,
    pub entries: Vec<CorpusEntry>,
}

impl CorpusManifest {
    pub fn entries_in(&self, split: Split) -> impl Iterator<Item = &CorpusEntry> {
        self.entries.iter().filter(move |e| e.split == split)
    }

    pub fn test_stratum(&self, stratum: Stratum) -> impl Iterator<Item = &CorpusEntry> {
        self.entries
            .iter()
            .filter(move |e| e.split == Split::Test && e.stratum == stratum)
    }
}

/// Spec of the `k`-th sample of a stratum.
pub fn stratum_spec(cfg: &CorpusConfig, stratum: Stratum, k: usize, seed: u64) -> SynthSpec {
    let t = &cfg.template;
    let orientation = if cfg.orientations.is_empty() {
        t.orientation
    } else {
        cfg.orientations[k % cfg.orientations.len()]
    };
    let mut s = SynthSpec {
        orientation,
        seed,
        ..t.clone()
    };
    match stratum {
        Stratum::Easy => {}
        Stratum::Medium => {
            s.pitch = t.pitch * cfg.medium_pitch_scale;
            s.line_width = t.line_width * cfg.medium_width_scale;
        }
        Stratum::Hard => {
            s.pattern = match t.pattern {
                Pattern::ParallelLines => [Pattern::Elbows, Pattern::Serpentine][k % 2],
                Pattern::Elbows => Pattern::Serpentine,
                Pattern::Serpentine => Pattern::Elbows,
            };
        }
        Stratum::Extreme => {
            s.process_bias = cfg.extreme_bias;
            s.defocus_extra_blur = cfg.extreme_defocus;
        }
    }
    s
}

/// Deterministic corpus plan; seeds are `seed_base + global index`.
pub fn plan_corpus(cfg: &CorpusConfig) -> Result<Vec<CorpusEntry>> {
    let mut entries = Vec::new();
    let mut index = 0u64;
    let mut push = |split: Split, stratum: Stratum, k: usize, entries: &mut Vec<CorpusEntry>| {
        let spec = stratum_spec(cfg, stratum, k, cfg.seed_base + index);
        index += 1;
        let id = match split {
            Split::Test => format!("{}-{k:04}", stratum.as_str()),
            _ => format!("{}-{k:04}", split.as_str()),
        };
        entries.push(CorpusEntry { id, split, stratum, spec });
    };
    for k in 0..cfg.train {
        push(Split::Train, Stratum::Easy, k, &mut entries);
    }
    for k in 0..cfg.val {
        push(Split::Val, Stratum::Easy, k, &mut entries);
    }
    for stratum in Stratum::ALL {
        for k in 0..cfg.test.get(stratum) {
            push(Split::Test, stratum, k, &mut entries);
        }
    }
    if entries.is_empty() {
        return Err(Error::config("count", "corpus must contain at least one sample"));
    }
    for e in &entries {
        e.spec.validate().map_err(|err| match err {
            Error::Config { field, reason } => Error::Config {
                field,
                reason: format!("{} ({}): {reason}", e.id, e.stratum.as_str()),
            },
            other => other,
        })?;
    }
    Ok(entries)
}

#[derive(Debug, Serialize, Deserialize)]
struct EdgesFile {
    lines: Vec<Polyline>,
    edges: Vec<EdgeTruth>,
}

fn write_sample(dir: &Path, sample: &SynthSample) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    save_mask(&sample.layout, dir.join("layout.png"))?;
    save_image(&sample.sem, dir.join("sem.png"))?;
    save_mask(&sample.gt_mask, dir.join("gt.png"))?;
    let edges = EdgesFile {
        lines: sample.lines.clone(),
        edges: sample.edges.clone(),
    };
    let path = dir.join("edges.json");
    let text = serde_json::to_string(&edges).map_err(|e| Error::Json {
        path: path.clone(),
        source: e,
    })?;
    fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

pub fn write_manifest(root: &Path, manifest: &CorpusManifest) -> Result<()> {
    let path = root.join("manifest.json");
    let text = serde_json::to_string_pretty(manifest).map_err(|e| Error::Json {
        path: path.clone(),
        source: e,
    })?;
    fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

pub fn read_manifest(root: &Path) -> Result<CorpusManifest> {
    let path = root.join("manifest.json");
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Json { path, source: e })
}

/// Generate every planned sample under `root` and write `manifest.json`.
pub fn gen_corpus(cfg: &CorpusConfig, root: &Path) -> Result<CorpusManifest> {
    let entries = plan_corpus(cfg)?;
    fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
    entries.par_iter().try_for_each(|e| -> Result<()> {
        let sample = gen_sample(&e.spec)?;
        write_sample(&e.dir(root), &sample)
    })?;
    let manifest = CorpusManifest {
        version: 1,
        config: cfg.clone(),
        entries,
    };
    write_manifest(root, &manifest)?;
    Ok(manifest)
}

/// Rasters of one sample as stored on disk.
#[derive(Debug, Clone)]
pub struct LoadedSample {
    pub id: String,
    pub split: Split,
    pub stratum: Stratum,
    pub sem: GrayImage,
    pub layout: BinaryMask,
    pub gt: BinaryMask,
}

pub fn load_sample(root: &Path, entry: &CorpusEntry) -> Result<LoadedSample> {
    let dir = entry.dir(root);
    Ok(LoadedSample {
        id: entry.id.clone(),
        split: entry.split,
        stratum: entry.stratum,
        sem: load_image(dir.join("sem.png"))?,
        layout: load_mask(dir.join("layout.png"))?,
        gt: load_mask(dir.join("gt.png"))?,
    })
}

/// The same rasters without touching disk, regenerated from the spec. The SEM
/// is quantized to 8 bits exactly as a saved file would be.
pub fn sample_in_memory(entry: &CorpusEntry) -> Result<LoadedSample> {
    let s = gen_sample(&entry.spec)?;
    let sem = GrayImage::from_fn(s.sem.width(), s.sem.height(), |x, y| {
        f64::from(crate::imgcore::io::intensity_to_byte(s.sem.get(x, y))) / 255.0
    });
    Ok(LoadedSample {
        id: entry.id.clone(),
        split: entry.split,
        stratum: entry.stratum,
        sem,
        layout: s.layout,
        gt: s.gt_mask,
    })
}
