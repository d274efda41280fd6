use std::fs;
use std::path::PathBuf;
use std::time::Instant;

use lithoseg_core::coarse::{BootstrapConfig, CurationMode, Segmenter};
use lithoseg_core::fine::RefineConfig;
use lithoseg_core::imgcore::BinaryMask;
use lithoseg_core::metrics::{format_table, CorpusMeans};
use lithoseg_core::nnet::{load_params, MlpParams};
use lithoseg_core::synthgen::{LoadedSample, Split, Stratum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{require, CliError, CliResult};
use crate::manifest::{Run, Stage};
use crate::pipeline::{
    bootstrap_segmenter, coarse_weights_path, corpus_manifest, evaluate_masks, fine_weights_path, fit_fine,
    load_entries, read_json, refine_all, run_stage, test_pairs, train_pairs, Outcome,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Ablation {
    Center,
    Angle,
    Scan,
    Noise,
}

impl Ablation {
    pub const ALL: [Ablation; 4] = [Ablation::Center, Ablation::Angle, Ablation::Scan, Ablation::Noise];

    pub fn name(self) -> &'static str {
        match self {
            Ablation::Center => "center",
            Ablation::Angle => "angle",
            Ablation::Scan => "scan",
            Ablation::Noise => "noise",
        }
    }

    pub fn stage(self) -> Stage {
        match self {
            Ablation::Center => Stage::AblateCenter,
            Ablation::Angle => Stage::AblateAngle,
            Ablation::Scan => Stage::AblateScan,
            Ablation::Noise => Stage::AblateNoise,
        }
    }
}

impl std::str::FromStr for Ablation {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        Ablation::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| CliError::config(format!("unknown ablation `{s}`; expected one of center, angle, scan, noise")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub setting: String,
    pub means: CorpusMeans,
    pub abs: CorpusMeans,
    pub seconds: f64,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub which: Ablation,
    /// Images the rows are measured on.
    pub split: String,
    pub rows: Vec<AblationRow>,
}

impl AblationReport {
    pub fn row(&self, setting: &str) -> Option<&AblationRow> {
        self.rows.iter().find(|r| r.setting == setting)
    }

    pub fn render(&self) -> String {
        let signed: Vec<(&str, &CorpusMeans)> = self.rows.iter().map(|r| (r.setting.as_str(), &r.means)).collect();
        let abs: Vec<(String, &CorpusMeans)> = self.rows.iter().map(|r| (format!("{} |err|", r.setting), &r.abs)).collect();
        let abs: Vec<(&str, &CorpusMeans)> = abs.iter().map(|(l, m)| (l.as_str(), *m)).collect();
        let mut out = format!("ablation {} on {}\n", self.which.name(), self.split);
        out.push_str(&format_table(&signed));
        out.push('\n');
        out.push_str(&format_table(&abs));
        for r in &self.rows {
            if let Some(n) = &r.note {
                out.push_str(&format!("\n{}: {n}", r.setting));
            }
        }
        out.push('\n');
        out
    }
}

pub const ALIGNED: &str = "aligned";
pub const NO_ALIGN_RETRAINED: &str = "no alignment (retrained)";
pub const NO_ALIGN_INFERENCE: &str = "no alignment (inference only)";

pub fn angle_setting(deg: f64) -> String {
    format!("perturbation {deg} deg")
}

pub fn matched_setting() -> String {
    "matched".to_string()
}

pub fn scan_setting(factor: f64) -> String {
    format!("x{factor}")
}

pub fn noise_setting(rate: f64) -> String {
    format!("noise {}%", (rate * 100.0).round())
}

pub fn report_path(run: &Run, which: Ablation) -> PathBuf {
    run.stage_dir(which.stage()).join("report.json")
}

pub fn read_ablation(run: &Run, which: Ablation) -> CliResult<AblationReport> {
    read_json(&report_path(run, which))
}

/// Raw scan size scaled by `factor`, before the odd rule.
pub fn scaled_scan(cfg: &RefineConfig, factor: f64) -> CliResult<RefineConfig> {
    let base = match cfg.s_scan {
        Some(s) => s as f64,
        None => cfg.scan_size()? as f64,
    };
    let s = ((base * factor).round() as usize).max(3);
    Ok(RefineConfig {
        s_scan: Some(s),
        geometry: None,
        t_max: None,
        center_window: None,
        ..*cfg
    })
}

struct EvalSet {
    samples: Vec<LoadedSample>,
    coarse: Vec<BinaryMask>,
}

fn easy_set(run: &Run) -> CliResult<EvalSet> {
    let (samples, coarse) = test_pairs(run, |e| e.stratum == Stratum::Easy)?;
    if samples.is_empty() {
        return Err(CliError::config("corpus.test.easy: ablations need at least one easy test image"));
    }
    Ok(EvalSet { samples, coarse })
}

fn refine_row(run: &Run, set: &EvalSet, setting: String, params: &MlpParams, cfg: &RefineConfig, t0: Instant) -> CliResult<AblationRow> {
    let refined: Vec<BinaryMask> = refine_all(&set.samples, &set.coarse, params, cfg)?
        .into_iter()
        .map(|(m, _)| m)
        .collect();
    let s = evaluate_masks(&set.samples, &refined, &run.config().eval);
    Ok(AblationRow {
        setting,
        means: s.corpus,
        abs: s.corpus_abs,
        seconds: t0.elapsed().as_secs_f64(),
        note: None,
    })
}

fn run_params(run: &Run) -> CliResult<MlpParams> {
    Ok(load_params(require(fine_weights_path(run))?)?)
}

fn ablate_center(run: &Run) -> CliResult<AblationReport> {
    let set = easy_set(run)?;
    let params = run_params(run)?;
    let rcfg = run.config().refine;
    let mut rows = vec![refine_row(run, &set, ALIGNED.into(), &params, &rcfg, Instant::now())?];
    let t0 = Instant::now();
    let off = RefineConfig { align: false, ..rcfg };
    let (train, masks) = train_pairs(run)?;
    let (p, _) = fit_fine(&train, &masks, &off, &run.config().fine_train)?;
    rows.push(refine_row(run, &set, NO_ALIGN_RETRAINED.into(), &p, &off, t0)?);
    rows.push(refine_row(run, &set, NO_ALIGN_INFERENCE.into(), &params, &off, Instant::now())?);
    Ok(AblationReport {
        which: Ablation::Center,
        split: "test/easy".into(),
        rows,
    })
}

fn ablate_angle(run: &Run) -> CliResult<AblationReport> {
    let set = easy_set(run)?;
    let params = run_params(run)?;
    let rcfg = run.config().refine;
    let rows = run
        .config()
        .ablation
        .angles_deg
        .iter()
        .map(|&a| {
            let cfg = RefineConfig {
                normal_perturbation_deg: a,
                ..rcfg
            };
            refine_row(run, &set, angle_setting(a), &params, &cfg, Instant::now())
        })
        .collect::<CliResult<Vec<_>>>()?;
    Ok(AblationReport {
        which: Ablation::Angle,
        split: "test/easy".into(),
        rows,
    })
}

fn ablate_scan(run: &Run) -> CliResult<AblationReport> {
    let set = easy_set(run)?;
    let params = run_params(run)?;
    let rcfg = run.config().refine;
    let mut matched = refine_row(run, &set, matched_setting(), &params, &rcfg, Instant::now())?;
    matched.note = Some(format!("s_scan {}", rcfg.scan_size()?));
    let mut rows = vec![matched];
    let (train, masks) = train_pairs(run)?;
    for &f in &run.config().ablation.scan_factors {
        let t0 = Instant::now();
        let cfg = scaled_scan(&rcfg, f)?;
        let (p, _) = fit_fine(&train, &masks, &cfg, &run.config().fine_train)?;
        let mut row = refine_row(run, &set, scan_setting(f), &p, &cfg, t0)?;
        row.note = Some(format!("s_scan {}", cfg.scan_size()?));
        rows.push(row);
    }
    Ok(AblationReport {
        which: Ablation::Scan,
        split: "test/easy".into(),
        rows,
    })
}

/// Coarse-stage test IoU after bootstrapping with flipped curation decisions.
fn ablate_noise(run: &Run) -> CliResult<AblationReport> {
    let cfg = run.config().clone();
    if !matches!(cfg.bootstrap.curation, CurationMode::Oracle { .. }) {
        return Err(CliError::config("bootstrap.curation: the noise ablation needs oracle curation"));
    }
    let corpus = corpus_manifest(run)?;
    let root = run.corpus_dir();
    let train_entries: Vec<_> = corpus.entries_in(Split::Train).collect();
    let train = load_entries(&root, &train_entries)?;
    let test_entries: Vec<_> = corpus.entries_in(Split::Test).collect();
    let test = load_entries(&root, &test_entries)?;
    let mut rows = Vec::new();
    for &rate in &cfg.ablation.noise_rates {
        let t0 = Instant::now();
        let bcfg = BootstrapConfig {
            noise_injection_rate: rate,
            ..cfg.bootstrap.clone()
        };
        let dir = run.stage_dir(Stage::AblateNoise).join(format!("rate-{:02}", (rate * 100.0).round() as u32));
        let reuse = rate == cfg.bootstrap.noise_injection_rate && coarse_weights_path(run).is_file();
        let (seg, note) = if reuse {
            let mut seg = lithoseg_core::coarse::PatchMlpSegmenter::new(cfg.patch_mlp.clone())?;
            seg.load_state(&fs::read(coarse_weights_path(run))?)?;
            let rep: lithoseg_core::coarse::BootstrapReport = read_json(&run.stage_dir(Stage::Bootstrap).join("report.json"))?;
            (seg, format!("accepted {:?} (run coarse stage)", rep.accepted_counts()))
        } else {
            if dir.exists() {
                fs::remove_dir_all(&dir)?;
            }
            fs::create_dir_all(&dir)?;
            let (seg, rep) = bootstrap_segmenter(&train, &cfg.patch_mlp, &bcfg, Some(&dir))?;
            (seg, format!("accepted {:?}", rep.accepted_counts()))
        };
        let masks: Vec<BinaryMask> = test
            .par_iter()
            .map(|s| seg.predict(&s.sem).map_err(CliError::from))
            .collect::<CliResult<_>>()?;
        let s = evaluate_masks(&test, &masks, &cfg.eval);
        rows.push(AblationRow {
            setting: noise_setting(rate),
            means: s.corpus,
            abs: s.corpus_abs,
            seconds: t0.elapsed().as_secs_f64(),
            note: Some(note),
        });
    }
    Ok(AblationReport {
        which: Ablation::Noise,
        split: "test (coarse masks)".into(),
        rows,
    })
}

pub fn cmd_ablate(run: &mut Run, which: Ablation, force: bool) -> CliResult<Outcome> {
    run_stage(run, which.stage(), force, |run| {
        let report = match which {
            Ablation::Center => ablate_center(run)?,
            Ablation::Angle => ablate_angle(run)?,
            Ablation::Scan => ablate_scan(run)?,
            Ablation::Noise => ablate_noise(run)?,
        };
        let dir = run.stage_dir(which.stage());
        fs::create_dir_all(&dir)?;
        let p = report_path(run, which);
        let bytes = serde_json::to_vec_pretty(&report).map_err(|e| CliError::Internal(e.to_string()))?;
        fs::write(&p, bytes)?;
        let text = report.render();
        fs::write(dir.join("table.txt"), &text)?;
        println!("{text}");
        run.add_artifact(which.stage(), &p);
        Ok(Outcome::Done)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_parse() {
        for a in Ablation::ALL {
            assert_eq!(a.name().parse::<Ablation>().unwrap(), a);
        }
        assert_eq!("bogus".parse::<Ablation>().unwrap_err().exit_code(), 2);
    }

    #[test]
    fn scan_grid_from_default() {
        let c = RefineConfig::default();
        assert_eq!(scaled_scan(&c, 0.66).unwrap().scan_size().unwrap(), 21);
        assert_eq!(scaled_scan(&c, 2.0).unwrap().scan_size().unwrap(), 61);
        assert_eq!(scaled_scan(&c, 1.0).unwrap().scan_size().unwrap(), 31);
    }

    #[test]
    fn setting_labels() {
        assert_eq!(noise_setting(0.3), "noise 30%");
        assert_eq!(angle_setting(2.0), "perturbation 2 deg");
        assert_eq!(scan_setting(0.66), "x0.66");
    }
}
