use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use lithoseg_core::coarse::{bootstrap_run, BootstrapConfig, BootstrapItem, BootstrapReport, PatchMlpSegmenter, Segmenter};
use lithoseg_core::fine::{build_training_set, refine_mask, train_fine, FineTrainConfig, RefineConfig, TrainingSetStats};
use lithoseg_core::imgcore::{load_mask, save_mask, BinaryMask};
use lithoseg_core::metrics::{evaluate_pairs, format_table, write_report, CorpusMeans, EvalConfig, EvalSummary};
use lithoseg_core::nnet::{load_params, save_params, MlpParams, TrainReport};
use lithoseg_core::synthgen::{gen_corpus, load_sample, read_manifest, CorpusEntry, CorpusManifest, LoadedSample, Split, Stratum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{require, CliError, CliResult};
use crate::manifest::{Run, Stage, StageStatus};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    Done,
    AwaitingCuration(String),
    AlreadyDone,
}

/// Run `body` as `stage`, keeping the manifest status in step. A finished
/// stage is skipped unless `force`.
pub fn run_stage<F>(run: &mut Run, stage: Stage, force: bool, body: F) -> CliResult<Outcome>
where
    F: FnOnce(&mut Run) -> CliResult<Outcome>,
{
    if run.status(stage) == StageStatus::Done && !force {
        log::info!("{} already done; pass --force to rerun", stage.name());
        return Ok(Outcome::AlreadyDone);
    }
    run.set_status(stage, StageStatus::Running, None)?;
    match body(run) {
        Ok(Outcome::AwaitingCuration(msg)) => {
            run.set_status(stage, StageStatus::AwaitingCuration, Some(msg.clone()))?;
            Ok(Outcome::AwaitingCuration(msg))
        }
        Ok(o) => {
            run.set_status(stage, StageStatus::Done, None)?;
            Ok(o)
        }
        Err(e) => {
            let _ = run.set_status(stage, StageStatus::Failed, Some(e.to_string()));
            Err(e)
        }
    }
}

pub fn corpus_manifest(run: &Run) -> CliResult<CorpusManifest> {
    let root = run.corpus_dir();
    require(root.join("manifest.json"))?;
    Ok(read_manifest(&root)?)
}

pub fn load_entries(root: &Path, entries: &[&CorpusEntry]) -> CliResult<Vec<LoadedSample>> {
    entries
        .par_iter()
        .map(|e| load_sample(root, e).map_err(CliError::from))
        .collect()
}

pub fn coarse_mask_path(run: &Run, split: Split, id: &str) -> PathBuf {
    run.stage_dir(Stage::Bootstrap)
        .join("masks")
        .join(split.as_str())
        .join(format!("{id}.png"))
}

pub fn refined_mask_path(run: &Run, id: &str) -> PathBuf {
    run.stage_dir(Stage::Refine).join("masks").join(format!("{id}.png"))
}

pub fn fine_weights_path(run: &Run) -> PathBuf {
    run.stage_dir(Stage::FineTrain).join("weights.lsnn")
}

pub fn coarse_weights_path(run: &Run) -> PathBuf {
    run.stage_dir(Stage::Bootstrap).join("weights.lsnn")
}

fn load_masks(paths: &[PathBuf]) -> CliResult<Vec<BinaryMask>> {
    for p in paths {
        require(p)?;
    }
    paths.par_iter().map(|p| load_mask(p).map_err(CliError::from)).collect()
}

fn write_json<T: Serialize>(path: &Path, v: &T) -> CliResult<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let bytes = serde_json::to_vec_pretty(v).map_err(|e| CliError::Internal(e.to_string()))?;
    fs::write(path, bytes)?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<T> {
    let bytes = fs::read(require(path)?)?;
    serde_json::from_slice(&bytes).map_err(|e| CliError::Internal(format!("{}: {e}", path.display())))
}

fn clear_dir(dir: &Path) -> CliResult<()> {
    if dir.exists() {
        fs::remove_dir_all(dir)?;
    }
    Ok(())
}

pub fn cmd_synth(run: &mut Run, out: Option<&Path>, force: bool) -> CliResult<Outcome> {
    if let Some(o) = out {
        run.manifest.corpus_dir = std::path::absolute(o)?;
        run.save()?;
    }
    run_stage(run, Stage::Synth, force, |run| {
        let root = run.corpus_dir();
        if force && root.join("manifest.json").is_file() {
            clear_dir(&root)?;
        }
        let m = gen_corpus(&run.config().corpus, &root)?;
        log::info!("wrote {} samples to {}", m.entries.len(), root.display());
        run.add_artifact(Stage::Synth, &root.join("manifest.json"));
        Ok(Outcome::Done)
    })
}

/// Coarse stage: bootstrap the patch segmenter on the train split, then
/// predict a coarse mask for every corpus image.
pub fn cmd_bootstrap(run: &mut Run, corpus: Option<&Path>, force: bool) -> CliResult<Outcome> {
    if let Some(c) = corpus {
        run.manifest.corpus_dir = std::path::absolute(c)?;
        run.save()?;
    }
    run_stage(run, Stage::Bootstrap, force, |run| {
        let corpus = corpus_manifest(run)?;
        let root = run.corpus_dir();
        let dir = run.stage_dir(Stage::Bootstrap);
        if force {
            clear_dir(&dir)?;
        }
        fs::create_dir_all(&dir)?;
        let train: Vec<&CorpusEntry> = corpus.entries_in(Split::Train).collect();
        let samples = load_entries(&root, &train)?;
        let cfg = run.config().clone();
        let (seg, report) = bootstrap_segmenter(&samples, &cfg.patch_mlp, &cfg.bootstrap, Some(&dir))?;
        let report_path = dir.join("report.json");
        write_json(&report_path, &report)?;
        run.add_artifact(Stage::Bootstrap, &report_path);
        if let Some(it) = report.awaiting() {
            let msg = format!("iteration {} awaits curation: {:?}", it.iteration, it.status);
            log::info!("{msg}");
            return Ok(Outcome::AwaitingCuration(msg));
        }
        let w = coarse_weights_path(run);
        fs::write(&w, seg.state_bytes())?;
        run.add_artifact(Stage::Bootstrap, &w);
        let all: Vec<&CorpusEntry> = corpus.entries.iter().collect();
        for chunk in all.chunks(32) {
            let samples = load_entries(&root, chunk)?;
            let masks: Vec<BinaryMask> = samples
                .par_iter()
                .map(|s| seg.predict(&s.sem).map_err(CliError::from))
                .collect::<CliResult<_>>()?;
            for (s, m) in samples.iter().zip(&masks) {
                let p = coarse_mask_path(run, s.split, &s.id);
                fs::create_dir_all(p.parent().expect("mask path has a parent"))?;
                save_mask(m, &p)?;
            }
        }
        run.add_artifact(Stage::Bootstrap, &dir.join("masks"));
        log::info!("bootstrap accepted counts {:?}", report.accepted_counts());
        Ok(Outcome::Done)
    })
}

/// Build the patch segmenter from `cfg` and run the bootstrap loop on `samples`.
pub fn bootstrap_segmenter(
    samples: &[LoadedSample],
    patch: &lithoseg_core::coarse::PatchMlpConfig,
    cfg: &BootstrapConfig,
    dir: Option<&Path>,
) -> CliResult<(PatchMlpSegmenter, BootstrapReport)> {
    let items: Vec<BootstrapItem> = samples
        .iter()
        .map(|s| BootstrapItem {
            id: s.id.clone(),
            sem: s.sem.clone(),
            layout: s.layout.clone(),
            gt: Some(s.gt.clone()),
        })
        .collect();
    let mut seg = PatchMlpSegmenter::new(patch.clone())?;
    let report = bootstrap_run(&items, &mut seg, cfg, dir)?;
    Ok((seg, report))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FineTrainSummary {
    pub stats: TrainingSetStats,
    pub layer_dims: Vec<usize>,
    pub param_count: usize,
    pub report: TrainReport,
}

/// Train samples with their coarse masks, in corpus order.
pub fn train_pairs(run: &Run) -> CliResult<(Vec<LoadedSample>, Vec<BinaryMask>)> {
    let corpus = corpus_manifest(run)?;
    let train: Vec<&CorpusEntry> = corpus.entries_in(Split::Train).collect();
    let paths: Vec<PathBuf> = train.iter().map(|e| coarse_mask_path(run, Split::Train, &e.id)).collect();
    let masks = load_masks(&paths)?;
    Ok((load_entries(&run.corpus_dir(), &train)?, masks))
}

/// Fit the displacement regressor on coarse contours of the train split.
pub fn fit_fine(
    samples: &[LoadedSample],
    coarse: &[BinaryMask],
    rcfg: &RefineConfig,
    tcfg: &FineTrainConfig,
) -> CliResult<(MlpParams, FineTrainSummary)> {
    let triples: Vec<_> = samples.iter().zip(coarse).map(|(s, m)| (&s.sem, m, &s.gt)).collect();
    let (data, stats) = build_training_set(&triples, rcfg, tcfg.max_profiles, tcfg.sample_seed)?;
    log::info!("fine training set: {stats:?}");
    let trained = train_fine(&data, rcfg, tcfg)?;
    let summary = FineTrainSummary {
        stats,
        layer_dims: trained.params.layer_dims().to_vec(),
        param_count: trained.params.param_count(),
        report: trained.report,
    };
    Ok((trained.params, summary))
}

pub fn cmd_fine_train(run: &mut Run, force: bool) -> CliResult<Outcome> {
    run_stage(run, Stage::FineTrain, force, |run| {
        require(coarse_weights_path(run))?;
        let (samples, masks) = train_pairs(run)?;
        let cfg = run.config().clone();
        let (params, summary) = fit_fine(&samples, &masks, &cfg.refine, &cfg.fine_train)?;
        let dir = run.stage_dir(Stage::FineTrain);
        fs::create_dir_all(&dir)?;
        let w = fine_weights_path(run);
        save_params(&params, &w)?;
        let r = dir.join("report.json");
        write_json(&r, &summary)?;
        run.add_artifact(Stage::FineTrain, &w);
        run.add_artifact(Stage::FineTrain, &r);
        Ok(Outcome::Done)
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefineImageReport {
    pub id: String,
    pub components: usize,
    pub self_intersecting: usize,
    pub reverted: usize,
}

/// Test samples matching `filter`, with their coarse masks.
pub fn test_pairs(run: &Run, filter: impl Fn(&CorpusEntry) -> bool) -> CliResult<(Vec<LoadedSample>, Vec<BinaryMask>)> {
    let corpus = corpus_manifest(run)?;
    let test: Vec<&CorpusEntry> = corpus.entries_in(Split::Test).filter(|e| filter(e)).collect();
    let paths: Vec<PathBuf> = test.iter().map(|e| coarse_mask_path(run, Split::Test, &e.id)).collect();
    let masks = load_masks(&paths)?;
    Ok((load_entries(&run.corpus_dir(), &test)?, masks))
}

pub fn refine_all(
    samples: &[LoadedSample],
    coarse: &[BinaryMask],
    params: &MlpParams,
    cfg: &RefineConfig,
) -> CliResult<Vec<(BinaryMask, RefineImageReport)>> {
    samples
        .par_iter()
        .zip(coarse)
        .map(|(s, m)| {
            let out = refine_mask(m, &s.sem, params, cfg)?;
            let rep = RefineImageReport {
                id: s.id.clone(),
                components: out.contours.len(),
                self_intersecting: out.self_intersecting,
                reverted: out.reverted,
            };
            Ok((out.mask, rep))
        })
        .collect()
}

pub fn cmd_refine(run: &mut Run, force: bool) -> CliResult<Outcome> {
    run_stage(run, Stage::Refine, force, |run| {
        let params = load_params(require(fine_weights_path(run))?)?;
        let (samples, coarse) = test_pairs(run, |_| true)?;
        let dir = run.stage_dir(Stage::Refine);
        if force {
            clear_dir(&dir)?;
        }
        fs::create_dir_all(dir.join("masks"))?;
        let refined = refine_all(&samples, &coarse, &params, &run.config().refine)?;
        for (s, (m, _)) in samples.iter().zip(&refined) {
            save_mask(m, refined_mask_path(run, &s.id))?;
        }
        let reports: Vec<RefineImageReport> = refined.into_iter().map(|(_, r)| r).collect();
        let r = dir.join("report.json");
        write_json(&r, &reports)?;
        run.add_artifact(Stage::Refine, &dir.join("masks"));
        run.add_artifact(Stage::Refine, &r);
        Ok(Outcome::Done)
    })
}

pub fn evaluate_masks(samples: &[LoadedSample], masks: &[BinaryMask], cfg: &EvalConfig) -> EvalSummary {
    let pairs: Vec<(String, BinaryMask, BinaryMask)> = samples
        .iter()
        .zip(masks)
        .map(|(s, m)| (s.id.clone(), m.clone(), s.gt.clone()))
        .collect();
    evaluate_pairs(&pairs, cfg)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MethodMeans {
    pub signed: CorpusMeans,
    pub abs: CorpusMeans,
}

/// Coarse and refined means per stratum and over the whole test split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalTable {
    pub groups: BTreeMap<String, BTreeMap<String, MethodMeans>>,
}

impl EvalTable {
    pub fn get(&self, group: &str, method: &str) -> Option<&MethodMeans> {
        self.groups.get(group).and_then(|g| g.get(method))
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (group, methods) in &self.groups {
            out.push_str(&format!("[{group}]\n"));
            let rows: Vec<(String, &CorpusMeans)> = methods
                .iter()
                .flat_map(|(m, v)| [(m.clone(), &v.signed), (format!("{m} |err|"), &v.abs)])
                .collect();
            let refs: Vec<(&str, &CorpusMeans)> = rows.iter().map(|(l, v)| (l.as_str(), *v)).collect();
            out.push_str(&format_table(&refs));
            out.push('\n');
        }
        out
    }
}

pub fn eval_table_path(run: &Run) -> PathBuf {
    run.stage_dir(Stage::Eval).join("summary.json")
}

pub fn cmd_eval(run: &mut Run, force: bool) -> CliResult<Outcome> {
    run_stage(run, Stage::Eval, force, |run| {
        let (samples, coarse) = test_pairs(run, |_| true)?;
        let paths: Vec<PathBuf> = samples.iter().map(|s| refined_mask_path(run, &s.id)).collect();
        let refined = load_masks(&paths)?;
        let cfg = run.config().eval;
        let dir = run.stage_dir(Stage::Eval);
        let mut table = EvalTable { groups: BTreeMap::new() };
        let mut groups: Vec<(String, Vec<usize>)> = vec![("all".into(), (0..samples.len()).collect())];
        for st in Stratum::ALL {
            let idx: Vec<usize> = (0..samples.len()).filter(|&i| samples[i].stratum == st).collect();
            if !idx.is_empty() {
                groups.push((st.as_str().to_string(), idx));
            }
        }
        for (name, idx) in &groups {
            let s: Vec<LoadedSample> = idx.iter().map(|&i| samples[i].clone()).collect();
            let mut methods = BTreeMap::new();
            for (label, masks) in [("coarse", &coarse), ("refined", &refined)] {
                let m: Vec<BinaryMask> = idx.iter().map(|&i| masks[i].clone()).collect();
                let summary = evaluate_masks(&s, &m, &cfg);
                write_report(&summary, &dir.join(name).join(label), &format!("{label} {name}"))?;
                methods.insert(
                    label.to_string(),
                    MethodMeans {
                        signed: summary.corpus,
                        abs: summary.corpus_abs,
                    },
                );
            }
            table.groups.insert(name.clone(), methods);
        }
        let text = table.render();
        println!("{text}");
        fs::write(dir.join("table.txt"), &text)?;
        let p = eval_table_path(run);
        write_json(&p, &table)?;
        run.add_artifact(Stage::Eval, &p);
        run.add_artifact(Stage::Eval, &dir.join("table.txt"));
        Ok(Outcome::Done)
    })
}
