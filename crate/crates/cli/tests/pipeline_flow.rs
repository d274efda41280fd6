mod common;

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use common::small_run;
use lithoseg_cli::pipeline::{eval_table_path, read_json, test_pairs};
use lithoseg_cli::{
    cmd_bootstrap, cmd_eval, cmd_fine_train, cmd_refine, cmd_synth, EvalTable, Outcome, Run, Stage, StageStatus,
};
use lithoseg_core::fine::{fine_layer_dims, refine_mask, RefineConfig};
use lithoseg_core::metrics::seg_metrics;
use lithoseg_core::nnet::{Activation, MlpParams};
use lithoseg_core::synthgen::{read_manifest, Split, Stratum};

fn tree_bytes(root: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap().flatten() {
            let p = e.path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(root).unwrap().display().to_string(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn synth_is_deterministic_and_covers_every_stratum() {
    let d = tempfile::tempdir().unwrap();
    let mut a = small_run(&d.path().join("a"), "");
    let mut b = small_run(&d.path().join("b"), "");
    cmd_synth(&mut a, None, false).unwrap();
    cmd_synth(&mut b, None, false).unwrap();
    let (ta, tb) = (tree_bytes(&a.corpus_dir()), tree_bytes(&b.corpus_dir()));
    assert!(!ta.is_empty());
    assert!(ta == tb, "corpora differ");
    let m = read_manifest(&a.corpus_dir()).unwrap();
    let strata: BTreeSet<_> = m.entries_in(Split::Test).map(|e| e.stratum.as_str()).collect();
    let all: BTreeSet<_> = [Stratum::Easy, Stratum::Medium, Stratum::Hard, Stratum::Extreme]
        .iter()
        .map(|s| s.as_str())
        .collect();
    assert_eq!(strata, all);
    assert_eq!(m.entries_in(Split::Train).count(), 4);
}

#[test]
fn done_stages_are_skipped_unless_forced() {
    let d = tempfile::tempdir().unwrap();
    let mut run = small_run(d.path(), "");
    assert_eq!(cmd_synth(&mut run, None, false).unwrap(), Outcome::Done);
    let stamp = run.manifest.stages[&Stage::Synth].updated.clone();
    let before = tree_bytes(&run.corpus_dir());
    assert_eq!(cmd_synth(&mut run, None, false).unwrap(), Outcome::AlreadyDone);
    assert_eq!(run.manifest.stages[&Stage::Synth].updated, stamp);
    let reopened = Run::existing(d.path()).unwrap();
    assert_eq!(reopened.status(Stage::Synth), StageStatus::Done);
    assert_eq!(cmd_synth(&mut run, None, true).unwrap(), Outcome::Done);
    assert!(tree_bytes(&run.corpus_dir()) == before);
}

#[test]
fn zero_regressor_without_alignment_keeps_coarse_masks() {
    let d = tempfile::tempdir().unwrap();
    let mut run = small_run(d.path(), "");
    cmd_synth(&mut run, None, false).unwrap();
    cmd_bootstrap(&mut run, None, false).unwrap();
    let cfg = RefineConfig {
        align: false,
        ..run.config().refine.clone()
    };
    let dims = fine_layer_dims(&cfg, &run.config().fine_train.hidden).unwrap();
    let params = MlpParams::zeros(&dims, Activation::Relu).unwrap();
    let (samples, coarse) = test_pairs(&run, |_| true).unwrap();
    for (s, c) in samples.iter().zip(&coarse) {
        let out = refine_mask(c, &s.sem, &params, &cfg).unwrap();
        let iou = seg_metrics(&out.mask, c).unwrap().iou;
        assert!(iou > 0.97, "{}: IoU {iou}", s.id);
    }
}

#[test]
fn small_pipeline_runs_end_to_end() {
    let d = tempfile::tempdir().unwrap();
    let mut run = small_run(d.path(), "");
    cmd_synth(&mut run, None, false).unwrap();
    assert_eq!(cmd_bootstrap(&mut run, None, false).unwrap(), Outcome::Done);
    assert_eq!(cmd_fine_train(&mut run, false).unwrap(), Outcome::Done);
    assert_eq!(cmd_refine(&mut run, false).unwrap(), Outcome::Done);
    assert_eq!(cmd_eval(&mut run, false).unwrap(), Outcome::Done);
    let table: EvalTable = read_json(&eval_table_path(&run)).unwrap();
    for group in ["all", "easy", "medium", "hard", "extreme"] {
        for method in ["coarse", "refined"] {
            let m = table.get(group, method).unwrap_or_else(|| panic!("{group}/{method}"));
            assert!((0.0..=1.0).contains(&m.signed.iou));
        }
    }
    let m = read_manifest(&run.corpus_dir()).unwrap();
    for e in m.entries_in(Split::Test) {
        assert!(run.stage_dir(Stage::Refine).join("masks").join(format!("{}.png", e.id)).is_file());
    }
    let reopened = Run::existing(d.path()).unwrap();
    for s in [Stage::Synth, Stage::Bootstrap, Stage::FineTrain, Stage::Refine, Stage::Eval] {
        assert_eq!(reopened.status(s), StageStatus::Done, "{}", s.name());
    }
}
