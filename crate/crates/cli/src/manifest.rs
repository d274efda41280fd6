use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use lithoseg_core::coarse::now_iso8601;
use serde::{Deserialize, Serialize};

use crate::config::{PipelineConfig, Seeds};
use crate::error::{CliError, CliResult};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const CONFIG_SNAPSHOT: &str = "config.toml";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Synth,
    Bootstrap,
    FineTrain,
    Refine,
    Eval,
    AblateCenter,
    AblateAngle,
    AblateScan,
    AblateNoise,
}

impl Stage {
    pub const PIPELINE: [Stage; 5] = [Stage::Synth, Stage::Bootstrap, Stage::FineTrain, Stage::Refine, Stage::Eval];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Synth => "synth",
            Stage::Bootstrap => "bootstrap",
            Stage::FineTrain => "fine-train",
            Stage::Refine => "refine",
            Stage::Eval => "eval",
            Stage::AblateCenter => "ablate center",
            Stage::AblateAngle => "ablate angle",
            Stage::AblateScan => "ablate scan",
            Stage::AblateNoise => "ablate noise",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageStatus {
    #[default]
    Pending,
    Running,
    AwaitingCuration,
    Done,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct StageRecord {
    pub status: StageStatus,
    /// Paths relative to the run directory.
    pub artifacts: Vec<String>,
    pub updated: Option<String>,
    pub message: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: u32,
    pub run_id: String,
    pub config: PipelineConfig,
    pub seeds: Seeds,
    /// Absolute, or relative to the run directory.
    pub corpus_dir: PathBuf,
    pub stages: BTreeMap<Stage, StageRecord>,
}

impl RunManifest {
    pub fn new(config: PipelineConfig) -> Self {
        let run_id = format!("{:08x}", crc32fast::hash(config.to_toml().as_bytes()));
        Self {
            version: 1,
            run_id,
            seeds: config.seeds(),
            config,
            corpus_dir: PathBuf::from("corpus"),
            stages: BTreeMap::new(),
        }
    }

    pub fn status(&self, stage: Stage) -> StageStatus {
        self.stages.get(&stage).map(|r| r.status).unwrap_or_default()
    }
}

/// An open run directory and its manifest.
#[derive(Debug, Clone)]
pub struct Run {
    pub dir: PathBuf,
    pub manifest: RunManifest,
}

impl Run {
    /// Open `dir`, creating it with `config` (or defaults) when it holds no
    /// manifest. A config that differs from the stored snapshot is a config
    /// error unless `force`, which replaces the snapshot and resets every stage.
    pub fn open(dir: &Path, config: Option<(PipelineConfig, String)>, seed: Option<u64>, force: bool) -> CliResult<Run> {
        let path = dir.join(MANIFEST_FILE);
        if path.is_file() {
            let text = fs::read_to_string(&path)?;
            let manifest: RunManifest = serde_json::from_str(&text)
                .map_err(|e| CliError::Internal(format!("{}: {e}", path.display())))?;
            let mut run = Run {
                dir: dir.to_path_buf(),
                manifest,
            };
            let wanted = match (config.as_ref(), seed) {
                (None, None) => return Ok(run),
                (Some((c, _)), _) => c.clone(),
                (None, Some(_)) => run.manifest.config.clone(),
            };
            let wanted = with_seed(wanted, seed);
            wanted.validate()?;
            if wanted != run.manifest.config {
                if !force {
                    return Err(CliError::config(format!(
                        "configuration differs from the snapshot in {}; pass --force to replace it",
                        path.display()
                    )));
                }
                let corpus = run.manifest.corpus_dir.clone();
                run.manifest = RunManifest::new(wanted);
                run.manifest.corpus_dir = corpus;
                run.write_snapshot(config.as_ref().map(|(_, t)| t.as_str()))?;
                run.save()?;
            }
            return Ok(run);
        }
        let (cfg, text) = match config {
            Some((c, t)) => (c, Some(t)),
            None => (PipelineConfig::default(), None),
        };
        let cfg = with_seed(cfg, seed);
        cfg.validate()?;
        fs::create_dir_all(dir)?;
        let run = Run {
            dir: dir.to_path_buf(),
            manifest: RunManifest::new(cfg),
        };
        run.write_snapshot(text.as_deref())?;
        run.save()?;
        Ok(run)
    }

    /// Open an existing run without changing it.
    pub fn existing(dir: &Path) -> CliResult<Run> {
        let path = dir.join(MANIFEST_FILE);
        if !path.is_file() {
            return Err(CliError::Missing(path));
        }
        Run::open(dir, None, None, false)
    }

    fn write_snapshot(&self, original: Option<&str>) -> CliResult<()> {
        let text = match original {
            Some(t) => t.to_string(),
            None => self.manifest.config.to_toml(),
        };
        fs::write(self.dir.join(CONFIG_SNAPSHOT), text)?;
        Ok(())
    }

    pub fn save(&self) -> CliResult<()> {
        let path = self.dir.join(MANIFEST_FILE);
        let tmp = self.dir.join("manifest.json.tmp");
        let text = serde_json::to_string_pretty(&self.manifest).map_err(|e| CliError::Internal(e.to_string()))?;
        fs::write(&tmp, text)?;
        fs::rename(&tmp, &path)?;
        Ok(())
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.manifest.config
    }

    pub fn corpus_dir(&self) -> PathBuf {
        self.dir.join(&self.manifest.corpus_dir)
    }

    pub fn stage_dir(&self, stage: Stage) -> PathBuf {
        match stage {
            Stage::Synth => self.corpus_dir(),
            Stage::Bootstrap => self.dir.join("coarse"),
            Stage::FineTrain => self.dir.join("fine"),
            Stage::Refine => self.dir.join("refined"),
            Stage::Eval => self.dir.join("eval"),
            Stage::AblateCenter => self.dir.join("ablate").join("center"),
            Stage::AblateAngle => self.dir.join("ablate").join("angle"),
            Stage::AblateScan => self.dir.join("ablate").join("scan"),
            Stage::AblateNoise => self.dir.join("ablate").join("noise"),
        }
    }

    pub fn status(&self, stage: Stage) -> StageStatus {
        self.manifest.status(stage)
    }

    pub fn set_status(&mut self, stage: Stage, status: StageStatus, message: Option<String>) -> CliResult<()> {
        let rec = self.manifest.stages.entry(stage).or_default();
        rec.status = status;
        rec.updated = Some(now_iso8601());
        rec.message = message;
        if status == StageStatus::Running {
            rec.artifacts.clear();
        }
        self.save()
    }

    pub fn add_artifact(&mut self, stage: Stage, path: &Path) {
        let rel = path.strip_prefix(&self.dir).unwrap_or(path);
        let s = rel.to_string_lossy().replace('\\', "/");
        let rec = self.manifest.stages.entry(stage).or_default();
        if !rec.artifacts.contains(&s) {
            rec.artifacts.push(s);
        }
    }
}

fn with_seed(mut cfg: PipelineConfig, seed: Option<u64>) -> PipelineConfig {
    if let Some(s) = seed {
        cfg.seed = Some(s);
    }
    cfg.resolved()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn create_then_reopen() {
        let dir = tempfile::tempdir().unwrap();
        let run = Run::open(dir.path(), None, None, false).unwrap();
        assert!(dir.path().join(CONFIG_SNAPSHOT).is_file());
        let again = Run::existing(dir.path()).unwrap();
        assert_eq!(again.manifest, run.manifest);
        assert_eq!(again.status(Stage::Bootstrap), StageStatus::Pending);
    }

    #[test]
    fn changed_config_needs_force() {
        let dir = tempfile::tempdir().unwrap();
        Run::open(dir.path(), None, None, false).unwrap();
        let mut c = PipelineConfig::default();
        c.corpus.train = 5;
        let e = Run::open(dir.path(), Some((c.clone(), String::new())), None, false).unwrap_err();
        assert_eq!(e.exit_code(), 2);
        let run = Run::open(dir.path(), Some((c, "[corpus]\ntrain = 5\n".into())), None, true).unwrap();
        assert_eq!(run.config().corpus.train, 5);
        let snap = fs::read_to_string(dir.path().join(CONFIG_SNAPSHOT)).unwrap();
        assert_eq!(snap, "[corpus]\ntrain = 5\n");
    }

    #[test]
    fn statuses_serialize_snake_case() {
        let dir = tempfile::tempdir().unwrap();
        let mut run = Run::open(dir.path(), None, Some(3), false).unwrap();
        run.set_status(Stage::Bootstrap, StageStatus::AwaitingCuration, None).unwrap();
        let text = fs::read_to_string(dir.path().join(MANIFEST_FILE)).unwrap();
        assert!(text.contains("\"awaiting_curation\""));
        assert!(text.contains("\"bootstrap\""));
        assert_eq!(run.manifest.seeds.corpus, 3);
    }

    #[test]
    fn missing_manifest_is_exit_3() {
        let dir = tempfile::tempdir().unwrap();
        assert_eq!(Run::existing(&dir.path().join("nope")).unwrap_err().exit_code(), 3);
    }
}
