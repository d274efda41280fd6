#![allow(dead_code)]

use std::path::Path;

use lithoseg_cli::{PipelineConfig, Run};

pub const SMALL: &str = r#"
[corpus]
train = 4
val = 0
[corpus.test]
easy = 2
medium = 1
hard = 1
extreme = 1
[bootstrap]
epochs_per_iter = 1
[fine_train]
max_profiles = 1500
[fine_train.train]
epochs = 2
batch_size = 64
"#;

pub const HUMAN: &str = r#"
[bootstrap.curation]
mode = "human"
"#;

pub fn small_config(extra: &str) -> (PipelineConfig, String) {
    let text = format!("{SMALL}{extra}");
    (PipelineConfig::from_toml(&text).unwrap(), text)
}

pub fn small_run(dir: &Path, extra: &str) -> Run {
    Run::open(dir, Some(small_config(extra)), None, false).unwrap()
}
