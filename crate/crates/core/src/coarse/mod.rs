//! Prompted mask generation, curation and bootstrapped retraining.

mod bootstrap;
mod curate;
mod prompt;
mod segmenter;

pub use bootstrap::{
    bootstrap_run, generate_masks, iteration_dir, BootstrapConfig, BootstrapItem, BootstrapReport, IterationReport,
    IterationStatus, MaskSource,
};
pub use curate::{
    append_decisions, curate_oracle, inject_noise, latest_decisions, now_iso8601, oracle_accepts, read_decisions,
    write_decisions, CurationDecision, CurationMode, DecisionSource,
};
pub use prompt::{bboxes_from_gray_layout, bboxes_from_layout, prompt_segment_classical, BBox, DEFAULT_MARGIN, DEFAULT_MIN_AREA};
pub use segmenter::{ClassicalSegmenter, PatchMlpConfig, PatchMlpSegmenter, Segmenter};
