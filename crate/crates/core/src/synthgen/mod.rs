//! Synthetic (layout, SEM, ground truth) triples with controllable geometry,
//! edge roughness and imaging degradation, plus corpus generation.

mod corpus;
mod pattern;
mod render;
mod rough;
mod spec;

pub use corpus::{
    gen_corpus, load_sample, plan_corpus, read_manifest, sample_in_memory, stratum_spec,
    write_manifest, CorpusConfig, CorpusEntry, CorpusManifest, LoadedSample, Split, Stratum,
    StratumCounts,
};
pub use pattern::{build_pattern, Nearest, Polyline};
pub use render::{gen_sample, EdgeTruth, SynthSample, LEVEL_INSIDE, LEVEL_OUTSIDE};
pub use rough::gen_rough_edge;
pub use spec::{Pattern, SynthSpec};
