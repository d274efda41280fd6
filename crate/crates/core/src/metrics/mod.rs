//! Segmentation, electrical and roughness metrics.

mod elec;
mod report;
mod rough;
mod seg;
mod width;

pub use elec::{cd, esd, oscc, paired_widths, ElecConfig, OsccReport};
pub use report::{
    evaluate_files, evaluate_pair, evaluate_pairs, format_table, pair_flat_dirs, write_report, CorpusMeans,
    ElecReport, EvalConfig, EvalSummary, PairPaths, PairReport, RoughError, TABLE_COLUMNS,
};
pub use rough::{edge_stats, roughness, sample_edges, width_stats, RoughConfig, RoughReport, RunEdges, SeriesStats};
pub use seg::{seg_metrics, SegReport};
pub use width::{local_tangent, run_width, skeleton_endpoints, skeleton_of, skeleton_sites, SkeletonSite};
