//! Profile-based contour refinement.

mod profile;
mod raster;
mod refine;
mod scan;

pub use profile::{align_brightest, profile_features, sample_profile, windowed_argmax, Profile, RefineConfig};
pub use raster::{is_self_intersecting, rasterize_mask};
pub use refine::{
    build_training_set, component_contours, contour_profiles, edge_offset, fine_layer_dims, image_training_profiles,
    refine_contour, refine_mask, train_fine, FineTrainConfig, RefineOutcome, RefinedContour, TrainingSetStats,
};
pub use scan::{compute_scan_size, odd_scan, ScanGeometry};
