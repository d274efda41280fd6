//! Image, mask and contour geometry: I/O, sampling, labeling, morphology,
//! thresholding, sub-pixel contour tracing, normals, thinning and line fits.

mod components;
mod contour;
mod filter;
mod geometry;
mod image;
pub mod io;
mod morphology;
mod normals;
mod sample;
mod skeleton;
mod threshold;

pub use components::{
    connected_components, count_components, remove_small_components, Connectivity, Labels,
};
pub use contour::{
    perimeter, resample_closed, signed_area, trace_contours, trace_contours_with, trace_loops,
    trace_polygons, Contour, TraceOptions,
};
pub use filter::gaussian_blur;
pub use geometry::{fit_line_ls, Line};
pub use image::{BinaryMask, GrayImage, PointF, Raster, Rect, ScalarField, Vec2};
pub use io::{encode_overlay_png, encode_png_gray, load_image, load_mask, save_image, save_mask};
pub use morphology::{dilate, erode, morphology, MorphOp};
pub use normals::{angle_of, estimate_normals, perturb_normals};
pub use sample::{bilinear_clamped, bilinear_sample};
pub use skeleton::{neighbour_count, prune_spurs, skeletonize};
pub use threshold::{otsu_threshold, threshold_above};
