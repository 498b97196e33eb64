//! Pure PIV computation: tiling, binarization, correlation and peak search.

mod binarize;
pub(crate) mod field;
mod grid;
mod image;
mod peak;
pub mod pgm;
mod xcorr;

pub use binarize::{binarize_adaptive, binarize_global, window_mean};
pub use field::{compute_field, Binarization, PivConfig, VectorField};
pub use grid::{tile_windows, WindowGrid};
pub use image::{BinaryImage, GrayImage, Raster, MAX_INTENSITY};
pub use peak::{peak_displacement, peak_displacement_with, Displacement, TieBreak};
pub use xcorr::{extract_pattern, xcorr_binary, xcorr_gray, CorrelationPlane};
