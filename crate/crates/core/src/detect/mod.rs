//! Golden-vs-suspect snapshot comparison: registration, robust normalization, a robust
//! gain/offset match of the suspect onto the golden, differencing, despeckle, k·σ thresholding, connected components and cell mapping.
//!
//! A difference is reported when at least one 8-connected group of pixels with
//! |z| > k (z relative to the MAD noise estimate of the difference image) covers at
//! least `min_area_px` pixels, by default the area of the beam's half-maximum disc.

mod analysis;
mod ops;
mod register;

pub use analysis::{
    analyze, compare_snapshots, component_rect, localize, psf_footprint_px, render_overlay,
    threshold_components, Analysis, AnalysisParams, DiffComponent, DiffReport, Polarity, RgbImage,
    Verdict, NEGATIVE_TINT, POSITIVE_TINT, SIGMA_FLOOR,
};
pub use ops::{
    despeckle, estimate_noise_sigma, match_intensity, median, median_mad, normalize, subtract,
    RealImage, MAD_TO_SIGMA, MIN_NOISE_PIXELS,
};
pub use register::{check_compatible, register_images, PixelWindow, Registration};
