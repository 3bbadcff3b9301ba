//! Optical snapshot simulation: Gaussian beam PSF, raster scan, lock-in noise and drift.

mod image;
mod render;
mod scan;

pub use image::{Image16, ImageKind, ImageMeta};
pub use render::{llsi_signal, reflectance_level, render_llsi, render_reflectance};
pub use scan::{
    psf_sigma, FocusDrift, Modulation, NoiseParams, Region, ScanParams, DEFAULT_BANDPASS_HZ,
    DEFAULT_DWELL_MS, DEFAULT_NOISE_FLOOR, DEFAULT_NUMERICAL_APERTURE, DEFAULT_PIXEL_PITCH_UM,
    DEFAULT_WAVELENGTH_UM, FWHM_PER_SIGMA, REFERENCE_MODULATION_VPP,
};
