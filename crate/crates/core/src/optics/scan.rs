use crate::error::OpticsError;

/// FWHM of a Gaussian expressed in standard deviations (2·sqrt(2·ln 2)).
pub const FWHM_PER_SIGMA: f64 = 2.35482;

pub const DEFAULT_WAVELENGTH_UM: f64 = 1.3;
pub const DEFAULT_NUMERICAL_APERTURE: f64 = 0.71;
pub const DEFAULT_PIXEL_PITCH_UM: f64 = 0.25;
pub const DEFAULT_DWELL_MS: f64 = 3.3;
pub const DEFAULT_BANDPASS_HZ: f64 = 100.0;
/// Supply modulation that gives unity signal gain.
pub const REFERENCE_MODULATION_VPP: f64 = 0.2;
pub const DEFAULT_NOISE_FLOOR: f64 = 0.001;

/// Standard deviation (µm) of the Gaussian beam spot with FWHM = λ / (2·NA).
pub fn psf_sigma(wavelength_um: f64, numerical_aperture: f64) -> Result<f64, OpticsError> {
    if !(numerical_aperture > 0.0 && numerical_aperture <= 1.0) {
        return Err(OpticsError::NumericalAperture(numerical_aperture));
    }
    Ok(wavelength_um / (2.0 * numerical_aperture) / FWHM_PER_SIGMA)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Region {
    pub x0: f64,
    pub y0: f64,
    pub width: f64,
    pub height: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Modulation {
    pub offset_v: f64,
    pub peak_to_peak_v: f64,
    pub freq_hz: f64,
}

impl Default for Modulation {
    fn default() -> Self {
        Modulation {
            offset_v: 1.0,
            peak_to_peak_v: REFERENCE_MODULATION_VPP,
            freq_hz: 80_000.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanParams {
    pub pixel_pitch_um: f64,
    pub region: Region,
    pub wavelength_um: f64,
    pub numerical_aperture: f64,
    pub dwell_ms_per_px: f64,
    pub bandpass_hz: f64,
    pub modulation: Modulation,
}

impl ScanParams {
    /// Default optics and lock-in settings over `region`.
    pub fn over(region: Region) -> Self {
        ScanParams {
            pixel_pitch_um: DEFAULT_PIXEL_PITCH_UM,
            region,
            wavelength_um: DEFAULT_WAVELENGTH_UM,
            numerical_aperture: DEFAULT_NUMERICAL_APERTURE,
            dwell_ms_per_px: DEFAULT_DWELL_MS,
            bandpass_hz: DEFAULT_BANDPASS_HZ,
            modulation: Modulation::default(),
        }
    }

    pub fn check(&self) -> Result<(), OpticsError> {
        let bad = |m: &str| Err(OpticsError::InvalidParam(m.to_string()));
        if !(self.pixel_pitch_um > 0.0 && self.pixel_pitch_um.is_finite()) {
            return bad("pixel pitch must be positive");
        }
        if !(self.numerical_aperture > 0.0 && self.numerical_aperture <= 1.0) {
            return Err(OpticsError::NumericalAperture(self.numerical_aperture));
        }
        if !(self.wavelength_um > 0.0) {
            return bad("wavelength must be positive");
        }
        if !(self.dwell_ms_per_px > 0.0) {
            return bad("dwell time must be positive");
        }
        if !(self.bandpass_hz > 0.0) {
            return bad("bandpass must be positive");
        }
        if !self.modulation.peak_to_peak_v.is_finite() || self.modulation.peak_to_peak_v < 0.0 {
            return bad("modulation amplitude must be non-negative");
        }
        let r = &self.region;
        if ![r.x0, r.y0, r.width, r.height]
            .iter()
            .all(|v| v.is_finite())
        {
            return bad("region must be finite");
        }
        Ok(())
    }

    /// Raster size in pixels.
    pub fn dims(&self) -> (usize, usize) {
        let n = |extent: f64| (extent / self.pixel_pitch_um).round().max(0.0) as usize;
        (n(self.region.width), n(self.region.height))
    }

    pub fn psf_sigma_um(&self) -> Result<f64, OpticsError> {
        psf_sigma(self.wavelength_um, self.numerical_aperture)
    }

    /// Signal gain of the supply modulation, linear in peak-to-peak voltage.
    pub fn modulation_gain(&self) -> f64 {
        self.modulation.peak_to_peak_v / REFERENCE_MODULATION_VPP
    }

    /// Centre of pixel (`col`, `row`) in µm.
    pub fn pixel_center(&self, col: usize, row: usize) -> (f64, f64) {
        (
            self.region.x0 + (col as f64 + 0.5) * self.pixel_pitch_um,
            self.region.y0 + (row as f64 + 0.5) * self.pixel_pitch_um,
        )
    }
}

/// Slow focus drift over the course of one scan.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FocusDrift {
    /// Fractional gain change reached at the last row.
    pub gain_slope: f64,
    /// Extra Gaussian blur (µm) reached at the last row, added in quadrature to the PSF.
    pub extra_blur_sigma_um: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseParams {
    /// Per-pixel noise σ at the reference dwell time and bandpass.
    pub noise_floor: f64,
    pub ref_dwell_ms: f64,
    pub ref_bandpass_hz: f64,
    pub focus_drift: FocusDrift,
    pub seed: u64,
}

impl Default for NoiseParams {
    fn default() -> Self {
        NoiseParams {
            noise_floor: DEFAULT_NOISE_FLOOR,
            ref_dwell_ms: DEFAULT_DWELL_MS,
            ref_bandpass_hz: DEFAULT_BANDPASS_HZ,
            focus_drift: FocusDrift::default(),
            seed: 0,
        }
    }
}

impl NoiseParams {
    pub fn noiseless() -> Self {
        NoiseParams {
            noise_floor: 0.0,
            ..Default::default()
        }
    }

    pub fn with_seed(seed: u64) -> Self {
        NoiseParams {
            seed,
            ..Default::default()
        }
    }

    pub fn check(&self) -> Result<(), OpticsError> {
        let bad = |m: &str| Err(OpticsError::InvalidParam(m.to_string()));
        if !(self.noise_floor >= 0.0 && self.noise_floor.is_finite()) {
            return bad("noise floor must be non-negative");
        }
        if !(self.ref_dwell_ms > 0.0 && self.ref_bandpass_hz > 0.0) {
            return bad("noise reference dwell and bandpass must be positive");
        }
        let d = &self.focus_drift;
        if !(d.gain_slope.is_finite()
            && d.extra_blur_sigma_um.is_finite()
            && d.extra_blur_sigma_um >= 0.0)
        {
            return bad("focus drift parameters must be finite");
        }
        Ok(())
    }

    /// Effective per-pixel σ: grows as sqrt(bandpass) and shrinks as sqrt(dwell).
    pub fn sigma_for(&self, scan: &ScanParams) -> f64 {
        self.noise_floor
            * (scan.bandpass_hz / self.ref_bandpass_hz).sqrt()
            * (self.ref_dwell_ms / scan.dwell_ms_per_px).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn psf_at_default_optics() {
        let s = psf_sigma(1.3, 0.71).unwrap();
        let fwhm = s * FWHM_PER_SIGMA;
        assert!((fwhm - 0.91549).abs() < 1e-4, "{fwhm}");
        assert!((s - 0.38877).abs() < 1e-4, "{s}");
        let unit = psf_sigma(1.3, 0.65).unwrap() * FWHM_PER_SIGMA;
        assert!((unit - 1.0).abs() < 1e-12);
        let half = psf_sigma(1.3, 0.5).unwrap() / psf_sigma(1.3, 0.25).unwrap();
        assert!((half - 0.5).abs() < 1e-12);
        assert!(psf_sigma(1.3, 0.0).is_err());
        assert!(psf_sigma(1.3, 1.2).is_err());
    }

    #[test]
    fn dims_round_to_pixels() {
        let scan = ScanParams::over(Region {
            x0: 0.0,
            y0: 0.0,
            width: 128.0,
            height: 64.0,
        });
        assert_eq!(scan.dims(), (512, 256));
    }
}
