use rayon::prelude::*;

use crate::error::DetectError;
use crate::optics::Image16;

/// Consistency constant turning a median absolute deviation into a Gaussian σ.
pub const MAD_TO_SIGMA: f64 = 1.4826;

/// Minimum pixel count for a robust noise estimate.
pub const MIN_NOISE_PIXELS: usize = 100;

/// Real-valued raster sharing the pixel grid of the snapshot it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct RealImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
    pub pitch_um: f64,
    /// Top-left corner of pixel (0, 0) in µm.
    pub origin_um: (f64, f64),
}

impl RealImage {
    pub fn new(
        width: usize,
        height: usize,
        data: Vec<f64>,
        pitch_um: f64,
        origin_um: (f64, f64),
    ) -> Self {
        assert_eq!(data.len(), width * height);
        RealImage {
            width,
            height,
            data,
            pitch_um,
            origin_um,
        }
    }

    pub fn zeros_like(other: &RealImage) -> Self {
        RealImage {
            data: vec![0.0; other.data.len()],
            ..other.clone()
        }
    }

    pub fn get(&self, col: usize, row: usize) -> f64 {
        self.data[row * self.width + col]
    }

    pub fn pixel_center(&self, col: f64, row: f64) -> (f64, f64) {
        (
            self.origin_um.0 + (col + 0.5) * self.pitch_um,
            self.origin_um.1 + (row + 0.5) * self.pitch_um,
        )
    }
}

/// Median of `values` (mean of the two middle elements for even lengths).
pub fn median(values: &[f64]) -> f64 {
    assert!(!values.is_empty(), "median of an empty set");
    let mut v = values.to_vec();
    let n = v.len();
    let mid = n / 2;
    let (_, upper, _) = v.select_nth_unstable_by(mid, f64::total_cmp);
    let upper = *upper;
    if n % 2 == 1 {
        upper
    } else {
        let lower = v[..mid].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lower + upper)
    }
}

/// Median and median absolute deviation.
pub fn median_mad(values: &[f64]) -> (f64, f64) {
    let m = median(values);
    let dev: Vec<f64> = values.iter().map(|v| (v - m).abs()).collect();
    (m, median(&dev))
}

/// De-quantizes, subtracts the median and divides by the robust scale 1.4826·MAD.
pub fn normalize(img: &Image16) -> Result<RealImage, DetectError> {
    let v = img.dequantized();
    let (m, mad) = median_mad(&v);
    let scale = MAD_TO_SIGMA * mad;
    if !(scale > 0.0) {
        return Err(DetectError::ConstantImage);
    }
    let s = &img.meta.scan;
    Ok(RealImage::new(
        img.width,
        img.height,
        v.iter().map(|x| (x - m) / scale).collect(),
        s.pixel_pitch_um,
        (s.region.x0, s.region.y0),
    ))
}

pub fn subtract(a: &RealImage, b: &RealImage) -> Result<RealImage, DetectError> {
    if (a.width, a.height) != (b.width, b.height) {
        return Err(DetectError::Mismatch(format!(
            "{}x{} vs {}x{}",
            a.width, a.height, b.width, b.height
        )));
    }
    Ok(RealImage {
        data: a.data.iter().zip(&b.data).map(|(x, y)| x - y).collect(),
        ..a.clone()
    })
}

/// Orthogonal (equal-error) line fit `y ≈ gain·x + offset`; `None` when degenerate.
fn orthogonal_fit(pairs: &[(f64, f64)]) -> Option<(f64, f64)> {
    let n = pairs.len() as f64;
    if pairs.len() < 2 {
        return None;
    }
    let (mx, my) = pairs
        .iter()
        .fold((0.0, 0.0), |(a, b), (x, y)| (a + x / n, b + y / n));
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (x, y) in pairs {
        let (dx, dy) = (x - mx, y - my);
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if !(sxy > 0.0) {
        return None;
    }
    let gain = (syy - sxx + ((syy - sxx).powi(2) + 4.0 * sxy * sxy).sqrt()) / (2.0 * sxy);
    Some((gain, my - gain * mx))
}

/// Robust intensity match of `moving` onto `reference` over `window`.
///
/// Fits `moving ≈ gain·reference + offset` by orthogonal regression, dropping pixels whose
/// residual exceeds `reject`·σ on each pass, and returns `(gain, offset)`. Falls back to the
/// identity when the fit is degenerate or the gain is not positive.
pub fn match_intensity(
    reference: &RealImage,
    moving: &RealImage,
    window: &super::PixelWindow,
    passes: usize,
    reject: f64,
) -> (f64, f64) {
    let w = reference.width;
    let mut pairs: Vec<(f64, f64)> = (window.r0..window.r1)
        .flat_map(|r| (window.c0..window.c1).map(move |c| r * w + c))
        .map(|i| (reference.data[i], moving.data[i]))
        .collect();
    let mut fit = (1.0, 0.0);
    for pass in 0..passes.max(1) {
        match orthogonal_fit(&pairs) {
            Some(f) if f.0 > 0.0 => fit = f,
            _ => return (1.0, 0.0),
        }
        if pass + 1 == passes {
            break;
        }
        let res: Vec<f64> = pairs.iter().map(|(x, y)| y - fit.0 * x - fit.1).collect();
        let (m, mad) = median_mad(&res);
        let cut = reject * MAD_TO_SIGMA * mad;
        if !(cut > 0.0) {
            break;
        }
        let kept: Vec<(f64, f64)> = pairs
            .iter()
            .zip(&res)
            .filter(|(_, r)| (*r - m).abs() <= cut)
            .map(|(p, _)| *p)
            .collect();
        if kept.len() == pairs.len() || kept.len() < MIN_NOISE_PIXELS {
            break;
        }
        pairs = kept;
    }
    fit
}

/// 3×3 median filter with edge-replicated borders.
pub fn despeckle(img: &RealImage) -> RealImage {
    let (w, h) = (img.width, img.height);
    let mut data = vec![0.0; w * h];
    data.par_chunks_mut(w.max(1))
        .enumerate()
        .for_each(|(row, out)| {
            let mut win = [0.0f64; 9];
            for (col, o) in out.iter_mut().enumerate() {
                let mut k = 0;
                for dy in -1isize..=1 {
                    let r = (row as isize + dy).clamp(0, h as isize - 1) as usize;
                    for dx in -1isize..=1 {
                        let c = (col as isize + dx).clamp(0, w as isize - 1) as usize;
                        win[k] = img.data[r * w + c];
                        k += 1;
                    }
                }
                win.sort_unstable_by(f64::total_cmp);
                *o = win[4];
            }
        });
    RealImage {
        data,
        ..img.clone()
    }
}

/// Robust noise σ of a difference image: 1.4826 · median(|d − median(d)|).
pub fn estimate_noise_sigma(diff: &RealImage) -> Result<f64, DetectError> {
    if diff.data.len() < MIN_NOISE_PIXELS {
        return Err(DetectError::TooFewPixels {
            needed: MIN_NOISE_PIXELS,
            got: diff.data.len(),
        });
    }
    let (_, mad) = median_mad(&diff.data);
    Ok(MAD_TO_SIGMA * mad)
}
