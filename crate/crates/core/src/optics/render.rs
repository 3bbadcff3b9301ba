use std::ops::Range;

use rayon::prelude::*;

use super::image::{Image16, ImageKind};
use super::scan::{NoiseParams, ScanParams};
use crate::error::OpticsError;
use crate::fabric::{ElementKind, FloorPlan};
use crate::logic::EmitterMap;
use crate::rng::CounterRng;

/// Kernel support in standard deviations.
const KERNEL_RADIUS_SIGMAS: f64 = 4.0;

struct Geometry {
    width: usize,
    height: usize,
    base_sigma_px: f64,
    drift_sigma_px: f64,
    /// Support radius in pixels.
    radius: f64,
    gain: f64,
    gain_slope: f64,
}

impl Geometry {
    fn new(scan: &ScanParams, noise: &NoiseParams) -> Result<Self, OpticsError> {
        scan.check()?;
        noise.check()?;
        let (width, height) = scan.dims();
        if width == 0 || height == 0 {
            return Err(OpticsError::EmptyRegion);
        }
        let base_sigma_px = scan.psf_sigma_um()? / scan.pixel_pitch_um;
        let drift_sigma_px = noise.focus_drift.extra_blur_sigma_um / scan.pixel_pitch_um;
        let mut g = Geometry {
            width,
            height,
            base_sigma_px,
            drift_sigma_px,
            radius: 0.0,
            gain: scan.modulation_gain(),
            gain_slope: noise.focus_drift.gain_slope,
        };
        let max_sigma = g.sigma_px(height as isize);
        g.radius = (KERNEL_RADIUS_SIGMAS * max_sigma).max(1.0);
        Ok(g)
    }

    /// Beam σ in pixels while scanning `row`; drift blur grows linearly over the scan.
    fn sigma_px(&self, row: isize) -> f64 {
        let f = row.clamp(0, self.height as isize) as f64 / self.height as f64;
        let extra = self.drift_sigma_px * f;
        (self.base_sigma_px * self.base_sigma_px + extra * extra).sqrt()
    }

    /// Rows within the support disc of an emitter at row coordinate `py`.
    fn rows_of(&self, py: f64) -> std::ops::RangeInclusive<isize> {
        (py - self.radius).ceil() as isize..=(py + self.radius).floor() as isize
    }

    /// Columns within the support disc at vertical offset `dy` from an emitter at `px`.
    fn cols_of(&self, px: f64, dy: f64) -> std::ops::RangeInclusive<isize> {
        let half = (self.radius * self.radius - dy * dy).max(0.0).sqrt();
        (px - half).ceil() as isize..=(px + half).floor() as isize
    }

    fn row_gain(&self, row: usize) -> f64 {
        self.gain * (1.0 + self.gain_slope * row as f64 / self.height as f64)
    }
}

struct Prepared {
    /// Position in pixel-centre coordinates (pixel `i` is centred on `i`).
    px: f64,
    py: f64,
    /// Amplitude divided by the kernel's sum over its support.
    weight: f64,
}

fn gauss(d: f64, sigma: f64) -> f64 {
    (-d * d / (2.0 * sigma * sigma)).exp()
}

/// Noise-free plus noise signal of rows `rows`, row-major, before quantization.
///
/// Each emitter is splatted with a Gaussian truncated to a disc of radius 4σ around its
/// exact position and normalized over that disc, so an emitter whose disc lies inside the
/// raster deposits exactly its amplitude times the modulation gain. Noise is drawn
/// from a generator keyed by (seed, column, row), so any partition of the rows yields the
/// same values.
pub fn llsi_signal(
    em: &EmitterMap,
    scan: &ScanParams,
    noise: &NoiseParams,
    rows: Range<usize>,
) -> Result<Vec<f64>, OpticsError> {
    let g = Geometry::new(scan, noise)?;
    let rows = rows.start.min(g.height)..rows.end.min(g.height);
    let pitch = scan.pixel_pitch_um;

    let prepared: Vec<Prepared> = em
        .emitters
        .iter()
        .map(|e| {
            let px = (e.x - scan.region.x0) / pitch - 0.5;
            let py = (e.y - scan.region.y0) / pitch - 0.5;
            let mut z = 0.0;
            for row in g.rows_of(py) {
                let s = g.sigma_px(row);
                let gy = gauss(row as f64 - py, s);
                for c in g.cols_of(px, row as f64 - py) {
                    z += gy * gauss(c as f64 - px, s);
                }
            }
            Prepared {
                px,
                py,
                weight: if z > 0.0 { e.amplitude / z } else { 0.0 },
            }
        })
        .collect();

    let mut buckets: Vec<Vec<u32>> = vec![Vec::new(); rows.len()];
    for (i, p) in prepared.iter().enumerate() {
        let span = g.rows_of(p.py);
        let lo = span.start().max(&(rows.start as isize)).to_owned();
        let hi = span.end().min(&(rows.end as isize - 1)).to_owned();
        for row in lo..=hi {
            buckets[(row - rows.start as isize) as usize].push(i as u32);
        }
    }

    let sigma_noise = noise.sigma_for(scan);
    let rng = CounterRng::new(noise.seed);
    let width = g.width;
    let out: Vec<Vec<f64>> = rows
        .clone()
        .into_par_iter()
        .zip(buckets.par_iter())
        .map(|(row, bucket)| {
            let mut buf = vec![0.0; width];
            let s = g.sigma_px(row as isize);
            let row_gain = g.row_gain(row);
            for &i in bucket {
                let p = &prepared[i as usize];
                let dy = row as f64 - p.py;
                let wy = gauss(dy, s) * p.weight * row_gain;
                for c in g.cols_of(p.px, dy) {
                    if c >= 0 && (c as usize) < width {
                        buf[c as usize] += wy * gauss(c as f64 - p.px, s);
                    }
                }
            }
            if sigma_noise > 0.0 {
                for (c, v) in buf.iter_mut().enumerate() {
                    *v += sigma_noise * rng.normal(c as u64, row as u64);
                }
            }
            buf
        })
        .collect();
    Ok(out.concat())
}

/// Renders an LLSI snapshot. The quantization range is the signal range widened by three
/// noise σ on each side; scale and offset are recorded in the image metadata.
pub fn render_llsi(
    em: &EmitterMap,
    scan: &ScanParams,
    noise: &NoiseParams,
) -> Result<Image16, OpticsError> {
    let (w, h) = scan.dims();
    let values = llsi_signal(em, scan, noise, 0..h)?;
    let margin = 3.0 * noise.sigma_for(scan);
    Ok(Image16::quantize_full(
        &values,
        w,
        h,
        margin,
        ImageKind::Llsi,
        *scan,
    ))
}

/// Reflectance level of the silicon under each element kind, and of empty area.
pub fn reflectance_level(kind: Option<ElementKind>) -> f64 {
    match kind {
        None => 0.20,
        Some(ElementKind::Lut) => 0.55,
        Some(ElementKind::Ff) => 0.75,
        Some(ElementKind::SwitchBox) => 0.40,
    }
}

fn blur_1d(src: &[f64], dst: &mut [f64], kernel: &[f64]) {
    let len = src.len();
    let r = (kernel.len() / 2) as isize;
    for i in 0..len {
        let mut acc = 0.0;
        for (k, w) in kernel.iter().enumerate() {
            let j = (i as isize + k as isize - r).clamp(0, len as isize - 1) as usize;
            acc += w * src[j];
        }
        dst[i] = acc;
    }
}

/// Renders the optical reflectance image of the floorplan: element rectangles at
/// kind-dependent levels, blurred by the beam PSF (edge-replicated borders). Noise-free.
pub fn render_reflectance(fp: &FloorPlan, scan: &ScanParams) -> Result<Image16, OpticsError> {
    let g = Geometry::new(scan, &NoiseParams::noiseless())?;
    let (w, h) = (g.width, g.height);
    let mut img: Vec<f64> = (0..h)
        .into_par_iter()
        .flat_map_iter(|row| {
            (0..w).map(move |col| {
                let (x, y) = scan.pixel_center(col, row);
                reflectance_level(fp.lookup(x, y).and_then(|c| fp.element(c)).map(|e| e.kind))
            })
        })
        .collect();

    let s = g.base_sigma_px;
    let r = (KERNEL_RADIUS_SIGMAS * s).ceil() as isize;
    let mut kernel: Vec<f64> = (-r..=r).map(|d| gauss(d as f64, s)).collect();
    let z: f64 = kernel.iter().sum();
    kernel.iter_mut().for_each(|k| *k /= z);

    let mut tmp = vec![0.0; w * h];
    tmp.par_chunks_mut(w)
        .zip(img.par_chunks(w))
        .for_each(|(dst, src)| blur_1d(src, dst, &kernel));
    // Vertical pass, one column at a time.
    let cols: Vec<Vec<f64>> = (0..w)
        .into_par_iter()
        .map(|c| {
            let src: Vec<f64> = (0..h).map(|row| tmp[row * w + c]).collect();
            let mut dst = vec![0.0; h];
            blur_1d(&src, &mut dst, &kernel);
            dst
        })
        .collect();
    for (c, col) in cols.iter().enumerate() {
        for (row, v) in col.iter().enumerate() {
            img[row * w + c] = *v;
        }
    }
    Ok(Image16::quantize_full(
        &img,
        w,
        h,
        0.0,
        ImageKind::Reflectance,
        *scan,
    ))
}
