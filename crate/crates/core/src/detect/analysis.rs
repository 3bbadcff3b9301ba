use std::fmt;
use std::io::Write;

use super::ops::{
    despeckle, estimate_noise_sigma, match_intensity, normalize, subtract, RealImage,
};
use super::register::{register_images, PixelWindow};
use crate::error::DetectError;
use crate::fabric::{CellRef, FloorPlan, Rect};
use crate::optics::{Image16, ScanParams, FWHM_PER_SIGMA};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalysisParams {
    pub max_shift_px: usize,
    /// Detection threshold in noise σ.
    pub k: f64,
    pub min_area_px: usize,
    pub despeckle: bool,
}

impl Default for AnalysisParams {
    fn default() -> Self {
        AnalysisParams::for_scan(&ScanParams::over(crate::optics::Region {
            x0: 0.0,
            y0: 0.0,
            width: 0.0,
            height: 0.0,
        }))
    }
}

/// Pixel area of the beam's half-maximum disc, rounded up.
pub fn psf_footprint_px(scan: &ScanParams) -> usize {
    let fwhm = scan
        .psf_sigma_um()
        .map(|s| s * FWHM_PER_SIGMA)
        .unwrap_or(1.0);
    let r = fwhm / 2.0;
    ((std::f64::consts::PI * r * r / (scan.pixel_pitch_um * scan.pixel_pitch_um)).ceil() as usize)
        .max(1)
}

impl AnalysisParams {
    pub fn for_scan(scan: &ScanParams) -> Self {
        AnalysisParams {
            max_shift_px: 10,
            k: 5.0,
            min_area_px: psf_footprint_px(scan),
            despeckle: true,
        }
    }

    pub fn check(&self) -> Result<(), DetectError> {
        if !(self.k > 0.0 && self.k.is_finite()) {
            return Err(DetectError::InvalidParam(format!(
                "k must be positive, got {}",
                self.k
            )));
        }
        if self.min_area_px < 1 {
            return Err(DetectError::InvalidParam(
                "min-area must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Polarity {
    Positive,
    Negative,
    Mixed,
}

impl fmt::Display for Polarity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Polarity::Positive => "positive",
            Polarity::Negative => "negative",
            Polarity::Mixed => "mixed",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiffComponent {
    pub centroid_um: (f64, f64),
    /// Inclusive pixel bounds.
    pub bbox_px: PixelWindow,
    pub area_px: usize,
    pub peak_z: f64,
    pub polarity: Polarity,
    pub cells: Vec<CellRef>,
    /// Pixel indices belonging to the component.
    pub pixels: Vec<usize>,
}

/// Marks pixels with |d| > k·σ, labels 8-connected components and drops those smaller than
/// `min_area_px`. Components come out in raster order of their first pixel.
pub fn threshold_components(
    diff: &RealImage,
    sigma: f64,
    params: &AnalysisParams,
) -> Vec<DiffComponent> {
    let (w, h) = (diff.width, diff.height);
    let t = params.k * sigma;
    let hot: Vec<bool> = diff.data.iter().map(|v| v.abs() > t).collect();
    let mut seen = vec![false; w * h];
    let mut out = Vec::new();
    let mut stack = Vec::new();
    for start in 0..w * h {
        if !hot[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        stack.push(start);
        let mut pixels = Vec::new();
        while let Some(p) = stack.pop() {
            pixels.push(p);
            let (c, r) = ((p % w) as isize, (p / w) as isize);
            for dy in -1..=1 {
                for dx in -1..=1 {
                    let (nc, nr) = (c + dx, r + dy);
                    if nc < 0 || nr < 0 || nc >= w as isize || nr >= h as isize {
                        continue;
                    }
                    let q = nr as usize * w + nc as usize;
                    if hot[q] && !seen[q] {
                        seen[q] = true;
                        stack.push(q);
                    }
                }
            }
        }
        if pixels.len() < params.min_area_px {
            continue;
        }
        pixels.sort_unstable();
        out.push(component_from(diff, sigma, pixels));
    }
    out
}

fn component_from(diff: &RealImage, sigma: f64, pixels: Vec<usize>) -> DiffComponent {
    let w = diff.width;
    let (mut c0, mut r0, mut c1, mut r1) = (usize::MAX, usize::MAX, 0, 0);
    let (mut sc, mut sr, mut peak) = (0.0, 0.0, 0.0f64);
    let (mut pos, mut neg) = (false, false);
    for &p in &pixels {
        let (c, r) = (p % w, p / w);
        c0 = c0.min(c);
        r0 = r0.min(r);
        c1 = c1.max(c);
        r1 = r1.max(r);
        sc += c as f64;
        sr += r as f64;
        let v = diff.data[p];
        peak = peak.max(v.abs());
        pos |= v > 0.0;
        neg |= v < 0.0;
    }
    let n = pixels.len() as f64;
    DiffComponent {
        centroid_um: diff.pixel_center(sc / n, sr / n),
        bbox_px: PixelWindow { c0, r0, c1, r1 },
        area_px: pixels.len(),
        peak_z: if sigma > 0.0 {
            peak / sigma
        } else {
            f64::INFINITY
        },
        polarity: match (pos, neg) {
            (true, false) => Polarity::Positive,
            (false, true) => Polarity::Negative,
            _ => Polarity::Mixed,
        },
        cells: Vec::new(),
        pixels,
    }
}

/// Physical rectangle covered by a component's inclusive pixel bounding box.
pub fn component_rect(c: &DiffComponent, scan: &ScanParams) -> Rect {
    let p = scan.pixel_pitch_um;
    let b = &c.bbox_px;
    Rect::new(
        scan.region.x0 + b.c0 as f64 * p,
        scan.region.y0 + b.r0 as f64 * p,
        scan.region.x0 + (b.c1 + 1) as f64 * p,
        scan.region.y0 + (b.r1 + 1) as f64 * p,
    )
}

/// Attaches every floorplan cell whose rectangle overlaps the component's bounding box.
pub fn localize(components: &mut [DiffComponent], fp: &FloorPlan, scan: &ScanParams) {
    for c in components {
        let mut cells: Vec<CellRef> = fp
            .overlapping(&component_rect(c, scan))
            .into_iter()
            .cloned()
            .collect();
        cells.sort();
        cells.dedup();
        c.cells = cells;
    }
}

/// 8-bit RGB raster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

pub const POSITIVE_TINT: [u8; 3] = [0, 255, 0];
pub const NEGATIVE_TINT: [u8; 3] = [255, 255, 0];

impl RgbImage {
    pub fn pixel(&self, col: usize, row: usize) -> [u8; 3] {
        let i = 3 * (row * self.width + col);
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    /// Binary `P6` pixmap, maxval 255.
    pub fn write_ppm<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        write!(w, "P6\n{} {}\n255\n", self.width, self.height)?;
        w.write_all(&self.data)
    }

    pub fn to_ppm_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write_ppm(&mut out).expect("writing to memory");
        out
    }
}

/// Grayscale reflectance base (high byte of each code) with pixels above +k·σ tinted
/// green and below −k·σ tinted yellow.
pub fn render_overlay(
    reflectance: &Image16,
    diff: &RealImage,
    sigma: f64,
    params: &AnalysisParams,
) -> Result<RgbImage, DetectError> {
    if (reflectance.width, reflectance.height) != (diff.width, diff.height) {
        return Err(DetectError::Mismatch(format!(
            "overlay base is {}x{}, difference is {}x{}",
            reflectance.width, reflectance.height, diff.width, diff.height
        )));
    }
    let t = params.k * sigma;
    let mut data = Vec::with_capacity(3 * diff.data.len());
    for (code, d) in reflectance.pixels.iter().zip(&diff.data) {
        let px = if *d > t {
            POSITIVE_TINT
        } else if *d < -t {
            NEGATIVE_TINT
        } else {
            let g = (code >> 8) as u8;
            [g, g, g]
        };
        data.extend_from_slice(&px);
    }
    Ok(RgbImage {
        width: diff.width,
        height: diff.height,
        data,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Clean,
    Tampered,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Clean => "CLEAN",
            Verdict::Tampered => "TAMPERED",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiffReport {
    pub verdict: Verdict,
    pub shift_px: (i32, i32),
    pub noise_sigma: f64,
    /// Gain and offset mapping the normalized golden onto the normalized suspect.
    pub intensity_match: (f64, f64),
    pub params: AnalysisParams,
    pub components: Vec<DiffComponent>,
    pub golden_id: String,
    pub suspect_id: String,
}

impl DiffReport {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut line = |k: &str, v: String| s.push_str(&format!("{k}: {v}\n"));
        line("verdict", self.verdict.to_string());
        line(
            "shift-px",
            format!("{},{}", self.shift_px.0, self.shift_px.1),
        );
        line("noise-sigma", format!("{:.6e}", self.noise_sigma));
        line(
            "intensity-match",
            format!(
                "{:.6},{:.6}",
                self.intensity_match.0, self.intensity_match.1
            ),
        );
        line("threshold-k", format!("{}", self.params.k));
        line("min-area-px", self.params.min_area_px.to_string());
        line("max-shift-px", self.params.max_shift_px.to_string());
        line(
            "despeckle",
            if self.params.despeckle { "on" } else { "off" }.to_string(),
        );
        line("golden", self.golden_id.clone());
        line("suspect", self.suspect_id.clone());
        for c in &self.components {
            let cells: Vec<String> = c.cells.iter().map(|c| c.to_string()).collect();
            s.push_str(&format!(
                "component: centroid-um={:.3},{:.3} area-px={} peak-z={:.2} polarity={} cells={}\n",
                c.centroid_um.0,
                c.centroid_um.1,
                c.area_px,
                c.peak_z,
                c.polarity,
                cells.join(";")
            ));
        }
        s
    }
}

/// Intermediate products of a comparison, kept for overlays and inspection.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub report: DiffReport,
    /// Suspect minus golden, normalized, zeroed outside the registered overlap.
    pub diff: RealImage,
    pub valid: PixelWindow,
}

fn stage<T>(name: &'static str, r: Result<T, DetectError>) -> Result<T, DetectError> {
    r.map_err(|e| DetectError::Stage {
        stage: name,
        inner: Box::new(e),
    })
}

/// Runs register → normalize → intensity match → subtract → despeckle → noise estimate → threshold → localize.
pub fn analyze(
    golden: &Image16,
    suspect: &Image16,
    fp: &FloorPlan,
    scan: &ScanParams,
    params: &AnalysisParams,
) -> Result<Analysis, DetectError> {
    stage("params", params.check())?;
    stage("metadata", check_scan(golden, scan))?;
    let reg = stage(
        "register",
        register_images(golden, suspect, params.max_shift_px),
    )?;
    let g = stage("normalize", normalize(golden))?;
    let mut s = stage("normalize", normalize(&reg.aligned))?;
    let valid = reg.valid;
    let (gain, offset) = match_intensity(&g, &s, &valid, MATCH_PASSES, MATCH_REJECT);
    for v in s.data.iter_mut() {
        *v = (*v - offset) / gain;
    }
    let mut diff = stage("subtract", subtract(&s, &g))?;
    zero_outside(&mut diff, &valid);
    if params.despeckle {
        diff = despeckle(&diff);
        zero_outside(&mut diff, &valid);
    }
    let sigma = stage("noise", estimate_noise_sigma(&crop(&diff, &valid)))?;
    let sigma = sigma.max(SIGMA_FLOOR);
    let mut components = threshold_components(&diff, sigma, params);
    localize(&mut components, fp, scan);
    let report = DiffReport {
        verdict: if components.is_empty() {
            Verdict::Clean
        } else {
            Verdict::Tampered
        },
        shift_px: reg.shift,
        noise_sigma: sigma,
        intensity_match: (gain, offset),
        params: *params,
        components,
        golden_id: String::new(),
        suspect_id: String::new(),
    };
    Ok(Analysis {
        report,
        diff,
        valid,
    })
}

const MATCH_PASSES: usize = 4;
const MATCH_REJECT: f64 = 4.0;

/// Lower bound on the noise estimate so that noiseless inputs stay well-defined.
pub const SIGMA_FLOOR: f64 = 1e-12;

pub fn compare_snapshots(
    golden: &Image16,
    suspect: &Image16,
    fp: &FloorPlan,
    scan: &ScanParams,
    params: &AnalysisParams,
) -> Result<DiffReport, DetectError> {
    analyze(golden, suspect, fp, scan, params).map(|a| a.report)
}

fn check_scan(img: &Image16, scan: &ScanParams) -> Result<(), DetectError> {
    if scan.dims() != (img.width, img.height) {
        return Err(DetectError::Mismatch(format!(
            "scan geometry gives {:?} pixels, image has {}x{}",
            scan.dims(),
            img.width,
            img.height
        )));
    }
    if (scan.pixel_pitch_um - img.meta.scan.pixel_pitch_um).abs() > 1e-9 * scan.pixel_pitch_um {
        return Err(DetectError::Mismatch(
            "scan pitch differs from image pitch".into(),
        ));
    }
    Ok(())
}

fn zero_outside(img: &mut RealImage, win: &PixelWindow) {
    let w = img.width;
    for (i, v) in img.data.iter_mut().enumerate() {
        if !win.contains(i % w, i / w) {
            *v = 0.0;
        }
    }
}

fn crop(img: &RealImage, win: &PixelWindow) -> RealImage {
    let mut data = Vec::with_capacity(win.area());
    for r in win.r0..win.r1 {
        data.extend_from_slice(&img.data[r * img.width + win.c0..r * img.width + win.c1]);
    }
    RealImage::new(
        win.c1 - win.c0,
        win.r1 - win.r0,
        data,
        img.pitch_um,
        img.origin_um,
    )
}
