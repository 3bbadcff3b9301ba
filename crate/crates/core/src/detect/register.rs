use rayon::prelude::*;

use super::ops::median;
use crate::error::DetectError;
use crate::optics::Image16;

/// Half-open pixel window `[c0, c1) × [r0, r1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PixelWindow {
    pub c0: usize,
    pub r0: usize,
    pub c1: usize,
    pub r1: usize,
}

impl PixelWindow {
    pub fn contains(&self, col: usize, row: usize) -> bool {
        (self.c0..self.c1).contains(&col) && (self.r0..self.r1).contains(&row)
    }

    pub fn area(&self) -> usize {
        (self.c1 - self.c0) * (self.r1 - self.r0)
    }
}

#[derive(Debug, Clone)]
pub struct Registration {
    /// Translation of the suspect relative to the golden: suspect(x, y) = golden(x − dx, y − dy).
    pub shift: (i32, i32),
    /// Suspect resampled onto the golden pixel grid; pixels without data hold the suspect median.
    pub aligned: Image16,
    /// Pixels of `aligned` that carry suspect data.
    pub valid: PixelWindow,
    /// Normalized cross-correlation at the chosen shift.
    pub score: f64,
}

/// Checks dimensions and pixel pitch agree.
pub fn check_compatible(a: &Image16, b: &Image16) -> Result<(), DetectError> {
    if (a.width, a.height) != (b.width, b.height) {
        return Err(DetectError::Mismatch(format!(
            "image sizes differ: {}x{} vs {}x{}",
            a.width, a.height, b.width, b.height
        )));
    }
    let (pa, pb) = (a.meta.scan.pixel_pitch_um, b.meta.scan.pixel_pitch_um);
    if (pa - pb).abs() > 1e-9 * pa.abs().max(pb.abs()) {
        return Err(DetectError::Mismatch(format!(
            "pixel pitch differs: {pa} vs {pb} µm"
        )));
    }
    Ok(())
}

fn overlap(len: usize, d: i32) -> (usize, usize) {
    // Suspect coordinates whose golden counterpart x − d lies inside the image.
    let lo = d.max(0) as usize;
    let hi = (len as i64 + d.min(0) as i64).max(0) as usize;
    (lo, hi.max(lo))
}

fn ncc(g: &[f64], s: &[f64], w: usize, h: usize, dx: i32, dy: i32) -> f64 {
    let (c0, c1) = overlap(w, dx);
    let (r0, r1) = overlap(h, dy);
    let n = ((c1 - c0) * (r1 - r0)) as f64;
    if n < 2.0 {
        return f64::NEG_INFINITY;
    }
    let (mut sg, mut ss, mut sgg, mut sss, mut sgs) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for r in r0..r1 {
        let gr = (r as i64 - dy as i64) as usize * w;
        let sr = r * w;
        for c in c0..c1 {
            let gv = g[gr + (c as i64 - dx as i64) as usize];
            let sv = s[sr + c];
            sg += gv;
            ss += sv;
            sgg += gv * gv;
            sss += sv * sv;
            sgs += gv * sv;
        }
    }
    let cov = sgs - sg * ss / n;
    let vg = sgg - sg * sg / n;
    let vs = sss - ss * ss / n;
    if vg <= 0.0 || vs <= 0.0 {
        return f64::NEG_INFINITY;
    }
    cov / (vg * vs).sqrt()
}

/// Finds the integer translation within ±`max_shift_px` that maximizes the normalized
/// cross-correlation over the overlap, and resamples the suspect onto the golden grid.
///
/// Ties go to the smallest |dx| + |dy|, then lexicographically smallest (dy, dx).
pub fn register_images(
    golden: &Image16,
    suspect: &Image16,
    max_shift_px: usize,
) -> Result<Registration, DetectError> {
    check_compatible(golden, suspect)?;
    let (w, h) = (golden.width, golden.height);
    let m = max_shift_px as i32;
    let g: Vec<f64> = golden.pixels.iter().map(|v| *v as f64).collect();
    let s: Vec<f64> = suspect.pixels.iter().map(|v| *v as f64).collect();
    let shifts: Vec<(i32, i32)> = (-m..=m)
        .flat_map(|dy| (-m..=m).map(move |dx| (dx, dy)))
        .collect();
    let scores: Vec<f64> = shifts
        .par_iter()
        .map(|&(dx, dy)| ncc(&g, &s, w, h, dx, dy))
        .collect();
    let mut best = 0;
    for i in 1..shifts.len() {
        let key = |j: usize| {
            (
                shifts[j].0.abs() + shifts[j].1.abs(),
                shifts[j].1,
                shifts[j].0,
            )
        };
        if scores[i] > scores[best] || (scores[i] == scores[best] && key(i) < key(best)) {
            best = i;
        }
    }
    let (dx, dy) = shifts[best];

    // aligned(x, y) = suspect(x + dx, y + dy)
    let fill = median(&s).round() as u16;
    let mut pixels = vec![fill; w * h];
    let (sc0, sc1) = overlap(w, dx);
    let (sr0, sr1) = overlap(h, dy);
    let valid = PixelWindow {
        c0: (sc0 as i64 - dx as i64) as usize,
        r0: (sr0 as i64 - dy as i64) as usize,
        c1: (sc1 as i64 - dx as i64) as usize,
        r1: (sr1 as i64 - dy as i64) as usize,
    };
    for r in valid.r0..valid.r1 {
        let sr = (r as i64 + dy as i64) as usize;
        for c in valid.c0..valid.c1 {
            pixels[r * w + c] = suspect.pixels[sr * w + (c as i64 + dx as i64) as usize];
        }
    }
    let mut meta = suspect.meta;
    meta.scan.region.x0 = golden.meta.scan.region.x0;
    meta.scan.region.y0 = golden.meta.scan.region.y0;
    Ok(Registration {
        shift: (dx, dy),
        aligned: Image16 {
            width: w,
            height: h,
            pixels,
            meta,
        },
        valid,
        score: scores[best],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optics::{ImageKind, Region, ScanParams};

    fn textured(w: usize, h: usize, ox: i64, oy: i64) -> Image16 {
        let f = |x: i64, y: i64| {
            let x = x as f64;
            let y = y as f64;
            (x * 0.31).sin() * (y * 0.17).cos()
                + (x * y * 0.013).sin() * 0.5
                + ((x - 2.0 * y) * 0.07).cos()
        };
        let values: Vec<f64> = (0..h as i64)
            .flat_map(|r| (0..w as i64).map(move |c| f(c - ox, r - oy)))
            .collect();
        let scan = ScanParams::over(Region {
            x0: 0.0,
            y0: 0.0,
            width: w as f64 * 0.25,
            height: h as f64 * 0.25,
        });
        Image16::quantize(&values, w, h, -3.0, 3.0, ImageKind::Llsi, scan)
    }

    #[test]
    fn identical_images_register_at_zero() {
        let a = textured(64, 48, 0, 0);
        let r = register_images(&a, &a, 5).unwrap();
        assert_eq!(r.shift, (0, 0));
        assert_eq!(r.aligned.pixels, a.pixels);
        assert_eq!(r.valid.area(), 64 * 48);
    }

    #[test]
    fn recovers_constructed_shift() {
        let g = textured(64, 48, 0, 0);
        let s = textured(64, 48, 3, -2);
        let r = register_images(&g, &s, 10).unwrap();
        assert_eq!(r.shift, (3, -2));
        for row in r.valid.r0..r.valid.r1 {
            for col in r.valid.c0..r.valid.c1 {
                assert_eq!(r.aligned.get(col, row), g.get(col, row));
            }
        }
        assert_eq!(
            r.valid,
            PixelWindow {
                c0: 0,
                r0: 2,
                c1: 61,
                r1: 48
            }
        );
    }

    #[test]
    fn rejects_mismatch() {
        let a = textured(64, 48, 0, 0);
        let b = textured(48, 64, 0, 0);
        assert!(matches!(
            register_images(&a, &b, 3),
            Err(DetectError::Mismatch(_))
        ));
        let mut c = a.clone();
        c.meta.scan.pixel_pitch_um = 0.3;
        assert!(register_images(&a, &c, 3).is_err());
    }
}
