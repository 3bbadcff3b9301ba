use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use super::scan::{Modulation, Region, ScanParams};
use crate::error::OpticsError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImageKind {
    Llsi,
    Reflectance,
}

impl fmt::Display for ImageKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ImageKind::Llsi => "llsi",
            ImageKind::Reflectance => "reflectance",
        })
    }
}

impl FromStr for ImageKind {
    type Err = OpticsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "llsi" => Ok(ImageKind::Llsi),
            "reflectance" => Ok(ImageKind::Reflectance),
            _ => Err(OpticsError::Format(format!("unknown image kind `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImageMeta {
    pub kind: ImageKind,
    pub scan: ScanParams,
    /// Physical value of one code step.
    pub scale: f64,
    /// Physical value of code 0.
    pub offset: f64,
}

/// 16-bit raster with the affine map back to physical signal units.
#[derive(Debug, Clone, PartialEq)]
pub struct Image16 {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u16>,
    pub meta: ImageMeta,
}

impl Image16 {
    /// Affinely maps `values` from `[lo, hi]` onto the full code range. A degenerate range
    /// maps everything to code 0 with `offset = lo`.
    pub fn quantize(
        values: &[f64],
        width: usize,
        height: usize,
        lo: f64,
        hi: f64,
        kind: ImageKind,
        scan: ScanParams,
    ) -> Image16 {
        assert_eq!(values.len(), width * height);
        let span = hi - lo;
        let scale = if span > 0.0 && span.is_finite() {
            span / 65535.0
        } else {
            1.0 / 65535.0
        };
        let pixels = values
            .iter()
            .map(|v| ((v - lo) / scale).round().clamp(0.0, 65535.0) as u16)
            .collect();
        Image16 {
            width,
            height,
            pixels,
            meta: ImageMeta {
                kind,
                scan,
                scale,
                offset: lo,
            },
        }
    }

    /// Quantizes over the value range widened by `margin` on both sides.
    pub fn quantize_full(
        values: &[f64],
        width: usize,
        height: usize,
        margin: f64,
        kind: ImageKind,
        scan: ScanParams,
    ) -> Image16 {
        let (mut lo, mut hi) = values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
                (a.min(*v), b.max(*v))
            });
        if values.is_empty() {
            (lo, hi) = (0.0, 0.0);
        }
        Image16::quantize(values, width, height, lo - margin, hi + margin, kind, scan)
    }

    pub fn dequantize_px(&self, code: u16) -> f64 {
        code as f64 * self.meta.scale + self.meta.offset
    }

    pub fn dequantized(&self) -> Vec<f64> {
        self.pixels.iter().map(|c| self.dequantize_px(*c)).collect()
    }

    pub fn get(&self, col: usize, row: usize) -> u16 {
        self.pixels[row * self.width + col]
    }

    /// Checks that the raster size agrees with the recorded scan geometry.
    pub fn check(&self) -> Result<(), OpticsError> {
        if self.pixels.len() != self.width * self.height {
            return Err(OpticsError::Format(
                "pixel count does not match dimensions".into(),
            ));
        }
        if self.meta.scan.dims() != (self.width, self.height) {
            return Err(OpticsError::Format(format!(
                "{}x{} raster does not match scan region {}x{} at pitch {}",
                self.width,
                self.height,
                self.meta.scan.region.width,
                self.meta.scan.region.height,
                self.meta.scan.pixel_pitch_um
            )));
        }
        Ok(())
    }

    /// Binary 16-bit PGM (`P5`, maxval 65535, big-endian samples) with the metadata as
    /// `#llsi-*` header comments.
    pub fn write_pgm<W: Write>(&self, mut w: W) -> Result<(), OpticsError> {
        let m = &self.meta;
        let s = &m.scan;
        let mut head = String::from("P5\n");
        let mut kv = |k: &str, v: String| {
            head.push_str(&format!("#llsi-{k}={v}\n"));
        };
        kv("kind", m.kind.to_string());
        kv("scale", m.scale.to_string());
        kv("offset", m.offset.to_string());
        kv("pitch-um", s.pixel_pitch_um.to_string());
        kv(
            "region-um",
            format!(
                "{},{},{},{}",
                s.region.x0, s.region.y0, s.region.width, s.region.height
            ),
        );
        kv("wavelength-um", s.wavelength_um.to_string());
        kv("na", s.numerical_aperture.to_string());
        kv("dwell-ms", s.dwell_ms_per_px.to_string());
        kv("bandpass-hz", s.bandpass_hz.to_string());
        kv("mod-offset-v", s.modulation.offset_v.to_string());
        kv("mod-vpp", s.modulation.peak_to_peak_v.to_string());
        kv("mod-freq-hz", s.modulation.freq_hz.to_string());
        head.push_str(&format!("{} {}\n65535\n", self.width, self.height));
        w.write_all(head.as_bytes())?;
        let mut buf = Vec::with_capacity(self.pixels.len() * 2);
        for p in &self.pixels {
            buf.extend_from_slice(&p.to_be_bytes());
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn to_pgm_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write_pgm(&mut out).expect("writing to memory");
        out
    }

    pub fn read_pgm<R: Read>(mut r: R) -> Result<Image16, OpticsError> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        Image16::from_pgm_bytes(&bytes)
    }

    pub fn from_pgm_bytes(bytes: &[u8]) -> Result<Image16, OpticsError> {
        let fmt_err = |m: &str| OpticsError::Format(m.to_string());
        let mut pos = 0;
        let mut tokens: Vec<String> = Vec::new();
        let mut comments: Vec<(String, String)> = Vec::new();
        // Header: magic, width, height, maxval, interleaved with comments.
        while tokens.len() < 4 {
            match bytes.get(pos) {
                None => return Err(fmt_err("truncated header")),
                Some(b'#') => {
                    let end = bytes[pos..]
                        .iter()
                        .position(|b| *b == b'\n')
                        .map(|e| pos + e)
                        .ok_or_else(|| fmt_err("unterminated comment"))?;
                    let line = std::str::from_utf8(&bytes[pos + 1..end])
                        .map_err(|_| fmt_err("non-UTF-8 comment"))?;
                    if let Some((k, v)) = line.strip_prefix("llsi-").and_then(|l| l.split_once('='))
                    {
                        comments.push((k.to_string(), v.trim().to_string()));
                    }
                    pos = end + 1;
                }
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(_) => {
                    let start = pos;
                    while pos < bytes.len()
                        && !bytes[pos].is_ascii_whitespace()
                        && bytes[pos] != b'#'
                    {
                        pos += 1;
                    }
                    tokens.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
                }
            }
        }
        if tokens[0] != "P5" {
            return Err(fmt_err("not a binary graymap (P5)"));
        }
        let width: usize = tokens[1].parse().map_err(|_| fmt_err("bad width"))?;
        let height: usize = tokens[2].parse().map_err(|_| fmt_err("bad height"))?;
        if tokens[3] != "65535" {
            return Err(fmt_err("maxval must be 65535"));
        }
        // Exactly one whitespace byte separates the header from the samples.
        pos += 1;
        let need = width * height * 2;
        let data = bytes
            .get(pos..pos + need)
            .ok_or_else(|| fmt_err("truncated pixel data"))?;
        let pixels = data
            .chunks_exact(2)
            .map(|c| u16::from_be_bytes([c[0], c[1]]))
            .collect();

        let get = |k: &str| -> Result<&str, OpticsError> {
            comments
                .iter()
                .find(|(key, _)| key == k)
                .map(|(_, v)| v.as_str())
                .ok_or_else(|| OpticsError::Format(format!("missing #llsi-{k} header")))
        };
        let num = |k: &str| -> Result<f64, OpticsError> {
            get(k)?
                .parse()
                .map_err(|_| OpticsError::Format(format!("bad #llsi-{k} value")))
        };
        let region: Vec<f64> = get("region-um")?
            .split(',')
            .map(|v| v.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| fmt_err("bad #llsi-region-um value"))?;
        let [x0, y0, rw, rh] = region[..] else {
            return Err(fmt_err("#llsi-region-um needs four values"));
        };
        let scan = ScanParams {
            pixel_pitch_um: num("pitch-um")?,
            region: Region {
                x0,
                y0,
                width: rw,
                height: rh,
            },
            wavelength_um: num("wavelength-um")?,
            numerical_aperture: num("na")?,
            dwell_ms_per_px: num("dwell-ms")?,
            bandpass_hz: num("bandpass-hz")?,
            modulation: Modulation {
                offset_v: num("mod-offset-v")?,
                peak_to_peak_v: num("mod-vpp")?,
                freq_hz: num("mod-freq-hz")?,
            },
        };
        let img = Image16 {
            width,
            height,
            pixels,
            meta: ImageMeta {
                kind: get("kind")?.parse()?,
                scan,
                scale: num("scale")?,
                offset: num("offset")?,
            },
        };
        img.check()?;
        Ok(img)
    }
}
