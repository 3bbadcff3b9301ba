use llsi_core::designs;
use llsi_core::detect::*;
use llsi_core::fabric::{build_floorplan, FabricConfig, Family, DEFAULT_TILE_PITCH_UM};
use llsi_core::logic::DeviceResponseTable;
use llsi_core::optics::*;
use llsi_core::rng::CounterRng;
use llsi_core::snapshot::llsi_snapshot;
use llsi_core::trojan::{apply_patch, builtin};
use llsi_core::DetectError;

fn gaussian_field(n: usize, seed: u64) -> Vec<f64> {
    let rng = CounterRng::new(seed);
    (0..n).map(|i| rng.normal(i as u64, 0)).collect()
}

fn scan_over(w: f64, h: f64) -> ScanParams {
    ScanParams::over(Region {
        x0: 0.0,
        y0: 0.0,
        width: w,
        height: h,
    })
}

fn real(w: usize, h: usize, data: Vec<f64>) -> RealImage {
    RealImage::new(w, h, data, DEFAULT_PIXEL_PITCH_UM, (0.0, 0.0))
}

#[test]
fn normalize_is_affine_invariant() {
    let scan = scan_over(64.0, 48.0);
    let (w, h) = scan.dims();
    let v: Vec<f64> = gaussian_field(w * h, 4)
        .iter()
        .enumerate()
        .map(|(i, n)| ((i % w) as f64 * 0.2).sin() + 0.3 * n)
        .collect();
    let a = Image16::quantize_full(&v, w, h, 0.0, ImageKind::Llsi, scan);
    let t: Vec<f64> = v.iter().map(|x| 2.0 * x + 100.0).collect();
    let b = Image16::quantize_full(&t, w, h, 0.0, ImageKind::Llsi, scan);
    let (na, nb) = (normalize(&a).unwrap(), normalize(&b).unwrap());
    let worst = na
        .data
        .iter()
        .zip(&nb.data)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    assert!(worst < 1e-9, "{worst}");

    let flat = Image16::quantize(&vec![3.0; w * h], w, h, 0.0, 5.0, ImageKind::Llsi, scan);
    assert!(matches!(normalize(&flat), Err(DetectError::ConstantImage)));
}

#[test]
fn normalized_gaussian_field_is_standard() {
    let scan = scan_over(128.0, 128.0);
    let (w, h) = scan.dims();
    let v: Vec<f64> = gaussian_field(w * h, 8)
        .iter()
        .map(|x| 7.0 + 0.5 * x)
        .collect();
    let n = normalize(&Image16::quantize_full(
        &v,
        w,
        h,
        0.0,
        ImageKind::Llsi,
        scan,
    ))
    .unwrap();
    let mean = n.data.iter().sum::<f64>() / n.data.len() as f64;
    let sd = (n.data.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n.data.len() as f64).sqrt();
    assert!(median(&n.data).abs() < 0.02);
    assert!((sd - 1.0).abs() < 0.02, "{sd}");
}

#[test]
fn robust_sigma_on_gaussian_and_contaminated_fields() {
    let n = 1_000_000;
    let clean = real(1000, 1000, gaussian_field(n, 21));
    let s = estimate_noise_sigma(&clean).unwrap();
    assert!((s - 1.0).abs() < 0.02, "{s}");

    let mut dirty = clean.clone();
    for i in (0..n).step_by(100) {
        dirty.data[i] = if i % 200 == 0 { 100.0 } else { -100.0 };
    }
    let s = estimate_noise_sigma(&dirty).unwrap();
    assert!((s - 1.0).abs() < 0.05, "{s}");
}

fn textured(seed: u64, dx: i32, dy: i32, snr: f64) -> Image16 {
    // A fabric reflectance image scanned with the origin moved by (−dx, −dy) pixels, so that
    // suspect(x, y) = golden(x − dx, y − dy), plus white noise at the requested SNR.
    let cfg = FabricConfig::blank("reg", Family::SeriesK, 3, 3, 1);
    let fp = build_floorplan(&cfg, DEFAULT_TILE_PITCH_UM);
    let p = DEFAULT_PIXEL_PITCH_UM;
    let mut scan = scan_over(40.0, 40.0);
    scan.region.x0 = 10.0 - dx as f64 * p;
    scan.region.y0 = 10.0 - dy as f64 * p;
    let base = render_reflectance(&fp, &scan).unwrap();
    let v = base.dequantized();
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    let sd = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / v.len() as f64).sqrt();
    let rng = CounterRng::new(seed);
    let noisy: Vec<f64> = v
        .iter()
        .enumerate()
        .map(|(i, x)| x + sd / snr * rng.normal(i as u64, 1))
        .collect();
    Image16::quantize_full(&noisy, base.width, base.height, 0.0, ImageKind::Llsi, scan)
}

#[test]
fn registration_recovers_shifts_at_snr_five() {
    let mut rng = 0x1234_5678_u64;
    for trial in 0..25 {
        rng = llsi_core::rng::mix64(rng);
        let dx = (rng % 21) as i32 - 10;
        let dy = ((rng >> 8) % 21) as i32 - 10;
        let g = textured(2 * trial, 0, 0, 5.0);
        let s = textured(2 * trial + 1, dx, dy, 5.0);
        let r = register_images(&g, &s, 10).unwrap();
        assert_eq!(r.shift, (dx, dy), "trial {trial}");
    }
}

#[test]
fn overlay_tints_exactly_the_thresholded_pixels() {
    let scan = scan_over(10.0, 10.0);
    let (w, h) = scan.dims();
    let base = Image16::quantize(
        &(0..w * h).map(|i| i as f64).collect::<Vec<_>>(),
        w,
        h,
        0.0,
        (w * h) as f64,
        ImageKind::Reflectance,
        scan,
    );
    let params = AnalysisParams::for_scan(&scan);
    let zero = real(w, h, vec![0.0; w * h]);
    let gray = render_overlay(&base, &zero, 1.0, &params).unwrap();
    for (i, code) in base.pixels.iter().enumerate() {
        let g = (code >> 8) as u8;
        assert_eq!(gray.data[3 * i..3 * i + 3], [g, g, g]);
    }

    let mut d = vec![0.0; w * h];
    for r in 10..15 {
        for c in 20..25 {
            d[r * w + c] = 10.0;
        }
    }
    d[3] = -6.0;
    d[4] = 4.9;
    let o = render_overlay(&base, &real(w, h, d.clone()), 1.0, &params).unwrap();
    for (i, v) in d.iter().enumerate() {
        let px = o.pixel(i % w, i / w);
        assert_eq!(px == POSITIVE_TINT, *v > 5.0, "pixel {i}");
        assert_eq!(px == NEGATIVE_TINT, *v < -5.0, "pixel {i}");
    }
    assert!(o
        .to_ppm_bytes()
        .starts_with(format!("P6\n{w} {h}\n255\n").as_bytes()));
    assert!(render_overlay(&base, &real(2, 2, vec![0.0; 4]), 1.0, &params).is_err());
}

struct Scene {
    golden: FabricConfig,
    suspect: FabricConfig,
    scan: ScanParams,
}

impl Scene {
    fn new(demo: &str, cols: usize, rows: usize, trojan: &str, seed: u64) -> Scene {
        let golden = designs::demo(demo, Family::SeriesK, cols, rows).unwrap();
        let spec = builtin(&golden, trojan, seed).unwrap();
        let suspect = apply_patch(&golden, &spec).unwrap();
        let fp = build_floorplan(&golden, DEFAULT_TILE_PITCH_UM);
        let e = fp.extent();
        Scene {
            golden,
            suspect,
            scan: scan_over(e.width(), e.height()),
        }
    }

    fn render(cfg: &FabricConfig, scan: &ScanParams, seed: u64) -> Image16 {
        let fp = build_floorplan(cfg, DEFAULT_TILE_PITCH_UM);
        let noise = NoiseParams::with_seed(seed);
        llsi_snapshot(cfg, &DeviceResponseTable::default(), &fp, scan, &noise).unwrap()
    }

    fn compare(&self, seed: u64, suspect: bool) -> DiffReport {
        let g = Scene::render(&self.golden, &self.scan, 2 * seed + 1);
        let other = if suspect { &self.suspect } else { &self.golden };
        let s = Scene::render(other, &self.scan, 2 * seed + 2);
        let fp = build_floorplan(&self.golden, DEFAULT_TILE_PITCH_UM);
        compare_snapshots(
            &g,
            &s,
            &fp,
            &self.scan,
            &AnalysisParams::for_scan(&self.scan),
        )
        .unwrap()
    }
}

fn mapped(r: &DiffReport) -> Vec<String> {
    r.components
        .iter()
        .flat_map(|c| c.cells.iter().map(|x| x.to_string()))
        .collect()
}

#[test]
fn init_change_is_found_at_the_patched_lut() {
    let scene = Scene::new(
        "lut-init-pair",
        5,
        5,
        "init-flip:SLICE_X1Y1.D6LUT:0x00008000:0x00010000",
        0,
    );
    for seed in 0..3 {
        let r = scene.compare(seed, true);
        assert_eq!(r.verdict, Verdict::Tampered);
        assert!(mapped(&r).contains(&"SLICE_X1Y1.D6LUT".to_string()));
        assert_eq!(scene.compare(seed, false).verdict, Verdict::Clean);
    }
}

#[test]
fn moved_route_thru_marks_both_slices() {
    let scene = Scene::new(
        "route-thru",
        6,
        4,
        "route-thru-move:SLICE_X1Y1.C6LUT:SLICE_X4Y0.C6LUT",
        0,
    );
    let r = scene.compare(0, true);
    let slices = |s: &str| {
        r.components
            .iter()
            .filter(|c| c.cells.iter().any(|x| x.slice == s))
            .count()
    };
    assert!(slices("SLICE_X1Y1") >= 1 && slices("SLICE_X4Y0") >= 1);
}

#[test]
fn reports_are_deterministic_and_well_formed() {
    let scene = Scene::new("ff-toggle-pair", 6, 4, "ff-toggle:SLICE_X0Y1.AFF", 0);
    let (a, b) = (scene.compare(1, true), scene.compare(1, true));
    assert_eq!(a.to_text(), b.to_text());
    assert!(mapped(&a).contains(&"SLICE_X0Y1.AFF".to_string()));
    let text = a.to_text();
    let keys: Vec<&str> = text.lines().map(|l| l.split(':').next().unwrap()).collect();
    assert_eq!(
        keys[..5],
        [
            "verdict",
            "shift-px",
            "noise-sigma",
            "intensity-match",
            "threshold-k"
        ]
    );
    for c in &a.components {
        assert!(c.area_px >= a.params.min_area_px && c.peak_z.abs() > a.params.k);
    }
    let line = text.lines().find(|l| l.starts_with("component:")).unwrap();
    let fields: Vec<&str> = line
        .split_whitespace()
        .skip(1)
        .map(|f| f.split('=').next().unwrap())
        .collect();
    assert_eq!(
        fields,
        ["centroid-um", "area-px", "peak-z", "polarity", "cells"]
    );
}

fn crop(img: &Image16, c0: usize, r0: usize, w: usize, h: usize) -> Image16 {
    let mut meta = img.meta;
    let p = meta.scan.pixel_pitch_um;
    meta.scan.region.x0 += c0 as f64 * p;
    meta.scan.region.y0 += r0 as f64 * p;
    meta.scan.region.width = w as f64 * p;
    meta.scan.region.height = h as f64 * p;
    let pixels = (r0..r0 + h)
        .flat_map(|r| (c0..c0 + w).map(move |c| img.get(c, r)))
        .collect();
    Image16 {
        width: w,
        height: h,
        pixels,
        meta,
    }
}

#[test]
fn verdict_survives_common_affine_and_translation() {
    let scene = Scene::new("ff-toggle-pair", 6, 4, "ff-toggle:SLICE_X0Y1.AFF", 3);
    let g = Scene::render(&scene.golden, &scene.scan, 11);
    let s = Scene::render(&scene.suspect, &scene.scan, 12);
    let fp = build_floorplan(&scene.golden, DEFAULT_TILE_PITCH_UM);
    let params = AnalysisParams::for_scan(&scene.scan);
    let base = compare_snapshots(&g, &s, &fp, &scene.scan, &params).unwrap();

    let affine = |img: &Image16| {
        let mut out = img.clone();
        out.meta.scale *= 3.5;
        out.meta.offset = 2.0 * out.meta.offset - 40.0;
        out
    };
    let r = compare_snapshots(&affine(&g), &affine(&s), &fp, &scene.scan, &params).unwrap();
    assert_eq!(r.verdict, base.verdict);
    assert_eq!(mapped(&r), mapped(&base));

    let (w, h) = (g.width - 40, g.height - 40);
    let shifted = |img: &Image16| crop(img, 7, 3, w, h);
    let anchor = crop(&g, 20, 20, w, h);
    let moved = crop(&s, 20, 20, w, h);
    let a = compare_snapshots(&anchor, &moved, &fp, &anchor.meta.scan, &params).unwrap();
    let b_scan = shifted(&g).meta.scan;
    let b = compare_snapshots(&shifted(&g), &shifted(&s), &fp, &b_scan, &params).unwrap();
    assert_eq!(a.verdict, b.verdict);
    assert_eq!(b.shift_px, (0, 0));
    assert!(mapped(&b).contains(&"SLICE_X0Y1.AFF".to_string()));
}
