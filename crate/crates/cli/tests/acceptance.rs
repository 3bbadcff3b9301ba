//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use llsi_core::designs;
use llsi_core::detect::{compare_snapshots, register_images, AnalysisParams, DiffReport, Verdict};
use llsi_core::fabric::{
    build_floorplan, CellRef, DeviceKind, FabricConfig, Family, FloorPlan, DEFAULT_TILE_PITCH_UM,
};
use llsi_core::logic::{lut_eval, lut_mux_states, DeviceResponseTable, Emitter, EmitterMap};
use llsi_core::optics::*;
use llsi_core::rng::CounterRng;
use llsi_core::snapshot::{emitters_for, llsi_snapshot};
use llsi_core::trojan::{apply_patch, builtin, check_dormant};
use rayon::prelude::*;

const SEEDS: u64 = 20;

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn region(x0: f64, y0: f64, width: f64, height: f64) -> ScanParams {
    ScanParams::over(Region {
        x0,
        y0,
        width,
        height,
    })
}

fn whole(fp: &FloorPlan) -> ScanParams {
    let e = fp.extent();
    region(e.x0, e.y0, e.width(), e.height())
}

fn snapshot(cfg: &FabricConfig, fp: &FloorPlan, scan: &ScanParams, seed: u64) -> Image16 {
    llsi_snapshot(
        cfg,
        &DeviceResponseTable::default(),
        fp,
        scan,
        &NoiseParams::with_seed(seed),
    )
    .unwrap()
}

/// Golden design, its floorplan, and a suspect derived by a builtin Trojan.
struct Scene {
    golden: FabricConfig,
    suspect: FabricConfig,
    fp: FloorPlan,
}

impl Scene {
    fn new(demo: &str, cols: usize, rows: usize, trojan: Option<(&str, u64)>) -> Scene {
        let golden = designs::demo(demo, Family::SeriesK, cols, rows).unwrap();
        let suspect = match trojan {
            Some((name, seed)) => {
                apply_patch(&golden, &builtin(&golden, name, seed).unwrap()).unwrap()
            }
            None => golden.clone(),
        };
        let fp = build_floorplan(&golden, DEFAULT_TILE_PITCH_UM);
        Scene {
            golden,
            suspect,
            fp,
        }
    }

    fn compare(&self, scan: &ScanParams, seed: u64) -> DiffReport {
        let g = snapshot(&self.golden, &self.fp, scan, 2 * seed + 1);
        let s = snapshot(&self.suspect, &self.fp, scan, 2 * seed + 2);
        compare_snapshots(&g, &s, &self.fp, scan, &AnalysisParams::for_scan(scan)).unwrap()
    }
}

fn components_with(report: &DiffReport, pred: impl Fn(&CellRef) -> bool) -> Vec<usize> {
    report
        .components
        .iter()
        .enumerate()
        .filter(|(_, c)| c.cells.iter().any(&pred))
        .map(|(i, _)| i)
        .collect()
}

fn in_slice(cell: &CellRef, slice: &str) -> bool {
    cell.to_string().starts_with(&format!("{slice}."))
}

fn lut_oracle() -> Outcome {
    let t = Instant::now();
    let rng = CounterRng::new(1);
    let mut mismatches = 0;
    let mut cases = 0;
    let bits = |word: u64, n: usize| (0..n).map(|i| word >> i & 1 == 1).collect::<Vec<bool>>();
    for trial in 0..10_000u64 {
        let init = bits(rng.bits(trial, 0, 4), 16);
        for idx in 0..16u64 {
            let inputs = bits(idx, 4);
            let tree = lut_mux_states(&init, &inputs).unwrap();
            let direct = init[idx as usize];
            mismatches += (tree.root() != lut_eval(&init, &inputs).unwrap()) as usize;
            mismatches += (tree.root() != direct) as usize;
            cases += 1;
        }
        let init = bits(rng.bits(trial, 0, 6), 64);
        let idx = rng.bits(trial, 1, 6) % 64;
        let inputs = bits(idx, 6);
        let root = lut_mux_states(&init, &inputs).unwrap().root();
        mismatches += (root != lut_eval(&init, &inputs).unwrap()) as usize;
        mismatches += (root != init[idx as usize]) as usize;
        cases += 1;
    }
    let dt = t.elapsed();
    outcome(
        mismatches == 0 && dt < Duration::from_secs(10),
        format!(
            "{cases} cases, {mismatches} mismatches, {:.2} s",
            dt.as_secs_f64()
        ),
    )
}

fn point(x: f64, y: f64, amplitude: f64) -> Emitter {
    Emitter {
        x,
        y,
        kind: DeviceKind::PassTransistor,
        conducting: true,
        value: true,
        amplitude,
        origin: CellRef::switchbox(0, 0),
        device: 0,
    }
}

fn psf_energy_and_linearity() -> Outcome {
    let rng = CounterRng::new(2);
    let quiet = NoiseParams::noiseless();
    let energy = |scan: &ScanParams, e: Emitter| {
        let expected = e.amplitude * scan.modulation_gain();
        let em = EmitterMap { emitters: vec![e] };
        let float: f64 = llsi_signal(&em, scan, &quiet, 0..scan.dims().1)
            .unwrap()
            .iter()
            .sum();
        let file: f64 = render_llsi(&em, scan, &quiet)
            .unwrap()
            .dequantized()
            .iter()
            .sum();
        (
            (float - expected).abs() / expected,
            (file - expected).abs() / expected,
        )
    };
    let (mut float_worst, mut coarse_file_worst, mut fine_file_worst) = (0.0f64, 0.0f64, 0.0f64);
    for i in 0..20u64 {
        let mut scan = region(0.0, 0.0, 16.0, 16.0);
        scan.modulation.peak_to_peak_v = 0.15 + 0.05 * rng.uniform(i, 0, 0);
        let u = |k| rng.uniform(i, k, 1);
        let e = point(4.0 + 8.0 * u(0), 4.0 + 8.0 * u(1), 0.05 + 3.0 * u(2));
        let (f, q) = energy(&scan, e.clone());
        float_worst = float_worst.max(f);
        coarse_file_worst = coarse_file_worst.max(q);
        if i < 5 {
            let mut fine = region(0.0, 0.0, 8.0, 8.0);
            fine.pixel_pitch_um = 0.02;
            let e = point(3.0 + 2.0 * u(0), 3.0 + 2.0 * u(1), e.amplitude);
            let (f, q) = energy(&fine, e);
            float_worst = float_worst.max(f);
            fine_file_worst = fine_file_worst.max(q);
        }
    }

    let scan = region(0.0, 0.0, 16.0, 16.0);
    let mut lsb_violations = 0;
    for pair in 0..24u64 {
        let set = |stream: u64| {
            let n = 1 + rng.bits(pair, stream, 7) % 12;
            EmitterMap {
                emitters: (0..n)
                    .map(|k| {
                        let u = |j| rng.uniform(pair, 16 * k + j, stream);
                        point(2.0 + 12.0 * u(0), 2.0 + 12.0 * u(1), 0.05 + 2.0 * u(2))
                    })
                    .collect(),
            }
        };
        let (a, b) = (set(8), set(9));
        let mut union = a.clone();
        union.emitters.extend(b.emitters.iter().cloned());
        let rows = 0..scan.dims().1;
        let sa = llsi_signal(&a, &scan, &quiet, rows.clone()).unwrap();
        let sb = llsi_signal(&b, &scan, &quiet, rows).unwrap();
        let u = render_llsi(&union, &scan, &quiet).unwrap();
        let lsb = u.meta.scale;
        lsb_violations += u
            .dequantized()
            .iter()
            .enumerate()
            .filter(|(i, v)| (*v - sa[*i] - sb[*i]).abs() > lsb)
            .count();
    }
    outcome(
        float_worst < 1e-6 && fine_file_worst < 1e-6 && lsb_violations == 0,
        format!(
            "energy rel. err: render {float_worst:.1e}, 16-bit file at 0.02 µm {fine_file_worst:.1e} \
             (at 0.25 µm {coarse_file_worst:.1e}, 16-bit floor); linearity: {lsb_violations} pixels > 1 LSB in 24 pairs"
        ),
    )
}

fn registration() -> Outcome {
    let cfg = designs::host(Family::SeriesK, 3, 3).unwrap();
    let fp = build_floorplan(&cfg, DEFAULT_TILE_PITCH_UM);
    let em = emitters_for(&cfg, &DeviceResponseTable::default(), &fp).unwrap();
    let p = DEFAULT_PIXEL_PITCH_UM;
    // Scene moved by (dx, dy) pixels, plus white noise at SNR 5 (signal sd / noise sd).
    let view = |dx: i32, dy: i32, seed: u64| {
        let scan = region(15.0 - dx as f64 * p, 15.0 - dy as f64 * p, 40.0, 40.0);
        let clean = llsi_signal(&em, &scan, &NoiseParams::noiseless(), 0..scan.dims().1).unwrap();
        let n = clean.len() as f64;
        let mean = clean.iter().sum::<f64>() / n;
        let sd = (clean.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
        let rng = CounterRng::new(seed);
        let noisy: Vec<f64> = clean
            .iter()
            .enumerate()
            .map(|(i, v)| v + sd / 5.0 * rng.normal(i as u64, 0))
            .collect();
        let (w, h) = scan.dims();
        Image16::quantize_full(&noisy, w, h, 0.0, ImageKind::Llsi, scan)
    };
    let rng = CounterRng::new(3);
    let mut exact = 0;
    for trial in 0..100u64 {
        let dx = (rng.bits(trial, 0, 0) % 21) as i32 - 10;
        let dy = (rng.bits(trial, 1, 0) % 21) as i32 - 10;
        let r = register_images(&view(0, 0, 2 * trial), &view(dx, dy, 2 * trial + 1), 10).unwrap();
        exact += (r.shift == (dx, dy)) as usize;
    }
    outcome(exact == 100, format!("{exact}/100 exact at SNR 5"))
}

fn init_scene_scan() -> ScanParams {
    // 128 µm square at 0.25 µm/px: 512x512.
    region(0.0, 0.0, 128.0, 128.0)
}

const PATCHED_LUT: &str = "SLICE_X1Y1.D6LUT";

fn null_result() -> Outcome {
    let scene = Scene::new("lut-init-pair", 5, 5, None);
    let scan = init_scene_scan();
    let clean = (0..SEEDS)
        .into_par_iter()
        .filter(|s| scene.compare(&scan, 100 + s).verdict == Verdict::Clean)
        .count();
    outcome(clean == SEEDS as usize, format!("{clean}/{SEEDS} CLEAN"))
}

fn init_patch() -> Outcome {
    let scene = Scene::new(
        "lut-init-pair",
        5,
        5,
        Some((&format!("init-flip:{PATCHED_LUT}:0x00008000:0x00010000"), 0)),
    );
    let scan = init_scene_scan();
    assert_eq!(scan.dims(), (512, 512));
    let runs: Vec<(bool, Duration)> = (0..SEEDS)
        .into_par_iter()
        .map(|seed| {
            let t = Instant::now();
            let r = scene.compare(&scan, seed);
            let located = !components_with(&r, |c| c.to_string() == PATCHED_LUT).is_empty();
            (r.verdict == Verdict::Tampered && located, t.elapsed())
        })
        .collect();
    let hits = runs.iter().filter(|r| r.0).count();
    let slowest = runs.iter().map(|r| r.1).max().unwrap();
    outcome(
        hits >= 19 && slowest < Duration::from_secs(60),
        format!(
            "{hits}/{SEEDS} TAMPERED with {PATCHED_LUT} mapped; slowest run {:.2} s at 512x512",
            slowest.as_secs_f64()
        ),
    )
}

fn route_thru_move() -> Outcome {
    let scene = Scene::new(
        "route-thru",
        6,
        4,
        Some(("route-thru-move:SLICE_X1Y1.C6LUT:SLICE_X4Y0.C6LUT", 0)),
    );
    let scan = whole(&scene.fp);
    let ok = (0..SEEDS)
        .into_par_iter()
        .filter(|seed| {
            let r = scene.compare(&scan, *seed);
            let old = components_with(&r, |c| in_slice(c, "SLICE_X1Y1"));
            let new = components_with(&r, |c| in_slice(c, "SLICE_X4Y0"));
            let disjoint = old.iter().any(|a| new.iter().any(|b| a != b));
            r.verdict == Verdict::Tampered && disjoint
        })
        .count();
    outcome(
        ok == SEEDS as usize,
        format!("{ok}/{SEEDS} with separate components at SLICE_X1Y1 and SLICE_X4Y0"),
    )
}

fn ff_toggle() -> Outcome {
    let ff = "SLICE_X0Y1.AFF";
    let scene = Scene::new(
        "ff-toggle-pair",
        6,
        4,
        Some((&format!("ff-toggle:{ff}"), 0)),
    );
    let scan = whole(&scene.fp);
    let ok = (0..SEEDS)
        .into_par_iter()
        .filter(|s| {
            let r = scene.compare(&scan, *s);
            r.verdict == Verdict::Tampered
                && !components_with(&r, |c| c.to_string() == ff).is_empty()
        })
        .count();
    outcome(
        ok == SEEDS as usize,
        format!("{ok}/{SEEDS} TAMPERED with {ff} mapped"),
    )
}

fn trojan_benchmarks() -> Outcome {
    let golden = designs::host(Family::SeriesK, 6, 4).unwrap();
    let fp = build_floorplan(&golden, DEFAULT_TILE_PITCH_UM);
    let scan = whole(&fp);
    let params = AnalysisParams::for_scan(&scan);
    let mut parts = Vec::new();
    let mut pass = true;
    for name in ["trit-tc:6", "trit-ts:15"] {
        // (dormant, detected) per seed; non-dormant Trojans are not rendered.
        let runs: Vec<(bool, bool)> = (0..SEEDS)
            .into_par_iter()
            .map(|seed| {
                let spec = builtin(&golden, name, seed).unwrap();
                let suspect = apply_patch(&golden, &spec).unwrap();
                if check_dormant(&golden, &suspect).is_err() {
                    return (false, false);
                }
                let g = snapshot(&golden, &fp, &scan, 1000 + 2 * seed);
                let s = snapshot(&suspect, &fp, &scan, 1001 + 2 * seed);
                let r = compare_snapshots(&g, &s, &fp, &scan, &params).unwrap();
                (true, r.verdict == Verdict::Tampered)
            })
            .collect();
        let dormant = runs.iter().filter(|r| r.0).count();
        let detected = runs.iter().filter(|r| r.1).count();
        pass &= dormant == SEEDS as usize && detected == SEEDS as usize;
        parts.push(format!(
            "{name}: {detected}/{SEEDS} detected, {dormant}/{SEEDS} dormant"
        ));
    }
    outcome(pass, parts.join("; "))
}

fn noise_scaling() -> Outcome {
    let base = region(0.0, 0.0, 128.0, 128.0);
    let measured = |scan: &ScanParams, seed: u64| {
        let v = render_llsi(&EmitterMap::default(), scan, &NoiseParams::with_seed(seed))
            .unwrap()
            .dequantized();
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    let mut worst = 0.0f64;
    for (i, f) in [0.25, 0.5, 1.0, 2.0, 4.0].into_iter().enumerate() {
        let mut s = base;
        s.bandpass_hz = DEFAULT_BANDPASS_HZ * f;
        let want = DEFAULT_NOISE_FLOOR * f64::sqrt(f);
        worst = worst.max((measured(&s, 10 + i as u64) / want - 1.0).abs());
        let mut s = base;
        s.dwell_ms_per_px = DEFAULT_DWELL_MS * f;
        let want = DEFAULT_NOISE_FLOOR / f64::sqrt(f);
        worst = worst.max((measured(&s, 20 + i as u64) / want - 1.0).abs());
    }
    outcome(
        worst < 0.10,
        format!(
            "worst deviation {:.2}% over Δf and dwell ×0.25..×4",
            100.0 * worst
        ),
    )
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

fn invariances() -> Outcome {
    let clean = Scene::new("lut-init-pair", 5, 5, None);
    let flip = format!("init-flip:{PATCHED_LUT}:0x00008000:0x00010000");
    let tampered = Scene::new("lut-init-pair", 5, 5, Some((&flip, 0)));
    let rng = CounterRng::new(10);
    let margin = 10;
    let p = DEFAULT_PIXEL_PITCH_UM;
    let padded = region(
        -(margin as f64) * p,
        -(margin as f64) * p,
        75.0 + 2.0 * margin as f64 * p,
        75.0 + 2.0 * margin as f64 * p,
    );
    let (pw, ph) = padded.dims();
    let (w, h) = (pw - 2 * margin, ph - 2 * margin);
    let verdict = |scene: &Scene, g: &Image16, s: &Image16| {
        let scan = g.meta.scan;
        compare_snapshots(g, s, &scene.fp, &scan, &AnalysisParams::for_scan(&scan))
            .unwrap()
            .verdict
    };
    let (mut affine_same, mut shift_same, mut seen_tampered) = (0, 0, 0);
    for trial in 0..10u64 {
        let scene = if trial % 2 == 0 { &tampered } else { &clean };
        let big_g = snapshot(&scene.golden, &scene.fp, &padded, 500 + 2 * trial);
        let big_s = snapshot(&scene.suspect, &scene.fp, &padded, 501 + 2 * trial);
        let g = crop(&big_g, margin, margin, w, h);
        let s = crop(&big_s, margin, margin, w, h);
        let base = verdict(scene, &g, &s);
        seen_tampered += (base == Verdict::Tampered) as usize;

        // Same gain (either sign) and offset on both images, re-quantized.
        let u = |k| rng.uniform(trial, k, 0);
        let gain = (0.2 + 4.8 * u(0)) * if u(1) < 0.5 { -1.0 } else { 1.0 };
        let offset = 20.0 * u(2) - 10.0;
        let affine = |img: &Image16| {
            let v: Vec<f64> = img
                .dequantized()
                .iter()
                .map(|x| gain * x + offset)
                .collect();
            Image16::quantize_full(
                &v,
                img.width,
                img.height,
                0.0,
                ImageKind::Llsi,
                img.meta.scan,
            )
        };
        affine_same += (verdict(scene, &affine(&g), &affine(&s)) == base) as usize;

        let dx = (rng.bits(trial, 3, 0) % (2 * margin as u64 + 1)) as usize;
        let dy = (rng.bits(trial, 4, 0) % (2 * margin as u64 + 1)) as usize;
        let moved = verdict(
            scene,
            &crop(&big_g, dx, dy, w, h),
            &crop(&big_s, dx, dy, w, h),
        );
        shift_same += (moved == base) as usize;
    }
    outcome(
        affine_same == 10 && shift_same == 10,
        format!(
            "affine {affine_same}/10, translation {shift_same}/10 unchanged ({seen_tampered} tampered, {} clean baselines)",
            10 - seen_tampered
        ),
    )
}

fn llsi(dir: &Path, args: &[&str]) -> i32 {
    Command::new(env!("CARGO_BIN_EXE_llsi"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("spawn llsi")
        .status
        .code()
        .unwrap_or(-1)
}

fn reproducibility() -> Outcome {
    let tmp = tempfile::TempDir::new().unwrap();
    let d = tmp.path();
    let steps: &[&[&str]] = &[
        &[
            "fabricgen",
            "--demo",
            "route-thru",
            "--grid",
            "6x4",
            "--out",
            "g.cfg",
        ],
        &[
            "inject",
            "--in",
            "g.cfg",
            "--trojan",
            "trit-tc:6",
            "--seed",
            "4",
            "--out",
            "s.cfg",
        ],
        &[
            "render",
            "--in",
            "g.cfg",
            "--seed",
            "1",
            "--out-prefix",
            "g1",
        ],
        &[
            "render",
            "--in",
            "g.cfg",
            "--seed",
            "2",
            "--out-prefix",
            "g2",
        ],
        &[
            "render",
            "--in",
            "s.cfg",
            "--seed",
            "3",
            "--out-prefix",
            "s",
        ],
    ];
    for step in steps {
        if llsi(d, step) != 0 {
            return outcome(false, format!("setup step {step:?} failed"));
        }
    }
    let mut identical = 0;
    let mut codes = Vec::new();
    for (suspect, prefix) in [("g2.llsi.pgm", "clean"), ("s.llsi.pgm", "tampered")] {
        let first = llsi(
            d,
            &[
                "compare",
                "--golden",
                "g1.llsi.pgm",
                "--suspect",
                suspect,
                "--floorplan",
                "g.cfg",
                "--out-prefix",
                prefix,
            ],
        );
        let again = format!("{prefix}-replay");
        let second = llsi(
            d,
            &["replay", &format!("{prefix}.manifest"), "--out", &again],
        );
        codes.push((first, second));
        let same = [".report.txt", ".overlay.ppm"].iter().all(|ext| {
            let a = std::fs::read(d.join(format!("{prefix}{ext}"))).ok();
            let b = std::fs::read(d.join(format!("{again}{ext}"))).ok();
            a.is_some() && a == b
        });
        identical += (same && first == second) as usize;
    }
    outcome(
        identical == 2 && codes == [(0, 0), (2, 2)],
        format!("{identical}/2 replays byte-identical; exit codes {codes:?}"),
    )
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("lut mux tree equals lookup", lut_oracle),
        ("psf energy and linearity", psf_energy_and_linearity),
        ("registration at snr 5", registration),
        ("golden vs golden is clean", null_result),
        ("single lut init patch", init_patch),
        ("route-thru move", route_thru_move),
        ("ff toggle", ff_toggle),
        ("trit-tc:6 and trit-ts:15", trojan_benchmarks),
        ("noise scaling", noise_scaling),
        ("affine and translation invariance", invariances),
        ("compare replay reproducibility", reproducibility),
    ];
    let filter: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let n = i + 1;
        if !filter.is_empty()
            && !filter
                .iter()
                .any(|f| *f == n.to_string() || name.contains(f.as_str()))
        {
            continue;
        }
        let t = Instant::now();
        let o = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|_| outcome(false, "panicked"));
        failed += (!o.pass) as usize;
        println!(
            "{} {n:>2} {name}: {} [{:.1} s]",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            t.elapsed().as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
