mod manifest;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{ArgAction, Args, Parser, Subcommand};
use llsi_core::designs::{self, DEMO_NAMES};
use llsi_core::detect::{analyze, render_overlay, AnalysisParams, Verdict};
use llsi_core::fabric::{
    build_floorplan, parse_fabric_config, serialize_fabric_config, validate, FabricConfig, Family,
    DEFAULT_TILE_PITCH_UM,
};
use llsi_core::logic::DeviceResponseTable;
use llsi_core::optics::{
    render_reflectance, Image16, ImageKind, NoiseParams, Region, ScanParams, DEFAULT_BANDPASS_HZ,
    DEFAULT_DWELL_MS, DEFAULT_NOISE_FLOOR, DEFAULT_NUMERICAL_APERTURE, DEFAULT_PIXEL_PITCH_UM,
    DEFAULT_WAVELENGTH_UM, REFERENCE_MODULATION_VPP,
};
use llsi_core::snapshot::llsi_snapshot;
use llsi_core::trojan::{apply_patch, builtin, TrojanSpec, BUILTIN_FORMS};
use manifest::{digest, Manifest};

#[derive(Parser, Debug)]
#[command(
    name = "llsi",
    version,
    about = "Fabric generation, Trojan injection, LLSI rendering and golden-vs-suspect comparison",
    after_help = "compare exits with 0 for CLEAN, 2 for TAMPERED and 1 on any error."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a demo fabric configuration
    Fabricgen(FabricgenArgs),
    /// Apply a Trojan spec file or builtin Trojan to a configuration
    Inject(InjectArgs),
    /// Render the LLSI and reflectance images of a configuration
    Render(RenderArgs),
    /// Compare a suspect snapshot against a golden one
    Compare(CompareArgs),
    /// Re-run the command recorded in a manifest
    Replay(ReplayArgs),
}

#[derive(Args, Debug)]
struct FabricgenArgs {
    /// Device family: seriesk (6-input LUTs) or seriesp (4-input LUTs)
    #[arg(long, default_value = "seriesk", value_parser = parse_family)]
    family: Family,
    /// Tile grid as COLSxROWS
    #[arg(long, default_value = "6x4", value_parser = parse_grid)]
    grid: (usize, usize),
    /// Design to generate
    #[arg(long, default_value = "host", value_parser = clap::builder::PossibleValuesParser::new(DEMO_NAMES))]
    demo: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct InjectArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// Trojan spec file, or a builtin: trit-tc:<gates>, trit-ts:<states>,
    /// init-flip:<cell>:<old-hex>:<new-hex>, ff-toggle:<cell>,
    /// route-thru-add:<cell>:<source>:<sink>, route-thru-move:<from>:<to>
    #[arg(long)]
    trojan: String,
    /// Seed for generated Trojans
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct RenderArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, default_value_t = DEFAULT_PIXEL_PITCH_UM)]
    pitch_um: f64,
    #[arg(long, default_value_t = DEFAULT_DWELL_MS)]
    dwell_ms: f64,
    #[arg(long, default_value_t = DEFAULT_BANDPASS_HZ)]
    bandpass_hz: f64,
    /// Peak-to-peak supply modulation
    #[arg(long, default_value_t = REFERENCE_MODULATION_VPP)]
    mod_vpp: f64,
    /// Noise seed
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Per-pixel noise σ at 3.3 ms/px and 100 Hz
    #[arg(long, default_value_t = DEFAULT_NOISE_FLOOR)]
    noise_floor: f64,
    #[arg(long, default_value_t = DEFAULT_WAVELENGTH_UM)]
    wavelength_um: f64,
    #[arg(long, default_value_t = DEFAULT_NUMERICAL_APERTURE)]
    na: f64,
    /// Scan window x0,y0,width,height in µm [default: whole fabric]
    #[arg(long, value_parser = parse_region)]
    region: Option<Region>,
    #[arg(long, default_value_t = DEFAULT_TILE_PITCH_UM)]
    tile_pitch_um: f64,
    #[arg(long)]
    out_prefix: PathBuf,
}

#[derive(Args, Debug)]
struct CompareArgs {
    #[arg(long)]
    golden: PathBuf,
    #[arg(long)]
    suspect: PathBuf,
    /// Fabric configuration whose layout names the flagged cells
    #[arg(long)]
    floorplan: PathBuf,
    #[arg(long, default_value_t = DEFAULT_TILE_PITCH_UM)]
    tile_pitch_um: f64,
    /// Detection threshold in noise σ
    #[arg(long, default_value_t = 5.0)]
    k: f64,
    /// Smallest reported component in pixels [default: half-maximum beam area]
    #[arg(long)]
    min_area: Option<usize>,
    /// Largest registration shift searched, in pixels
    #[arg(long, default_value_t = 10)]
    max_shift: usize,
    /// 3x3 median filter on the difference image
    #[arg(long, default_value_t = true, action = ArgAction::Set)]
    despeckle: bool,
    #[arg(long)]
    out_prefix: PathBuf,
}

#[derive(Args, Debug)]
struct ReplayArgs {
    manifest: PathBuf,
    /// Write outputs here instead of the recorded --out / --out-prefix
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_family(s: &str) -> Result<Family, String> {
    s.parse().map_err(|e| format!("{e}"))
}

fn parse_grid(s: &str) -> Result<(usize, usize), String> {
    let (c, r) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected COLSxROWS, got `{s}`"))?;
    let n = |v: &str| v.trim().parse::<usize>().map_err(|e| format!("`{v}`: {e}"));
    let (c, r) = (n(c)?, n(r)?);
    if c == 0 || r == 0 {
        return Err(format!("grid dimensions must be positive, got {c}x{r}"));
    }
    Ok((c, r))
}

fn parse_region(s: &str) -> Result<Region, String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("`{p}`: {e}")))
        .collect::<Result<_, _>>()?;
    let [x0, y0, width, height] = v[..] else {
        return Err(format!("expected x0,y0,width,height, got `{s}`"));
    };
    Ok(Region {
        x0,
        y0,
        width,
        height,
    })
}

fn region_text(r: &Region) -> String {
    format!("{},{},{},{}", r.x0, r.y0, r.width, r.height)
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn write(path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
    std::fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn read_config(path: &Path) -> anyhow::Result<FabricConfig> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_fabric_config(&text).with_context(|| format!("parsing {}", path.display()))
}

fn read_image(path: &Path) -> anyhow::Result<Image16> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Image16::from_pgm_bytes(&bytes).with_context(|| format!("parsing {}", path.display()))
}

fn fabricgen(a: &FabricgenArgs) -> anyhow::Result<()> {
    let cfg = designs::demo(&a.demo, a.family, a.grid.0, a.grid.1)?;
    let problems = validate(&cfg);
    if !problems.is_empty() {
        bail!("generated design is invalid: {problems:?}");
    }
    let text = serialize_fabric_config(&cfg);
    write(&a.out, text.as_bytes())?;
    let mut m = Manifest::new("fabricgen");
    m.arg("family", a.family);
    m.arg("grid", format!("{}x{}", a.grid.0, a.grid.1));
    m.arg("demo", &a.demo);
    m.arg("out", a.out.display());
    m.push("out.config.digest", digest(text.as_bytes()));
    m.write(&with_suffix(&a.out, ".manifest"))?;
    println!("wrote {} ({} tiles)", a.out.display(), cfg.tiles.len());
    Ok(())
}

fn inject(a: &InjectArgs) -> anyhow::Result<()> {
    let in_text = std::fs::read_to_string(&a.input)
        .with_context(|| format!("reading {}", a.input.display()))?;
    let cfg =
        parse_fabric_config(&in_text).with_context(|| format!("parsing {}", a.input.display()))?;
    let mut m = Manifest::new("inject");
    m.arg("in", a.input.display());
    m.arg("trojan", &a.trojan);
    m.arg("seed", a.seed);
    m.arg("out", a.out.display());
    m.push("in.digest", digest(in_text.as_bytes()));

    let path = Path::new(&a.trojan);
    let spec = if path.is_file() {
        let text = std::fs::read_to_string(path)?;
        m.push("trojan.source", "file");
        m.push("trojan.digest", digest(text.as_bytes()));
        TrojanSpec::parse(&text).with_context(|| format!("parsing {}", path.display()))?
    } else {
        m.push("trojan.source", "builtin");
        builtin(&cfg, &a.trojan, a.seed).with_context(|| {
            format!(
                "`{}` is neither a spec file nor a valid builtin ({})",
                a.trojan,
                BUILTIN_FORMS.join(", ")
            )
        })?
    };
    let patched = apply_patch(&cfg, &spec).context("applying Trojan spec")?;
    let text = serialize_fabric_config(&patched);
    write(&a.out, text.as_bytes())?;
    let spec_path = with_suffix(&a.out, ".trojan");
    write(&spec_path, spec.to_text().as_bytes())?;
    m.push("out.config.digest", digest(text.as_bytes()));
    m.push("out.spec", spec_path.display());
    m.write(&with_suffix(&a.out, ".manifest"))?;
    println!(
        "applied `{}` ({} patches) -> {}",
        spec.label,
        spec.patches.len(),
        a.out.display()
    );
    Ok(())
}

fn render(a: &RenderArgs) -> anyhow::Result<()> {
    let in_text = std::fs::read_to_string(&a.input)
        .with_context(|| format!("reading {}", a.input.display()))?;
    let cfg =
        parse_fabric_config(&in_text).with_context(|| format!("parsing {}", a.input.display()))?;
    let fp = build_floorplan(&cfg, a.tile_pitch_um);
    let region = a.region.unwrap_or_else(|| {
        let e = fp.extent();
        Region {
            x0: e.x0,
            y0: e.y0,
            width: e.width(),
            height: e.height(),
        }
    });
    let mut scan = ScanParams::over(region);
    scan.pixel_pitch_um = a.pitch_um;
    scan.dwell_ms_per_px = a.dwell_ms;
    scan.bandpass_hz = a.bandpass_hz;
    scan.modulation.peak_to_peak_v = a.mod_vpp;
    scan.wavelength_um = a.wavelength_um;
    scan.numerical_aperture = a.na;
    let noise = NoiseParams {
        noise_floor: a.noise_floor,
        seed: a.seed,
        ..NoiseParams::default()
    };
    let llsi = llsi_snapshot(&cfg, &DeviceResponseTable::default(), &fp, &scan, &noise)?;
    let refl = render_reflectance(&fp, &scan)?;

    let llsi_path = with_suffix(&a.out_prefix, ".llsi.pgm");
    let refl_path = with_suffix(&a.out_prefix, ".refl.pgm");
    write(&llsi_path, &llsi.to_pgm_bytes())?;
    write(&refl_path, &refl.to_pgm_bytes())?;

    let mut m = Manifest::new("render");
    m.arg("in", a.input.display());
    m.arg("pitch-um", a.pitch_um);
    m.arg("dwell-ms", a.dwell_ms);
    m.arg("bandpass-hz", a.bandpass_hz);
    m.arg("mod-vpp", a.mod_vpp);
    m.arg("seed", a.seed);
    m.arg("noise-floor", a.noise_floor);
    m.arg("wavelength-um", a.wavelength_um);
    m.arg("na", a.na);
    m.arg("region", region_text(&region));
    m.arg("tile-pitch-um", a.tile_pitch_um);
    m.arg("out-prefix", a.out_prefix.display());
    m.push("in.digest", digest(in_text.as_bytes()));
    m.push("out.llsi", llsi_path.display());
    m.push("out.refl", refl_path.display());
    m.write(&with_suffix(&a.out_prefix, ".manifest"))?;
    println!(
        "rendered {}x{} px -> {}, {}",
        llsi.width,
        llsi.height,
        llsi_path.display(),
        refl_path.display()
    );
    Ok(())
}

fn compare(a: &CompareArgs) -> anyhow::Result<Verdict> {
    let golden = read_image(&a.golden)?;
    let suspect = read_image(&a.suspect)?;
    for (p, img) in [(&a.golden, &golden), (&a.suspect, &suspect)] {
        if img.meta.kind != ImageKind::Llsi {
            bail!("{} is not an LLSI image", p.display());
        }
    }
    let cfg = read_config(&a.floorplan)?;
    let fp = build_floorplan(&cfg, a.tile_pitch_um);
    let scan = golden.meta.scan;
    let mut params = AnalysisParams::for_scan(&scan);
    params.k = a.k;
    params.max_shift_px = a.max_shift;
    params.despeckle = a.despeckle;
    if let Some(n) = a.min_area {
        params.min_area_px = n;
    }
    let mut result = analyze(&golden, &suspect, &fp, &scan, &params)?;
    result.report.golden_id = a.golden.display().to_string();
    result.report.suspect_id = a.suspect.display().to_string();
    let refl = render_reflectance(&fp, &scan)?;
    let overlay = render_overlay(&refl, &result.diff, result.report.noise_sigma, &params)?;

    let report_path = with_suffix(&a.out_prefix, ".report.txt");
    let overlay_path = with_suffix(&a.out_prefix, ".overlay.ppm");
    let text = result.report.to_text();
    write(&report_path, text.as_bytes())?;
    write(&overlay_path, &overlay.to_ppm_bytes())?;

    let mut m = Manifest::new("compare");
    m.arg("golden", a.golden.display());
    m.arg("suspect", a.suspect.display());
    m.arg("floorplan", a.floorplan.display());
    m.arg("tile-pitch-um", a.tile_pitch_um);
    m.arg("k", a.k);
    m.arg("min-area", params.min_area_px);
    m.arg("max-shift", a.max_shift);
    m.arg("despeckle", a.despeckle);
    m.arg("out-prefix", a.out_prefix.display());
    m.push("seed", "none");
    m.push("verdict", result.report.verdict);
    m.push("out.report", report_path.display());
    m.push("out.overlay", overlay_path.display());
    m.write(&with_suffix(&a.out_prefix, ".manifest"))?;
    print!("{text}");
    Ok(result.report.verdict)
}

fn replay(a: &ReplayArgs) -> anyhow::Result<Option<Verdict>> {
    let mut m = Manifest::read(&a.manifest)?;
    if m.get("tool") != Some("llsi") {
        bail!("{} is not an llsi manifest", a.manifest.display());
    }
    let version = m.get("version").unwrap_or("?");
    if version != env!("CARGO_PKG_VERSION") {
        eprintln!(
            "warning: manifest written by llsi {version}, replaying with {}",
            env!("CARGO_PKG_VERSION")
        );
    }
    let command = m
        .get("command")
        .context("manifest has no command")?
        .to_string();
    if command == "replay" {
        bail!("cannot replay a replay");
    }
    if let Some(out) = &a.out {
        let out = out.display().to_string();
        if !m.set_arg("out-prefix", &out) && !m.set_arg("out", &out) {
            bail!("manifest records no output flag to redirect");
        }
    }
    // Inputs pinned by digest must be unchanged.
    for (flag, key) in [("in", "in.digest"), ("trojan", "trojan.digest")] {
        if let (Some(want), Some(path)) = (m.get(key), m.get(&format!("arg.{flag}"))) {
            let bytes = std::fs::read(path).with_context(|| format!("reading {path}"))?;
            if digest(&bytes) != want {
                bail!("{path} changed since the manifest was written");
            }
        }
    }
    let argv = ["llsi".to_string(), command].into_iter().chain(m.args());
    let cli = Cli::try_parse_from(argv).context("manifest arguments")?;
    run(&cli.command)
}

fn run(command: &Command) -> anyhow::Result<Option<Verdict>> {
    match command {
        Command::Fabricgen(a) => fabricgen(a).map(|_| None),
        Command::Inject(a) => inject(a).map(|_| None),
        Command::Render(a) => render(a).map(|_| None),
        Command::Compare(a) => compare(a).map(Some),
        Command::Replay(a) => replay(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli.command) {
        Ok(Some(Verdict::Tampered)) => ExitCode::from(2),
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
