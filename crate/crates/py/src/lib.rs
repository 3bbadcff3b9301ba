//! Python bindings: fabric configs, Trojan injection, snapshot rendering and comparison.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyBytes;

use llsi_core::designs;
use llsi_core::detect::{analyze, render_overlay, AnalysisParams, DiffReport};
use llsi_core::fabric::{
    build_floorplan, parse_fabric_config, serialize_fabric_config, validate, Family,
    DEFAULT_TILE_PITCH_UM,
};
use llsi_core::logic::{build_netlist, evaluate_logic, DeviceResponseTable};
use llsi_core::optics::{
    render_reflectance, Image16, NoiseParams, Region, ScanParams, DEFAULT_BANDPASS_HZ,
    DEFAULT_DWELL_MS, DEFAULT_NOISE_FLOOR, DEFAULT_PIXEL_PITCH_UM, REFERENCE_MODULATION_VPP,
};
use llsi_core::snapshot::llsi_snapshot;
use llsi_core::trojan::{self, TrojanSpec};

fn err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn family(name: &str) -> PyResult<Family> {
    name.parse().map_err(err)
}

/// A fabric configuration: tiles, slices, switch boxes and pins.
#[pyclass(name = "FabricConfig", from_py_object)]
#[derive(Clone)]
struct PyFabricConfig {
    inner: llsi_core::fabric::FabricConfig,
}

#[pymethods]
impl PyFabricConfig {
    /// One of the demo designs (blank, host, route-thru, ff-toggle-pair, lut-init-pair).
    #[staticmethod]
    #[pyo3(signature = (name, family="seriesk", cols=6, rows=4))]
    fn demo(name: &str, family: &str, cols: usize, rows: usize) -> PyResult<Self> {
        let inner = designs::demo(name, self::family(family)?, cols, rows).map_err(err)?;
        Ok(PyFabricConfig { inner })
    }

    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        Ok(PyFabricConfig {
            inner: parse_fabric_config(text).map_err(err)?,
        })
    }

    fn to_text(&self) -> String {
        serialize_fabric_config(&self.inner)
    }

    /// Structural problems, empty when the config is valid.
    fn validate(&self) -> Vec<String> {
        validate(&self.inner)
            .iter()
            .map(|v| v.to_string())
            .collect()
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.name.clone()
    }

    #[getter]
    fn family(&self) -> String {
        self.inner.family.to_string()
    }

    #[getter]
    fn grid(&self) -> (usize, usize) {
        let cols = self
            .inner
            .tiles
            .iter()
            .map(|t| t.col + 1)
            .max()
            .unwrap_or(0);
        let rows = self
            .inner
            .tiles
            .iter()
            .map(|t| t.row + 1)
            .max()
            .unwrap_or(0);
        (cols, rows)
    }

    /// Names of used LUTs.
    fn used_luts(&self) -> Vec<String> {
        let c = &self.inner;
        c.lut_locs()
            .into_iter()
            .filter(|l| c.lut(*l).unwrap().used)
            .map(|l| c.cell_ref(l).to_string())
            .collect()
    }

    /// Names of used flip-flops.
    fn used_ffs(&self) -> Vec<String> {
        let c = &self.inner;
        c.ff_locs()
            .into_iter()
            .filter(|l| c.ff(*l).unwrap().used)
            .map(|l| c.cell_ref(l).to_string())
            .collect()
    }

    /// Halted-clock value of every net.
    fn net_values(&self) -> PyResult<std::collections::BTreeMap<String, bool>> {
        let nl = build_netlist(&self.inner).map_err(err)?;
        Ok(evaluate_logic(&nl, &self.inner).map_err(err)?.0)
    }

    /// Applies a builtin Trojan (e.g. `trit-tc:6`) or the text of a Trojan spec.
    #[pyo3(signature = (trojan, seed=0))]
    fn inject(&self, trojan: &str, seed: u64) -> PyResult<(PyFabricConfig, String)> {
        let spec = if trojan.contains('\n') {
            TrojanSpec::parse(trojan).map_err(err)?
        } else {
            trojan::builtin(&self.inner, trojan, seed).map_err(err)?
        };
        let inner = trojan::apply_patch(&self.inner, &spec).map_err(err)?;
        Ok((PyFabricConfig { inner }, spec.to_text()))
    }

    fn __eq__(&self, other: &Self) -> bool {
        self.inner == other.inner
    }

    fn __repr__(&self) -> String {
        let (c, r) = self.grid();
        format!(
            "FabricConfig(name={:?}, family={}, grid={c}x{r})",
            self.inner.name, self.inner.family
        )
    }
}

/// A 16-bit LLSI or reflectance image with scan metadata.
#[pyclass(name = "Image", from_py_object)]
#[derive(Clone)]
struct PyImage {
    inner: Image16,
}

#[pymethods]
impl PyImage {
    #[staticmethod]
    fn from_pgm(data: &[u8]) -> PyResult<Self> {
        Ok(PyImage {
            inner: Image16::from_pgm_bytes(data).map_err(err)?,
        })
    }

    fn to_pgm<'py>(&self, py: Python<'py>) -> Bound<'py, PyBytes> {
        PyBytes::new(py, &self.inner.to_pgm_bytes())
    }

    #[getter]
    fn width(&self) -> usize {
        self.inner.width
    }

    #[getter]
    fn height(&self) -> usize {
        self.inner.height
    }

    #[getter]
    fn kind(&self) -> String {
        self.inner.meta.kind.to_string()
    }

    #[getter]
    fn pitch_um(&self) -> f64 {
        self.inner.meta.scan.pixel_pitch_um
    }

    #[getter]
    fn dwell_ms(&self) -> f64 {
        self.inner.meta.scan.dwell_ms_per_px
    }

    #[getter]
    fn bandpass_hz(&self) -> f64 {
        self.inner.meta.scan.bandpass_hz
    }

    /// Raw 16-bit codes, row-major.
    fn codes(&self) -> Vec<u16> {
        self.inner.pixels.clone()
    }

    /// Physical values, row-major.
    fn values(&self) -> Vec<f64> {
        self.inner.dequantized()
    }

    fn __repr__(&self) -> String {
        format!(
            "Image(kind={}, {}x{}, pitch={} um)",
            self.inner.meta.kind,
            self.inner.width,
            self.inner.height,
            self.inner.meta.scan.pixel_pitch_um
        )
    }
}

/// Comparison result: verdict, registration, noise and flagged components.
#[pyclass(name = "Report")]
struct PyReport {
    inner: DiffReport,
    overlay: Vec<u8>,
}

#[pymethods]
impl PyReport {
    #[getter]
    fn verdict(&self) -> String {
        self.inner.verdict.to_string()
    }

    #[getter]
    fn tampered(&self) -> bool {
        self.inner.verdict == llsi_core::detect::Verdict::Tampered
    }

    #[getter]
    fn shift_px(&self) -> (i32, i32) {
        self.inner.shift_px
    }

    #[getter]
    fn noise_sigma(&self) -> f64 {
        self.inner.noise_sigma
    }

    /// One `(centroid_um, area_px, peak_z, polarity, cells)` tuple per component.
    #[allow(clippy::type_complexity)]
    fn components(&self) -> Vec<((f64, f64), usize, f64, String, Vec<String>)> {
        self.inner
            .components
            .iter()
            .map(|c| {
                (
                    c.centroid_um,
                    c.area_px,
                    c.peak_z,
                    c.polarity.to_string(),
                    c.cells.iter().map(|x| x.to_string()).collect(),
                )
            })
            .collect()
    }

    fn to_text(&self) -> String {
        self.inner.to_text()
    }

    /// Reflectance base with flagged pixels tinted, as binary PPM.
    fn overlay_ppm<'py>(&self, py: Python<'py>) -> Bound<'py, PyBytes> {
        PyBytes::new(py, &self.overlay)
    }

    fn __repr__(&self) -> String {
        format!(
            "Report(verdict={}, components={})",
            self.inner.verdict,
            self.inner.components.len()
        )
    }
}

/// Renders `(llsi, reflectance)` images of `config`. `region` is `(x0, y0, width, height)`
/// in µm and defaults to the whole fabric.
#[pyfunction]
#[pyo3(signature = (
    config,
    pitch_um=DEFAULT_PIXEL_PITCH_UM,
    dwell_ms=DEFAULT_DWELL_MS,
    bandpass_hz=DEFAULT_BANDPASS_HZ,
    mod_vpp=REFERENCE_MODULATION_VPP,
    seed=0,
    noise_floor=DEFAULT_NOISE_FLOOR,
    region=None,
    tile_pitch_um=DEFAULT_TILE_PITCH_UM,
))]
#[allow(clippy::too_many_arguments)]
fn render(
    py: Python<'_>,
    config: &PyFabricConfig,
    pitch_um: f64,
    dwell_ms: f64,
    bandpass_hz: f64,
    mod_vpp: f64,
    seed: u64,
    noise_floor: f64,
    region: Option<(f64, f64, f64, f64)>,
    tile_pitch_um: f64,
) -> PyResult<(PyImage, PyImage)> {
    let cfg = &config.inner;
    py.detach(|| {
        let fp = build_floorplan(cfg, tile_pitch_um);
        let (x0, y0, width, height) = region.unwrap_or_else(|| {
            let e = fp.extent();
            (e.x0, e.y0, e.width(), e.height())
        });
        let mut scan = ScanParams::over(Region {
            x0,
            y0,
            width,
            height,
        });
        scan.pixel_pitch_um = pitch_um;
        scan.dwell_ms_per_px = dwell_ms;
        scan.bandpass_hz = bandpass_hz;
        scan.modulation.peak_to_peak_v = mod_vpp;
        let noise = NoiseParams {
            noise_floor,
            seed,
            ..NoiseParams::default()
        };
        let llsi =
            llsi_snapshot(cfg, &DeviceResponseTable::default(), &fp, &scan, &noise).map_err(err)?;
        let refl = render_reflectance(&fp, &scan).map_err(err)?;
        Ok((PyImage { inner: llsi }, PyImage { inner: refl }))
    })
}

/// Compares a suspect LLSI image with a golden one; cells are named from `floorplan`.
#[pyfunction]
#[pyo3(signature = (
    golden,
    suspect,
    floorplan,
    k=5.0,
    min_area=None,
    max_shift=10,
    despeckle=true,
    tile_pitch_um=DEFAULT_TILE_PITCH_UM,
))]
#[allow(clippy::too_many_arguments)]
fn compare(
    py: Python<'_>,
    golden: &PyImage,
    suspect: &PyImage,
    floorplan: &PyFabricConfig,
    k: f64,
    min_area: Option<usize>,
    max_shift: usize,
    despeckle: bool,
    tile_pitch_um: f64,
) -> PyResult<PyReport> {
    let (g, s, cfg) = (&golden.inner, &suspect.inner, &floorplan.inner);
    py.detach(|| {
        let fp = build_floorplan(cfg, tile_pitch_um);
        let scan = g.meta.scan;
        let mut params = AnalysisParams::for_scan(&scan);
        params.k = k;
        params.max_shift_px = max_shift;
        params.despeckle = despeckle;
        if let Some(n) = min_area {
            params.min_area_px = n;
        }
        let a = analyze(g, s, &fp, &scan, &params).map_err(err)?;
        let refl = render_reflectance(&fp, &scan).map_err(err)?;
        let overlay = render_overlay(&refl, &a.diff, a.report.noise_sigma, &params).map_err(err)?;
        Ok(PyReport {
            inner: a.report,
            overlay: overlay.to_ppm_bytes(),
        })
    })
}

/// Raises ValueError if any net of `before` changes value in `after`.
#[pyfunction]
fn check_dormant(before: &PyFabricConfig, after: &PyFabricConfig) -> PyResult<()> {
    trojan::check_dormant(&before.inner, &after.inner).map_err(err)
}

#[pyfunction]
fn lut_eval(init: Vec<bool>, inputs: Vec<bool>) -> PyResult<bool> {
    llsi_core::logic::lut_eval(&init, &inputs).map_err(err)
}

/// `(level, index, select, output)` for every mux of the LUT's selection tree.
#[pyfunction]
fn lut_mux_states(init: Vec<bool>, inputs: Vec<bool>) -> PyResult<Vec<(usize, usize, bool, bool)>> {
    let t = llsi_core::logic::lut_mux_states(&init, &inputs).map_err(err)?;
    Ok(t.muxes
        .iter()
        .map(|m| (m.level, m.index, m.select, m.output))
        .collect())
}

#[pymodule]
fn llsi(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyFabricConfig>()?;
    m.add_class::<PyImage>()?;
    m.add_class::<PyReport>()?;
    m.add_function(wrap_pyfunction!(render, m)?)?;
    m.add_function(wrap_pyfunction!(compare, m)?)?;
    m.add_function(wrap_pyfunction!(check_dormant, m)?)?;
    m.add_function(wrap_pyfunction!(lut_eval, m)?)?;
    m.add_function(wrap_pyfunction!(lut_mux_states, m)?)?;
    m.add("DEMO_NAMES", designs::DEMO_NAMES.to_vec())?;
    m.add("BUILTIN_TROJANS", trojan::BUILTIN_FORMS.to_vec())?;
    Ok(())
}
