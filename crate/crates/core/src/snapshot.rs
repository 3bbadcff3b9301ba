//! Config-to-image convenience: evaluate the halted-clock logic, expand emitters and render.

use crate::error::SnapshotError;
use crate::fabric::{FabricConfig, FloorPlan};
use crate::logic::{
    build_netlist, evaluate_logic, expand_emitters, DeviceResponseTable, EmitterMap,
};
use crate::optics::{render_llsi, Image16, NoiseParams, ScanParams};

pub fn emitters_for(
    cfg: &FabricConfig,
    table: &DeviceResponseTable,
    fp: &FloorPlan,
) -> Result<EmitterMap, SnapshotError> {
    table.check()?;
    let nl = build_netlist(cfg)?;
    let values = evaluate_logic(&nl, cfg)?;
    Ok(expand_emitters(cfg, &values, table, fp))
}

/// LLSI snapshot of `cfg` laid out on `fp`.
pub fn llsi_snapshot(
    cfg: &FabricConfig,
    table: &DeviceResponseTable,
    fp: &FloorPlan,
    scan: &ScanParams,
    noise: &NoiseParams,
) -> Result<Image16, SnapshotError> {
    let em = emitters_for(cfg, table, fp)?;
    Ok(render_llsi(&em, scan, noise)?)
}
