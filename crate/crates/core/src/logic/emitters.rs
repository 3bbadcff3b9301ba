use super::lut::lut_mux_states;
use super::netlist::NodeValues;
use super::response::DeviceResponseTable;
use crate::fabric::{
    mux_device_index, route_slots, CellRef, DeviceKind, ElementLoc, FabricConfig, FloorPlan,
};

/// A point source of modulated reflectance.
#[derive(Debug, Clone, PartialEq)]
pub struct Emitter {
    pub x: f64,
    pub y: f64,
    pub kind: DeviceKind,
    pub conducting: bool,
    pub value: bool,
    pub amplitude: f64,
    pub origin: CellRef,
    /// Index of the device inside its element's floorplan entry.
    pub device: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EmitterMap {
    pub emitters: Vec<Emitter>,
}

impl EmitterMap {
    pub fn len(&self) -> usize {
        self.emitters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.emitters.is_empty()
    }
}

struct Sink<'a> {
    fp: &'a FloorPlan,
    table: &'a DeviceResponseTable,
    out: Vec<Emitter>,
}

impl Sink<'_> {
    fn push(
        &mut self,
        cell: &CellRef,
        device: usize,
        kind: DeviceKind,
        conducting: bool,
        value: bool,
    ) {
        let (x, y) = self
            .fp
            .device_position(cell, device)
            .unwrap_or_else(|| panic!("floorplan has no device {device} for {cell}"));
        self.out.push(Emitter {
            x,
            y,
            kind,
            conducting,
            value,
            amplitude: self.table.amplitude(kind, conducting, value),
            origin: cell.clone(),
            device,
        });
    }
}

/// Expands the evaluated fabric into its emitting devices.
///
/// A used LUT contributes one configuration cell per truth-table entry and both pass
/// transistors of every internal mux (the selected branch conducts, each carries its branch
/// data). An unused LUT contributes only its cells, all at the cleared-bit level. A used FF
/// contributes its storage core and output buffer keyed to its state; each enabled route a
/// conducting pass transistor and a buffer keyed to the carried value.
pub fn expand_emitters(
    cfg: &FabricConfig,
    values: &NodeValues,
    table: &DeviceResponseTable,
    fp: &FloorPlan,
) -> EmitterMap {
    let mut sink = Sink {
        fp,
        table,
        out: Vec::new(),
    };
    for (ti, t) in cfg.tiles.iter().enumerate() {
        for (si, s) in t.slices.iter().enumerate() {
            for (li, l) in s.luts.iter().enumerate() {
                let cell = cfg.cell_ref(ElementLoc::Lut {
                    tile: ti,
                    slice: si,
                    lut: li,
                });
                if !l.used {
                    for i in 0..l.init.len() {
                        sink.push(&cell, i, DeviceKind::ConfigCell, false, false);
                    }
                    continue;
                }
                for (i, b) in l.init.iter().enumerate() {
                    sink.push(&cell, i, DeviceKind::ConfigCell, *b, *b);
                }
                let inputs: Vec<bool> = l.input_nets.iter().map(|n| values.bit(n)).collect();
                let tree = lut_mux_states(&l.init, &inputs).expect("validated LUT arity");
                for m in &tree.muxes {
                    for branch in 0..2 {
                        let dev = mux_device_index(l.arity, m.level, m.index, branch);
                        let conducting = m.select == (branch == 1);
                        sink.push(
                            &cell,
                            dev,
                            DeviceKind::PassTransistor,
                            conducting,
                            m.branches[branch],
                        );
                    }
                }
            }
            for (fi, f) in s.ffs.iter().enumerate() {
                if !f.used {
                    continue;
                }
                let cell = cfg.cell_ref(ElementLoc::Ff {
                    tile: ti,
                    slice: si,
                    ff: fi,
                });
                sink.push(&cell, 0, DeviceKind::FfCore, f.state, f.state);
                sink.push(&cell, 1, DeviceKind::Buffer, f.state, f.state);
            }
        }
        let cell = CellRef::switchbox(t.col, t.row);
        for (r, slot) in t.switchbox.routes.iter().zip(route_slots(&t.switchbox)) {
            let v = values.bit(&r.source);
            sink.push(&cell, 2 * slot, DeviceKind::PassTransistor, true, v);
            sink.push(&cell, 2 * slot + 1, DeviceKind::Buffer, v, v);
        }
    }
    EmitterMap { emitters: sink.out }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fabric::{build_floorplan, Family};
    use crate::logic::{build_netlist, evaluate_logic};

    #[test]
    fn unused_slice_emits_only_cells() {
        let cfg = FabricConfig::blank("t", Family::SeriesK, 1, 1, 1);
        let fp = build_floorplan(&cfg, 25.0);
        let v = evaluate_logic(&build_netlist(&cfg).unwrap(), &cfg).unwrap();
        let em = expand_emitters(&cfg, &v, &DeviceResponseTable::default(), &fp);
        assert_eq!(em.len(), 4 * 64);
        assert!(em
            .emitters
            .iter()
            .all(|e| e.kind == DeviceKind::ConfigCell && e.amplitude == 0.4));
    }

    #[test]
    fn used_lut_adds_mux_pairs() {
        let mut cfg = FabricConfig::blank("t", Family::SeriesK, 1, 1, 1);
        let l = &mut cfg.tiles[0].slices[0].luts[0];
        l.used = true;
        l.output_net = Some("o".into());
        let fp = build_floorplan(&cfg, 25.0);
        let v = evaluate_logic(&build_netlist(&cfg).unwrap(), &cfg).unwrap();
        let em = expand_emitters(&cfg, &v, &DeviceResponseTable::default(), &fp);
        assert_eq!(em.len(), 4 * 64 + 2 * 63);
        let conducting = em
            .emitters
            .iter()
            .filter(|e| e.kind == DeviceKind::PassTransistor && e.conducting)
            .count();
        assert_eq!(conducting, 63);
    }
}
