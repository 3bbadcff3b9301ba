use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use super::model::{FabricConfig, NET_ONE, NET_ZERO};

/// A broken structural invariant, naming the offending entity.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum Violation {
    EmptyGrid,
    TileOutOfBounds {
        col: usize,
        row: usize,
    },
    DuplicateTile {
        col: usize,
        row: usize,
    },
    SliceName {
        slice: String,
        reason: String,
    },
    ElementCount {
        slice: String,
        luts: usize,
        ffs: usize,
    },
    LutArity {
        lut: String,
        arity: usize,
    },
    InitLength {
        lut: String,
        expected: usize,
        got: usize,
    },
    InputCount {
        lut: String,
        expected: usize,
        got: usize,
    },
    UsedWithoutOutput {
        element: String,
    },
    UnusedDrivesNet {
        element: String,
        net: String,
    },
    DuplicateSink {
        tile: (usize, usize),
        sink: String,
    },
    CapacityExceeded {
        tile: (usize, usize),
        routes: usize,
        capacity: usize,
    },
    MultiplyDrivenNet {
        net: String,
        drivers: usize,
    },
    UndrivenNet {
        net: String,
    },
    BadNetName {
        net: String,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::EmptyGrid => write!(f, "grid must have at least one column and row"),
            Violation::TileOutOfBounds { col, row } => {
                write!(f, "tile ({col},{row}) lies outside the grid")
            }
            Violation::DuplicateTile { col, row } => write!(f, "tile ({col},{row}) declared twice"),
            Violation::SliceName { slice, reason } => write!(f, "slice `{slice}`: {reason}"),
            Violation::ElementCount { slice, luts, ffs } => {
                write!(f, "slice `{slice}` has {luts} LUTs and {ffs} FFs")
            }
            Violation::LutArity { lut, arity } => {
                write!(f, "LUT `{lut}` has arity {arity}, not the family arity")
            }
            Violation::InitLength { lut, expected, got } => {
                write!(f, "LUT `{lut}` INIT has {got} entries, expected {expected}")
            }
            Violation::InputCount { lut, expected, got } => {
                write!(f, "LUT `{lut}` has {got} input nets, expected {expected}")
            }
            Violation::UsedWithoutOutput { element } => {
                write!(f, "used element `{element}` has no output net")
            }
            Violation::UnusedDrivesNet { element, net } => {
                write!(f, "unused element `{element}` drives net `{net}`")
            }
            Violation::DuplicateSink { tile, sink } => {
                write!(
                    f,
                    "switch box X{}Y{} drives sink `{sink}` twice",
                    tile.0, tile.1
                )
            }
            Violation::CapacityExceeded {
                tile,
                routes,
                capacity,
            } => write!(
                f,
                "switch box X{}Y{} has {routes} routes, capacity {capacity}",
                tile.0, tile.1
            ),
            Violation::MultiplyDrivenNet { net, drivers } => {
                write!(f, "net `{net}` is driven by {drivers} sources")
            }
            Violation::UndrivenNet { net } => {
                write!(f, "net `{net}` is referenced but never driven")
            }
            Violation::BadNetName { net } => write!(f, "`{net}` is not a valid net id"),
        }
    }
}

/// Characters that would make a net id ambiguous in the text formats.
pub fn is_valid_net_name(net: &str) -> bool {
    !net.is_empty()
        && net != "-"
        && !net.contains("->")
        && net
            .chars()
            .all(|c| !c.is_whitespace() && !",;=()#!|:".contains(c))
}

/// Checks every structural invariant; returns an empty list iff the config is valid.
pub fn validate(cfg: &FabricConfig) -> Vec<Violation> {
    let mut out = Vec::new();
    let family = cfg.family;
    if cfg.grid_cols == 0 || cfg.grid_rows == 0 {
        out.push(Violation::EmptyGrid);
    }

    let mut seen_tiles = BTreeSet::new();
    let mut seen_slices = BTreeSet::new();
    let mut referenced: BTreeSet<&str> = BTreeSet::new();

    for (net, _) in &cfg.pins {
        if !is_valid_net_name(net) {
            out.push(Violation::BadNetName { net: net.clone() });
        }
    }

    for t in &cfg.tiles {
        if t.col >= cfg.grid_cols || t.row >= cfg.grid_rows {
            out.push(Violation::TileOutOfBounds {
                col: t.col,
                row: t.row,
            });
        }
        if !seen_tiles.insert((t.col, t.row)) {
            out.push(Violation::DuplicateTile {
                col: t.col,
                row: t.row,
            });
        }
        let per_tile = t.slices.len();
        for s in &t.slices {
            match family.parse_slice_name(&s.name) {
                None => out.push(Violation::SliceName {
                    slice: s.name.clone(),
                    reason: format!("does not follow the {family} naming pattern"),
                }),
                Some((x, y)) => {
                    if y != t.row || x < t.col * per_tile || x >= (t.col + 1) * per_tile {
                        out.push(Violation::SliceName {
                            slice: s.name.clone(),
                            reason: format!("site does not belong to tile ({},{})", t.col, t.row),
                        });
                    }
                }
            }
            if !seen_slices.insert(s.name.as_str()) {
                out.push(Violation::SliceName {
                    slice: s.name.clone(),
                    reason: "duplicate slice name".into(),
                });
            }
            if s.luts.len() != family.luts_per_slice() || s.ffs.len() != family.ffs_per_slice() {
                out.push(Violation::ElementCount {
                    slice: s.name.clone(),
                    luts: s.luts.len(),
                    ffs: s.ffs.len(),
                });
            }
            for l in &s.luts {
                let full = format!("{}.{}", s.name, l.name);
                if l.arity != family.lut_arity() {
                    out.push(Violation::LutArity {
                        lut: full.clone(),
                        arity: l.arity,
                    });
                }
                let expected = 1usize.checked_shl(l.arity as u32).unwrap_or(0);
                if l.init.len() != expected {
                    out.push(Violation::InitLength {
                        lut: full.clone(),
                        expected,
                        got: l.init.len(),
                    });
                }
                if l.input_nets.len() != l.arity {
                    out.push(Violation::InputCount {
                        lut: full.clone(),
                        expected: l.arity,
                        got: l.input_nets.len(),
                    });
                }
                match (&l.output_net, l.used) {
                    (None, true) => out.push(Violation::UsedWithoutOutput { element: full }),
                    (Some(net), false) => out.push(Violation::UnusedDrivesNet {
                        element: full,
                        net: net.clone(),
                    }),
                    _ => {}
                }
                for n in &l.input_nets {
                    referenced.insert(n);
                }
                if let Some(o) = &l.output_net {
                    if !is_valid_net_name(o) {
                        out.push(Violation::BadNetName { net: o.clone() });
                    }
                }
            }
            for f in &s.ffs {
                let full = format!("{}.{}", s.name, f.name);
                match (&f.q_net, f.used) {
                    (None, true) => out.push(Violation::UsedWithoutOutput { element: full }),
                    (Some(net), false) => out.push(Violation::UnusedDrivesNet {
                        element: full,
                        net: net.clone(),
                    }),
                    _ => {}
                }
                referenced.insert(&f.d_net);
                if let Some(q) = &f.q_net {
                    if !is_valid_net_name(q) {
                        out.push(Violation::BadNetName { net: q.clone() });
                    }
                }
            }
        }

        let sb = &t.switchbox;
        if sb.routes.len() > sb.capacity {
            out.push(Violation::CapacityExceeded {
                tile: (t.col, t.row),
                routes: sb.routes.len(),
                capacity: sb.capacity,
            });
        }
        let mut sinks = BTreeSet::new();
        for r in &sb.routes {
            if !sinks.insert(r.sink.as_str()) {
                out.push(Violation::DuplicateSink {
                    tile: (t.col, t.row),
                    sink: r.sink.clone(),
                });
            }
            referenced.insert(&r.source);
            for n in [&r.source, &r.sink] {
                if !is_valid_net_name(n) {
                    out.push(Violation::BadNetName { net: n.clone() });
                }
            }
        }
    }

    // Duplicate sinks inside one switch box are already reported; count each box once.
    let mut counts: BTreeMap<String, usize> = cfg.driver_counts();
    for t in &cfg.tiles {
        let mut per_box: BTreeMap<&str, usize> = BTreeMap::new();
        for r in &t.switchbox.routes {
            *per_box.entry(&r.sink).or_default() += 1;
        }
        for (sink, n) in per_box {
            if n > 1 {
                *counts.get_mut(sink).unwrap() -= n - 1;
            }
        }
    }
    for (net, n) in &counts {
        if *n > 1 {
            out.push(Violation::MultiplyDrivenNet {
                net: net.clone(),
                drivers: *n,
            });
        }
    }
    for net in referenced {
        if net != NET_ZERO && net != NET_ONE && !counts.contains_key(net) {
            out.push(Violation::UndrivenNet {
                net: net.to_string(),
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fabric::model::{Family, Route};

    #[test]
    fn blank_configs_are_valid() {
        for family in [Family::SeriesK, Family::SeriesP] {
            let cfg = FabricConfig::blank("t", family, 3, 2, 2);
            assert_eq!(validate(&cfg), vec![]);
        }
    }

    #[test]
    fn duplicate_sink_is_named() {
        let mut cfg = FabricConfig::blank("t", Family::SeriesK, 1, 1, 1);
        cfg.pins.push(("p0".into(), true));
        cfg.tiles[0].switchbox.routes.push(Route::new("p0", "n1"));
        cfg.tiles[0].switchbox.routes.push(Route::new("1", "n1"));
        assert_eq!(
            validate(&cfg),
            vec![Violation::DuplicateSink {
                tile: (0, 0),
                sink: "n1".into()
            }]
        );
    }

    #[test]
    fn short_init_is_named() {
        let mut cfg = FabricConfig::blank("t", Family::SeriesK, 1, 1, 1);
        cfg.tiles[0].slices[0].luts[2].init.pop();
        assert_eq!(
            validate(&cfg),
            vec![Violation::InitLength {
                lut: "SLICE_X0Y0.C6LUT".into(),
                expected: 64,
                got: 63
            }]
        );
    }

    #[test]
    fn reserved_constants_cannot_be_pins() {
        let mut cfg = FabricConfig::blank("t", Family::SeriesP, 1, 1, 1);
        cfg.pins.push(("1".into(), false));
        assert_eq!(
            validate(&cfg),
            vec![Violation::MultiplyDrivenNet {
                net: "1".into(),
                drivers: 2
            }]
        );
    }
}
