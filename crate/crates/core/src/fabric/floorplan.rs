//! Physical placement of every device of a fabric.
//!
//! Each tile is a `tile_pitch × tile_pitch` square. The left 78 % holds the slices side by
//! side; each slice is split into horizontal lanes, one per LUT, with the lane's LUT on the
//! left and its flip-flops on the right. The right strip of the tile is the switch box,
//! holding `capacity` pass-transistor slots. Inside a LUT the configuration cells occupy the
//! left part and the mux-tree pass transistors the right part.

use std::collections::HashMap;
use std::ops::Range;

use super::model::{CellRef, ElementKind, ElementLoc, FabricConfig, Route, SwitchBox};

pub const DEFAULT_TILE_PITCH_UM: f64 = 25.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DeviceKind {
    PassTransistor,
    ConfigCell,
    FfCore,
    Buffer,
}

impl DeviceKind {
    pub const ALL: [DeviceKind; 4] = [
        DeviceKind::PassTransistor,
        DeviceKind::ConfigCell,
        DeviceKind::FfCore,
        DeviceKind::Buffer,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DeviceKind::PassTransistor => "pass_transistor",
            DeviceKind::ConfigCell => "config_cell",
            DeviceKind::FfCore => "ff_core",
            DeviceKind::Buffer => "buffer",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        DeviceKind::ALL.into_iter().find(|k| k.as_str() == s)
    }
}

/// Axis-aligned rectangle in µm, half-open on the upper bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Rect { x0, y0, x1, y1 }
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn center(&self) -> (f64, f64) {
        (0.5 * (self.x0 + self.x1), 0.5 * (self.y0 + self.y1))
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x0 && x < self.x1 && y >= self.y0 && y < self.y1
    }

    pub fn overlaps(&self, other: &Rect) -> bool {
        self.x0 < other.x1 && other.x0 < self.x1 && self.y0 < other.y1 && other.y0 < self.y1
    }

    /// Sub-rectangle given by fractions of this rectangle's extent.
    fn frac(&self, fx0: f64, fy0: f64, fx1: f64, fy1: f64) -> Rect {
        let (w, h) = (self.width(), self.height());
        Rect::new(
            self.x0 + fx0 * w,
            self.y0 + fy0 * h,
            self.x0 + fx1 * w,
            self.y0 + fy1 * h,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Device {
    pub x: f64,
    pub y: f64,
    pub kind: DeviceKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ElementPlan {
    pub cell: CellRef,
    pub kind: ElementKind,
    pub rect: Rect,
    pub devices: Vec<Device>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FloorPlan {
    pub tile_pitch_um: f64,
    pub origin: (f64, f64),
    pub grid_cols: usize,
    pub grid_rows: usize,
    pub elements: Vec<ElementPlan>,
    by_cell: HashMap<CellRef, usize>,
    by_tile: HashMap<(usize, usize), Range<usize>>,
}

/// Number of internal 2:1 muxes of a LUT of the given arity.
pub fn mux_count(arity: usize) -> usize {
    (1 << arity) - 1
}

/// Device index of branch `branch` of mux `(level, index)` inside a LUT's device list.
pub fn mux_device_index(arity: usize, level: usize, index: usize, branch: usize) -> usize {
    let before: usize = (0..level).map(|l| 1usize << (arity - 1 - l)).sum();
    (1 << arity) + 2 * (before + index) + branch
}

/// Places `n` points on a near-square grid filling `r`.
fn grid_points(r: &Rect, n: usize) -> Vec<(f64, f64)> {
    if n == 0 {
        return Vec::new();
    }
    let cols = ((n as f64 * r.width() / r.height()).sqrt().round() as usize).clamp(1, n);
    let rows = n.div_ceil(cols);
    let (dx, dy) = (r.width() / cols as f64, r.height() / rows as f64);
    (0..n)
        .map(|k| {
            let (c, rr) = (k % cols, k / cols);
            (r.x0 + (c as f64 + 0.5) * dx, r.y0 + (rr as f64 + 0.5) * dy)
        })
        .collect()
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Slot of every route of a switch box, in `routes` order. A route's preferred slot is a
/// hash of its endpoints; collisions probe linearly, resolving routes in sorted order so
/// the result does not depend on declaration order.
pub fn route_slots(sb: &SwitchBox) -> Vec<usize> {
    let cap = sb.capacity.max(1);
    let mut order: Vec<usize> = (0..sb.routes.len()).collect();
    order.sort_by(|a, b| sb.routes[*a].cmp(&sb.routes[*b]));
    let mut taken = vec![false; cap.max(sb.routes.len())];
    let mut slots = vec![0; sb.routes.len()];
    for i in order {
        let r: &Route = &sb.routes[i];
        let mut s = (fnv1a(r.to_string().as_bytes()) % cap as u64) as usize;
        while taken[s] {
            s = (s + 1) % taken.len();
        }
        taken[s] = true;
        slots[i] = s;
    }
    slots
}

/// Lays out every device of `cfg` on tiles of `tile_pitch_um`.
///
/// Panics if `tile_pitch_um` is not positive.
pub fn build_floorplan(cfg: &FabricConfig, tile_pitch_um: f64) -> FloorPlan {
    assert!(tile_pitch_um > 0.0, "tile pitch must be positive");
    let p = tile_pitch_um;
    let mut elements = Vec::new();
    let mut by_tile = HashMap::new();

    for (ti, t) in cfg.tiles.iter().enumerate() {
        let start = elements.len();
        let tile = Rect::new(
            t.col as f64 * p,
            t.row as f64 * p,
            (t.col + 1) as f64 * p,
            (t.row + 1) as f64 * p,
        );
        let logic = tile.frac(0.02, 0.02, 0.78, 0.98);
        let n_slices = t.slices.len().max(1);
        for (si, s) in t.slices.iter().enumerate() {
            let band = logic.frac(
                si as f64 / n_slices as f64,
                0.0,
                (si + 1) as f64 / n_slices as f64,
                1.0,
            );
            let lanes = s.luts.len().max(1);
            let ffs_per_lane = s.ffs.len().div_ceil(lanes).max(1);
            let lane_rect = |j: usize| {
                band.frac(
                    0.0,
                    j as f64 / lanes as f64,
                    1.0,
                    (j + 1) as f64 / lanes as f64,
                )
            };
            for (li, l) in s.luts.iter().enumerate() {
                let rect = lane_rect(li).frac(0.02, 0.05, 0.68, 0.95);
                let cells = grid_points(&rect.frac(0.0, 0.0, 0.45, 1.0), 1 << l.arity);
                let muxes = grid_points(&rect.frac(0.45, 0.0, 1.0, 1.0), 2 * mux_count(l.arity));
                let devices = cells
                    .into_iter()
                    .map(|(x, y)| Device {
                        x,
                        y,
                        kind: DeviceKind::ConfigCell,
                    })
                    .chain(muxes.into_iter().map(|(x, y)| Device {
                        x,
                        y,
                        kind: DeviceKind::PassTransistor,
                    }))
                    .collect();
                elements.push(ElementPlan {
                    cell: cfg.cell_ref(ElementLoc::Lut {
                        tile: ti,
                        slice: si,
                        lut: li,
                    }),
                    kind: ElementKind::Lut,
                    rect,
                    devices,
                });
            }
            for (fi, _) in s.ffs.iter().enumerate() {
                let lane = (fi / ffs_per_lane).min(lanes - 1);
                let k = fi % ffs_per_lane;
                let area = lane_rect(lane).frac(0.72, 0.05, 0.98, 0.95);
                let rect = area.frac(
                    0.0,
                    k as f64 / ffs_per_lane as f64 + 0.05 / ffs_per_lane as f64,
                    1.0,
                    (k + 1) as f64 / ffs_per_lane as f64 - 0.05 / ffs_per_lane as f64,
                );
                let (_, cy) = rect.center();
                let devices = vec![
                    Device {
                        x: rect.x0 + rect.width() / 3.0,
                        y: cy,
                        kind: DeviceKind::FfCore,
                    },
                    Device {
                        x: rect.x0 + 2.0 * rect.width() / 3.0,
                        y: cy,
                        kind: DeviceKind::Buffer,
                    },
                ];
                elements.push(ElementPlan {
                    cell: cfg.cell_ref(ElementLoc::Ff {
                        tile: ti,
                        slice: si,
                        ff: fi,
                    }),
                    kind: ElementKind::Ff,
                    rect,
                    devices,
                });
            }
        }
        let sb_rect = tile.frac(0.80, 0.02, 0.98, 0.98);
        let cap = t.switchbox.capacity.max(t.switchbox.routes.len());
        let slot_centers = grid_points(&sb_rect, cap);
        let slot_w = if cap == 0 {
            0.0
        } else {
            let cols = ((cap as f64 * sb_rect.width() / sb_rect.height())
                .sqrt()
                .round() as usize)
                .clamp(1, cap);
            sb_rect.width() / cols as f64
        };
        let devices = slot_centers
            .into_iter()
            .flat_map(|(x, y)| {
                [
                    Device {
                        x: x - 0.2 * slot_w,
                        y,
                        kind: DeviceKind::PassTransistor,
                    },
                    Device {
                        x: x + 0.2 * slot_w,
                        y,
                        kind: DeviceKind::Buffer,
                    },
                ]
            })
            .collect();
        elements.push(ElementPlan {
            cell: cfg.cell_ref(ElementLoc::SwitchBox { tile: ti }),
            kind: ElementKind::SwitchBox,
            rect: sb_rect,
            devices,
        });
        by_tile.insert((t.col, t.row), start..elements.len());
    }

    let by_cell = elements
        .iter()
        .enumerate()
        .map(|(i, e)| (e.cell.clone(), i))
        .collect();
    FloorPlan {
        tile_pitch_um,
        origin: (0.0, 0.0),
        grid_cols: cfg.grid_cols,
        grid_rows: cfg.grid_rows,
        elements,
        by_cell,
        by_tile,
    }
}

impl FloorPlan {
    pub fn element(&self, cell: &CellRef) -> Option<&ElementPlan> {
        self.by_cell.get(cell).map(|i| &self.elements[*i])
    }

    /// Total physical extent of the grid in µm.
    pub fn extent(&self) -> Rect {
        Rect::new(
            self.origin.0,
            self.origin.1,
            self.origin.0 + self.grid_cols as f64 * self.tile_pitch_um,
            self.origin.1 + self.grid_rows as f64 * self.tile_pitch_um,
        )
    }

    pub fn device_count(&self) -> usize {
        self.elements.iter().map(|e| e.devices.len()).sum()
    }

    /// Absolute rectangle of an element (floorplan rects are relative to `origin`).
    pub fn rect_of(&self, e: &ElementPlan) -> Rect {
        Rect::new(
            e.rect.x0 + self.origin.0,
            e.rect.y0 + self.origin.1,
            e.rect.x1 + self.origin.0,
            e.rect.y1 + self.origin.1,
        )
    }

    /// Absolute position of device `index` of `cell`.
    pub fn device_position(&self, cell: &CellRef, index: usize) -> Option<(f64, f64)> {
        let d = self.element(cell)?.devices.get(index)?;
        Some((d.x + self.origin.0, d.y + self.origin.1))
    }

    /// The element whose rectangle contains `(x, y)`, if any.
    pub fn lookup(&self, x: f64, y: f64) -> Option<&CellRef> {
        let (lx, ly) = (x - self.origin.0, y - self.origin.1);
        if lx < 0.0 || ly < 0.0 {
            return None;
        }
        let col = (lx / self.tile_pitch_um).floor() as usize;
        let row = (ly / self.tile_pitch_um).floor() as usize;
        let range = self.by_tile.get(&(col, row))?;
        self.elements[range.clone()]
            .iter()
            .find(|e| e.rect.contains(lx, ly))
            .map(|e| &e.cell)
    }

    /// Every element whose rectangle overlaps `r` (absolute µm).
    pub fn overlapping(&self, r: &Rect) -> Vec<&CellRef> {
        self.elements
            .iter()
            .filter(|e| self.rect_of(e).overlaps(r))
            .map(|e| &e.cell)
            .collect()
    }
}
