use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::error::FabricError;

/// Net id reserved for the constant-0 driver.
pub const NET_ZERO: &str = "0";
/// Net id reserved for the constant-1 driver.
pub const NET_ONE: &str = "1";

/// Default number of pass-transistor slots per switch box.
pub const DEFAULT_SWITCHBOX_CAPACITY: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Family {
    /// Slices of four 6-input LUTs and eight flip-flops.
    SeriesK,
    /// Logic clusters of twelve (4-input LUT + flip-flop) elements.
    SeriesP,
}

impl Family {
    pub fn lut_arity(self) -> usize {
        match self {
            Family::SeriesK => 6,
            Family::SeriesP => 4,
        }
    }

    pub fn luts_per_slice(self) -> usize {
        match self {
            Family::SeriesK => 4,
            Family::SeriesP => 12,
        }
    }

    pub fn ffs_per_slice(self) -> usize {
        match self {
            Family::SeriesK => 8,
            Family::SeriesP => 12,
        }
    }

    pub fn lut_names(self) -> Vec<String> {
        match self {
            Family::SeriesK => ["A6LUT", "B6LUT", "C6LUT", "D6LUT"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
            Family::SeriesP => (0..12).map(|i| format!("LUT{i}")).collect(),
        }
    }

    pub fn ff_names(self) -> Vec<String> {
        match self {
            Family::SeriesK => ["AFF", "A5FF", "BFF", "B5FF", "CFF", "C5FF", "DFF", "D5FF"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
            Family::SeriesP => (0..12).map(|i| format!("FF{i}")).collect(),
        }
    }

    /// Canonical name of the `index`-th slice of the tile at (`col`, `row`) when a tile
    /// holds `per_tile` slices.
    pub fn slice_name(self, col: usize, row: usize, index: usize, per_tile: usize) -> String {
        let x = col * per_tile + index;
        match self {
            Family::SeriesK => format!("SLICE_X{x}Y{row}"),
            Family::SeriesP => format!("LC({x},{row})"),
        }
    }

    /// Parses a slice name of this family into its (x, y) site coordinates.
    pub fn parse_slice_name(self, name: &str) -> Option<(usize, usize)> {
        match self {
            Family::SeriesK => {
                let rest = name.strip_prefix("SLICE_X")?;
                let (x, y) = rest.split_once('Y')?;
                Some((parse_digits(x)?, parse_digits(y)?))
            }
            Family::SeriesP => {
                let rest = name.strip_prefix("LC(")?.strip_suffix(')')?;
                let (x, y) = rest.split_once(',')?;
                Some((parse_digits(x)?, parse_digits(y)?))
            }
        }
    }
}

fn parse_digits(s: &str) -> Option<usize> {
    if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    s.parse().ok()
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::SeriesK => "seriesk",
            Family::SeriesP => "seriesp",
        })
    }
}

impl FromStr for Family {
    type Err = FabricError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "seriesk" => Ok(Family::SeriesK),
            "seriesp" => Ok(Family::SeriesP),
            other => Err(FabricError::UnknownFamily(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LutConfig {
    pub name: String,
    pub arity: usize,
    /// Truth table; `init[i]` is the output for input index `i = Σ input_k · 2^k`.
    pub init: Vec<bool>,
    pub input_nets: Vec<String>,
    pub output_net: Option<String>,
    pub used: bool,
}

impl LutConfig {
    pub fn unused(name: impl Into<String>, arity: usize) -> Self {
        LutConfig {
            name: name.into(),
            arity,
            init: vec![false; 1 << arity],
            input_nets: vec![NET_ZERO.to_string(); arity],
            output_net: None,
            used: false,
        }
    }

    pub fn init_hex(&self) -> String {
        init_to_hex(&self.init)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FfConfig {
    pub name: String,
    /// Stored value while the clock is halted.
    pub state: bool,
    pub d_net: String,
    pub q_net: Option<String>,
    pub used: bool,
}

impl FfConfig {
    pub fn unused(name: impl Into<String>) -> Self {
        FfConfig {
            name: name.into(),
            state: false,
            d_net: NET_ZERO.to_string(),
            q_net: None,
            used: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Route {
    pub source: String,
    pub sink: String,
}

impl Route {
    pub fn new(source: impl Into<String>, sink: impl Into<String>) -> Self {
        Route {
            source: source.into(),
            sink: sink.into(),
        }
    }
}

impl fmt::Display for Route {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}->{}", self.source, self.sink)
    }
}

/// Enabled pass-transistor connections of one tile. Routes are kept in insertion order;
/// the ordering carries no meaning and equality ignores it.
#[derive(Debug, Clone)]
pub struct SwitchBox {
    pub routes: Vec<Route>,
    pub capacity: usize,
}

impl Default for SwitchBox {
    fn default() -> Self {
        SwitchBox {
            routes: Vec::new(),
            capacity: DEFAULT_SWITCHBOX_CAPACITY,
        }
    }
}

impl SwitchBox {
    pub fn sorted_routes(&self) -> Vec<&Route> {
        let mut r: Vec<&Route> = self.routes.iter().collect();
        r.sort();
        r
    }
}

impl PartialEq for SwitchBox {
    fn eq(&self, other: &Self) -> bool {
        self.capacity == other.capacity && self.sorted_routes() == other.sorted_routes()
    }
}

impl Eq for SwitchBox {}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Slice {
    pub name: String,
    pub luts: Vec<LutConfig>,
    pub ffs: Vec<FfConfig>,
}

impl Slice {
    pub fn empty(family: Family, name: impl Into<String>) -> Self {
        let arity = family.lut_arity();
        Slice {
            name: name.into(),
            luts: family
                .lut_names()
                .into_iter()
                .map(|n| LutConfig::unused(n, arity))
                .collect(),
            ffs: family
                .ff_names()
                .into_iter()
                .map(FfConfig::unused)
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tile {
    pub col: usize,
    pub row: usize,
    pub slices: Vec<Slice>,
    pub switchbox: SwitchBox,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FabricConfig {
    pub name: String,
    pub family: Family,
    pub grid_cols: usize,
    pub grid_rows: usize,
    pub tiles: Vec<Tile>,
    /// Primary inputs and their applied values, in declaration order.
    pub pins: Vec<(String, bool)>,
}

/// Element kind addressed by a [`CellRef`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ElementKind {
    Lut,
    Ff,
    SwitchBox,
}

/// Name of a single fabric element: a LUT or FF inside a slice, or a tile's switch box.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CellRef {
    pub col: usize,
    pub row: usize,
    /// Empty for switch boxes.
    pub slice: String,
    pub element: String,
}

pub const SWITCHBOX_ELEMENT: &str = "SBOX";

impl CellRef {
    pub fn switchbox(col: usize, row: usize) -> Self {
        CellRef {
            col,
            row,
            slice: String::new(),
            element: SWITCHBOX_ELEMENT.to_string(),
        }
    }

    pub fn is_switchbox(&self) -> bool {
        self.element == SWITCHBOX_ELEMENT
    }
}

impl fmt::Display for CellRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_switchbox() {
            write!(f, "TILE_X{}Y{}.{}", self.col, self.row, SWITCHBOX_ELEMENT)
        } else {
            write!(f, "{}.{}", self.slice, self.element)
        }
    }
}

/// Position of an element inside `FabricConfig::tiles`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ElementLoc {
    Lut {
        tile: usize,
        slice: usize,
        lut: usize,
    },
    Ff {
        tile: usize,
        slice: usize,
        ff: usize,
    },
    SwitchBox {
        tile: usize,
    },
}

impl FabricConfig {
    /// A fabric with every tile populated by unused slices and empty switch boxes.
    pub fn blank(
        name: impl Into<String>,
        family: Family,
        grid_cols: usize,
        grid_rows: usize,
        slices_per_tile: usize,
    ) -> Self {
        let mut tiles = Vec::with_capacity(grid_cols * grid_rows);
        for row in 0..grid_rows {
            for col in 0..grid_cols {
                let slices = (0..slices_per_tile)
                    .map(|i| Slice::empty(family, family.slice_name(col, row, i, slices_per_tile)))
                    .collect();
                tiles.push(Tile {
                    col,
                    row,
                    slices,
                    switchbox: SwitchBox::default(),
                });
            }
        }
        FabricConfig {
            name: name.into(),
            family,
            grid_cols,
            grid_rows,
            tiles,
            pins: Vec::new(),
        }
    }

    pub fn tile_index(&self, col: usize, row: usize) -> Option<usize> {
        self.tiles.iter().position(|t| t.col == col && t.row == row)
    }

    pub fn cell_ref(&self, loc: ElementLoc) -> CellRef {
        match loc {
            ElementLoc::Lut { tile, slice, lut } => {
                let t = &self.tiles[tile];
                CellRef {
                    col: t.col,
                    row: t.row,
                    slice: t.slices[slice].name.clone(),
                    element: t.slices[slice].luts[lut].name.clone(),
                }
            }
            ElementLoc::Ff { tile, slice, ff } => {
                let t = &self.tiles[tile];
                CellRef {
                    col: t.col,
                    row: t.row,
                    slice: t.slices[slice].name.clone(),
                    element: t.slices[slice].ffs[ff].name.clone(),
                }
            }
            ElementLoc::SwitchBox { tile } => {
                CellRef::switchbox(self.tiles[tile].col, self.tiles[tile].row)
            }
        }
    }

    /// Resolves a textual cell name (`SLICE_X1Y1.D6LUT`, `LC(0,2).FF3`, `TILE_X1Y0.SBOX`).
    pub fn resolve(&self, text: &str) -> Result<(CellRef, ElementLoc), FabricError> {
        let unknown = || FabricError::UnknownCell(text.to_string());
        let (slice_name, element) = text.rsplit_once('.').ok_or_else(unknown)?;
        if element == SWITCHBOX_ELEMENT {
            let rest = slice_name.strip_prefix("TILE_X").ok_or_else(unknown)?;
            let (c, r) = rest.split_once('Y').ok_or_else(unknown)?;
            let col = parse_digits(c).ok_or_else(unknown)?;
            let row = parse_digits(r).ok_or_else(unknown)?;
            let tile = self.tile_index(col, row).ok_or_else(unknown)?;
            return Ok((CellRef::switchbox(col, row), ElementLoc::SwitchBox { tile }));
        }
        for (ti, t) in self.tiles.iter().enumerate() {
            for (si, s) in t.slices.iter().enumerate() {
                if s.name != slice_name {
                    continue;
                }
                if let Some(li) = s.luts.iter().position(|l| l.name == element) {
                    let loc = ElementLoc::Lut {
                        tile: ti,
                        slice: si,
                        lut: li,
                    };
                    return Ok((self.cell_ref(loc), loc));
                }
                if let Some(fi) = s.ffs.iter().position(|f| f.name == element) {
                    let loc = ElementLoc::Ff {
                        tile: ti,
                        slice: si,
                        ff: fi,
                    };
                    return Ok((self.cell_ref(loc), loc));
                }
            }
        }
        Err(unknown())
    }

    pub fn lut(&self, loc: ElementLoc) -> Option<&LutConfig> {
        match loc {
            ElementLoc::Lut { tile, slice, lut } => {
                self.tiles.get(tile)?.slices.get(slice)?.luts.get(lut)
            }
            _ => None,
        }
    }

    pub fn lut_mut(&mut self, loc: ElementLoc) -> Option<&mut LutConfig> {
        match loc {
            ElementLoc::Lut { tile, slice, lut } => self
                .tiles
                .get_mut(tile)?
                .slices
                .get_mut(slice)?
                .luts
                .get_mut(lut),
            _ => None,
        }
    }

    pub fn ff(&self, loc: ElementLoc) -> Option<&FfConfig> {
        match loc {
            ElementLoc::Ff { tile, slice, ff } => {
                self.tiles.get(tile)?.slices.get(slice)?.ffs.get(ff)
            }
            _ => None,
        }
    }

    pub fn ff_mut(&mut self, loc: ElementLoc) -> Option<&mut FfConfig> {
        match loc {
            ElementLoc::Ff { tile, slice, ff } => self
                .tiles
                .get_mut(tile)?
                .slices
                .get_mut(slice)?
                .ffs
                .get_mut(ff),
            _ => None,
        }
    }

    /// All LUT locations in tile/slice/element order.
    pub fn lut_locs(&self) -> Vec<ElementLoc> {
        let mut out = Vec::new();
        for (ti, t) in self.tiles.iter().enumerate() {
            for (si, s) in t.slices.iter().enumerate() {
                for li in 0..s.luts.len() {
                    out.push(ElementLoc::Lut {
                        tile: ti,
                        slice: si,
                        lut: li,
                    });
                }
            }
        }
        out
    }

    pub fn ff_locs(&self) -> Vec<ElementLoc> {
        let mut out = Vec::new();
        for (ti, t) in self.tiles.iter().enumerate() {
            for (si, s) in t.slices.iter().enumerate() {
                for fi in 0..s.ffs.len() {
                    out.push(ElementLoc::Ff {
                        tile: ti,
                        slice: si,
                        ff: fi,
                    });
                }
            }
        }
        out
    }

    /// Number of drivers of every net (pins, used LUT outputs, used FF outputs, route sinks).
    /// Constants count as one driver each.
    pub fn driver_counts(&self) -> BTreeMap<String, usize> {
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        *counts.entry(NET_ZERO.to_string()).or_default() += 1;
        *counts.entry(NET_ONE.to_string()).or_default() += 1;
        for (net, _) in &self.pins {
            *counts.entry(net.clone()).or_default() += 1;
        }
        for t in &self.tiles {
            for s in &t.slices {
                for l in &s.luts {
                    if let Some(o) = &l.output_net {
                        *counts.entry(o.clone()).or_default() += 1;
                    }
                }
                for f in &s.ffs {
                    if let Some(q) = &f.q_net {
                        *counts.entry(q.clone()).or_default() += 1;
                    }
                }
            }
            for r in &t.switchbox.routes {
                *counts.entry(r.sink.clone()).or_default() += 1;
            }
        }
        counts
    }

    /// Whether `net` has at least one driver.
    pub fn is_driven(&self, net: &str) -> bool {
        self.driver_counts().contains_key(net)
    }

    /// Location of the switch-box route that drives `sink`, if any.
    pub fn route_driving(&self, sink: &str) -> Option<(usize, &Route)> {
        self.tiles.iter().enumerate().find_map(|(ti, t)| {
            t.switchbox
                .routes
                .iter()
                .find(|r| r.sink == sink)
                .map(|r| (ti, r))
        })
    }

    pub fn lut_count(&self) -> usize {
        self.tiles
            .iter()
            .flat_map(|t| &t.slices)
            .map(|s| s.luts.len())
            .sum()
    }

    pub fn ff_count(&self) -> usize {
        self.tiles
            .iter()
            .flat_map(|t| &t.slices)
            .map(|s| s.ffs.len())
            .sum()
    }

    pub fn route_count(&self) -> usize {
        self.tiles.iter().map(|t| t.switchbox.routes.len()).sum()
    }
}

/// Renders a truth table as `0x`-prefixed hex, most significant digit first, at least
/// one digit per four table entries.
pub fn init_to_hex(init: &[bool]) -> String {
    let digits = init.len().div_ceil(4).max(1);
    let mut s = String::with_capacity(digits + 2);
    s.push_str("0x");
    for d in (0..digits).rev() {
        let mut nibble = 0u8;
        for b in 0..4 {
            if init.get(d * 4 + b).copied().unwrap_or(false) {
                nibble |= 1 << b;
            }
        }
        s.push(char::from_digit(nibble as u32, 16).unwrap());
    }
    s
}

/// Parses a hex truth table into exactly `len` entries. Shorter literals are zero-extended;
/// set bits beyond `len` are rejected.
pub fn init_from_hex(text: &str, len: usize) -> Result<Vec<bool>, FabricError> {
    let bad = |reason: &str| FabricError::BadInit {
        text: text.to_string(),
        reason: reason.to_string(),
    };
    let digits = text
        .strip_prefix("0x")
        .or_else(|| text.strip_prefix("0X"))
        .ok_or_else(|| bad("missing 0x prefix"))?;
    if digits.is_empty() {
        return Err(bad("no hex digits"));
    }
    let mut bits = vec![false; len];
    for (pos, ch) in digits.chars().rev().enumerate() {
        let nibble = ch.to_digit(16).ok_or_else(|| bad("non-hex digit"))?;
        for b in 0..4 {
            if nibble & (1 << b) != 0 {
                let idx = pos * 4 + b;
                if idx >= len {
                    return Err(bad("value wider than the truth table"));
                }
                bits[idx] = true;
            }
        }
    }
    Ok(bits)
}
