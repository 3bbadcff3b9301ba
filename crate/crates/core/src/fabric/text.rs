//! Line-oriented fabric-configuration format.
//!
//! ```text
//! # comment
//! name <free text>
//! family seriesk|seriesp
//! grid <cols>x<rows>
//! pin <net> <0|1>
//! tile <col> <row> [capacity=<n>]
//!   slice <name>
//!     lut <name> arity=<4|6> init=<hex> in=<net,...> out=<net|-> used=<0|1>
//!     ff <name> state=<0|1> d=<net> q=<net|-> used=<0|1>
//!   route <src>-><sink>
//! ```
//!
//! `slice` lines open a slice inside the most recent `tile`; `lut`/`ff` lines belong to the
//! most recent slice and `route` lines to the most recent tile's switch box. Family elements
//! a slice does not list are filled in unused. Indentation is insignificant and `#` starts
//! a comment anywhere on a line.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::model::{
    init_from_hex, FabricConfig, Family, FfConfig, LutConfig, Route, Slice, SwitchBox, Tile,
};
use super::validate::{is_valid_net_name, validate};
use crate::error::FabricError;

struct Token<'a> {
    column: usize,
    text: &'a str,
}

fn tokenize(line: &str) -> Vec<Token<'_>> {
    let mut out = Vec::new();
    let mut start: Option<usize> = None;
    for (i, c) in line.char_indices() {
        if c.is_whitespace() {
            if let Some(s) = start.take() {
                out.push(Token {
                    column: line[..s].chars().count() + 1,
                    text: &line[s..i],
                });
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        out.push(Token {
            column: line[..s].chars().count() + 1,
            text: &line[s..],
        });
    }
    out
}

struct LineCtx {
    line: usize,
}

impl LineCtx {
    fn syntax(&self, column: usize, message: impl Into<String>) -> FabricError {
        FabricError::Syntax {
            line: self.line,
            column,
            message: message.into(),
        }
    }

    fn schema(&self, field: &str, message: impl Into<String>) -> FabricError {
        FabricError::Schema {
            line: self.line,
            field: field.to_string(),
            message: message.into(),
        }
    }

    /// Parses `key=value` tokens, rejecting unknown and repeated keys.
    fn fields<'a>(
        &self,
        tokens: &'a [Token<'a>],
        allowed: &[&str],
    ) -> Result<BTreeMap<&'a str, &'a str>, FabricError> {
        let mut map = BTreeMap::new();
        for t in tokens {
            let (k, v) = t.text.split_once('=').ok_or_else(|| {
                self.syntax(t.column, format!("expected key=value, found `{}`", t.text))
            })?;
            if !allowed.contains(&k) {
                return Err(self.schema(k, "unknown field"));
            }
            if map.insert(k, v).is_some() {
                return Err(self.schema(k, "field given twice"));
            }
        }
        Ok(map)
    }

    fn required<'a>(
        &self,
        map: &BTreeMap<&str, &'a str>,
        key: &str,
    ) -> Result<&'a str, FabricError> {
        map.get(key)
            .copied()
            .ok_or_else(|| self.schema(key, "missing required field"))
    }

    fn bit(&self, field: &str, v: &str) -> Result<bool, FabricError> {
        match v {
            "0" => Ok(false),
            "1" => Ok(true),
            _ => Err(self.schema(field, format!("expected 0 or 1, found `{v}`"))),
        }
    }

    fn net(&self, field: &str, v: &str) -> Result<String, FabricError> {
        if is_valid_net_name(v) {
            Ok(v.to_string())
        } else {
            Err(self.schema(field, format!("`{v}` is not a valid net id")))
        }
    }

    fn opt_net(&self, field: &str, v: &str) -> Result<Option<String>, FabricError> {
        if v == "-" {
            Ok(None)
        } else {
            self.net(field, v).map(Some)
        }
    }

    fn usize_tok(&self, t: &Token<'_>, what: &str) -> Result<usize, FabricError> {
        t.text
            .parse()
            .map_err(|_| self.syntax(t.column, format!("expected {what}, found `{}`", t.text)))
    }
}

struct PendingSlice {
    name: String,
    luts: BTreeMap<String, LutConfig>,
    ffs: BTreeMap<String, FfConfig>,
}

struct PendingTile {
    col: usize,
    row: usize,
    slices: Vec<PendingSlice>,
    switchbox: SwitchBox,
}

/// Parses a fabric-config document and checks every structural invariant.
pub fn parse_fabric_config(text: &str) -> Result<FabricConfig, FabricError> {
    let mut name = String::new();
    let mut family: Option<Family> = None;
    let mut grid: Option<(usize, usize)> = None;
    let mut pins: Vec<(String, bool)> = Vec::new();
    let mut tiles: Vec<PendingTile> = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let ctx = LineCtx { line: idx + 1 };
        let content = match raw.find('#') {
            Some(p) => &raw[..p],
            None => raw,
        };
        let tokens = tokenize(content);
        let Some(head) = tokens.first() else {
            continue;
        };
        let args = &tokens[1..];
        match head.text {
            "name" => {
                name = content.trim_start()["name".len()..].trim().to_string();
            }
            "family" => {
                let [f] = args else {
                    return Err(ctx.syntax(head.column, "expected `family <name>`"));
                };
                family =
                    Some(f.text.parse().map_err(|_| {
                        ctx.schema("family", format!("unknown family `{}`", f.text))
                    })?);
            }
            "grid" => {
                let [g] = args else {
                    return Err(ctx.syntax(head.column, "expected `grid <cols>x<rows>`"));
                };
                let parsed = g
                    .text
                    .split_once('x')
                    .and_then(|(c, r)| Some((c.parse().ok()?, r.parse().ok()?)));
                grid = Some(parsed.ok_or_else(|| ctx.syntax(g.column, "expected <cols>x<rows>"))?);
            }
            "pin" => {
                let [n, v] = args else {
                    return Err(ctx.syntax(head.column, "expected `pin <net> <0|1>`"));
                };
                pins.push((ctx.net("pin", n.text)?, ctx.bit("pin", v.text)?));
            }
            "tile" => {
                if family.is_none() || grid.is_none() {
                    return Err(ctx.schema("tile", "`family` and `grid` must precede tiles"));
                }
                if args.len() < 2 {
                    return Err(ctx.syntax(head.column, "expected `tile <col> <row>`"));
                }
                let col = ctx.usize_tok(&args[0], "column")?;
                let row = ctx.usize_tok(&args[1], "row")?;
                let fields = ctx.fields(&args[2..], &["capacity"])?;
                let mut switchbox = SwitchBox::default();
                if let Some(c) = fields.get("capacity") {
                    switchbox.capacity = c
                        .parse()
                        .map_err(|_| ctx.schema("capacity", "expected a non-negative integer"))?;
                }
                tiles.push(PendingTile {
                    col,
                    row,
                    slices: Vec::new(),
                    switchbox,
                });
            }
            "slice" => {
                let [n] = args else {
                    return Err(ctx.syntax(head.column, "expected `slice <name>`"));
                };
                let tile = tiles
                    .last_mut()
                    .ok_or_else(|| ctx.schema("slice", "slice outside of a tile block"))?;
                tile.slices.push(PendingSlice {
                    name: n.text.to_string(),
                    luts: BTreeMap::new(),
                    ffs: BTreeMap::new(),
                });
            }
            "lut" => {
                let fam = family.expect("checked by tile");
                let slice = tiles
                    .last_mut()
                    .and_then(|t| t.slices.last_mut())
                    .ok_or_else(|| ctx.schema("lut", "lut outside of a slice block"))?;
                let Some(n) = args.first() else {
                    return Err(ctx.syntax(head.column, "expected `lut <name> ...`"));
                };
                if !fam.lut_names().iter().any(|x| x == n.text) {
                    return Err(ctx.schema("lut", format!("`{}` is not a {fam} LUT name", n.text)));
                }
                let f = ctx.fields(&args[1..], &["arity", "init", "in", "out", "used"])?;
                let arity: usize = ctx
                    .required(&f, "arity")?
                    .parse()
                    .map_err(|_| ctx.schema("arity", "expected an integer"))?;
                if arity != 4 && arity != 6 {
                    return Err(ctx.schema("arity", format!("arity must be 4 or 6, got {arity}")));
                }
                let init = init_from_hex(ctx.required(&f, "init")?, 1 << arity)
                    .map_err(|e| ctx.schema("init", e.to_string()))?;
                let input_nets = ctx
                    .required(&f, "in")?
                    .split(',')
                    .map(|s| ctx.net("in", s))
                    .collect::<Result<Vec<_>, _>>()?;
                let lut = LutConfig {
                    name: n.text.to_string(),
                    arity,
                    init,
                    input_nets,
                    output_net: ctx.opt_net("out", ctx.required(&f, "out")?)?,
                    used: ctx.bit("used", ctx.required(&f, "used")?)?,
                };
                if slice.luts.insert(lut.name.clone(), lut).is_some() {
                    return Err(ctx.schema("lut", format!("`{}` declared twice", n.text)));
                }
            }
            "ff" => {
                let fam = family.expect("checked by tile");
                let slice = tiles
                    .last_mut()
                    .and_then(|t| t.slices.last_mut())
                    .ok_or_else(|| ctx.schema("ff", "ff outside of a slice block"))?;
                let Some(n) = args.first() else {
                    return Err(ctx.syntax(head.column, "expected `ff <name> ...`"));
                };
                if !fam.ff_names().iter().any(|x| x == n.text) {
                    return Err(ctx.schema("ff", format!("`{}` is not a {fam} FF name", n.text)));
                }
                let f = ctx.fields(&args[1..], &["state", "d", "q", "used"])?;
                let ff = FfConfig {
                    name: n.text.to_string(),
                    state: ctx.bit("state", ctx.required(&f, "state")?)?,
                    d_net: ctx.net("d", ctx.required(&f, "d")?)?,
                    q_net: ctx.opt_net("q", ctx.required(&f, "q")?)?,
                    used: ctx.bit("used", ctx.required(&f, "used")?)?,
                };
                if slice.ffs.insert(ff.name.clone(), ff).is_some() {
                    return Err(ctx.schema("ff", format!("`{}` declared twice", n.text)));
                }
            }
            "route" => {
                let [r] = args else {
                    return Err(ctx.syntax(head.column, "expected `route <src>-><sink>`"));
                };
                let tile = tiles
                    .last_mut()
                    .ok_or_else(|| ctx.schema("route", "route outside of a tile block"))?;
                let (src, sink) = r
                    .text
                    .split_once("->")
                    .ok_or_else(|| ctx.syntax(r.column, "expected <src>-><sink>"))?;
                tile.switchbox
                    .routes
                    .push(Route::new(ctx.net("route", src)?, ctx.net("route", sink)?));
            }
            other => {
                return Err(ctx.syntax(head.column, format!("unknown keyword `{other}`")));
            }
        }
    }

    let family = family.ok_or(FabricError::Schema {
        line: 0,
        field: "family".into(),
        message: "missing".into(),
    })?;
    let (grid_cols, grid_rows) = grid.ok_or(FabricError::Schema {
        line: 0,
        field: "grid".into(),
        message: "missing".into(),
    })?;

    let arity = family.lut_arity();
    let tiles = tiles
        .into_iter()
        .map(|pt| Tile {
            col: pt.col,
            row: pt.row,
            slices: pt
                .slices
                .into_iter()
                .map(|mut ps| Slice {
                    luts: family
                        .lut_names()
                        .into_iter()
                        .map(|n| {
                            ps.luts
                                .remove(&n)
                                .unwrap_or_else(|| LutConfig::unused(n, arity))
                        })
                        .collect(),
                    ffs: family
                        .ff_names()
                        .into_iter()
                        .map(|n| ps.ffs.remove(&n).unwrap_or_else(|| FfConfig::unused(n)))
                        .collect(),
                    name: ps.name,
                })
                .collect(),
            switchbox: pt.switchbox,
        })
        .collect();

    let cfg = FabricConfig {
        name,
        family,
        grid_cols,
        grid_rows,
        tiles,
        pins,
    };
    let violations = validate(&cfg);
    if violations.is_empty() {
        Ok(cfg)
    } else {
        Err(FabricError::Invalid(violations))
    }
}

fn bit(b: bool) -> char {
    if b {
        '1'
    } else {
        '0'
    }
}

/// Serializes a config; every element is written explicitly so the output is byte-stable.
pub fn serialize_fabric_config(cfg: &FabricConfig) -> String {
    let mut s = String::new();
    s.push_str("# fabric configuration\n");
    if !cfg.name.is_empty() {
        let _ = writeln!(s, "name {}", cfg.name);
    }
    let _ = writeln!(s, "family {}", cfg.family);
    let _ = writeln!(s, "grid {}x{}", cfg.grid_cols, cfg.grid_rows);
    for (net, v) in &cfg.pins {
        let _ = writeln!(s, "pin {net} {}", bit(*v));
    }
    for t in &cfg.tiles {
        let _ = writeln!(
            s,
            "tile {} {} capacity={}",
            t.col, t.row, t.switchbox.capacity
        );
        for sl in &t.slices {
            let _ = writeln!(s, "  slice {}", sl.name);
            for l in &sl.luts {
                let _ = writeln!(
                    s,
                    "    lut {} arity={} init={} in={} out={} used={}",
                    l.name,
                    l.arity,
                    l.init_hex(),
                    l.input_nets.join(","),
                    l.output_net.as_deref().unwrap_or("-"),
                    bit(l.used)
                );
            }
            for f in &sl.ffs {
                let _ = writeln!(
                    s,
                    "    ff {} state={} d={} q={} used={}",
                    f.name,
                    bit(f.state),
                    f.d_net,
                    f.q_net.as_deref().unwrap_or("-"),
                    bit(f.used)
                );
            }
        }
        for r in &t.switchbox.routes {
            let _ = writeln!(s, "  route {r}");
        }
    }
    s
}
