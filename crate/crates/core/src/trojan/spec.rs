use std::fmt;
use std::str::FromStr;

use crate::error::TrojanError;
use crate::fabric::Route;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GateFunc {
    And,
    Or,
    Nand,
    Nor,
    Xor,
    Not,
}

impl GateFunc {
    pub fn eval(self, inputs: &[bool]) -> bool {
        let all = inputs.iter().all(|b| *b);
        let any = inputs.iter().any(|b| *b);
        match self {
            GateFunc::And => all,
            GateFunc::Or => any,
            GateFunc::Nand => !all,
            GateFunc::Nor => !any,
            GateFunc::Xor => inputs.iter().filter(|b| **b).count() % 2 == 1,
            GateFunc::Not => !inputs.first().copied().unwrap_or(false),
        }
    }

    /// Logical complement, used to force a trigger term low.
    pub fn inverted(self) -> GateFunc {
        match self {
            GateFunc::And => GateFunc::Nand,
            GateFunc::Nand => GateFunc::And,
            GateFunc::Or => GateFunc::Nor,
            GateFunc::Nor => GateFunc::Or,
            GateFunc::Xor => GateFunc::Xor,
            GateFunc::Not => GateFunc::Not,
        }
    }

    fn arity_ok(self, n: usize) -> bool {
        match self {
            GateFunc::Not => n == 1,
            _ => n >= 2,
        }
    }
}

impl fmt::Display for GateFunc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GateFunc::And => "AND",
            GateFunc::Or => "OR",
            GateFunc::Nand => "NAND",
            GateFunc::Nor => "NOR",
            GateFunc::Xor => "XOR",
            GateFunc::Not => "NOT",
        })
    }
}

impl FromStr for GateFunc {
    type Err = TrojanError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s.to_ascii_uppercase().as_str() {
            "AND" => GateFunc::And,
            "OR" => GateFunc::Or,
            "NAND" => GateFunc::Nand,
            "NOR" => GateFunc::Nor,
            "XOR" => GateFunc::Xor,
            "NOT" => GateFunc::Not,
            _ => {
                return Err(TrojanError::InvalidParam(format!(
                    "unknown gate function `{s}`"
                )))
            }
        })
    }
}

/// A logic gate to be mapped onto one LUT. Text form: `AND(a,b)->out`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GateDef {
    pub func: GateFunc,
    pub inputs: Vec<String>,
    pub output: String,
}

impl GateDef {
    pub fn new(func: GateFunc, inputs: &[&str], output: &str) -> Self {
        GateDef {
            func,
            inputs: inputs.iter().map(|s| s.to_string()).collect(),
            output: output.to_string(),
        }
    }

    /// Truth table at `arity`; inputs beyond the gate's own are don't-cares.
    pub fn truth_table(&self, arity: usize) -> Result<Vec<bool>, TrojanError> {
        let n = self.inputs.len();
        if !self.func.arity_ok(n) {
            return Err(TrojanError::InvalidParam(format!(
                "{} cannot take {n} inputs",
                self.func
            )));
        }
        if n > arity {
            return Err(TrojanError::InvalidParam(format!(
                "gate `{self}` has {n} inputs, LUT arity is {arity}"
            )));
        }
        Ok((0..1usize << arity)
            .map(|i| {
                let bits: Vec<bool> = (0..n).map(|k| i >> k & 1 == 1).collect();
                self.func.eval(&bits)
            })
            .collect())
    }
}

impl fmt::Display for GateDef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}({})->{}",
            self.func,
            self.inputs.join(","),
            self.output
        )
    }
}

impl FromStr for GateDef {
    type Err = TrojanError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad =
            || TrojanError::InvalidParam(format!("malformed gate `{s}`, expected FUNC(a,b)->out"));
        let (call, output) = s.split_once("->").ok_or_else(bad)?;
        let (func, args) = call.split_once('(').ok_or_else(bad)?;
        let args = args.strip_suffix(')').ok_or_else(bad)?;
        let inputs: Vec<String> = args.split(',').map(|a| a.trim().to_string()).collect();
        if output.is_empty() || inputs.iter().any(|a| a.is_empty()) {
            return Err(bad());
        }
        Ok(GateDef {
            func: func.trim().parse()?,
            inputs,
            output: output.trim().to_string(),
        })
    }
}

/// One configuration edit. Cells are named in `CellRef` text form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Patch {
    /// Replaces a LUT truth table; `before`, when given, must match the current table.
    SetInit {
        cell: String,
        before: Option<String>,
        after: String,
    },
    SetPin {
        net: String,
        value: bool,
    },
    SetFfState {
        cell: String,
        state: bool,
    },
    /// Enables a route in a tile's switch box (replacing any route to the same sink there),
    /// or removes it when `enable` is false.
    SetRoute {
        switchbox: String,
        route: Route,
        enable: bool,
    },
    /// Splits the existing route `route` through the unused LUT `cell` configured as identity.
    AddRouteThru {
        cell: String,
        route: Route,
    },
    /// Relocates the route-thru LUT at `from` to the unused LUT `to`, moving its routes.
    MoveRouteThru {
        from: String,
        to: String,
    },
    /// Maps each gate onto the matching unused LUT.
    AddGates {
        cells: Vec<String>,
        gates: Vec<GateDef>,
    },
    /// Binary up-counter over `ffs` (bit 0 first) with next-state LUTs `luts[..ffs.len()]`
    /// and a terminal-count LUT `luts[ffs.len()]` driving `<prefix>_tc`.
    AddCounter {
        ffs: Vec<String>,
        luts: Vec<String>,
        states: usize,
        prefix: String,
    },
}

impl Patch {
    pub fn kind(&self) -> &'static str {
        match self {
            Patch::SetInit { .. } => "set_init",
            Patch::SetPin { .. } => "set_pin",
            Patch::SetFfState { .. } => "set_ff_state",
            Patch::SetRoute { .. } => "set_route",
            Patch::AddRouteThru { .. } => "add_route_thru",
            Patch::MoveRouteThru { .. } => "move_route_thru",
            Patch::AddGates { .. } => "add_gates",
            Patch::AddCounter { .. } => "add_counter",
        }
    }

    fn target_payload(&self) -> (String, String) {
        let bit = |b: bool| if b { "1" } else { "0" }.to_string();
        match self {
            Patch::SetInit {
                cell,
                before,
                after,
            } => (
                cell.clone(),
                match before {
                    Some(b) => format!("{b}->{after}"),
                    None => after.clone(),
                },
            ),
            Patch::SetPin { net, value } => (net.clone(), bit(*value)),
            Patch::SetFfState { cell, state } => (cell.clone(), bit(*state)),
            Patch::SetRoute {
                switchbox,
                route,
                enable,
            } => (
                switchbox.clone(),
                format!("{}{}", if *enable { "" } else { "!" }, route),
            ),
            Patch::AddRouteThru { cell, route } => (cell.clone(), route.to_string()),
            Patch::MoveRouteThru { from, to } => (from.clone(), to.clone()),
            Patch::AddGates { cells, gates } => (
                cells.join("|"),
                gates
                    .iter()
                    .map(|g| g.to_string())
                    .collect::<Vec<_>>()
                    .join("|"),
            ),
            Patch::AddCounter {
                ffs,
                luts,
                states,
                prefix,
            } => (
                ffs.join("|"),
                format!("states={states};prefix={prefix};luts={}", luts.join("|")),
            ),
        }
    }

    fn parse(kind: &str, target: &str, payload: &str) -> Result<Patch, String> {
        let bit = |s: &str| match s {
            "0" => Ok(false),
            "1" => Ok(true),
            _ => Err(format!("expected 0 or 1, got `{s}`")),
        };
        let route = |s: &str| {
            s.split_once("->")
                .filter(|(a, b)| !a.is_empty() && !b.is_empty())
                .map(|(a, b)| Route::new(a, b))
                .ok_or_else(|| format!("expected src->sink, got `{s}`"))
        };
        let list = |s: &str| s.split('|').map(str::to_string).collect::<Vec<_>>();
        Ok(match kind {
            "set_init" => {
                let (before, after) = match payload.split_once("->") {
                    Some((b, a)) => (Some(b.to_string()), a.to_string()),
                    None => (None, payload.to_string()),
                };
                Patch::SetInit {
                    cell: target.to_string(),
                    before,
                    after,
                }
            }
            "set_pin" => Patch::SetPin {
                net: target.to_string(),
                value: bit(payload)?,
            },
            "set_ff_state" => Patch::SetFfState {
                cell: target.to_string(),
                state: bit(payload)?,
            },
            "set_route" => {
                let (enable, r) = match payload.strip_prefix('!') {
                    Some(rest) => (false, rest),
                    None => (true, payload),
                };
                Patch::SetRoute {
                    switchbox: target.to_string(),
                    route: route(r)?,
                    enable,
                }
            }
            "add_route_thru" => Patch::AddRouteThru {
                cell: target.to_string(),
                route: route(payload)?,
            },
            "move_route_thru" => Patch::MoveRouteThru {
                from: target.to_string(),
                to: payload.to_string(),
            },
            "add_gates" => Patch::AddGates {
                cells: list(target),
                gates: list(payload)
                    .iter()
                    .map(|g| g.parse::<GateDef>().map_err(|e| e.to_string()))
                    .collect::<Result<_, _>>()?,
            },
            "add_counter" => {
                let (mut states, mut prefix, mut luts) = (None, None, None);
                for field in payload.split(';') {
                    match field.split_once('=') {
                        Some(("states", v)) => {
                            states = Some(
                                v.parse::<usize>()
                                    .map_err(|_| format!("bad state count `{v}`"))?,
                            )
                        }
                        Some(("prefix", v)) => prefix = Some(v.to_string()),
                        Some(("luts", v)) => luts = Some(list(v)),
                        _ => return Err(format!("unknown counter field `{field}`")),
                    }
                }
                Patch::AddCounter {
                    ffs: list(target),
                    luts: luts.ok_or("counter needs luts=")?,
                    states: states.ok_or("counter needs states=")?,
                    prefix: prefix.ok_or("counter needs prefix=")?,
                }
            }
            _ => return Err(format!("unknown patch kind `{kind}`")),
        })
    }
}

/// Ordered list of patches with a free-text label.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TrojanSpec {
    pub label: String,
    pub patches: Vec<Patch>,
}

impl TrojanSpec {
    pub fn new(label: impl Into<String>) -> Self {
        TrojanSpec {
            label: label.into(),
            patches: Vec::new(),
        }
    }

    /// Line format:
    ///
    /// ```text
    /// # comment
    /// label <text>
    /// patch <kind> target=<target> payload=<payload>
    /// ```
    ///
    /// Lists inside a target or payload are separated by `|`.
    pub fn to_text(&self) -> String {
        let mut s = format!("label {}\n", self.label);
        for p in &self.patches {
            let (t, v) = p.target_payload();
            s.push_str(&format!("patch {} target={t} payload={v}\n", p.kind()));
        }
        s
    }

    pub fn parse(text: &str) -> Result<TrojanSpec, TrojanError> {
        let mut spec = TrojanSpec::default();
        for (i, raw) in text.lines().enumerate() {
            let err = |message: String| TrojanError::Parse {
                line: i + 1,
                message,
            };
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, rest) = line.split_once(char::is_whitespace).unwrap_or((line, ""));
            match key {
                "label" => spec.label = rest.trim().to_string(),
                "patch" => {
                    let mut words = rest.split_whitespace();
                    let kind = words
                        .next()
                        .ok_or_else(|| err("missing patch kind".into()))?;
                    let (mut target, mut payload) = (None, None);
                    for w in words {
                        match w.split_once('=') {
                            Some(("target", v)) => target = Some(v),
                            Some(("payload", v)) => payload = Some(v),
                            _ => return Err(err(format!("unexpected field `{w}`"))),
                        }
                    }
                    let target = target.ok_or_else(|| err("missing target=".into()))?;
                    let payload = payload.ok_or_else(|| err("missing payload=".into()))?;
                    spec.patches
                        .push(Patch::parse(kind, target, payload).map_err(err)?);
                }
                other => return Err(err(format!("unknown key `{other}`"))),
            }
        }
        Ok(spec)
    }
}
