use super::spec::{Patch, TrojanSpec};
use crate::error::TrojanError;
use crate::fabric::{
    init_from_hex, validate, ElementLoc, FabricConfig, FfConfig, LutConfig, Route, NET_ZERO,
};
use crate::logic::{build_netlist, identity_init};

/// Number of flip-flops used for a counter with `states` states.
pub fn counter_bits(states: usize) -> usize {
    let mut b = 0;
    while (1usize << b) < states + 1 {
        b += 1;
    }
    b
}

/// Whether `l` is a route-thru: used, identity on input 0, every other input tied low.
pub fn is_route_thru(l: &LutConfig) -> bool {
    l.used
        && l.init == identity_init(l.arity)
        && l.input_nets
            .first()
            .is_some_and(|n| n != NET_ZERO && n != crate::fabric::NET_ONE)
        && l.input_nets[1..].iter().all(|n| n == NET_ZERO)
}

pub(crate) fn lut_loc(cfg: &FabricConfig, cell: &str) -> Result<ElementLoc, TrojanError> {
    match cfg.resolve(cell)?.1 {
        loc @ ElementLoc::Lut { .. } => Ok(loc),
        _ => Err(TrojanError::WrongElement(cell.to_string())),
    }
}

pub(crate) fn ff_loc(cfg: &FabricConfig, cell: &str) -> Result<ElementLoc, TrojanError> {
    match cfg.resolve(cell)?.1 {
        loc @ ElementLoc::Ff { .. } => Ok(loc),
        _ => Err(TrojanError::WrongElement(cell.to_string())),
    }
}

fn tile_of(loc: ElementLoc) -> usize {
    match loc {
        ElementLoc::Lut { tile, .. }
        | ElementLoc::Ff { tile, .. }
        | ElementLoc::SwitchBox { tile } => tile,
    }
}

fn unused_lut(cfg: &FabricConfig, cell: &str) -> Result<ElementLoc, TrojanError> {
    let loc = lut_loc(cfg, cell)?;
    if cfg.lut(loc).unwrap().used {
        return Err(TrojanError::ElementInUse(cell.to_string()));
    }
    Ok(loc)
}

fn configure_lut(
    cfg: &mut FabricConfig,
    loc: ElementLoc,
    init: Vec<bool>,
    inputs: &[String],
    output: &str,
) {
    let l = cfg.lut_mut(loc).unwrap();
    l.init = init;
    for (i, n) in l.input_nets.iter_mut().enumerate() {
        *n = inputs
            .get(i)
            .cloned()
            .unwrap_or_else(|| NET_ZERO.to_string());
    }
    l.output_net = Some(output.to_string());
    l.used = true;
}

/// Net names `rt_<cell>_i` / `rt_<cell>_o` for a route-thru placed at `cell`.
pub(crate) fn route_thru_nets(cell: &str) -> (String, String) {
    let s: String = cell
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
        .collect();
    (format!("rt_{s}_i"), format!("rt_{s}_o"))
}

fn apply_one(cfg: &mut FabricConfig, patch: &Patch) -> Result<(), TrojanError> {
    match patch {
        Patch::SetInit {
            cell,
            before,
            after,
        } => {
            let loc = lut_loc(cfg, cell)?;
            let l = cfg.lut_mut(loc).unwrap();
            let n = l.init.len();
            if let Some(b) = before {
                if init_from_hex(b, n)? != l.init {
                    return Err(TrojanError::Mismatch(format!(
                        "{cell} has init {}, patch expects {b}",
                        l.init_hex()
                    )));
                }
            }
            l.init = init_from_hex(after, n)?;
        }
        Patch::SetPin { net, value } => {
            let pin = cfg
                .pins
                .iter_mut()
                .find(|(n, _)| n == net)
                .ok_or_else(|| TrojanError::NetMissing(net.clone()))?;
            pin.1 = *value;
        }
        Patch::SetFfState { cell, state } => {
            let loc = ff_loc(cfg, cell)?;
            cfg.ff_mut(loc).unwrap().state = *state;
        }
        Patch::SetRoute {
            switchbox,
            route,
            enable,
        } => {
            let tile = match cfg.resolve(switchbox)?.1 {
                ElementLoc::SwitchBox { tile } => tile,
                _ => return Err(TrojanError::WrongElement(switchbox.clone())),
            };
            if *enable {
                if !cfg.is_driven(&route.source) {
                    return Err(TrojanError::NetMissing(route.source.clone()));
                }
                let sb = &mut cfg.tiles[tile].switchbox;
                sb.routes.retain(|r| r.sink != route.sink);
                sb.routes.push(route.clone());
            } else {
                let sb = &mut cfg.tiles[tile].switchbox;
                let before = sb.routes.len();
                sb.routes.retain(|r| r != route);
                if sb.routes.len() == before {
                    return Err(TrojanError::RouteMissing {
                        src: route.source.clone(),
                        sink: route.sink.clone(),
                    });
                }
            }
        }
        Patch::AddRouteThru { cell, route } => {
            let loc = unused_lut(cfg, cell)?;
            let (old_tile, _) = cfg
                .route_driving(&route.sink)
                .filter(|(_, r)| r.source == route.source)
                .ok_or_else(|| TrojanError::RouteMissing {
                    src: route.source.clone(),
                    sink: route.sink.clone(),
                })?;
            let (i, o) = route_thru_nets(cell);
            for n in [&i, &o] {
                if cfg.is_driven(n) {
                    return Err(TrojanError::Invalid(format!("net `{n}` already exists")));
                }
            }
            cfg.tiles[old_tile].switchbox.routes.retain(|r| r != route);
            let arity = cfg.lut(loc).unwrap().arity;
            configure_lut(cfg, loc, identity_init(arity), std::slice::from_ref(&i), &o);
            let sb = &mut cfg.tiles[tile_of(loc)].switchbox;
            sb.routes.push(Route::new(route.source.clone(), i));
            sb.routes.push(Route::new(o, route.sink.clone()));
        }
        Patch::MoveRouteThru { from, to } => {
            let src = lut_loc(cfg, from)?;
            let rt = cfg.lut(src).unwrap().clone();
            if !is_route_thru(&rt) {
                return Err(TrojanError::NoRouteThru(from.clone()));
            }
            if from == to {
                return Ok(());
            }
            let dst = unused_lut(cfg, to)?;
            let arity = rt.arity;
            configure_lut(
                cfg,
                dst,
                rt.init.clone(),
                &rt.input_nets,
                rt.output_net.as_deref().unwrap(),
            );
            *cfg.lut_mut(src).unwrap() = LutConfig::unused(rt.name.clone(), arity);
            let (ts, td) = (tile_of(src), tile_of(dst));
            if ts != td {
                let input = &rt.input_nets[0];
                let output = rt.output_net.as_ref().unwrap();
                let (moved, kept): (Vec<Route>, Vec<Route>) = cfg.tiles[ts]
                    .switchbox
                    .routes
                    .drain(..)
                    .partition(|r| &r.sink == input || &r.source == output);
                cfg.tiles[ts].switchbox.routes = kept;
                cfg.tiles[td].switchbox.routes.extend(moved);
            }
        }
        Patch::AddGates { cells, gates } => {
            if cells.len() != gates.len() {
                return Err(TrojanError::InvalidParam(format!(
                    "{} cells for {} gates",
                    cells.len(),
                    gates.len()
                )));
            }
            for (cell, g) in cells.iter().zip(gates) {
                let loc = unused_lut(cfg, cell)?;
                let table = g.truth_table(cfg.lut(loc).unwrap().arity)?;
                configure_lut(cfg, loc, table, &g.inputs, &g.output);
            }
        }
        Patch::AddCounter {
            ffs,
            luts,
            states,
            prefix,
        } => {
            if *states < 2 {
                return Err(TrojanError::InvalidParam(
                    "a counter needs at least 2 states".into(),
                ));
            }
            let b = counter_bits(*states);
            if ffs.len() != b || luts.len() != b + 1 {
                return Err(TrojanError::InvalidParam(format!(
                    "{states} states need {b} flip-flops and {} LUTs, got {} and {}",
                    b + 1,
                    ffs.len(),
                    luts.len()
                )));
            }
            let q: Vec<String> = (0..b).map(|i| format!("{prefix}_q{i}")).collect();
            let last = states - 1;
            let lut_locs = luts
                .iter()
                .map(|c| unused_lut(cfg, c))
                .collect::<Result<Vec<_>, _>>()?;
            let arity = cfg.lut(lut_locs[0]).unwrap().arity;
            if b > arity {
                return Err(TrojanError::InsufficientResources(format!(
                    "{b}-bit counter exceeds LUT arity {arity}"
                )));
            }
            let count = |j: usize| j & ((1 << b) - 1);
            let next = |c: usize| if c >= last { 0 } else { c + 1 };
            for (i, cell) in ffs.iter().enumerate() {
                let loc = ff_loc(cfg, cell)?;
                let f = cfg.ff_mut(loc).unwrap();
                if f.used {
                    return Err(TrojanError::ElementInUse(cell.clone()));
                }
                *f = FfConfig {
                    name: f.name.clone(),
                    state: false,
                    d_net: format!("{prefix}_d{i}"),
                    q_net: Some(q[i].clone()),
                    used: true,
                };
                let table = (0..1usize << arity)
                    .map(|j| next(count(j)) >> i & 1 == 1)
                    .collect();
                configure_lut(cfg, lut_locs[i], table, &q, &format!("{prefix}_d{i}"));
            }
            let tc = (0..1usize << arity).map(|j| count(j) == last).collect();
            configure_lut(cfg, lut_locs[b], tc, &q, &format!("{prefix}_tc"));
        }
    }
    Ok(())
}

/// Applies every patch in order to a copy of `cfg`. The result must validate and have an
/// acyclic combinational netlist.
pub fn apply_patch(cfg: &FabricConfig, spec: &TrojanSpec) -> Result<FabricConfig, TrojanError> {
    let mut out = cfg.clone();
    for p in &spec.patches {
        apply_one(&mut out, p)?;
    }
    let v = validate(&out);
    if !v.is_empty() {
        return Err(TrojanError::Invalid(
            v.iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join("; "),
        ));
    }
    build_netlist(&out)?;
    Ok(out)
}
