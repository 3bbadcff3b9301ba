use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::apply::{apply_patch, counter_bits, ff_loc, is_route_thru, lut_loc};
use super::spec::{GateDef, GateFunc, Patch, TrojanSpec};
use crate::error::TrojanError;
use crate::fabric::{CellRef, ElementLoc, FabricConfig, Route, NET_ONE, NET_ZERO};
use crate::logic::{build_netlist, evaluate_logic, fanout_cone, NodeValues};

/// Every net name appearing anywhere in `cfg`.
fn all_nets(cfg: &FabricConfig) -> BTreeSet<String> {
    let mut nets: BTreeSet<String> = cfg.driver_counts().into_keys().collect();
    for t in &cfg.tiles {
        for s in &t.slices {
            for l in &s.luts {
                nets.extend(l.input_nets.iter().cloned());
            }
            for f in &s.ffs {
                nets.insert(f.d_net.clone());
            }
        }
        for r in &t.switchbox.routes {
            nets.insert(r.source.clone());
        }
    }
    nets
}

/// `base`, `base2`, `base3`, ... : the first prefix no existing net starts with.
pub fn fresh_prefix(cfg: &FabricConfig, base: &str) -> String {
    let nets = all_nets(cfg);
    (1..)
        .map(|i| {
            if i == 1 {
                base.to_string()
            } else {
                format!("{base}{i}")
            }
        })
        .find(|p| {
            let head = format!("{p}_");
            !nets.iter().any(|n| n.starts_with(&head))
        })
        .unwrap()
}

/// Checks that every net of `before` keeps its value in `after`.
pub fn check_dormant(before: &FabricConfig, after: &FabricConfig) -> Result<(), TrojanError> {
    let vb = evaluate_logic(&build_netlist(before)?, before)?;
    let va = evaluate_logic(&build_netlist(after)?, after)?;
    for (net, v) in &vb.0 {
        if va.get(net) != Some(*v) {
            return Err(TrojanError::Invalid(format!(
                "net `{net}` changes value; Trojan is not dormant"
            )));
        }
    }
    Ok(())
}

fn cell_name(cfg: &FabricConfig, loc: ElementLoc) -> String {
    cfg.cell_ref(loc).to_string()
}

fn free_luts(cfg: &FabricConfig) -> Vec<ElementLoc> {
    cfg.lut_locs()
        .into_iter()
        .filter(|l| !cfg.lut(*l).unwrap().used)
        .collect()
}

fn free_ffs(cfg: &FabricConfig) -> Vec<ElementLoc> {
    cfg.ff_locs()
        .into_iter()
        .filter(|l| !cfg.ff(*l).unwrap().used)
        .collect()
}

fn pick<T: Copy>(
    rng: &mut ChaCha8Rng,
    pool: &[T],
    n: usize,
    what: &str,
) -> Result<Vec<T>, TrojanError> {
    if pool.len() < n {
        return Err(TrojanError::InsufficientResources(format!(
            "need {n} unused {what}, found {}",
            pool.len()
        )));
    }
    let mut v = pool.to_vec();
    v.shuffle(rng);
    v.truncate(n);
    Ok(v)
}

/// Victim route and candidate trigger taps: pin, LUT and flip-flop nets outside the victim
/// sink's fanout cone. Route sinks are left out since they only copy another net.
struct Host {
    values: NodeValues,
    victim_tile: (usize, usize),
    victim: Route,
    taps: Vec<String>,
}

fn choose_host(
    cfg: &FabricConfig,
    rng: &mut ChaCha8Rng,
    min_taps: usize,
) -> Result<Host, TrojanError> {
    let nl = build_netlist(cfg)?;
    let values = evaluate_logic(&nl, cfg)?;
    let mut routes: Vec<(usize, &Route)> = cfg
        .tiles
        .iter()
        .enumerate()
        .flat_map(|(ti, t)| {
            t.switchbox
                .sorted_routes()
                .into_iter()
                .map(move |r| (ti, r))
        })
        .filter(|(_, r)| r.source != NET_ZERO && r.source != NET_ONE)
        .collect();
    routes.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
    if routes.is_empty() {
        return Err(TrojanError::InsufficientResources(
            "no route to attach a payload to".into(),
        ));
    }
    let (ti, victim) = routes[rng.gen_range(0..routes.len())];
    let cone = fanout_cone(&nl, cfg, &victim.sink);
    let copies: BTreeSet<&String> = cfg
        .tiles
        .iter()
        .flat_map(|t| t.switchbox.routes.iter().map(|r| &r.sink))
        .collect();
    let taps: Vec<String> = nl
        .order
        .iter()
        .filter(|n| {
            n.as_str() != NET_ZERO
                && n.as_str() != NET_ONE
                && !cone.contains(*n)
                && !copies.contains(n)
        })
        .cloned()
        .collect();
    if taps.len() < min_taps {
        return Err(TrojanError::InsufficientResources(format!(
            "need {min_taps} trigger taps outside the payload's fanout, found {}",
            taps.len()
        )));
    }
    let t = &cfg.tiles[ti];
    Ok(Host {
        values,
        victim_tile: (t.col, t.row),
        victim: victim.clone(),
        taps,
    })
}

fn payload_route(host: &Host, pay: &str) -> Patch {
    Patch::SetRoute {
        switchbox: CellRef::switchbox(host.victim_tile.0, host.victim_tile.1).to_string(),
        route: Route::new(pay, host.victim.sink.clone()),
        enable: true,
    }
}

fn finish(cfg: &FabricConfig, spec: TrojanSpec) -> Result<TrojanSpec, TrojanError> {
    let patched = apply_patch(cfg, &spec)?;
    check_dormant(cfg, &patched)?;
    Ok(spec)
}

/// Combinational Trojan of `n_gates` gates on unused LUTs: a rare-trigger tree of AND/NOR
/// leaves over existing nets, combined by an AND chain, whose output XORs into one routed
/// signal. The trigger evaluates to 0 under the design's current values.
pub fn gen_trit_tc(
    cfg: &FabricConfig,
    n_gates: usize,
    seed: u64,
) -> Result<TrojanSpec, TrojanError> {
    if n_gates < 2 {
        return Err(TrojanError::InvalidParam(
            "a combinational Trojan needs at least 2 gates".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut last = None;
    for _ in 0..TC_ATTEMPTS {
        let (spec, trigger) = draft_trit_tc(cfg, n_gates, seed, &mut rng)?;
        let patched = apply_patch(cfg, &spec)?;
        check_dormant(cfg, &patched)?;
        if trigger_reachable(cfg, &patched, &trigger, &mut rng)? {
            return Ok(spec);
        }
        last = Some(trigger);
    }
    Err(TrojanError::InsufficientResources(format!(
        "no reachable trigger found in {TC_ATTEMPTS} attempts (last `{}`)",
        last.unwrap_or_default()
    )))
}

const TC_ATTEMPTS: usize = 32;
const REACH_SAMPLES: usize = 4096;

/// Samples random pin values and states of `base`'s flip-flops on `patched` until `net` is 1.
fn trigger_reachable(
    base: &FabricConfig,
    patched: &FabricConfig,
    net: &str,
    rng: &mut ChaCha8Rng,
) -> Result<bool, TrojanError> {
    let nl = build_netlist(patched)?;
    let ffs: Vec<ElementLoc> = base
        .ff_locs()
        .into_iter()
        .filter(|l| base.ff(*l).unwrap().used)
        .collect();
    let mut probe = patched.clone();
    for _ in 0..REACH_SAMPLES {
        for p in &mut probe.pins {
            p.1 = rng.gen();
        }
        for l in &ffs {
            probe.ff_mut(*l).unwrap().state = rng.gen();
        }
        if evaluate_logic(&nl, &probe)?.bit(net) {
            return Ok(true);
        }
    }
    Ok(false)
}

fn draft_trit_tc(
    cfg: &FabricConfig,
    n_gates: usize,
    seed: u64,
    rng: &mut ChaCha8Rng,
) -> Result<(TrojanSpec, String), TrojanError> {
    let host = choose_host(cfg, rng, 2)?;
    let luts = pick(rng, &free_luts(cfg), n_gates, "LUTs")?;
    let p = fresh_prefix(cfg, "tc");

    let trigger_gates = n_gates - 1;
    let n_leaves = trigger_gates.div_ceil(2);
    let mut gates = Vec::with_capacity(n_gates);
    let mut leaf_vals = Vec::new();
    for i in 0..n_leaves {
        let k = rng.gen_range(2..=3).min(host.taps.len());
        let inputs: Vec<String> = host.taps.choose_multiple(rng, k).cloned().collect();
        let func = if rng.gen_bool(0.5) {
            GateFunc::And
        } else {
            GateFunc::Nor
        };
        let bits: Vec<bool> = inputs.iter().map(|n| host.values.bit(n)).collect();
        leaf_vals.push(func.eval(&bits));
        gates.push(GateDef {
            func,
            inputs,
            output: format!("{p}_l{i}"),
        });
    }
    let mut trigger = format!("{p}_l0");
    let mut extra_vals = Vec::new();
    for j in 0..trigger_gates - n_leaves {
        let other = if j + 1 < n_leaves {
            format!("{p}_l{}", j + 1)
        } else {
            let t = host.taps[rng.gen_range(0..host.taps.len())].clone();
            extra_vals.push(host.values.bit(&t));
            t
        };
        let out = format!("{p}_c{j}");
        gates.push(GateDef {
            func: GateFunc::And,
            inputs: vec![trigger.clone(), other],
            output: out.clone(),
        });
        trigger = out;
    }
    // The chain is an AND of every leaf and extra tap; force one leaf low if all are high.
    if leaf_vals.iter().chain(&extra_vals).all(|v| *v) {
        gates[0].func = gates[0].func.inverted();
    }
    let pay = format!("{p}_pay");
    gates.push(GateDef {
        func: GateFunc::Xor,
        inputs: vec![trigger.clone(), host.victim.source.clone()],
        output: pay.clone(),
    });

    let mut spec = TrojanSpec::new(format!("trit-tc:{n_gates} seed={seed}"));
    spec.patches.push(Patch::AddGates {
        cells: luts.iter().map(|l| cell_name(cfg, *l)).collect(),
        gates,
    });
    spec.patches.push(payload_route(&host, &pay));
    Ok((spec, trigger))
}

/// Sequential Trojan: a binary up-counter with `n_states` states on unused flip-flops
/// (all starting at 0), its terminal count ANDed with an existing net as trigger, and an
/// XOR payload on one routed signal.
pub fn gen_trit_ts(
    cfg: &FabricConfig,
    n_states: usize,
    seed: u64,
) -> Result<TrojanSpec, TrojanError> {
    if n_states < 2 {
        return Err(TrojanError::InvalidParam(
            "a counter needs at least 2 states".into(),
        ));
    }
    let b = counter_bits(n_states);
    if b > cfg.family.lut_arity() {
        return Err(TrojanError::InsufficientResources(format!(
            "{b}-bit counter exceeds LUT arity {}",
            cfg.family.lut_arity()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let host = choose_host(cfg, &mut rng, 1)?;
    let ffs = pick(&mut rng, &free_ffs(cfg), b, "flip-flops")?;
    let luts = pick(&mut rng, &free_luts(cfg), b + 3, "LUTs")?;
    let p = fresh_prefix(cfg, "ts");
    let tap = host.taps[rng.gen_range(0..host.taps.len())].clone();
    let names: Vec<String> = luts.iter().map(|l| cell_name(cfg, *l)).collect();

    let mut spec = TrojanSpec::new(format!("trit-ts:{n_states} seed={seed}"));
    spec.patches.push(Patch::AddCounter {
        ffs: ffs.iter().map(|f| cell_name(cfg, *f)).collect(),
        luts: names[..b + 1].to_vec(),
        states: n_states,
        prefix: p.clone(),
    });
    let trig = format!("{p}_trig");
    let pay = format!("{p}_pay");
    spec.patches.push(Patch::AddGates {
        cells: names[b + 1..].to_vec(),
        gates: vec![
            GateDef::new(GateFunc::And, &[&format!("{p}_tc"), &tap], &trig),
            GateDef::new(GateFunc::Xor, &[&trig, &host.victim.source], &pay),
        ],
    });
    spec.patches.push(payload_route(&host, &pay));
    finish(cfg, spec)
}

/// Spec inserting a route-thru LUT at `at` into the existing route `source -> sink`.
pub fn add_route_thru(
    cfg: &FabricConfig,
    at: &str,
    source: &str,
    sink: &str,
) -> Result<TrojanSpec, TrojanError> {
    let loc = lut_loc(cfg, at)?;
    if cfg.lut(loc).unwrap().used {
        return Err(TrojanError::ElementInUse(at.to_string()));
    }
    for n in [source, sink] {
        if !cfg.is_driven(n) {
            return Err(TrojanError::NetMissing(n.to_string()));
        }
    }
    let mut spec = TrojanSpec::new(format!("route-thru-add:{at}"));
    spec.patches.push(Patch::AddRouteThru {
        cell: at.to_string(),
        route: Route::new(source, sink),
    });
    apply_patch(cfg, &spec)?;
    Ok(spec)
}

/// Spec relocating the route-thru LUT at `from` to `to`. Moving onto itself is an empty spec.
pub fn move_route_thru(
    cfg: &FabricConfig,
    from: &str,
    to: &str,
) -> Result<TrojanSpec, TrojanError> {
    let src = lut_loc(cfg, from)?;
    if !is_route_thru(cfg.lut(src).unwrap()) {
        return Err(TrojanError::NoRouteThru(from.to_string()));
    }
    let mut spec = TrojanSpec::new(format!("route-thru-move:{from}:{to}"));
    if cfg.resolve(from)?.0 == cfg.resolve(to)?.0 {
        return Ok(spec);
    }
    let dst = lut_loc(cfg, to)?;
    if cfg.lut(dst).unwrap().used {
        return Err(TrojanError::ElementInUse(to.to_string()));
    }
    spec.patches.push(Patch::MoveRouteThru {
        from: from.to_string(),
        to: to.to_string(),
    });
    apply_patch(cfg, &spec)?;
    Ok(spec)
}

/// Names accepted by [`builtin`].
pub const BUILTIN_FORMS: &[&str] = &[
    "trit-tc:<gates>",
    "trit-ts:<states>",
    "init-flip:<cell>:<old-hex>:<new-hex>",
    "ff-toggle:<cell>",
    "route-thru-add:<cell>:<source-net>:<sink-net>",
    "route-thru-move:<from-cell>:<to-cell>",
];

/// Builds one of the named Trojan specs (see [`BUILTIN_FORMS`]) against `cfg`.
pub fn builtin(cfg: &FabricConfig, name: &str, seed: u64) -> Result<TrojanSpec, TrojanError> {
    let parts: Vec<&str> = name.split(':').collect();
    let bad = || {
        TrojanError::InvalidParam(format!(
            "unknown builtin Trojan `{name}`; expected one of {}",
            BUILTIN_FORMS.join(", ")
        ))
    };
    let count = |s: &str| {
        s.parse::<usize>()
            .map_err(|_| TrojanError::InvalidParam(format!("bad count `{s}`")))
    };
    match parts.as_slice() {
        ["trit-tc", n] => gen_trit_tc(cfg, count(n)?, seed),
        ["trit-ts", n] => gen_trit_ts(cfg, count(n)?, seed),
        ["init-flip", cell, old, new] => {
            lut_loc(cfg, cell)?;
            let mut spec = TrojanSpec::new(name);
            spec.patches.push(Patch::SetInit {
                cell: cell.to_string(),
                before: Some(old.to_string()),
                after: new.to_string(),
            });
            apply_patch(cfg, &spec)?;
            Ok(spec)
        }
        ["ff-toggle", cell] => {
            let loc = ff_loc(cfg, cell)?;
            let mut spec = TrojanSpec::new(name);
            spec.patches.push(Patch::SetFfState {
                cell: cell.to_string(),
                state: !cfg.ff(loc).unwrap().state,
            });
            Ok(spec)
        }
        ["route-thru-add", cell, src, sink] => add_route_thru(cfg, cell, src, sink),
        ["route-thru-move", from, to] => move_route_thru(cfg, from, to),
        _ => Err(bad()),
    }
}
