use std::collections::{BTreeMap, BTreeSet};

use super::lut::lut_eval;
use crate::error::LogicError;
use crate::fabric::{ElementLoc, FabricConfig, NET_ONE, NET_ZERO};

/// Source of a net.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Driver {
    Const(bool),
    Pin(bool),
    Lut(ElementLoc),
    /// Flip-flop output; a source because the clock is halted.
    Ff(ElementLoc),
    Route {
        tile: usize,
        source: String,
    },
}

/// Combinational netlist of a fabric with a topological evaluation order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Netlist {
    pub drivers: BTreeMap<String, Driver>,
    pub order: Vec<String>,
}

fn deps<'a>(cfg: &'a FabricConfig, d: &'a Driver) -> Vec<&'a str> {
    match d {
        Driver::Lut(loc) => cfg
            .lut(*loc)
            .map(|l| l.input_nets.iter().map(String::as_str).collect())
            .unwrap_or_default(),
        Driver::Route { source, .. } => vec![source.as_str()],
        _ => Vec::new(),
    }
}

pub fn build_netlist(cfg: &FabricConfig) -> Result<Netlist, LogicError> {
    let mut drivers = BTreeMap::new();
    drivers.insert(NET_ZERO.to_string(), Driver::Const(false));
    drivers.insert(NET_ONE.to_string(), Driver::Const(true));
    for (net, v) in &cfg.pins {
        drivers.insert(net.clone(), Driver::Pin(*v));
    }
    for loc in cfg.lut_locs() {
        let l = cfg.lut(loc).unwrap();
        if let Some(o) = &l.output_net {
            drivers.insert(o.clone(), Driver::Lut(loc));
        }
    }
    for loc in cfg.ff_locs() {
        let f = cfg.ff(loc).unwrap();
        if let Some(q) = &f.q_net {
            drivers.insert(q.clone(), Driver::Ff(loc));
        }
    }
    for (ti, t) in cfg.tiles.iter().enumerate() {
        for r in &t.switchbox.routes {
            drivers.insert(
                r.sink.clone(),
                Driver::Route {
                    tile: ti,
                    source: r.source.clone(),
                },
            );
        }
    }

    // Kahn's algorithm over driven nets; a lexicographic ready set keeps the order
    // independent of declaration order.
    let mut indegree: BTreeMap<&str, usize> = BTreeMap::new();
    let mut users: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for (net, d) in &drivers {
        let mut n = 0;
        for dep in deps(cfg, d) {
            if drivers.contains_key(dep) {
                n += 1;
                users.entry(dep).or_default().push(net);
            }
        }
        indegree.insert(net, n);
    }
    let mut ready: BTreeSet<&str> = indegree
        .iter()
        .filter(|(_, n)| **n == 0)
        .map(|(k, _)| *k)
        .collect();
    let mut order = Vec::with_capacity(drivers.len());
    while let Some(net) = ready.pop_first() {
        order.push(net.to_string());
        if let Some(us) = users.get(net) {
            for u in us {
                let n = indegree.get_mut(u).unwrap();
                *n -= 1;
                if *n == 0 {
                    ready.insert(u);
                }
            }
        }
    }

    if order.len() < drivers.len() {
        let placed: BTreeSet<&str> = order.iter().map(String::as_str).collect();
        let remaining: BTreeSet<&str> = drivers
            .keys()
            .map(String::as_str)
            .filter(|n| !placed.contains(n))
            .collect();
        return Err(LogicError::CombinationalLoop(find_cycle(
            cfg, &drivers, &remaining,
        )));
    }
    Ok(Netlist { drivers, order })
}

/// Walks unresolved dependencies from the smallest remaining net until a net repeats.
fn find_cycle(
    cfg: &FabricConfig,
    drivers: &BTreeMap<String, Driver>,
    remaining: &BTreeSet<&str>,
) -> Vec<String> {
    let mut path: Vec<&str> = Vec::new();
    let mut cur = *remaining.iter().next().unwrap();
    loop {
        if let Some(pos) = path.iter().position(|n| *n == cur) {
            let mut cycle: Vec<String> = path[pos..].iter().map(|s| s.to_string()).collect();
            cycle.push(cur.to_string());
            return cycle;
        }
        path.push(cur);
        let d = &drivers[cur];
        cur = deps(cfg, d)
            .into_iter()
            .filter(|n| remaining.contains(n))
            .min()
            .expect("every unresolved net waits on another unresolved net");
    }
}

/// Value of every net with the clock halted.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct NodeValues(pub BTreeMap<String, bool>);

impl NodeValues {
    pub fn get(&self, net: &str) -> Option<bool> {
        self.0.get(net).copied()
    }

    /// Value of `net`, treating unknown nets as 0.
    pub fn bit(&self, net: &str) -> bool {
        self.get(net).unwrap_or(false)
    }
}

/// Evaluates every net: pins and constants take their values, FF outputs their stored
/// state, LUT outputs their truth table, route sinks copy their source.
pub fn evaluate_logic(nl: &Netlist, cfg: &FabricConfig) -> Result<NodeValues, LogicError> {
    let mut values: BTreeMap<String, bool> = BTreeMap::new();
    let lookup = |values: &BTreeMap<String, bool>, n: &str| {
        values
            .get(n)
            .copied()
            .ok_or_else(|| LogicError::UndrivenNet(n.to_string()))
    };
    for net in &nl.order {
        let v = match &nl.drivers[net] {
            Driver::Const(b) | Driver::Pin(b) => *b,
            Driver::Ff(loc) => cfg.ff(*loc).map(|f| f.state).unwrap_or(false),
            Driver::Route { source, .. } => lookup(&values, source)?,
            Driver::Lut(loc) => {
                let l = cfg.lut(*loc).expect("netlist built from this config");
                let inputs = l
                    .input_nets
                    .iter()
                    .map(|n| lookup(&values, n))
                    .collect::<Result<Vec<_>, _>>()?;
                lut_eval(&l.init, &inputs)?
            }
        };
        values.insert(net.clone(), v);
    }
    for loc in cfg.ff_locs() {
        let d = &cfg.ff(loc).unwrap().d_net;
        if !values.contains_key(d) {
            return Err(LogicError::UndrivenNet(d.clone()));
        }
    }
    Ok(NodeValues(values))
}

/// Nets whose value combinationally depends on `net` (including `net`).
pub fn fanout_cone(nl: &Netlist, cfg: &FabricConfig, net: &str) -> BTreeSet<String> {
    let mut cone = BTreeSet::new();
    cone.insert(net.to_string());
    for n in &nl.order {
        if deps(cfg, &nl.drivers[n]).iter().any(|d| cone.contains(*d)) {
            cone.insert(n.clone());
        }
    }
    cone
}
