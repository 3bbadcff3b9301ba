#![allow(dead_code)]

use llsi_core::fabric::{ElementLoc, FabricConfig, Family, Route, NET_ZERO};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random valid, acyclic design: pins, FFs, LUTs and routes wired only to nets that already
/// exist, so evaluation order follows construction order.
pub fn random_design(family: Family, seed: u64, elements: usize) -> FabricConfig {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cols = rng.gen_range(1..=3);
    let rows = rng.gen_range(1..=3);
    let per_tile = rng.gen_range(1..=2);
    while cols * rows * per_tile * family.luts_per_slice() < elements {
        cols += 1;
    }
    let mut cfg = FabricConfig::blank(format!("rand{seed}"), family, cols, rows, per_tile);
    let mut nets: Vec<String> = Vec::new();
    for i in 0..rng.gen_range(1..=4) {
        let net = format!("p{i}");
        cfg.pins.push((net.clone(), rng.gen()));
        nets.push(net);
    }

    let mut ffs = cfg.ff_locs();
    ffs.shuffle(&mut rng);
    ffs.truncate(elements / 4);
    for (k, loc) in ffs.iter().enumerate() {
        let f = cfg.ff_mut(*loc).unwrap();
        f.used = true;
        f.state = rng.gen();
        f.q_net = Some(format!("q{k}"));
        nets.push(format!("q{k}"));
    }

    let mut luts = cfg.lut_locs();
    luts.shuffle(&mut rng);
    let mut luts = luts.into_iter();
    for k in 0..elements {
        if rng.gen_bool(0.25) {
            let t = rng.gen_range(0..cfg.tiles.len());
            let sb = &mut cfg.tiles[t].switchbox;
            if sb.routes.len() + 2 < sb.capacity {
                let src = nets.choose(&mut rng).unwrap().clone();
                sb.routes.push(Route::new(src, format!("r{k}")));
                nets.push(format!("r{k}"));
            }
            continue;
        }
        let Some(loc) = luts.next() else { break };
        let inputs: Vec<String> = (0..family.lut_arity())
            .map(|_| {
                if rng.gen_bool(0.7) {
                    nets.choose(&mut rng).unwrap().clone()
                } else {
                    NET_ZERO.to_string()
                }
            })
            .collect();
        let l = cfg.lut_mut(loc).unwrap();
        l.used = true;
        l.init = (0..l.init.len()).map(|_| rng.gen()).collect();
        l.input_nets = inputs;
        l.output_net = Some(format!("l{k}"));
        nets.push(format!("l{k}"));
    }

    for loc in ffs {
        let d = nets.choose(&mut rng).unwrap().clone();
        cfg.ff_mut(loc).unwrap().d_net = d;
    }
    cfg
}

/// Number of used LUTs, FFs and routes.
pub fn element_count(cfg: &FabricConfig) -> usize {
    let used_luts = cfg
        .lut_locs()
        .into_iter()
        .filter(|l| cfg.lut(*l).unwrap().used)
        .count();
    let used_ffs = cfg
        .ff_locs()
        .into_iter()
        .filter(|l| cfg.ff(*l).unwrap().used)
        .count();
    used_luts + used_ffs + cfg.route_count()
}

pub fn first_unused_ff(cfg: &FabricConfig) -> Option<ElementLoc> {
    cfg.ff_locs()
        .into_iter()
        .find(|l| !cfg.ff(*l).unwrap().used)
}
