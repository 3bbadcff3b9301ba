//! Built-in demonstration designs. All use one slice per tile.
//!
//! `host` is a deterministic mixed design: every tile's slice uses two LUTs (element 0
//! and 1) and two flip-flops, fed through the tile's switch box from pins, flip-flop
//! outputs and earlier tiles' LUTs. The scenario demos add to it at tiles (0,1) and (1,1),
//! so grids must be at least 2×2:
//!
//! - `route-thru`: route-thru LUT at LUT element 2 of slice (1,1) carrying a flip-flop output
//!   of tile (0,1) to flip-flop element 0 of slice (1,1).
//! - `ff-toggle-pair`: flip-flop elements 0 (state 0) and 6 (state 1) of slice (0,1) feed an
//!   XOR at LUT element 3 of slice (1,1), which drives flip-flop 0's D input.
//! - `lut-init-pair`: LUT element 3 of slice (1,1) with init `0x00008000`, inputs from pins
//!   `p0..` at index 5, output into flip-flop element 6 of the same slice.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::TrojanError;
use crate::fabric::{init_from_hex, ElementLoc, FabricConfig, Family, Route, NET_ZERO};
use crate::trojan::{add_route_thru, apply_patch};

pub const DEMO_NAMES: &[&str] = &[
    "blank",
    "host",
    "route-thru",
    "ff-toggle-pair",
    "lut-init-pair",
];

/// Flip-flop elements used by `host`.
const HOST_FFS: [usize; 2] = [2, 4];
const HOST_SEED: u64 = 0x6c6c_7369;
const PIN_VALUES: [bool; 6] = [true, false, true, false, false, true];

/// Text name of element `index` of the given kind in the slice at tile (`col`, `row`).
pub fn element_name(family: Family, col: usize, row: usize, lut: bool, index: usize) -> String {
    let elem = if lut {
        family.lut_names()[index].clone()
    } else {
        family.ff_names()[index].clone()
    };
    format!("{}.{elem}", family.slice_name(col, row, 0, 1))
}

fn loc(cfg: &FabricConfig, col: usize, row: usize, lut: bool, index: usize) -> ElementLoc {
    let tile = cfg.tile_index(col, row).expect("tile inside grid");
    if lut {
        ElementLoc::Lut {
            tile,
            slice: 0,
            lut: index,
        }
    } else {
        ElementLoc::Ff {
            tile,
            slice: 0,
            ff: index,
        }
    }
}

type Site = (usize, usize, bool, usize);

fn set_lut(
    cfg: &mut FabricConfig,
    (col, row, lut, index): Site,
    init: Vec<bool>,
    inputs: &[String],
    out: &str,
) {
    let at = loc(cfg, col, row, lut, index);
    let l = cfg.lut_mut(at).unwrap();
    l.init = init;
    for (i, n) in l.input_nets.iter_mut().enumerate() {
        *n = inputs
            .get(i)
            .cloned()
            .unwrap_or_else(|| NET_ZERO.to_string());
    }
    l.output_net = Some(out.to_string());
    l.used = true;
}

fn set_ff(cfg: &mut FabricConfig, (col, row, lut, index): Site, state: bool, d: &str, q: &str) {
    let at = loc(cfg, col, row, lut, index);
    let f = cfg.ff_mut(at).unwrap();
    f.state = state;
    f.d_net = d.to_string();
    f.q_net = Some(q.to_string());
    f.used = true;
}

/// Random function of the first `n` inputs, replicated over the rest of the table.
fn random_table(rng: &mut ChaCha8Rng, n: usize, arity: usize) -> Vec<bool> {
    let base: Vec<bool> = (0..1usize << n).map(|_| rng.gen_bool(0.5)).collect();
    (0..1usize << arity)
        .map(|i| base[i & ((1 << n) - 1)])
        .collect()
}

fn check_grid(cols: usize, rows: usize, min: usize) -> Result<(), TrojanError> {
    if cols < min || rows < min {
        return Err(TrojanError::InvalidParam(format!(
            "design needs a grid of at least {min}x{min}, got {cols}x{rows}"
        )));
    }
    Ok(())
}

pub fn host(family: Family, cols: usize, rows: usize) -> Result<FabricConfig, TrojanError> {
    check_grid(cols, rows, 1)?;
    let mut cfg = FabricConfig::blank("host", family, cols, rows, 1);
    let arity = family.lut_arity();
    let mut rng = ChaCha8Rng::seed_from_u64(HOST_SEED);
    cfg.pins = PIN_VALUES
        .iter()
        .enumerate()
        .map(|(i, v)| (format!("p{i}"), *v))
        .collect();
    let n = cols * rows;
    let ff_q = |t: usize, k: usize| format!("h{t}_q{}", ['a', 'b'][k]);
    let lut_o = |t: usize, k: usize| format!("h{t}_l{}", ['a', 'b'][k]);
    // Sources any tile may read: pins and every flip-flop output.
    let mut pool: Vec<String> = cfg.pins.iter().map(|(p, _)| p.clone()).collect();
    for t in 0..n {
        pool.push(ff_q(t, 0));
        pool.push(ff_q(t, 1));
    }

    for t in 0..n {
        let (col, row) = (t % cols, t / cols);
        let tile = cfg.tile_index(col, row).unwrap();
        for k in 0..2 {
            let state = rng.gen_bool(0.5);
            set_ff(
                &mut cfg,
                (col, row, false, HOST_FFS[k]),
                state,
                &lut_o(t, k),
                &ff_q(t, k),
            );
        }

        // LUT a: two or three sources, routed into the tile.
        let k = rng.gen_range(2..=3);
        let mut inputs = Vec::new();
        for i in 0..k {
            let src = if t > 0 && i == 0 {
                lut_o(rng.gen_range(0..t), rng.gen_range(0..2))
            } else {
                pool[rng.gen_range(0..pool.len())].clone()
            };
            if src.starts_with('p') {
                inputs.push(src);
            } else {
                let local = format!("h{t}_a{i}");
                cfg.tiles[tile]
                    .switchbox
                    .routes
                    .push(Route::new(src, local.clone()));
                inputs.push(local);
            }
        }
        let table = random_table(&mut rng, inputs.len(), arity);
        set_lut(&mut cfg, (col, row, true, 0), table, &inputs, &lut_o(t, 0));

        // LUT b: local LUT a plus a neighbour's flip-flop.
        let neighbour = ff_q((t + 1) % n, 0);
        let local = format!("h{t}_b1");
        cfg.tiles[tile]
            .switchbox
            .routes
            .push(Route::new(neighbour, local.clone()));
        let inputs = vec![lut_o(t, 0), local];
        let table = random_table(&mut rng, 2, arity);
        set_lut(&mut cfg, (col, row, true, 1), table, &inputs, &lut_o(t, 1));
    }
    Ok(cfg)
}

fn tile_number(cols: usize, col: usize, row: usize) -> usize {
    row * cols + col
}

pub fn demo(
    name: &str,
    family: Family,
    cols: usize,
    rows: usize,
) -> Result<FabricConfig, TrojanError> {
    let mut cfg = match name {
        "blank" => {
            check_grid(cols, rows, 1)?;
            FabricConfig::blank("blank", family, cols, rows, 1)
        }
        "host" => host(family, cols, rows)?,
        "route-thru" => {
            check_grid(cols, rows, 2)?;
            let mut cfg = host(family, cols, rows)?;
            let src = format!("h{}_qa", tile_number(cols, 0, 1));
            let t11 = cfg.tile_index(1, 1).unwrap();
            cfg.tiles[t11]
                .switchbox
                .routes
                .push(Route::new(src.clone(), "rt_dst"));
            set_ff(&mut cfg, (1, 1, false, 0), false, "rt_dst", "rt_q");
            let at = element_name(family, 1, 1, true, 2);
            let spec = add_route_thru(&cfg, &at, &src, "rt_dst")?;
            apply_patch(&cfg, &spec)?
        }
        "ff-toggle-pair" => {
            check_grid(cols, rows, 2)?;
            let mut cfg = host(family, cols, rows)?;
            set_ff(&mut cfg, (0, 1, false, 0), false, "ftp_fb", "ftp_qa");
            set_ff(&mut cfg, (0, 1, false, 6), true, NET_ZERO, "ftp_qd");
            let t11 = cfg.tile_index(1, 1).unwrap();
            let t01 = cfg.tile_index(0, 1).unwrap();
            cfg.tiles[t11]
                .switchbox
                .routes
                .push(Route::new("ftp_qa", "ftp_xa"));
            cfg.tiles[t11]
                .switchbox
                .routes
                .push(Route::new("ftp_qd", "ftp_xb"));
            let arity = family.lut_arity();
            let xor = (0..1usize << arity)
                .map(|i| (i & 1) ^ (i >> 1 & 1) == 1)
                .collect();
            set_lut(
                &mut cfg,
                (1, 1, true, 3),
                xor,
                &["ftp_xa".to_string(), "ftp_xb".to_string()],
                "ftp_x",
            );
            cfg.tiles[t01]
                .switchbox
                .routes
                .push(Route::new("ftp_x", "ftp_fb"));
            cfg
        }
        "lut-init-pair" => {
            check_grid(cols, rows, 2)?;
            let mut cfg = host(family, cols, rows)?;
            let arity = family.lut_arity();
            let init = init_from_hex("0x00008000", 1 << arity)?;
            let inputs: Vec<String> = (0..arity.min(5)).map(|i| format!("p{i}")).collect();
            set_lut(&mut cfg, (1, 1, true, 3), init, &inputs, "lip_o");
            set_ff(&mut cfg, (1, 1, false, 6), false, "lip_o", "lip_q");
            cfg
        }
        other => {
            return Err(TrojanError::InvalidParam(format!(
                "unknown demo `{other}`; expected one of {}",
                DEMO_NAMES.join(", ")
            )))
        }
    };
    cfg.name = name.to_string();
    let v = crate::fabric::validate(&cfg);
    if !v.is_empty() {
        return Err(TrojanError::Invalid(
            v.iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join("; "),
        ));
    }
    crate::logic::build_netlist(&cfg)?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::{build_netlist, evaluate_logic, lut_index};
    use crate::trojan::is_route_thru;

    #[test]
    fn every_demo_is_valid_for_both_families() {
        for family in [Family::SeriesK, Family::SeriesP] {
            for name in DEMO_NAMES {
                let cfg = demo(name, family, 6, 4).unwrap_or_else(|e| panic!("{name}: {e}"));
                assert_eq!(cfg.name, *name);
                evaluate_logic(&build_netlist(&cfg).unwrap(), &cfg).unwrap();
            }
        }
    }

    #[test]
    fn route_thru_sits_at_x1y1() {
        let cfg = demo("route-thru", Family::SeriesK, 6, 4).unwrap();
        let rts: Vec<String> = cfg
            .lut_locs()
            .into_iter()
            .filter(|l| is_route_thru(cfg.lut(*l).unwrap()))
            .map(|l| cfg.cell_ref(l).to_string())
            .collect();
        assert_eq!(rts, ["SLICE_X1Y1.C6LUT"]);
    }

    #[test]
    fn lut_init_pair_reads_a_neutral_index() {
        let cfg = demo("lut-init-pair", Family::SeriesK, 3, 3).unwrap();
        let (_, at) = cfg.resolve("SLICE_X1Y1.D6LUT").unwrap();
        let l = cfg.lut(at).unwrap();
        let v = evaluate_logic(&build_netlist(&cfg).unwrap(), &cfg).unwrap();
        let bits: Vec<bool> = l.input_nets.iter().map(|n| v.bit(n)).collect();
        let idx = lut_index(&bits);
        assert!(idx != 15 && idx != 16);
        assert!(!v.bit("lip_o"));
    }

    #[test]
    fn small_grids_are_rejected() {
        assert!(demo("route-thru", Family::SeriesK, 1, 4).is_err());
        assert!(demo("nope", Family::SeriesK, 4, 4).is_err());
        assert!(demo("blank", Family::SeriesK, 0, 4).is_err());
    }

    #[test]
    fn host_leaves_room_for_trojans() {
        let cfg = host(Family::SeriesK, 5, 5).unwrap();
        for t in &cfg.tiles {
            assert_eq!(t.slices[0].luts.iter().filter(|l| l.used).count(), 2);
        }
    }
}
