//! Trojan patches on fabric configurations and generators for the benchmark classes:
//! INIT edits, pin and flip-flop changes, route-thru insertion and moves, and inserted
//! combinational and sequential trigger logic.

mod apply;
mod gen;
mod spec;

pub use apply::{apply_patch, counter_bits, is_route_thru};
pub use gen::{
    add_route_thru, builtin, check_dormant, fresh_prefix, gen_trit_tc, gen_trit_ts,
    move_route_thru, BUILTIN_FORMS,
};
pub use spec::{GateDef, GateFunc, Patch, TrojanSpec};
