//! Halted-clock logic evaluation and per-device conduction states.

mod emitters;
mod lut;
mod netlist;
mod response;

pub use emitters::{expand_emitters, Emitter, EmitterMap};
pub use lut::{identity_init, lut_eval, lut_index, lut_mux_states, MuxRecord, MuxTreeState};
pub use netlist::{build_netlist, evaluate_logic, fanout_cone, Driver, Netlist, NodeValues};
pub use response::DeviceResponseTable;
