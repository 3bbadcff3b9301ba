//! Synthetic FPGA fabric model: configuration data, text format, validation and floorplan.

mod floorplan;
mod model;
mod text;
mod validate;

pub use floorplan::{
    build_floorplan, mux_count, mux_device_index, route_slots, Device, DeviceKind, ElementPlan,
    FloorPlan, Rect, DEFAULT_TILE_PITCH_UM,
};
pub use model::{
    init_from_hex, init_to_hex, CellRef, ElementKind, ElementLoc, FabricConfig, Family, FfConfig,
    LutConfig, Route, Slice, SwitchBox, Tile, DEFAULT_SWITCHBOX_CAPACITY, NET_ONE, NET_ZERO,
    SWITCHBOX_ELEMENT,
};
pub use text::{parse_fabric_config, serialize_fabric_config};
pub use validate::{is_valid_net_name, validate, Violation};
