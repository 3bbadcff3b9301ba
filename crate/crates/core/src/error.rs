use thiserror::Error;

use crate::fabric::Violation;

#[derive(Debug, Error)]
pub enum FabricError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("schema violation at line {line}: field `{field}`: {message}")]
    Schema {
        line: usize,
        field: String,
        message: String,
    },
    #[error("invalid fabric: {}", join_violations(.0))]
    Invalid(Vec<Violation>),
    #[error("unknown device family `{0}`")]
    UnknownFamily(String),
    #[error("bad INIT literal `{text}`: {reason}")]
    BadInit { text: String, reason: String },
    #[error("unknown cell `{0}`")]
    UnknownCell(String),
}

fn join_violations(v: &[Violation]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LogicError {
    #[error("combinational loop through nets {}", .0.join(" -> "))]
    CombinationalLoop(Vec<String>),
    #[error("net `{0}` has no driver")]
    UndrivenNet(String),
    #[error("truth table has {table} entries but {inputs} inputs were given")]
    ArityMismatch { table: usize, inputs: usize },
    #[error("response table: {0}")]
    ResponseTable(String),
}

#[derive(Debug, Error)]
pub enum OpticsError {
    #[error("numerical aperture must lie in (0, 1], got {0}")]
    NumericalAperture(f64),
    #[error("scan region has no pixels")]
    EmptyRegion,
    #[error("invalid scan parameter: {0}")]
    InvalidParam(String),
    #[error("image format: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error)]
pub enum DetectError {
    #[error("image metadata mismatch: {0}")]
    Mismatch(String),
    #[error("image is constant; robust scale is zero")]
    ConstantImage,
    #[error("need at least {needed} pixels for a noise estimate, got {got}")]
    TooFewPixels { needed: usize, got: usize },
    #[error("invalid analysis parameter: {0}")]
    InvalidParam(String),
    #[error("stage `{stage}` failed: {inner}")]
    Stage {
        stage: &'static str,
        inner: Box<DetectError>,
    },
}

#[derive(Debug, Error)]
pub enum TrojanError {
    #[error(transparent)]
    Fabric(#[from] FabricError),
    #[error(transparent)]
    Logic(#[from] LogicError),
    #[error("element `{0}` is already in use")]
    ElementInUse(String),
    #[error("element `{0}` has the wrong kind for this patch")]
    WrongElement(String),
    #[error("net `{0}` does not exist")]
    NetMissing(String),
    #[error("no route from `{src}` to `{sink}`")]
    RouteMissing { src: String, sink: String },
    #[error("no route-thru LUT at `{0}`")]
    NoRouteThru(String),
    #[error("insufficient resources: {0}")]
    InsufficientResources(String),
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("spec does not match config: {0}")]
    Mismatch(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("patch produced an invalid fabric: {0}")]
    Invalid(String),
}

/// Failure of the config → emitters → image chain.
#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error(transparent)]
    Logic(#[from] LogicError),
    #[error(transparent)]
    Optics(#[from] OpticsError),
}
