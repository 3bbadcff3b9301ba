use crate::error::LogicError;

/// Truth-table index selected by `inputs`; input 0 is the least significant selector.
pub fn lut_index(inputs: &[bool]) -> usize {
    inputs
        .iter()
        .enumerate()
        .fold(0, |acc, (i, b)| acc | ((*b as usize) << i))
}

fn check_arity(init: &[bool], inputs: &[bool]) -> Result<(), LogicError> {
    if inputs.len() >= usize::BITS as usize || init.len() != 1usize << inputs.len() {
        return Err(LogicError::ArityMismatch {
            table: init.len(),
            inputs: inputs.len(),
        });
    }
    Ok(())
}

pub fn lut_eval(init: &[bool], inputs: &[bool]) -> Result<bool, LogicError> {
    check_arity(init, inputs)?;
    Ok(init[lut_index(inputs)])
}

/// One 2:1 mux of the LUT's internal selection tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MuxRecord {
    pub level: usize,
    pub index: usize,
    pub select: bool,
    /// Data presented on the 0 and 1 branches.
    pub branches: [bool; 2],
    pub output: bool,
}

/// State of every internal mux of a LUT, level 0 (leaf side) first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MuxTreeState {
    pub arity: usize,
    pub muxes: Vec<MuxRecord>,
}

impl MuxTreeState {
    pub fn root(&self) -> bool {
        self.muxes.last().map(|m| m.output).unwrap_or(false)
    }

    pub fn level(&self, level: usize) -> impl Iterator<Item = &MuxRecord> {
        self.muxes.iter().filter(move |m| m.level == level)
    }
}

/// Models the LUT as a balanced tree of 2:1 muxes with the truth table at the leaves.
/// Level `i` muxes are steered by `inputs[i]`.
pub fn lut_mux_states(init: &[bool], inputs: &[bool]) -> Result<MuxTreeState, LogicError> {
    check_arity(init, inputs)?;
    let arity = inputs.len();
    let mut muxes = Vec::with_capacity(init.len().saturating_sub(1));
    let mut layer: Vec<bool> = init.to_vec();
    for (level, &select) in inputs.iter().enumerate() {
        let next: Vec<bool> = layer
            .chunks_exact(2)
            .enumerate()
            .map(|(index, pair)| {
                let output = pair[select as usize];
                muxes.push(MuxRecord {
                    level,
                    index,
                    select,
                    branches: [pair[0], pair[1]],
                    output,
                });
                output
            })
            .collect();
        layer = next;
    }
    Ok(MuxTreeState { arity, muxes })
}

/// Truth table of the identity function on input 0, as used by route-thru LUTs.
pub fn identity_init(arity: usize) -> Vec<bool> {
    (0..1usize << arity).map(|i| i & 1 == 1).collect()
}
