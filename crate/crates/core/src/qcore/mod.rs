//! Circuit and state types with the fidelity measures between them.

mod circuit;
mod fidelity;
mod state;

pub use circuit::{circuit_to_unitary, embed, Circuit, Gate, GateOp, RawGateOp};
pub(crate) use circuit::local;
pub use fidelity::{process_fidelity, state_fidelity, FIDELITY_CLAMP};
pub use state::{
    bitstring, circuit_to_choi, ChoiMatrix, DensityMatrix, OutcomeDistribution, STATE_TOLERANCE,
    TRACE_PRESERVATION_TOLERANCE,
};
