//! Stinespring dilation of hybrid circuits: measurements become unitaries that
//! write outcomes into ancilla registers, adaptive gates become controlled
//! unitaries, and time translation permutes register slices.

pub mod gates;
pub mod haar;
pub mod lattice;
pub mod state;
pub mod tensor;

pub use gates::{
    adaptive_local, build_adaptive_gate, build_floquet, build_measurement_unitary, layer_ops, measurement_local,
    pauli_matrix, sample_haar_block_gate, time_shift, time_shift_perm, AdaptiveGateSpec, BlockGateSpec, Layer, LocalOp,
    MeasurementSpec,
};
pub use tensor::embed;
pub use haar::{haar_unitary, random_phases, unitarity_error};
pub use lattice::{Register, SpacetimeLattice, DEFAULT_BUDGET};
pub use state::{average_outcomes, dilated_expval, outcome_probability, project_trajectory, DilatedState};
