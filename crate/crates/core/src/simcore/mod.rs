//! Dense density-matrix simulation.
//!
//! Basis ordering: qubit 0 is the most significant bit of the basis index,
//! so for two qubits the basis runs |00⟩, |01⟩, |10⟩, |11⟩ with the left
//! digit belonging to qubit 0.

mod channel;
mod density;
mod gate;
mod kernel;

pub use channel::KrausChannel;
pub use density::DensityMatrix;
pub use gate::{GateKind, GateOp};
pub use kernel::LocalOp;

pub use num_complex::Complex64;

/// Largest register the simulator will allocate (a 4096 × 4096 matrix).
pub const MAX_QUBITS: usize = 12;

/// Absolute tolerance on |Tr ρ − 1|.
pub const TRACE_TOL: f64 = 1e-9;
/// Elementwise tolerance on ρ − ρ†.
pub const HERMITIAN_TOL: f64 = 1e-10;
/// Smallest eigenvalue accepted as non-negative.
pub const PSD_TOL: f64 = 1e-9;
/// Elementwise tolerance on Σ K†K − I.
pub const COMPLETENESS_TOL: f64 = 1e-10;

pub(crate) use gate::{pauli_x, pauli_y, pauli_z};
