//! Dense complex linear algebra for qubit-sized Hermitian matrices.

mod eig;
mod matrix;

pub use eig::{
    hermitian_eig, matrix_sqrt_psd, psd_project, trace_norm, EigenDecomposition, HERMITIAN_TOLERANCE,
    MAX_SWEEPS, OFF_DIAGONAL_TOLERANCE, PSD_CLAMP,
};
pub use matrix::{kron, partial_trace, ComplexMatrix, ONE, ZERO};
