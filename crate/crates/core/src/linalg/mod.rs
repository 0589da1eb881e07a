//! Dense complex Hermitian matrix calculus.

mod hermitian;
mod matrix;

pub use hermitian::{
    check_distribution, eig_hermitian, exp_normalized, hermitize, matrix_exp, matrix_log_supported,
    sqrt_psd, DensityOperator, HermitianOperator, SpectralDecomposition, DENSITY_EIGEN_TOL,
    DENSITY_TRACE_TOL, HERMITICITY_TOL, LOG_FLOOR,
};
pub use matrix::{contract_second, partial_trace, tensor, ComplexMatrix, Keep};
