//! Dense linear algebra and statistics primitives.
//!
//! Everything here is a pure function of its inputs.

pub mod eigen;
pub mod matrix;
pub mod pca;
pub mod stats;

pub use eigen::{sym_eigen, sym_eigen_jacobi, SymmetricSpectrum};
pub use matrix::{dot, norm, Matrix};
pub use pca::{orthonormality_error, top_k_directions};
pub use stats::{log_det_psd, quantile, second_moment, DEFAULT_JITTER};
