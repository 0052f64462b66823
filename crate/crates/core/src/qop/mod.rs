//! Operator-algebra substrate shared by every other module.

mod completion;
mod factored;
mod layout;
mod operator;
mod spectral;

pub use num_complex::Complex64 as C64;

pub use completion::{complete_unitary, energy_blocks, Block};
pub use factored::FactoredState;
pub use layout::{partial_trace_dims, Factor, Subsystem, SubsystemLayout};
pub use operator::{commutator_norm, tensor_all, tensor_product, DensityMatrix, Operator, PureState};
pub use spectral::{
    eigenspaces, eigh, entropy_of_spectrum, gibbs_weights, log_partition_function, relative_entropy, thermal_state,
    von_neumann_entropy, Eigenspace, Spectrum,
};

pub(crate) use operator::{matmul, norm_within};

/// Algebraic tolerance for Hermiticity, unitarity, trace and commutators.
pub const EPS_ALG: f64 = 1e-10;

/// Eigenvalues at or below this count as zero in entropy and support tests.
pub const EPS_EIG: f64 = 1e-12;

/// Largest total Hilbert-space dimension for dense operators.
pub const MAX_DIM: usize = 4096;

/// Factored (low-rank) states may be taller than dense operators allow; only
/// their Gram matrices are ever diagonalized.
pub const MAX_FACTORED_DIM: usize = 1 << 20;

pub(crate) fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}
