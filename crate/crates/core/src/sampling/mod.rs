//! Exact fixed-size determinantal point process sampling and a deterministic
//! greedy MAP fallback, used to diversify oversized challenge-set pools.

mod eigen;
mod esp;
mod greedy;
mod kdpp;
mod kernel;

pub use eigen::{SymmetricEigen, JACOBI_MAX_SIZE};
pub use esp::{elementary_symmetric, EspTable, LogEspTable};
pub use greedy::greedy_map;
pub use kdpp::{sample_k_dpp, KDppSampler};
pub use kernel::{build_kernel, FeatureConfig, Kernel};

/// Eigenvalues at or below this are treated as zero.
pub const EIGEN_EPS: f64 = 1e-9;
