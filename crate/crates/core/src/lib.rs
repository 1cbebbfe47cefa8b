//! Nonnegative matrix factorization `A ≈ UVᵀ` by block coordinate descent,
//! where each block of one, two or three columns is updated by an exact
//! closed-form nonnegative least squares solve.
//!
//! ```
//! use arknls::{fit, synth, SolverConfig};
//!
//! let spec = synth::SynthSpec { m: 40, n: 30, true_rank: 3, noise_std: 0.0, sparsity: 0.0, seed: 1 };
//! let a = synth::gen_dense(&spec).unwrap();
//! let mut config = SolverConfig::new(3, 3);
//! config.max_sweeps = 50;
//! let (_factors, trace) = fit(&a, config).unwrap();
//! assert!(trace.final_residual().unwrap() < 0.1);
//! ```

pub mod error;
pub mod io;
pub mod matrix;
pub mod nnls;
pub mod random;
pub mod solver;
pub mod synth;

pub use error::{Error, Result};
pub use matrix::{at_times, gram, relative_residual, CsrMatrix, DenseMatrix, Matrix, MatrixRef};
pub use solver::{
    fit, flops_per_sweep, initialize, projected_gradient_norm, FactorPair, Nmf, SolveTrace,
    SolverConfig, TraceRecord,
};
