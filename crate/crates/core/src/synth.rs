//! Synthetic test matrices with a planted nonnegative low-rank structure.
//!
//! All draws come from one [`Stream`] seeded with
//! `seed.wrapping_add(DATA_SEED_OFFSET)`, so a data seed and a solver seed with
//! the same value do not produce correlated matrices. The draw order is:
//! `W` (m×r) then `H` (n×r), both uniform on `[0, 1)` and column-major; the
//! noise matrix (m×n, column-major, only when `noise_std > 0`); and for the
//! sparse generator the mask, row by row, one uniform for the Bernoulli test
//! followed by one uniform for the value of each kept entry.

use crate::error::{Error, Result};
use crate::matrix::{CsrMatrix, DenseMatrix, Matrix};
use crate::random::Stream;

/// Offset added to data seeds before seeding the stream.
pub const DATA_SEED_OFFSET: u64 = 0x6A09_E667_F3BC_C908;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthSpec {
    pub m: usize,
    pub n: usize,
    pub true_rank: usize,
    pub noise_std: f64,
    /// Expected fraction of stored entries; 0 means dense.
    pub sparsity: f64,
    pub seed: u64,
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.m == 0 || self.n == 0 {
            return fail(format!("dimensions {}x{} must be positive", self.m, self.n));
        }
        if self.true_rank == 0 || self.true_rank > self.m.min(self.n) {
            return fail(format!(
                "true rank {} must be between 1 and {}",
                self.true_rank,
                self.m.min(self.n)
            ));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return fail(format!("noise std {} must be nonnegative", self.noise_std));
        }
        if !(0.0..=1.0).contains(&self.sparsity) {
            return fail(format!("sparsity {} must lie in [0, 1]", self.sparsity));
        }
        Ok(())
    }
}

/// The planted factors: `A = max(WHᵀ + N, 0)` with unit-norm columns in `W`.
#[derive(Debug, Clone, PartialEq)]
pub struct Planted {
    pub w: DenseMatrix,
    pub h: DenseMatrix,
}

fn low_rank(spec: &SynthSpec, rng: &mut Stream) -> Result<(DenseMatrix, Planted)> {
    let (m, n, r) = (spec.m, spec.n, spec.true_rank);
    let mut w = DenseMatrix::new(m, r, (0..m * r).map(|_| rng.uniform()).collect())?;
    let h = DenseMatrix::new(n, r, (0..n * r).map(|_| rng.uniform()).collect())?;
    for j in 0..r {
        let col = w.col_mut(j);
        let norm = crate::matrix::dot(col, col).sqrt();
        if norm > 0.0 {
            col.iter_mut().for_each(|x| *x /= norm);
        }
    }
    let mut a = w.matmul_t(&h)?;
    if spec.noise_std > 0.0 {
        for x in a.data_mut() {
            *x += spec.noise_std * rng.normal();
        }
    }
    for x in a.data_mut() {
        *x = x.max(0.0);
    }
    Ok((a, Planted { w, h }))
}

/// Dense `max(WHᵀ + N, 0)` together with the planted factors.
pub fn gen_dense_planted(spec: &SynthSpec) -> Result<(DenseMatrix, Planted)> {
    spec.validate()?;
    if spec.sparsity != 0.0 {
        return Err(Error::Config(format!(
            "dense generation needs sparsity 0, got {}",
            spec.sparsity
        )));
    }
    let mut rng = Stream::new(spec.seed.wrapping_add(DATA_SEED_OFFSET));
    low_rank(spec, &mut rng)
}

pub fn gen_dense(spec: &SynthSpec) -> Result<DenseMatrix> {
    gen_dense_planted(spec).map(|(a, _)| a)
}

/// `X ∘ L` in CSR form, where `L` is the dense generator's output and `X`
/// keeps each entry with probability `sparsity`, scaled by a uniform value.
/// The result is generally not low rank.
pub fn gen_sparse(spec: &SynthSpec) -> Result<CsrMatrix> {
    spec.validate()?;
    if !(spec.sparsity > 0.0 && spec.sparsity < 1.0) {
        return Err(Error::Config(format!(
            "sparse generation needs 0 < sparsity < 1, got {}",
            spec.sparsity
        )));
    }
    let mut rng = Stream::new(spec.seed.wrapping_add(DATA_SEED_OFFSET));
    let (l, _) = low_rank(spec, &mut rng)?;
    let (m, n) = (spec.m, spec.n);
    let mut row_offsets = Vec::with_capacity(m + 1);
    let mut col_indices = Vec::new();
    let mut values = Vec::new();
    row_offsets.push(0);
    for i in 0..m {
        for j in 0..n {
            if rng.uniform() < spec.sparsity {
                let v = rng.uniform() * l[(i, j)];
                if v != 0.0 {
                    col_indices.push(j);
                    values.push(v);
                }
            }
        }
        row_offsets.push(values.len());
    }
    CsrMatrix::new(m, n, row_offsets, col_indices, values)
}

/// Dense when `sparsity` is 0, sparse otherwise.
pub fn generate(spec: &SynthSpec) -> Result<Matrix> {
    if spec.sparsity == 0.0 {
        gen_dense(spec).map(Matrix::from)
    } else {
        gen_sparse(spec).map(Matrix::from)
    }
}
