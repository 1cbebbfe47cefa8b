//! Dense and compressed-sparse-row storage plus the handful of products the
//! factorization needs: `UᵀU`, `AᵀU` and the trace-identity residual.
//!
//! Dense matrices are column-major. Every hot loop of the solver walks
//! columns of `U`, `V` and `H`, so a column is always a contiguous slice.

use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};

/// Column-major dense matrix of finite `f64` values.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    /// Wraps column-major `data`. Fails unless `data.len() == rows * cols` and
    /// every value is finite.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::dim(
                "DenseMatrix::new",
                format!("{} values for a {rows}x{cols} matrix", data.len()),
            ));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidMatrix(format!(
                "non-finite value at ({}, {})",
                pos % rows.max(1),
                pos / rows.max(1)
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for j in 0..cols {
            for i in 0..rows {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix from row slices, which reads naturally in tests.
    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != ncols) {
            return Err(Error::dim("DenseMatrix::from_rows", "ragged rows"));
        }
        let mut data = Vec::with_capacity(nrows * ncols);
        for j in 0..ncols {
            for row in rows {
                data.push(row[j]);
            }
        }
        Self::new(nrows, ncols, data)
    }

    /// Builds a matrix whose columns are the given slices.
    pub fn from_columns(columns: &[&[f64]]) -> Result<Self> {
        let ncols = columns.len();
        let nrows = columns.first().map_or(0, |c| c.len());
        if columns.iter().any(|c| c.len() != nrows) {
            return Err(Error::dim("DenseMatrix::from_columns", "ragged columns"));
        }
        Self::new(nrows, ncols, columns.concat())
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    #[inline]
    pub fn col_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        (0..self.cols).map(|j| self[(i, j)]).collect()
    }

    /// Copies the listed columns, in order, into a new matrix.
    pub fn select_columns(&self, cols: &[usize]) -> DenseMatrix {
        let mut data = Vec::with_capacity(self.rows * cols.len());
        for &j in cols {
            data.extend_from_slice(self.col(j));
        }
        DenseMatrix {
            rows: self.rows,
            cols: cols.len(),
            data,
        }
    }

    pub fn transpose(&self) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.cols, self.rows);
        const TILE: usize = 32;
        for jb in (0..self.cols).step_by(TILE) {
            for ib in (0..self.rows).step_by(TILE) {
                for j in jb..(jb + TILE).min(self.cols) {
                    for i in ib..(ib + TILE).min(self.rows) {
                        out.data[i * self.cols + j] = self.data[j * self.rows + i];
                    }
                }
            }
        }
        out
    }

    pub fn frobenius_norm_sq(&self) -> f64 {
        dot(&self.data, &self.data)
    }

    pub fn min_value(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
    }

    /// Plain `self * other`, used by tests and small setup code.
    pub fn matmul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != other.rows {
            return Err(Error::dim(
                "matmul",
                format!(
                    "{}x{} times {}x{}",
                    self.rows, self.cols, other.rows, other.cols
                ),
            ));
        }
        let mut out = DenseMatrix::zeros(self.rows, other.cols);
        for j in 0..other.cols {
            let dst = &mut out.data[j * self.rows..(j + 1) * self.rows];
            for l in 0..self.cols {
                axpy(other[(l, j)], self.col(l), dst);
            }
        }
        Ok(out)
    }

    /// `self * otherᵀ`; the natural way to form `UVᵀ`.
    pub fn matmul_t(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        self.matmul(&other.transpose())
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[j * self.rows + i]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[j * self.rows + i]
    }
}

/// Compressed-sparse-row matrix with nonnegative finite values.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    rows: usize,
    cols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Validates and wraps raw CSR arrays.
    pub fn new(
        rows: usize,
        cols: usize,
        row_offsets: Vec<usize>,
        col_indices: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if row_offsets.len() != rows + 1 {
            return Err(Error::InvalidMatrix(format!(
                "row_offsets has length {}, expected {}",
                row_offsets.len(),
                rows + 1
            )));
        }
        if row_offsets[0] != 0 || row_offsets[rows] != values.len() {
            return Err(Error::InvalidMatrix(
                "row_offsets must start at 0 and end at nnz".into(),
            ));
        }
        if col_indices.len() != values.len() {
            return Err(Error::InvalidMatrix(
                "col_indices and values differ in length".into(),
            ));
        }
        for i in 0..rows {
            let (lo, hi) = (row_offsets[i], row_offsets[i + 1]);
            if lo > hi {
                return Err(Error::InvalidMatrix(format!(
                    "row_offsets decreases at row {i}"
                )));
            }
            let idx = &col_indices[lo..hi];
            if idx.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidMatrix(format!(
                    "column indices of row {i} are not strictly increasing"
                )));
            }
            if idx.last().is_some_and(|&c| c >= cols) {
                return Err(Error::InvalidMatrix(format!(
                    "column index out of range in row {i}"
                )));
            }
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::InvalidMatrix(format!(
                "value {v} is negative or non-finite"
            )));
        }
        Ok(Self {
            rows,
            cols,
            row_offsets,
            col_indices,
            values,
        })
    }

    /// Builds a CSR matrix from `(row, col, value)` triplets in any order.
    /// Duplicate coordinates are summed.
    pub fn from_triplets(
        rows: usize,
        cols: usize,
        mut triplets: Vec<(usize, usize, f64)>,
    ) -> Result<Self> {
        if let Some(&(i, j, _)) = triplets.iter().find(|t| t.0 >= rows || t.1 >= cols) {
            return Err(Error::InvalidMatrix(format!(
                "entry ({i}, {j}) outside a {rows}x{cols} matrix"
            )));
        }
        triplets.sort_by_key(|&(i, j, _)| (i, j));
        let mut row_offsets = vec![0; rows + 1];
        let mut col_indices = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in triplets {
            if last == Some((i, j)) {
                *values.last_mut().expect("duplicate follows an entry") += v;
                continue;
            }
            last = Some((i, j));
            row_offsets[i + 1] += 1;
            col_indices.push(j);
            values.push(v);
        }
        for i in 0..rows {
            row_offsets[i + 1] += row_offsets[i];
        }
        Self::new(rows, cols, row_offsets, col_indices, values)
    }

    /// Keeps the nonzero entries of a dense matrix.
    pub fn from_dense(dense: &DenseMatrix) -> Result<Self> {
        let mut triplets = Vec::new();
        for j in 0..dense.cols() {
            for (i, &v) in dense.col(j).iter().enumerate() {
                if v != 0.0 {
                    triplets.push((i, j, v));
                }
            }
        }
        Self::from_triplets(dense.rows(), dense.cols(), triplets)
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Column indices and values of row `i`.
    #[inline]
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (lo, hi) = (self.row_offsets[i], self.row_offsets[i + 1]);
        (&self.col_indices[lo..hi], &self.values[lo..hi])
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.rows, self.cols);
        for i in 0..self.rows {
            let (idx, vals) = self.row(i);
            for (&j, &v) in idx.iter().zip(vals) {
                out[(i, j)] = v;
            }
        }
        out
    }

    /// CSR of the transpose (equivalently, the CSC arrays of `self`).
    pub fn transpose(&self) -> CsrMatrix {
        let mut counts = vec![0usize; self.cols + 1];
        for &j in &self.col_indices {
            counts[j + 1] += 1;
        }
        for j in 0..self.cols {
            counts[j + 1] += counts[j];
        }
        let row_offsets = counts.clone();
        let mut next = counts;
        let mut col_indices = vec![0; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        // Rows are visited in order, so each output row comes out sorted.
        for i in 0..self.rows {
            let (idx, vals) = self.row(i);
            for (&j, &v) in idx.iter().zip(vals) {
                let dst = next[j];
                col_indices[dst] = i;
                values[dst] = v;
                next[j] += 1;
            }
        }
        CsrMatrix {
            rows: self.cols,
            cols: self.rows,
            row_offsets,
            col_indices,
            values,
        }
    }

    pub fn frobenius_norm_sq(&self) -> f64 {
        dot(&self.values, &self.values)
    }
}

/// An owned matrix in either storage.
#[derive(Debug, Clone, PartialEq)]
pub enum Matrix {
    Dense(DenseMatrix),
    Sparse(CsrMatrix),
}

impl Matrix {
    pub fn as_ref(&self) -> MatrixRef<'_> {
        match self {
            Matrix::Dense(d) => MatrixRef::Dense(d),
            Matrix::Sparse(s) => MatrixRef::Sparse(s),
        }
    }
}

impl From<DenseMatrix> for Matrix {
    fn from(d: DenseMatrix) -> Self {
        Matrix::Dense(d)
    }
}

impl From<CsrMatrix> for Matrix {
    fn from(s: CsrMatrix) -> Self {
        Matrix::Sparse(s)
    }
}

/// Read-only view of either storage.
#[derive(Debug, Clone, Copy)]
pub enum MatrixRef<'a> {
    Dense(&'a DenseMatrix),
    Sparse(&'a CsrMatrix),
}

impl<'a> From<&'a DenseMatrix> for MatrixRef<'a> {
    fn from(d: &'a DenseMatrix) -> Self {
        MatrixRef::Dense(d)
    }
}

impl<'a> From<&'a CsrMatrix> for MatrixRef<'a> {
    fn from(s: &'a CsrMatrix) -> Self {
        MatrixRef::Sparse(s)
    }
}

impl<'a> From<&'a Matrix> for MatrixRef<'a> {
    fn from(m: &'a Matrix) -> Self {
        m.as_ref()
    }
}

impl MatrixRef<'_> {
    pub fn rows(&self) -> usize {
        match self {
            MatrixRef::Dense(d) => d.rows(),
            MatrixRef::Sparse(s) => s.rows(),
        }
    }

    pub fn cols(&self) -> usize {
        match self {
            MatrixRef::Dense(d) => d.cols(),
            MatrixRef::Sparse(s) => s.cols(),
        }
    }

    pub fn frobenius_norm_sq(&self) -> f64 {
        match self {
            MatrixRef::Dense(d) => d.frobenius_norm_sq(),
            MatrixRef::Sparse(s) => s.frobenius_norm_sq(),
        }
    }

    pub fn min_value(&self) -> f64 {
        match self {
            MatrixRef::Dense(d) => d.min_value(),
            MatrixRef::Sparse(s) => {
                let stored = s.values().iter().copied().fold(f64::INFINITY, f64::min);
                if s.nnz() < s.rows() * s.cols() {
                    stored.min(0.0)
                } else {
                    stored
                }
            }
        }
    }

    pub fn transpose(&self) -> Matrix {
        match self {
            MatrixRef::Dense(d) => Matrix::Dense(d.transpose()),
            MatrixRef::Sparse(s) => Matrix::Sparse(s.transpose()),
        }
    }

    pub fn to_dense(&self) -> DenseMatrix {
        match self {
            MatrixRef::Dense(d) => (*d).clone(),
            MatrixRef::Sparse(s) => s.to_dense(),
        }
    }

    /// Writes row `i` into `out` (length `cols`).
    pub fn row_into(&self, i: usize, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.cols());
        match self {
            MatrixRef::Dense(d) => {
                for (j, o) in out.iter_mut().enumerate() {
                    *o = d[(i, j)];
                }
            }
            MatrixRef::Sparse(s) => {
                out.fill(0.0);
                let (idx, vals) = s.row(i);
                for (&j, &v) in idx.iter().zip(vals) {
                    out[j] = v;
                }
            }
        }
    }
}

/// Dot product with four independent accumulators so the loop vectorizes.
/// The summation order is fixed, so results are reproducible.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let n = a.len();
    let split = n - n % 4;
    let (mut s0, mut s1, mut s2, mut s3) = (0.0, 0.0, 0.0, 0.0);
    for (ca, cb) in a[..split].chunks_exact(4).zip(b[..split].chunks_exact(4)) {
        s0 += ca[0] * cb[0];
        s1 += ca[1] * cb[1];
        s2 += ca[2] * cb[2];
        s3 += ca[3] * cb[3];
    }
    let mut tail = 0.0;
    for i in split..n {
        tail += a[i] * b[i];
    }
    (s0 + s1) + (s2 + s3) + tail
}

/// `y += alpha * x`
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// `M = UᵀU`. Only the upper triangle is computed; the lower one is a copy,
/// so the result is exactly symmetric.
pub fn gram(u: &DenseMatrix) -> DenseMatrix {
    let r = u.cols();
    let mut m = DenseMatrix::zeros(r, r);
    for j in 0..r {
        for i in 0..=j {
            let v = dot(u.col(i), u.col(j));
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

/// `H = AᵀU` for an `m×n` matrix `A` and an `m×r` matrix `U`.
pub fn at_times(a: MatrixRef<'_>, u: &DenseMatrix) -> Result<DenseMatrix> {
    if a.rows() != u.rows() {
        return Err(Error::dim(
            "at_times",
            format!("A is {}x{} but U has {} rows", a.rows(), a.cols(), u.rows()),
        ));
    }
    let (n, r) = (a.cols(), u.cols());
    let mut h = DenseMatrix::zeros(n, r);
    match a {
        MatrixRef::Dense(a) => {
            // One column of A stays hot while it is dotted with every column of U.
            for j in 0..n {
                let aj = a.col(j);
                for l in 0..r {
                    h.data[l * n + j] = dot(aj, u.col(l));
                }
            }
        }
        MatrixRef::Sparse(a) => {
            let m = a.rows();
            for i in 0..m {
                let (idx, vals) = a.row(i);
                for l in 0..r {
                    let uil = u.data[l * m + i];
                    if uil == 0.0 {
                        continue;
                    }
                    let hl = &mut h.data[l * n..(l + 1) * n];
                    for (&j, &v) in idx.iter().zip(vals) {
                        hl[j] += v * uil;
                    }
                }
            }
        }
    }
    Ok(h)
}

/// `⟨X, Y⟩ = trace(XᵀY)`.
pub fn frobenius_inner(x: &DenseMatrix, y: &DenseMatrix) -> f64 {
    debug_assert_eq!((x.rows(), x.cols()), (y.rows(), y.cols()));
    dot(x.data(), y.data())
}

/// `‖A − UVᵀ‖²_F` from precomputed pieces, where `h = AᵀU` (n×r) and
/// `m_u = UᵀU`: `‖A‖² − 2⟨H, V⟩ + ⟨UᵀU, VᵀV⟩`, clamped at zero.
pub fn objective_from_products(
    norm_a_sq: f64,
    h: &DenseMatrix,
    m_u: &DenseMatrix,
    v: &DenseMatrix,
) -> f64 {
    let m_v = gram(v);
    let value = norm_a_sq - 2.0 * frobenius_inner(h, v) + frobenius_inner(m_u, &m_v);
    value.max(0.0)
}

/// Relative residual `‖A − UVᵀ‖_F / ‖A‖_F`, evaluated through the trace
/// identity so `UVᵀ` is never formed.
pub fn relative_residual(a: MatrixRef<'_>, u: &DenseMatrix, v: &DenseMatrix) -> Result<f64> {
    if u.rows() != a.rows() || v.rows() != a.cols() || u.cols() != v.cols() {
        return Err(Error::dim(
            "relative_residual",
            format!(
                "A is {}x{}, U is {}x{}, V is {}x{}",
                a.rows(),
                a.cols(),
                u.rows(),
                u.cols(),
                v.rows(),
                v.cols()
            ),
        ));
    }
    let norm_a_sq = a.frobenius_norm_sq();
    if norm_a_sq == 0.0 {
        return Err(Error::ZeroMatrix);
    }
    let h = at_times(a, u)?;
    let m_u = gram(u);
    Ok((objective_from_products(norm_a_sq, &h, &m_u, v) / norm_a_sq).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lcg_matrix(rows: usize, cols: usize, mut state: u64) -> DenseMatrix {
        DenseMatrix::from_fn(rows, cols, |_, _| {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64
        })
    }

    fn triple_loop_atb(a: &DenseMatrix, b: &DenseMatrix) -> DenseMatrix {
        DenseMatrix::from_fn(a.cols(), b.cols(), |i, j| {
            let mut s = 0.0;
            for k in 0..a.rows() {
                s += a[(k, i)] * b[(k, j)];
            }
            s
        })
    }

    fn rel_diff(x: &DenseMatrix, y: &DenseMatrix) -> f64 {
        let mut num = 0.0_f64;
        for (a, b) in x.data().iter().zip(y.data()) {
            num = num.max((a - b).abs());
        }
        num / y.max_abs().max(1e-300)
    }

    #[test]
    fn gram_of_identity_and_single_column() {
        assert_eq!(gram(&DenseMatrix::identity(2)), DenseMatrix::identity(2));
        let u = DenseMatrix::from_rows(&[&[1.0], &[2.0]]).unwrap();
        assert_eq!(gram(&u).data(), &[5.0]);
    }

    #[test]
    fn gram_matches_triple_loop_and_is_symmetric() {
        let u = lcg_matrix(50, 7, 3);
        let m = gram(&u);
        assert!(rel_diff(&m, &triple_loop_atb(&u, &u)) <= 1e-13);
        for i in 0..7 {
            for j in 0..7 {
                assert_eq!(m[(i, j)], m[(j, i)]);
            }
        }
    }

    #[test]
    fn at_times_zero_identity_and_mismatch() {
        let u = lcg_matrix(3, 2, 9);
        let h = at_times(MatrixRef::Dense(&DenseMatrix::zeros(3, 2)), &u).unwrap();
        assert_eq!(h, DenseMatrix::zeros(2, 2));

        let h = at_times(MatrixRef::Dense(&DenseMatrix::identity(3)), &u).unwrap();
        assert_eq!(h, u);

        let err = at_times(MatrixRef::Dense(&DenseMatrix::identity(4)), &u);
        assert!(matches!(err, Err(Error::Dimension { .. })));
    }

    #[test]
    fn sparse_at_times_matches_densified_triple_loop() {
        let mut state = 11u64;
        let mut next = || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        let mut triplets = Vec::new();
        for i in 0..40 {
            for j in 0..30 {
                if next() < 0.1 {
                    triplets.push((i, j, next()));
                }
            }
        }
        let a = CsrMatrix::from_triplets(40, 30, triplets).unwrap();
        let u = lcg_matrix(40, 5, 5);
        let sparse = at_times(MatrixRef::Sparse(&a), &u).unwrap();
        let oracle = triple_loop_atb(&a.to_dense(), &u);
        assert!(rel_diff(&sparse, &oracle) <= 1e-13);
        let dense = at_times(MatrixRef::Dense(&a.to_dense()), &u).unwrap();
        assert!(rel_diff(&sparse, &dense) <= 1e-13);
    }

    #[test]
    fn residual_of_zero_factors_and_exact_fit() {
        let a = lcg_matrix(4, 3, 1);
        let z_u = DenseMatrix::zeros(4, 2);
        let z_v = DenseMatrix::zeros(3, 2);
        let rr = relative_residual(MatrixRef::Dense(&a), &z_u, &z_v).unwrap();
        assert!((rr - 1.0).abs() < 1e-15);

        let u = DenseMatrix::from_rows(&[&[1.0], &[2.0]]).unwrap();
        let v = DenseMatrix::from_rows(&[&[3.0], &[4.0]]).unwrap();
        let a = u.matmul_t(&v).unwrap();
        let rr = relative_residual(MatrixRef::Dense(&a), &u, &v).unwrap();
        assert!(rr.abs() <= 1e-12);
    }

    #[test]
    fn residual_rejects_zero_matrix() {
        let a = DenseMatrix::zeros(3, 3);
        let u = DenseMatrix::zeros(3, 1);
        let v = DenseMatrix::zeros(3, 1);
        assert!(matches!(
            relative_residual(MatrixRef::Dense(&a), &u, &v),
            Err(Error::ZeroMatrix)
        ));
    }

    #[test]
    fn residual_matches_direct_computation() {
        let a = lcg_matrix(30, 20, 17);
        let u = lcg_matrix(30, 4, 18);
        let v = lcg_matrix(20, 4, 19);
        let approx = u.matmul_t(&v).unwrap();
        let mut num = 0.0;
        for (x, y) in a.data().iter().zip(approx.data()) {
            num += (x - y) * (x - y);
        }
        let direct = (num / a.frobenius_norm_sq()).sqrt();
        let fast = relative_residual(MatrixRef::Dense(&a), &u, &v).unwrap();
        assert!((fast - direct).abs() <= 1e-10 * direct);
    }

    #[test]
    fn csr_validation() {
        assert!(CsrMatrix::new(2, 2, vec![0, 1, 2], vec![0, 0], vec![1.0, -1.0]).is_err());
        assert!(CsrMatrix::new(2, 2, vec![0, 2, 2], vec![1, 0], vec![1.0, 1.0]).is_err());
        assert!(CsrMatrix::new(2, 2, vec![0, 1, 2], vec![0, 2], vec![1.0, 1.0]).is_err());
        assert!(CsrMatrix::new(2, 2, vec![0, 1], vec![0], vec![1.0]).is_err());
        let ok = CsrMatrix::new(2, 3, vec![0, 0, 2], vec![0, 2], vec![1.0, 0.5]).unwrap();
        assert_eq!(ok.nnz(), 2);
    }

    #[test]
    fn triplets_sum_duplicates_and_transpose_round_trips() {
        let a =
            CsrMatrix::from_triplets(3, 2, vec![(2, 1, 1.0), (0, 0, 2.0), (2, 1, 0.5)]).unwrap();
        assert_eq!(a.nnz(), 2);
        assert_eq!(a.to_dense()[(2, 1)], 1.5);
        let t = a.transpose();
        assert_eq!(t.to_dense(), a.to_dense().transpose());
        assert_eq!(t.transpose(), a);
    }

    #[test]
    fn dense_rejects_bad_shapes_and_values() {
        assert!(DenseMatrix::new(2, 2, vec![0.0; 3]).is_err());
        assert!(DenseMatrix::new(1, 2, vec![0.0, f64::NAN]).is_err());
    }

    #[test]
    fn row_extraction_agrees_between_storages() {
        let d = DenseMatrix::from_rows(&[&[0.0, 1.0, 0.0], &[2.0, 0.0, 3.0]]).unwrap();
        let s = CsrMatrix::from_dense(&d).unwrap();
        let mut a = vec![0.0; 3];
        let mut b = vec![9.0; 3];
        MatrixRef::Dense(&d).row_into(1, &mut a);
        MatrixRef::Sparse(&s).row_into(1, &mut b);
        assert_eq!(a, vec![2.0, 0.0, 3.0]);
        assert_eq!(a, b);
    }
}
