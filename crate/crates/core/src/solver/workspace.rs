use crate::error::{Error, Result};
use crate::matrix::{at_times, axpy, gram, DenseMatrix, MatrixRef};
use crate::nnls::det3;

/// Per-sweep caches for updating the target factor while the coefficient
/// factor is held fixed.
///
/// For the V-side sweep the coefficient is `U`, the target is `V`, `h = AᵀU`
/// and `m = UᵀU`. The U-side sweep swaps the roles and uses `Aᵀ`.
#[derive(Debug, Clone)]
pub struct Workspace {
    pub(crate) h: DenseMatrix,
    pub(crate) m: DenseMatrix,
    pub(crate) resid: [Vec<f64>; 3],
}

impl Workspace {
    /// Computes `h = a_sideᵀ · coef` and `m = coefᵀ · coef`.
    pub fn new(a_side: MatrixRef<'_>, coef: &DenseMatrix) -> Result<Self> {
        let h = at_times(a_side, coef)?;
        let m = gram(coef);
        let n = h.rows();
        Ok(Self {
            h,
            m,
            resid: [vec![0.0; n], vec![0.0; n], vec![0.0; n]],
        })
    }

    pub fn h(&self) -> &DenseMatrix {
        &self.h
    }

    pub fn m(&self) -> &DenseMatrix {
        &self.m
    }

    /// Residual columns `r_j = H(:, c_j) − T·M(:, c_j)` of the last updated
    /// block, where `T` is the target factor before the update.
    pub fn residual_columns(&self) -> &[Vec<f64>; 3] {
        &self.resid
    }

    pub(crate) fn compute_residuals(&mut self, target: &DenseMatrix, cols: &[usize]) {
        for (slot, &c) in cols.iter().enumerate() {
            let r = &mut self.resid[slot];
            r.copy_from_slice(self.h.col(c));
            for l in 0..target.cols() {
                let w = self.m[(l, c)];
                if w != 0.0 {
                    axpy(-w, target.col(l), r);
                }
            }
        }
    }

    /// After `coef(:, col)` has been replaced by the unit vector `e_row`:
    /// `H(:, col) = a_side(row, :)ᵀ` and `M(:, col) = M(col, :)ᵀ = coef(row, :)ᵀ`.
    pub(crate) fn refresh_unit_column(
        &mut self,
        a_side: MatrixRef<'_>,
        coef: &DenseMatrix,
        col: usize,
        row: usize,
    ) {
        a_side.row_into(row, self.h.col_mut(col));
        for l in 0..coef.cols() {
            let v = coef[(row, l)];
            self.m[(l, col)] = v;
            self.m[(col, l)] = v;
        }
    }
}

/// Gram quantities of one block `[u₁ u₂ u₃]` read from `M`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockGram {
    /// `‖u_j‖²`
    pub norms: [f64; 3],
    pub g12: f64,
    pub g13: f64,
    pub g23: f64,
    /// `u₂ᵀu₁‖u₃‖² − u₃ᵀu₂·u₃ᵀu₁`
    pub a: f64,
    /// `u₃ᵀu₁‖u₂‖² − u₃ᵀu₂·u₂ᵀu₁`
    pub b: f64,
    pub d12: f64,
    pub d13: f64,
    pub d23: f64,
    /// `det(U_iᵀU_i)`
    pub det: f64,
}

impl BlockGram {
    /// Reads the three-column block `cols` out of `m`.
    pub fn from_gram(m: &DenseMatrix, cols: [usize; 3]) -> Self {
        let [c1, c2, c3] = cols;
        let (n1, n2, n3) = (m[(c1, c1)], m[(c2, c2)], m[(c3, c3)]);
        let (g12, g13, g23) = (m[(c1, c2)], m[(c1, c3)], m[(c2, c3)]);
        Self {
            norms: [n1, n2, n3],
            g12,
            g13,
            g23,
            a: g12 * n3 - g23 * g13,
            b: g13 * n2 - g23 * g12,
            d12: n1 * n2 - g12 * g12,
            d13: n1 * n3 - g13 * g13,
            d23: n2 * n3 - g23 * g23,
            det: det3([[n1, g12, g13], [g12, n2, g23], [g13, g23, n3]]),
        }
    }

    /// Fails when any closed-form denominator is at or below its relative
    /// threshold, which means a repair was skipped.
    pub fn check(&self, rank_eps: f64) -> Result<()> {
        let [n1, n2, n3] = self.norms;
        let ok = n1 > 0.0
            && n2 > 0.0
            && n3 > 0.0
            && self.d12 > rank_eps * n1 * n2
            && self.d13 > rank_eps * n1 * n3
            && self.d23 > rank_eps * n2 * n3
            && self.det > rank_eps * n1 * n2 * n3;
        if ok {
            Ok(())
        } else {
            Err(Error::RankDeficient(format!("unrepaired block: {self:?}")))
        }
    }
}
