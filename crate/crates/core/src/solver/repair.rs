//! Rank repair of a coefficient block before its closed-form update.
//!
//! A block `[u₁ u₂ u₃]` of the coefficient factor that has lost full column
//! rank is rewritten so that it regains it, while the product
//! `u₁v₁ᵀ + u₂v₂ᵀ + u₃v₃ᵀ` with the matching target columns stays the same.
//! Dependent columns are folded into the target factor and replaced by unit
//! vectors. Detection reads only the cached Gram matrix, and every replaced
//! column has its `H` column and `M` row/column refreshed in place.
//!
//! Unit entries are placed in rows named after the block's global column
//! indices, which is valid because the rank never exceeds either dimension.

use super::workspace::{BlockGram, Workspace};
use crate::error::{Error, Result};
use crate::matrix::{axpy, DenseMatrix, MatrixRef};

/// Step taken when `u₂` was found to be a multiple of `u₁`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollinearRepair {
    /// `‖u₂‖/‖u₁‖`, folded into `v₁ += α·v₂`.
    pub alpha: f64,
    /// Row of the unit entry given to the new `u₂`.
    pub unit_row: usize,
}

/// Step taken when one block column was a nonnegative combination of the
/// other two: `u_{J₃} = α̃·u_{J₁} + β̃·u_{J₂}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DependentTripleRepair {
    /// Block-local order (0-based) with the rebuilt column last.
    pub perm: [usize; 3],
    /// Global column indices in that order.
    pub cols: [usize; 3],
    pub alpha: f64,
    pub beta: f64,
    /// Row of the unit entry given to the rebuilt column.
    pub unit_row: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RepairPlan {
    /// Global index of a zero first column that was replaced by a unit vector.
    pub zeroed_first: Option<usize>,
    pub collinear_pair: Option<CollinearRepair>,
    pub dependent_triple: Option<DependentTripleRepair>,
}

impl RepairPlan {
    pub fn is_noop(&self) -> bool {
        self.zeroed_first.is_none()
            && self.collinear_pair.is_none()
            && self.dependent_triple.is_none()
    }

    /// Number of repair steps that fired.
    pub fn steps(&self) -> usize {
        self.zeroed_first.is_some() as usize
            + self.collinear_pair.is_some() as usize
            + self.dependent_triple.is_some() as usize
    }
}

/// Makes the coefficient block `cols` full rank, folding dependent columns
/// into `target` and keeping `ws` consistent with `coef`.
///
/// A first column counts as zero when `‖u₁‖ ≤ rank_eps·max_j ‖u_j‖`; pairs and
/// triples count as dependent when their Gram determinant is at most
/// `rank_eps` times the product of squared norms. Near-dependent blocks are
/// repaired the same way as exactly dependent ones.
pub fn repair_block(
    a_side: MatrixRef<'_>,
    coef: &mut DenseMatrix,
    target: &mut DenseMatrix,
    ws: &mut Workspace,
    cols: &[usize],
    rank_eps: f64,
) -> Result<RepairPlan> {
    let mut plan = RepairPlan::default();
    if cols.is_empty() || cols.len() > 3 {
        return Err(Error::Config(format!(
            "block width {} is not supported",
            cols.len()
        )));
    }

    let c1 = cols[0];
    let max_diag = (0..ws.m.rows()).map(|j| ws.m[(j, j)]).fold(0.0, f64::max);
    if ws.m[(c1, c1)] <= rank_eps * rank_eps * max_diag {
        set_unit_column(coef, c1, c1);
        target.col_mut(c1).fill(0.0);
        ws.refresh_unit_column(a_side, coef, c1, c1);
        plan.zeroed_first = Some(c1);
    }

    if cols.len() >= 2 {
        plan.collinear_pair = repair_pair(a_side, coef, target, ws, [c1, cols[1]], rank_eps)?;
    }
    if cols.len() == 3 {
        plan.dependent_triple =
            repair_triple(a_side, coef, target, ws, [c1, cols[1], cols[2]], rank_eps)?;
    }
    Ok(plan)
}

fn set_unit_column(coef: &mut DenseMatrix, col: usize, row: usize) {
    let c = coef.col_mut(col);
    c.fill(0.0);
    c[row] = 1.0;
}

fn pair_is_dependent(ws: &Workspace, c1: usize, c2: usize, rank_eps: f64) -> bool {
    let (n1, n2, g12) = (ws.m[(c1, c1)], ws.m[(c2, c2)], ws.m[(c1, c2)]);
    n1 * n2 - g12 * g12 <= rank_eps * n1 * n2
}

fn repair_pair(
    a_side: MatrixRef<'_>,
    coef: &mut DenseMatrix,
    target: &mut DenseMatrix,
    ws: &mut Workspace,
    [c1, c2]: [usize; 2],
    rank_eps: f64,
) -> Result<Option<CollinearRepair>> {
    if !pair_is_dependent(ws, c1, c2, rank_eps) {
        return Ok(None);
    }
    let alpha = (ws.m[(c2, c2)] / ws.m[(c1, c1)]).sqrt();
    fold_column(target, c2, c1, alpha);
    target.col_mut(c2).fill(0.0);

    let mut unit_row = if coef[(c1, c1)] != 0.0 { c2 } else { c1 };
    set_unit_column(coef, c2, unit_row);
    ws.refresh_unit_column(a_side, coef, c2, unit_row);

    if pair_is_dependent(ws, c1, c2, rank_eps) {
        // Only reachable for nearly dependent input: take the row where u₁ is
        // smallest, which maximizes the angle to the unit vector.
        let u1 = coef.col(c1);
        unit_row = (0..u1.len())
            .min_by(|&s, &t| (u1[s] * u1[s]).total_cmp(&(u1[t] * u1[t])))
            .expect("coefficient factor has rows");
        set_unit_column(coef, c2, unit_row);
        ws.refresh_unit_column(a_side, coef, c2, unit_row);
        if pair_is_dependent(ws, c1, c2, rank_eps) {
            return Err(Error::Repair(format!(
                "columns {c1} and {c2} stay dependent after repair"
            )));
        }
    }
    Ok(Some(CollinearRepair { alpha, unit_row }))
}

/// `target(:, to) += scale · target(:, from)`
fn fold_column(target: &mut DenseMatrix, from: usize, to: usize, scale: f64) {
    if scale == 0.0 {
        return;
    }
    let src = target.col(from).to_vec();
    axpy(scale, &src, target.col_mut(to));
}

fn triple_is_dependent(ws: &Workspace, cols: [usize; 3], rank_eps: f64) -> bool {
    let g = BlockGram::from_gram(&ws.m, cols);
    let [n1, n2, n3] = g.norms;
    g.det <= rank_eps * n1 * n2 * n3
}

fn repair_triple(
    a_side: MatrixRef<'_>,
    coef: &mut DenseMatrix,
    target: &mut DenseMatrix,
    ws: &mut Workspace,
    cols: [usize; 3],
    rank_eps: f64,
) -> Result<Option<DependentTripleRepair>> {
    if !triple_is_dependent(ws, cols, rank_eps) {
        return Ok(None);
    }
    let g = BlockGram::from_gram(&ws.m, cols);
    let [n1, n2, _] = g.norms;
    // u₃ = α̃u₁ + β̃u₂ by Cramer's rule on the normal equations of [u₁ u₂].
    let alpha_t = (n2 * g.g13 - g.g23 * g.g12) / g.d12;
    let beta_t = (n1 * g.g23 - g.g12 * g.g13) / g.d12;

    let (perm, alpha, beta) = if alpha_t >= 0.0 && beta_t >= 0.0 {
        ([0, 1, 2], alpha_t, beta_t)
    } else if alpha_t < 0.0 && beta_t > 0.0 {
        // u₂ = (−α̃/β̃)u₁ + (1/β̃)u₃
        ([0, 2, 1], -alpha_t / beta_t, 1.0 / beta_t)
    } else if beta_t < 0.0 && alpha_t > 0.0 {
        // u₁ = (−β̃/α̃)u₂ + (1/α̃)u₃
        ([1, 2, 0], -beta_t / alpha_t, 1.0 / alpha_t)
    } else if alpha_t < 0.0 && beta_t < 0.0 {
        return Err(Error::Repair(format!(
            "both combination coefficients are negative ({alpha_t:e}, {beta_t:e}) for columns {cols:?}"
        )));
    } else {
        // One coefficient is negative and the other exactly zero, so u₃ is a
        // negative multiple of a nonnegative column; it can only be rounding.
        ([0, 1, 2], alpha_t.max(0.0), beta_t.max(0.0))
    };
    let j = perm.map(|p| cols[p]);

    fold_column(target, j[2], j[0], alpha);
    fold_column(target, j[2], j[1], beta);
    target.col_mut(j[2]).fill(0.0);

    let e = |row: usize, col: usize| coef[(row, col)];
    let minor = e(j[0], j[0]) * e(j[1], j[1]) - e(j[1], j[0]) * e(j[0], j[1]);
    let mut unit_row = if minor != 0.0 {
        j[2]
    } else if e(j[0], j[0]) + e(j[0], j[1]) == 0.0 {
        j[0]
    } else {
        j[1]
    };
    set_unit_column(coef, j[2], unit_row);
    ws.refresh_unit_column(a_side, coef, j[2], unit_row);

    if triple_is_dependent(ws, cols, rank_eps) {
        // Nearly dependent input: use the row least covered by the span of
        // the two kept columns.
        unit_row = least_covered_row(coef.col(j[0]), coef.col(j[1]));
        set_unit_column(coef, j[2], unit_row);
        ws.refresh_unit_column(a_side, coef, j[2], unit_row);
        if triple_is_dependent(ws, cols, rank_eps) {
            return Err(Error::Repair(format!(
                "columns {cols:?} stay dependent after repair"
            )));
        }
    }

    Ok(Some(DependentTripleRepair {
        perm,
        cols: j,
        alpha,
        beta,
        unit_row,
    }))
}

/// Row `t` minimizing `‖Q(t, :)‖²` for an orthonormal basis `Q` of
/// `span{x, y}`; `e_t` then has the largest component outside the span.
fn least_covered_row(x: &[f64], y: &[f64]) -> usize {
    let nx = crate::matrix::dot(x, x).sqrt();
    let q1: Vec<f64> = x.iter().map(|v| v / nx).collect();
    let proj = crate::matrix::dot(&q1, y);
    let mut q2: Vec<f64> = y.to_vec();
    axpy(-proj, &q1, &mut q2);
    let n2 = crate::matrix::dot(&q2, &q2).sqrt();
    q2.iter_mut().for_each(|v| *v /= n2);
    (0..x.len())
        .min_by(|&s, &t| {
            let ws = q1[s] * q1[s] + q2[s] * q2[s];
            let wt = q1[t] * q1[t] + q2[t] * q2[t];
            ws.total_cmp(&wt)
        })
        .expect("coefficient factor has rows")
}
