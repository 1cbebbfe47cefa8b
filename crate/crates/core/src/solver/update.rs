//! Closed-form block updates of the target factor.
//!
//! Every formula is written in residual form: with `r_j = H(:, c_j) − T·M(:, c_j)`
//! the right-hand side of the block subproblem is `r_j` plus the block's own
//! contribution, so each new column is the old one plus a correction,
//! clamped at zero. All operations are elementwise over the rows of `T`.

use super::workspace::{BlockGram, Workspace};
use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;

#[inline]
fn pos(x: f64) -> f64 {
    x.max(0.0)
}

/// Replaces the columns `cols` (one, two or three of them) of `target` with
/// the exact minimizer of the block subproblem. The coefficient block must
/// already have full column rank.
pub fn update_block(
    ws: &mut Workspace,
    target: &mut DenseMatrix,
    cols: &[usize],
    rank_eps: f64,
) -> Result<()> {
    match *cols {
        [c] => update_single(ws, target, c),
        [c1, c2] => update_pair(ws, target, [c1, c2], rank_eps),
        [c1, c2, c3] => update_triple(ws, target, [c1, c2, c3], rank_eps),
        _ => Err(Error::Config(format!(
            "block width {} is not supported",
            cols.len()
        ))),
    }
}

/// `v ← [v + r/‖u‖²]₊`, the HALS rule.
fn update_single(ws: &mut Workspace, target: &mut DenseMatrix, c: usize) -> Result<()> {
    let nu = ws.m[(c, c)];
    if nu <= 0.0 {
        return Err(Error::RankDeficient(format!("column {c} is zero")));
    }
    ws.compute_residuals(target, &[c]);
    let r = &ws.resid[0];
    for (v, &rt) in target.col_mut(c).iter_mut().zip(r) {
        *v = pos(*v + rt / nu);
    }
    Ok(())
}

fn update_pair(
    ws: &mut Workspace,
    target: &mut DenseMatrix,
    [c1, c2]: [usize; 2],
    rank_eps: f64,
) -> Result<()> {
    let n1 = ws.m[(c1, c1)];
    let n2 = ws.m[(c2, c2)];
    let g12 = ws.m[(c1, c2)];
    let d12 = n1 * n2 - g12 * g12;
    if !(n1 > 0.0 && n2 > 0.0 && d12 > rank_eps * n1 * n2) {
        return Err(Error::RankDeficient(format!(
            "unrepaired pair ({c1}, {c2}): d12 = {d12:e}"
        )));
    }
    ws.compute_residuals(target, &[c1, c2]);
    let rows = target.rows();
    let data = target.data_mut();
    let (r1, r2) = (&ws.resid[0], &ws.resid[1]);
    for t in 0..rows {
        let i1 = c1 * rows + t;
        let i2 = c2 * rows + t;
        let (v1, v2) = (data[i1], data[i2]);
        // Unconstrained coefficient of u₁, clamped.
        let w = pos(v1 + (n2 * r1[t] - g12 * r2[t]) / d12);
        let v2_new = pos(v2 + r2[t] / n2 + g12 / n2 * (v1 - w));
        let v1_new = pos(v1 + r1[t] / n1 + g12 / n1 * (v2 - v2_new));
        data[i1] = v1_new;
        data[i2] = v2_new;
    }
    Ok(())
}

fn update_triple(
    ws: &mut Workspace,
    target: &mut DenseMatrix,
    cols: [usize; 3],
    rank_eps: f64,
) -> Result<()> {
    let gm = BlockGram::from_gram(&ws.m, cols);
    gm.check(rank_eps)?;
    ws.compute_residuals(target, &cols);

    let [n1, n2, n3] = gm.norms;
    let BlockGram {
        g12,
        g13,
        g23,
        a,
        b,
        d12,
        d13,
        d23,
        det,
        ..
    } = gm;
    let rows = target.rows();
    let [c1, c2, c3] = cols;
    let data = target.data_mut();
    let (r1, r2, r3) = (&ws.resid[0], &ws.resid[1], &ws.resid[2]);
    for t in 0..rows {
        let (i1, i2, i3) = (c1 * rows + t, c2 * rows + t, c3 * rows + t);
        let (v1, v2, v3) = (data[i1], data[i2], data[i3]);
        let (r1, r2, r3) = (r1[t], r2[t], r3[t]);

        let p = pos(v2
            + (n3 * r2 - g23 * r3) / d23
            + a / d23 * (v1 - pos((d23 * r1 - a * r2 - b * r3) / det + v1)));
        let p_tilde = pos(v1 + (n3 * r1 - g13 * r3) / d13 + a / d13 * (v2 - p));
        let v3_new = pos(v3 + r3 / n3 + g13 / n3 * (v1 - p_tilde) + g23 / n3 * (v2 - p));
        let z = pos(v1 + (n2 * r1 - g12 * r2) / d12 + b / d12 * (v3 - v3_new));
        let v2_new = pos(v2 + r2 / n2 + g12 / n2 * (v1 - z) + g23 / n2 * (v3 - v3_new));
        let v1_new = pos(v1 + r1 / n1 + g12 / n1 * (v2 - v2_new) + g13 / n1 * (v3 - v3_new));

        data[i1] = v1_new;
        data[i2] = v2_new;
        data[i3] = v3_new;
    }
    Ok(())
}
