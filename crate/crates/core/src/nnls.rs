//! Single right-hand-side nonnegativity-constrained least squares,
//! `min ‖Gy − b‖ s.t. y ≥ 0`, for a full-column-rank `G`.
//!
//! The rank-1, rank-2 and rank-3 kernels are closed forms. Each one is the
//! recursion of [`nnls_recursive`] unrolled by hand: the last coefficient is
//! solved first against the problem projected onto the orthogonal complement
//! of its column, then the remaining coefficients are solved against the
//! deflated right-hand side. The nested clamps make the evaluation order
//! significant, so the kernels compute `y_k` first and `y_1` last.
//!
//! [`nnls_oracle`] is an independent exhaustive check that enumerates every
//! active set; it is only meant for tests and small `k`.

use crate::error::{Error, Result};
use crate::matrix::{dot, DenseMatrix};

/// Relative threshold below which a Gram determinant is treated as zero.
pub const RANK_EPS: f64 = 1e-12;

/// Dual-feasibility slack used by the oracle when accepting an active set.
pub const ORACLE_DUAL_TOL: f64 = 1e-9;

const MAX_ORACLE_COLS: usize = 12;

#[derive(Debug, Clone, PartialEq)]
pub struct NnlsSolution {
    pub y: Vec<f64>,
    /// Largest violation of the KKT conditions at `y`.
    pub kkt_residual: f64,
}

impl NnlsSolution {
    fn new(g: &DenseMatrix, b: &[f64], y: Vec<f64>) -> Self {
        let kkt_residual = kkt_residual(g, b, &y);
        Self { y, kkt_residual }
    }
}

#[inline]
fn pos(x: f64) -> f64 {
    x.max(0.0)
}

/// `Gᵀ(Gy − b)`.
pub fn gradient(g: &DenseMatrix, b: &[f64], y: &[f64]) -> Vec<f64> {
    let mut resid: Vec<f64> = b.iter().map(|v| -v).collect();
    for (j, &yj) in y.iter().enumerate() {
        if yj != 0.0 {
            crate::matrix::axpy(yj, g.col(j), &mut resid);
        }
    }
    (0..g.cols()).map(|j| dot(g.col(j), &resid)).collect()
}

/// Max over `j` of `|∇_j|` where `y_j > 0` and `max(0, −∇_j)` where `y_j = 0`,
/// with `∇ = Gᵀ(Gy − b)`.
pub fn kkt_residual(g: &DenseMatrix, b: &[f64], y: &[f64]) -> f64 {
    gradient(g, b, y)
        .iter()
        .zip(y)
        .map(|(&gr, &yj)| if yj > 0.0 { gr.abs() } else { pos(-gr) })
        .fold(0.0, f64::max)
}

/// `‖Gy − b‖₂`.
pub fn residual_norm(g: &DenseMatrix, b: &[f64], y: &[f64]) -> f64 {
    let mut resid: Vec<f64> = b.iter().map(|v| -v).collect();
    for (j, &yj) in y.iter().enumerate() {
        crate::matrix::axpy(yj, g.col(j), &mut resid);
    }
    dot(&resid, &resid).sqrt()
}

fn check_shape(op: &'static str, g: &DenseMatrix, b: &[f64], k: usize) -> Result<()> {
    if g.cols() != k || g.rows() != b.len() {
        return Err(Error::dim(
            op,
            format!(
                "G is {}x{}, b has length {}, expected {k} columns",
                g.rows(),
                g.cols(),
                b.len()
            ),
        ));
    }
    Ok(())
}

/// `y = [gᵀb]₊ / ‖g‖²`.
pub fn nnls_rank1(g: &[f64], b: &[f64]) -> Result<NnlsSolution> {
    if g.len() != b.len() {
        return Err(Error::dim(
            "nnls_rank1",
            format!("g has length {}, b has length {}", g.len(), b.len()),
        ));
    }
    let gg = dot(g, g);
    if gg <= 0.0 {
        return Err(Error::RankDeficient("rank-1 column is zero".into()));
    }
    let gm = DenseMatrix::new(g.len(), 1, g.to_vec())?;
    Ok(NnlsSolution::new(&gm, b, vec![pos(dot(g, b)) / gg]))
}

/// [`nnls_rank1`] taking a one-column matrix, so it can serve as a base
/// solver for [`nnls_recursive`].
pub fn nnls_rank1_matrix(g: &DenseMatrix, b: &[f64]) -> Result<NnlsSolution> {
    check_shape("nnls_rank1", g, b, 1)?;
    nnls_rank1(g.col(0), b)
}

/// Closed-form rank-2 solution.
pub fn nnls_rank2(g: &DenseMatrix, b: &[f64]) -> Result<NnlsSolution> {
    check_shape("nnls_rank2", g, b, 2)?;
    let (g1, g2) = (g.col(0), g.col(1));
    let n1 = dot(g1, g1);
    let n2 = dot(g2, g2);
    let g12 = dot(g1, g2);
    let d12 = n1 * n2 - g12 * g12;
    if !(n1 > 0.0 && n2 > 0.0 && d12 > RANK_EPS * n1 * n2) {
        return Err(Error::RankDeficient(format!(
            "rank-2 Gram determinant {d12:e} vs column norms² {n1:e}, {n2:e}"
        )));
    }
    let bg1 = dot(b, g1);
    let bg2 = dot(b, g2);

    let y2 = pos(bg2 - g12 * pos((n2 * bg1 - bg2 * g12) / d12)) / n2;
    let y1 = pos(bg1 - g12 * y2) / n1;
    Ok(NnlsSolution::new(g, b, vec![y1, y2]))
}

/// Determinant of a 3×3 matrix given by rows, by cofactor expansion along
/// the first row.
#[inline]
pub fn det3(m: [[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// Closed-form rank-3 solution.
///
/// `p` and `p̃` are the two coordinates of the rank-2 problem left after
/// projecting out `g₃`; the inner clamp of `p` is the unconstrained rank-3
/// coefficient of `g₁`, written as the determinant ratio
/// `det([b, g₂, g₃]ᵀG) / det(GᵀG)`.
pub fn nnls_rank3(g: &DenseMatrix, b: &[f64]) -> Result<NnlsSolution> {
    check_shape("nnls_rank3", g, b, 3)?;
    let (g1, g2, g3) = (g.col(0), g.col(1), g.col(2));
    let n1 = dot(g1, g1);
    let n2 = dot(g2, g2);
    let n3 = dot(g3, g3);
    let g12 = dot(g1, g2);
    let g13 = dot(g1, g3);
    let g23 = dot(g2, g3);
    let det_g = det3([[n1, g12, g13], [g12, n2, g23], [g13, g23, n3]]);
    if !(n1 > 0.0 && n2 > 0.0 && n3 > 0.0 && det_g > RANK_EPS * n1 * n2 * n3) {
        return Err(Error::RankDeficient(format!(
            "rank-3 Gram determinant {det_g:e} vs column norms² {n1:e}, {n2:e}, {n3:e}"
        )));
    }
    let bg1 = dot(b, g1);
    let bg2 = dot(b, g2);
    let bg3 = dot(b, g3);
    let d12 = n1 * n2 - g12 * g12;
    let d13 = n1 * n3 - g13 * g13;
    let d23 = n2 * n3 - g23 * g23;
    let a = g12 * n3 - g23 * g13;
    let det_b = det3([[bg1, bg2, bg3], [g12, n2, g23], [g13, g23, n3]]);

    let p = pos((bg2 * n3 - bg3 * g23) / d23 - a / d23 * pos(det_b / det_g));
    let p_tilde = pos((bg1 * n3 - bg3 * g13) / d13 - a / d13 * p);
    let y3 = pos(bg3 - g13 * p_tilde - g23 * p) / n3;
    let inner = ((bg1 * n2 - bg2 * g12) - (g13 * n2 - g23 * g12) * y3) / d12;
    let y2 = pos(bg2 - g23 * y3 - g12 * pos(inner)) / n2;
    let y1 = pos(bg1 - g13 * y3 - g12 * y2) / n1;
    Ok(NnlsSolution::new(g, b, vec![y1, y2, y3]))
}

/// Determinant of the column-normalized Gram matrix of `g`, in `[0, 1]`.
/// Zero when a column vanishes or Cholesky breaks down.
pub fn relative_gram_det(g: &DenseMatrix) -> f64 {
    let k = g.cols();
    let norms: Vec<f64> = (0..k).map(|j| dot(g.col(j), g.col(j)).sqrt()).collect();
    if norms.contains(&0.0) {
        return 0.0;
    }
    let mut c = vec![0.0; k * k];
    for i in 0..k {
        for j in 0..k {
            c[i * k + j] = dot(g.col(i), g.col(j)) / (norms[i] * norms[j]);
        }
    }
    match cholesky(&mut c, k) {
        Some(()) => (0..k).map(|i| c[i * k + i] * c[i * k + i]).product(),
        None => 0.0,
    }
}

/// Rank-(k+1) solution from two calls to a rank-k solver.
///
/// With `g` the last column of `G` and `P = I − ggᵀ/‖g‖²`, the last
/// coefficient is `[gᵀ(b − G₁ s(PG₁, Pb))]₊ / ‖g‖²` and the leading ones are
/// `s(G₁, b − g·y_last)`, where `G₁` holds the first `k` columns.
pub fn nnls_recursive<F>(g: &DenseMatrix, b: &[f64], base: F) -> Result<NnlsSolution>
where
    F: Fn(&DenseMatrix, &[f64]) -> Result<NnlsSolution>,
{
    let k1 = g.cols();
    if k1 < 2 || g.rows() != b.len() {
        return Err(Error::dim(
            "nnls_recursive",
            format!(
                "G is {}x{}, b has length {}; need at least two columns",
                g.rows(),
                k1,
                b.len()
            ),
        ));
    }
    if relative_gram_det(g) <= RANK_EPS {
        return Err(Error::RankDeficient(format!(
            "{k1}-column coefficient matrix"
        )));
    }
    let k = k1 - 1;
    let last = g.col(k);
    let nn = dot(last, last);
    let lead_cols: Vec<usize> = (0..k).collect();
    let lead = g.select_columns(&lead_cols);

    let mut projected = lead.clone();
    for j in 0..k {
        let coef = dot(last, lead.col(j)) / nn;
        crate::matrix::axpy(-coef, last, projected.col_mut(j));
    }
    let mut b_proj = b.to_vec();
    crate::matrix::axpy(-dot(last, b) / nn, last, &mut b_proj);

    let s_proj = base(&projected, &b_proj)?;
    let mut resid = b.to_vec();
    for (j, &sj) in s_proj.y.iter().enumerate() {
        crate::matrix::axpy(-sj, lead.col(j), &mut resid);
    }
    let y_last = pos(dot(last, &resid)) / nn;

    let mut deflated = b.to_vec();
    crate::matrix::axpy(-y_last, last, &mut deflated);
    let mut y = base(&lead, &deflated)?.y;
    y.push(y_last);
    Ok(NnlsSolution::new(g, b, y))
}

/// In-place Cholesky of a row-major `k×k` SPD matrix; the lower triangle
/// receives `L`. Returns `None` if a pivot is not positive.
fn cholesky(a: &mut [f64], k: usize) -> Option<()> {
    for j in 0..k {
        let mut d = a[j * k + j];
        for l in 0..j {
            d -= a[j * k + l] * a[j * k + l];
        }
        if d <= 0.0 || !d.is_finite() {
            return None;
        }
        let d = d.sqrt();
        a[j * k + j] = d;
        for i in j + 1..k {
            let mut s = a[i * k + j];
            for l in 0..j {
                s -= a[i * k + l] * a[j * k + l];
            }
            a[i * k + j] = s / d;
        }
    }
    Some(())
}

fn cholesky_solve(l: &[f64], k: usize, rhs: &mut [f64]) {
    for i in 0..k {
        let mut s = rhs[i];
        for j in 0..i {
            s -= l[i * k + j] * rhs[j];
        }
        rhs[i] = s / l[i * k + i];
    }
    for i in (0..k).rev() {
        let mut s = rhs[i];
        for j in i + 1..k {
            s -= l[j * k + i] * rhs[j];
        }
        rhs[i] = s / l[i * k + i];
    }
}

/// Full result of the active-set enumeration.
#[derive(Debug, Clone)]
pub struct OracleReport {
    pub solution: NnlsSolution,
    /// Passive set (indices free to be positive) of the returned solution.
    pub support: Vec<usize>,
    /// Number of subsets that passed primal and dual feasibility.
    pub accepted: usize,
}

/// Exhaustive active-set solver; see [`nnls_oracle_report`].
pub fn nnls_oracle(g: &DenseMatrix, b: &[f64]) -> Result<NnlsSolution> {
    Ok(nnls_oracle_report(g, b)?.solution)
}

/// Tries all `2^k` passive sets `S`: solves the normal equations on the
/// columns in `S`, sets the rest to zero, and accepts the candidate when it
/// is nonnegative and `(Gᵀ(Gy − b))_j ≥ −1e-9` off `S`. Among accepted
/// candidates the smallest residual wins, then the smallest `‖y‖`, then the
/// lexicographically smallest `S`.
pub fn nnls_oracle_report(g: &DenseMatrix, b: &[f64]) -> Result<OracleReport> {
    let k = g.cols();
    if g.rows() != b.len() || k == 0 || k > MAX_ORACLE_COLS {
        return Err(Error::dim(
            "nnls_oracle",
            format!(
                "G is {}x{k}, b has length {}; need 1..={MAX_ORACLE_COLS} columns",
                g.rows(),
                b.len()
            ),
        ));
    }
    let mut gram = vec![0.0; k * k];
    for i in 0..k {
        for j in 0..k {
            gram[i * k + j] = dot(g.col(i), g.col(j));
        }
    }
    let gtb: Vec<f64> = (0..k).map(|j| dot(g.col(j), b)).collect();

    struct Candidate {
        y: Vec<f64>,
        support: Vec<usize>,
        resid: f64,
        norm: f64,
    }
    let mut best: Option<Candidate> = None;
    let mut accepted = 0;

    for mask in 0u32..(1 << k) {
        let support: Vec<usize> = (0..k).filter(|&j| mask & (1 << j) != 0).collect();
        let s = support.len();
        let mut y = vec![0.0; k];
        if s > 0 {
            let mut sub = vec![0.0; s * s];
            let mut rhs = vec![0.0; s];
            for (a, &i) in support.iter().enumerate() {
                rhs[a] = gtb[i];
                for (c, &j) in support.iter().enumerate() {
                    sub[a * s + c] = gram[i * k + j];
                }
            }
            if cholesky(&mut sub, s).is_none() {
                continue;
            }
            cholesky_solve(&sub, s, &mut rhs);
            if rhs.iter().any(|v| *v < 0.0 || !v.is_finite()) {
                continue;
            }
            for (a, &i) in support.iter().enumerate() {
                y[i] = rhs[a];
            }
        }
        let dual_ok = (0..k).filter(|j| mask & (1 << j) == 0).all(|j| {
            let grad: f64 = (0..k).map(|l| gram[j * k + l] * y[l]).sum::<f64>() - gtb[j];
            grad >= -ORACLE_DUAL_TOL
        });
        if !dual_ok {
            continue;
        }
        accepted += 1;
        let resid = residual_norm(g, b, &y);
        let norm = dot(&y, &y).sqrt();
        let cand = Candidate {
            y,
            support,
            resid,
            norm,
        };
        let better = match &best {
            None => true,
            Some(cur) => {
                let tie = 1e-12 * (1.0 + cur.resid);
                if cand.resid < cur.resid - tie {
                    true
                } else if cand.resid > cur.resid + tie {
                    false
                } else if (cand.norm - cur.norm).abs() > 1e-12 * (1.0 + cur.norm) {
                    cand.norm < cur.norm
                } else {
                    cand.support < cur.support
                }
            }
        };
        if better {
            best = Some(cand);
        }
    }

    let best = best.ok_or(Error::NoFeasibleSubset)?;
    Ok(OracleReport {
        solution: NnlsSolution::new(g, b, best.y),
        support: best.support,
        accepted,
    })
}
