//! Alternating block coordinate descent for `min ‖A − UVᵀ‖²_F` over
//! `U, V ≥ 0`.
//!
//! The columns of each factor are split into blocks of `k ∈ {1, 2, 3}`
//! consecutive columns. One sweep updates every block of `V` with `U` fixed
//! and then every block of `U` with `V` fixed; the second half is the first
//! one run on `Aᵀ` with the factors swapped. When `k` does not divide `r`
//! a last block covering the final `k` columns overlaps the previous one.

mod cost;
mod repair;
mod update;
mod workspace;

use std::time::Instant;

pub use cost::{flops_per_sweep, v_sweep_flops};
pub use repair::{repair_block, CollinearRepair, DependentTripleRepair, RepairPlan};
pub use update::update_block;
pub use workspace::{BlockGram, Workspace};

use crate::error::{Error, Result};
use crate::matrix::{at_times, gram, objective_from_products, DenseMatrix, Matrix, MatrixRef};
use crate::nnls::RANK_EPS;
use crate::random::Stream;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// `V` is updated, `U` is the coefficient.
    V,
    /// `U` is updated, `V` is the coefficient.
    U,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub rank: usize,
    /// Block width, 1 to 3.
    pub k: usize,
    pub max_sweeps: usize,
    /// Wall-clock budget in seconds, checked after each sweep.
    pub time_limit: Option<f64>,
    /// Stop once the relative residual changes by less than this over a sweep.
    pub tol_residual_change: Option<f64>,
    pub seed: u64,
    pub rank_eps: f64,
}

impl SolverConfig {
    pub fn new(rank: usize, k: usize) -> Self {
        Self {
            rank,
            k,
            max_sweeps: 100,
            time_limit: None,
            tol_residual_change: None,
            seed: 0,
            rank_eps: RANK_EPS,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.rank == 0 {
            return fail("rank must be at least 1".into());
        }
        if !(1..=3).contains(&self.k) {
            return fail(format!("block width k = {} is not in 1..=3", self.k));
        }
        if self.max_sweeps == 0 {
            return fail("max_sweeps must be at least 1".into());
        }
        if !(self.rank_eps > 0.0 && self.rank_eps.is_finite()) {
            return fail(format!("rank_eps = {} must be positive", self.rank_eps));
        }
        if let Some(t) = self.time_limit {
            if t.is_nan() || t <= 0.0 {
                return fail(format!("time limit {t} must be positive"));
            }
        }
        if let Some(t) = self.tol_residual_change {
            if !(t >= 0.0 && t.is_finite()) {
                return fail(format!("tolerance {t} must be nonnegative"));
            }
        }
        Ok(())
    }
}

/// `A ≈ UVᵀ` with `U` (m×r) and `V` (n×r), both nonnegative.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorPair {
    pub u: DenseMatrix,
    pub v: DenseMatrix,
}

impl FactorPair {
    pub fn rank(&self) -> usize {
        self.u.cols()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub sweep: usize,
    pub elapsed_s: f64,
    pub rel_residual: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolveTrace {
    pub records: Vec<TraceRecord>,
    /// Repair steps taken over the whole run.
    pub repairs: usize,
}

impl SolveTrace {
    pub fn final_residual(&self) -> Option<f64> {
        self.records.last().map(|r| r.rel_residual)
    }
}

/// Random starting point: `V` then `U` drawn uniform on `[0, 1)` in
/// column-major order from one stream seeded with `seed`, after which each
/// column of `U` is scaled to unit 2-norm.
pub fn initialize(a: MatrixRef<'_>, r: usize, seed: u64) -> Result<FactorPair> {
    let (m, n) = (a.rows(), a.cols());
    if r == 0 || r > m.min(n) {
        return Err(Error::Config(format!(
            "rank {r} must be between 1 and min(m, n) = {}",
            m.min(n)
        )));
    }
    let mut rng = Stream::new(seed);
    let v = DenseMatrix::new(n, r, (0..n * r).map(|_| rng.uniform()).collect())?;
    let mut u = DenseMatrix::new(m, r, (0..m * r).map(|_| rng.uniform()).collect())?;
    for j in 0..r {
        let col = u.col_mut(j);
        let norm = crate::matrix::dot(col, col).sqrt();
        if norm > 0.0 {
            col.iter_mut().for_each(|x| *x /= norm);
        } else {
            // All draws were exactly zero; any unit vector will do.
            col[j] = 1.0;
        }
    }
    Ok(FactorPair { u, v })
}

/// Column blocks of width `min(k, r)` in ascending order, plus one
/// overlapping block on the last columns when the width does not divide `r`.
pub fn block_columns(r: usize, k: usize) -> Vec<Vec<usize>> {
    let w = k.min(r);
    if w == 0 {
        return Vec::new();
    }
    let mut blocks: Vec<Vec<usize>> = (0..r / w).map(|i| (i * w..(i + 1) * w).collect()).collect();
    if !r.is_multiple_of(w) {
        blocks.push((r - w..r).collect());
    }
    blocks
}

#[derive(Debug, Clone, Copy)]
pub enum BlockStage<'a> {
    Repaired(&'a RepairPlan),
    Updated,
}

/// Passed to an observer after each block is repaired (when a repair fired)
/// and after each block is updated.
#[derive(Debug, Clone, Copy)]
pub struct BlockEvent<'a> {
    pub side: Side,
    pub cols: &'a [usize],
    pub stage: BlockStage<'a>,
    pub coef: &'a DenseMatrix,
    pub target: &'a DenseMatrix,
    pub workspace: &'a Workspace,
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    pub repairs: usize,
    /// Caches left after the last block, consistent with the coefficient.
    pub workspace: Workspace,
}

/// Updates every block of `target` with `coef` fixed. `a_side` is `A` on the
/// V-side and `Aᵀ` on the U-side, so that `H = a_sideᵀ·coef`.
pub fn sweep_side(
    a_side: MatrixRef<'_>,
    coef: &mut DenseMatrix,
    target: &mut DenseMatrix,
    blocks: &[Vec<usize>],
    rank_eps: f64,
    side: Side,
    observer: &mut dyn FnMut(&BlockEvent<'_>),
) -> Result<SweepReport> {
    let mut ws = Workspace::new(a_side, coef)?;
    let mut repairs = 0;
    for cols in blocks {
        let plan = repair_block(a_side, coef, target, &mut ws, cols, rank_eps)?;
        if !plan.is_noop() {
            repairs += plan.steps();
            observer(&BlockEvent {
                side,
                cols,
                stage: BlockStage::Repaired(&plan),
                coef,
                target,
                workspace: &ws,
            });
        }
        update_block(&mut ws, target, cols, rank_eps)?;
        observer(&BlockEvent {
            side,
            cols,
            stage: BlockStage::Updated,
            coef,
            target,
            workspace: &ws,
        });
    }
    Ok(SweepReport {
        repairs,
        workspace: ws,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepOutcome {
    pub rel_residual: f64,
    pub repairs: usize,
}

/// Solver bound to one input matrix. `Aᵀ` and `‖A‖²` are computed once.
#[derive(Debug)]
pub struct Nmf<'a> {
    a: MatrixRef<'a>,
    a_t: Matrix,
    norm_a_sq: f64,
    config: SolverConfig,
    blocks: Vec<Vec<usize>>,
}

impl<'a> Nmf<'a> {
    pub fn new(a: impl Into<MatrixRef<'a>>, config: SolverConfig) -> Result<Self> {
        let a = a.into();
        config.validate()?;
        let (m, n) = (a.rows(), a.cols());
        if config.rank > m.min(n) {
            return Err(Error::Config(format!(
                "rank {} exceeds min(m, n) = {}",
                config.rank,
                m.min(n)
            )));
        }
        let min = a.min_value();
        if min < 0.0 {
            return Err(Error::InvalidMatrix(format!(
                "input has a negative entry ({min})"
            )));
        }
        let norm_a_sq = a.frobenius_norm_sq();
        if norm_a_sq == 0.0 {
            return Err(Error::ZeroMatrix);
        }
        let blocks = block_columns(config.rank, config.k);
        Ok(Self {
            a,
            a_t: a.transpose(),
            norm_a_sq,
            config,
            blocks,
        })
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn initialize(&self) -> Result<FactorPair> {
        initialize(self.a, self.config.rank, self.config.seed)
    }

    fn check_factors(&self, f: &FactorPair) -> Result<()> {
        let r = self.config.rank;
        let ok = f.u.rows() == self.a.rows()
            && f.v.rows() == self.a.cols()
            && f.u.cols() == r
            && f.v.cols() == r;
        if ok {
            Ok(())
        } else {
            Err(Error::dim(
                "sweep",
                format!(
                    "A is {}x{} with rank {r}, U is {}x{}, V is {}x{}",
                    self.a.rows(),
                    self.a.cols(),
                    f.u.rows(),
                    f.u.cols(),
                    f.v.rows(),
                    f.v.cols()
                ),
            ))
        }
    }

    /// One V-side then one U-side pass, returning the relative residual
    /// measured after the U-side.
    pub fn sweep(
        &self,
        f: &mut FactorPair,
        observer: &mut dyn FnMut(&BlockEvent<'_>),
    ) -> Result<SweepOutcome> {
        self.check_factors(f)?;
        let eps = self.config.rank_eps;
        let FactorPair { u, v } = f;
        let first = sweep_side(self.a, u, v, &self.blocks, eps, Side::V, observer)?;
        let second = sweep_side(
            self.a_t.as_ref(),
            v,
            u,
            &self.blocks,
            eps,
            Side::U,
            observer,
        )?;
        // The U-side caches hold H = AV and M = VᵀV for the final V.
        let ws = &second.workspace;
        let obj = objective_from_products(self.norm_a_sq, ws.h(), ws.m(), u);
        Ok(SweepOutcome {
            rel_residual: (obj / self.norm_a_sq).sqrt(),
            repairs: first.repairs + second.repairs,
        })
    }

    pub fn relative_residual(&self, f: &FactorPair) -> Result<f64> {
        self.check_factors(f)?;
        let h = at_times(self.a, &f.u)?;
        let obj = objective_from_products(self.norm_a_sq, &h, &gram(&f.u), &f.v);
        Ok((obj / self.norm_a_sq).sqrt())
    }

    /// Sweeps until `max_sweeps`, the time limit, or a residual change below
    /// the tolerance. Records one trace entry per sweep.
    pub fn run(
        &self,
        f: &mut FactorPair,
        observer: &mut dyn FnMut(&BlockEvent<'_>),
    ) -> Result<SolveTrace> {
        let start = Instant::now();
        let mut trace = SolveTrace::default();
        let mut previous = match self.config.tol_residual_change {
            Some(_) => Some(self.relative_residual(f)?),
            None => None,
        };
        for sweep in 1..=self.config.max_sweeps {
            let outcome = self.sweep(f, observer)?;
            let elapsed_s = start.elapsed().as_secs_f64();
            trace.repairs += outcome.repairs;
            trace.records.push(TraceRecord {
                sweep,
                elapsed_s,
                rel_residual: outcome.rel_residual,
            });
            if self.config.time_limit.is_some_and(|t| elapsed_s >= t) {
                break;
            }
            if let (Some(tol), Some(prev)) = (self.config.tol_residual_change, previous) {
                if (prev - outcome.rel_residual).abs() < tol {
                    break;
                }
            }
            previous = Some(outcome.rel_residual);
        }
        Ok(trace)
    }
}

/// Initializes from `config.seed` and runs the solver.
pub fn fit<'a>(
    a: impl Into<MatrixRef<'a>>,
    config: SolverConfig,
) -> Result<(FactorPair, SolveTrace)> {
    let nmf = Nmf::new(a, config)?;
    let mut f = nmf.initialize()?;
    let trace = nmf.run(&mut f, &mut |_| {})?;
    Ok((f, trace))
}

/// `max(‖min(U, ∇_U)‖∞, ‖min(V, ∇_V)‖∞)` for `f = ½‖A − UVᵀ‖²_F`, which
/// vanishes exactly at stationary points of the constrained problem.
pub fn projected_gradient_norm(a: MatrixRef<'_>, u: &DenseMatrix, v: &DenseMatrix) -> Result<f64> {
    let grad_inf = |x: &DenseMatrix, ax: DenseMatrix, gram_y: DenseMatrix| -> Result<f64> {
        // ∇ = X·(YᵀY) − (A-side product)
        let xg = x.matmul(&gram_y)?;
        Ok(x.data()
            .iter()
            .zip(xg.data().iter().zip(ax.data()))
            .map(|(&xi, (&p, &q))| xi.min(p - q).abs())
            .fold(0.0, f64::max))
    };
    // ∇_V = V·UᵀU − AᵀU and ∇_U = U·VᵀV − AV.
    let gv = grad_inf(v, at_times(a, u)?, gram(u))?;
    let a_t = a.transpose();
    let gu = grad_inf(u, at_times(a_t.as_ref(), v)?, gram(v))?;
    Ok(gu.max(gv))
}

#[cfg(test)]
mod tests;
