//! Flop model of one sweep. This is an operation count, not a measurement.

/// Modelled flops of the V-side half: `2mnr` for `AᵀU`, `2nr²` for the
/// residual columns and `(r/3)(7nr + 50n + 6m)` for the block formulas and
/// repair checks.
pub fn v_sweep_flops(m: usize, n: usize, r: usize) -> f64 {
    let (m, n, r) = (m as f64, n as f64, r as f64);
    2.0 * m * n * r + 2.0 * n * r * r + r / 3.0 * (7.0 * n * r + 50.0 * n + 6.0 * m)
}

/// Modelled flops of a full sweep: the V-side half plus the mirrored
/// U-side half with `m` and `n` exchanged. The leading term is `4mnr`.
pub fn flops_per_sweep(m: usize, n: usize, r: usize) -> f64 {
    v_sweep_flops(m, n, r) + v_sweep_flops(n, m, r)
}
