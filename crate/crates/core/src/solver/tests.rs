use super::*;
use crate::matrix::CsrMatrix;
use crate::nnls::nnls_rank3;
use proptest::prelude::*;

fn random_matrix(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
    let mut rng = Stream::new(seed);
    DenseMatrix::from_fn(rows, cols, |_, _| rng.uniform())
}

/// `‖A − UVᵀ‖²_F` by forming the product.
fn direct_objective(a: &DenseMatrix, u: &DenseMatrix, v: &DenseMatrix) -> f64 {
    let p = u.matmul_t(v).unwrap();
    a.data()
        .iter()
        .zip(p.data())
        .map(|(x, y)| (x - y) * (x - y))
        .sum()
}

fn block_product(u: &DenseMatrix, v: &DenseMatrix, cols: &[usize]) -> DenseMatrix {
    u.select_columns(cols)
        .matmul_t(&v.select_columns(cols))
        .unwrap()
}

fn rel_diff(x: &DenseMatrix, y: &DenseMatrix) -> f64 {
    let d: f64 = x
        .data()
        .iter()
        .zip(y.data())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    d.sqrt() / (1.0 + x.frobenius_norm_sq().sqrt())
}

fn assert_caches_consistent(a_side: MatrixRef<'_>, coef: &DenseMatrix, ws: &Workspace) {
    let h = at_times(a_side, coef).unwrap();
    let m = gram(coef);
    let dh = rel_diff(&h, ws.h());
    let dm = rel_diff(&m, ws.m());
    assert!(
        dh <= 1e-11 && dm <= 1e-11,
        "H off by {dh:e}, M off by {dm:e}"
    );
}

struct RepairCase {
    a: DenseMatrix,
    coef: DenseMatrix,
    target: DenseMatrix,
}

impl RepairCase {
    /// `m×n` data with rank-6 factors; the caller overwrites block columns.
    fn new(seed: u64) -> Self {
        Self {
            a: random_matrix(10, 8, seed),
            coef: random_matrix(10, 6, seed + 1),
            target: random_matrix(8, 6, seed + 2),
        }
    }

    fn set_col(&mut self, j: usize, values: Vec<f64>) {
        self.coef.col_mut(j).copy_from_slice(&values);
    }

    fn combo(&self, terms: &[(f64, usize)]) -> Vec<f64> {
        let mut out = vec![0.0; self.coef.rows()];
        for &(s, j) in terms {
            crate::matrix::axpy(s, self.coef.col(j), &mut out);
        }
        out
    }

    /// Runs the repair on `cols` and checks product preservation, the rank
    /// guarantee and cache consistency.
    fn repair(&mut self, cols: &[usize]) -> RepairPlan {
        let before = block_product(&self.coef, &self.target, cols);
        let a_side = MatrixRef::from(&self.a);
        let mut ws = Workspace::new(a_side, &self.coef).unwrap();
        let plan = repair_block(
            a_side,
            &mut self.coef,
            &mut self.target,
            &mut ws,
            cols,
            RANK_EPS,
        )
        .unwrap();
        let after = block_product(&self.coef, &self.target, cols);
        let drift = rel_diff(&before, &after);
        assert!(drift <= 1e-12, "product moved by {drift:e} ({plan:?})");
        assert!(self.coef.min_value() >= 0.0 && self.target.min_value() >= 0.0);
        assert_caches_consistent(a_side, &self.coef, &ws);

        let sub = gram(&self.coef.select_columns(cols));
        let k = cols.len();
        let norms: f64 = (0..k).map(|j| sub[(j, j)]).product();
        assert!((0..k).all(|j| sub[(j, j)] > 0.0));
        let det = match k {
            1 => sub[(0, 0)],
            2 => sub[(0, 0)] * sub[(1, 1)] - sub[(0, 1)] * sub[(1, 0)],
            _ => crate::nnls::det3([
                [sub[(0, 0)], sub[(0, 1)], sub[(0, 2)]],
                [sub[(1, 0)], sub[(1, 1)], sub[(1, 2)]],
                [sub[(2, 0)], sub[(2, 1)], sub[(2, 2)]],
            ]),
        };
        assert!(det > RANK_EPS * norms, "det {det:e} after {plan:?}");
        // Updates must now go through.
        update_block(&mut ws, &mut self.target, cols, RANK_EPS).unwrap();
        plan
    }
}

#[test]
fn initialize_is_deterministic_normalized_and_nonnegative() {
    let a = random_matrix(12, 9, 1);
    let f1 = initialize((&a).into(), 4, 77).unwrap();
    let f2 = initialize((&a).into(), 4, 77).unwrap();
    assert_eq!(f1, f2);
    for j in 0..4 {
        let norm = crate::matrix::dot(f1.u.col(j), f1.u.col(j)).sqrt();
        assert!((norm - 1.0).abs() <= 1e-12);
    }
    assert!(f1.u.min_value() >= 0.0 && f1.v.min_value() >= 0.0);
    assert_eq!((f1.u.rows(), f1.v.rows()), (12, 9));
    assert!(initialize((&a).into(), 10, 0).is_err());
    assert!(initialize((&a).into(), 0, 0).is_err());
}

#[test]
fn block_partition_with_overlapping_remainder() {
    assert_eq!(block_columns(3, 3), vec![vec![0, 1, 2]]);
    assert_eq!(
        block_columns(7, 3),
        vec![vec![0, 1, 2], vec![3, 4, 5], vec![4, 5, 6]]
    );
    assert_eq!(
        block_columns(5, 2),
        vec![vec![0, 1], vec![2, 3], vec![3, 4]]
    );
    assert_eq!(block_columns(3, 1), vec![vec![0], vec![1], vec![2]]);
    assert_eq!(block_columns(2, 3), vec![vec![0, 1]]);
    assert!(block_columns(0, 3).is_empty());
}

#[test]
fn sweep_over_seven_columns_visits_three_blocks_per_side() {
    let a = random_matrix(15, 12, 3);
    let mut config = SolverConfig::new(7, 3);
    config.seed = 4;
    let nmf = Nmf::new(&a, config).unwrap();
    let mut f = nmf.initialize().unwrap();
    let mut seen = Vec::new();
    nmf.sweep(&mut f, &mut |e| {
        if matches!(e.stage, BlockStage::Updated) {
            seen.push((e.side, e.cols.to_vec()));
        }
    })
    .unwrap();
    let blocks = [vec![0, 1, 2], vec![3, 4, 5], vec![4, 5, 6]];
    let expected: Vec<_> = blocks
        .iter()
        .map(|b| (Side::V, b.clone()))
        .chain(blocks.iter().map(|b| (Side::U, b.clone())))
        .collect();
    assert_eq!(seen, expected);
}

#[test]
fn full_rank_blocks_are_left_alone() {
    let mut c = RepairCase::new(10);
    let coef = c.coef.clone();
    let target = c.target.clone();
    let a_side = MatrixRef::from(&c.a);
    let mut ws = Workspace::new(a_side, &c.coef).unwrap();
    for cols in [&[3][..], &[3, 4], &[3, 4, 5]] {
        let plan =
            repair_block(a_side, &mut c.coef, &mut c.target, &mut ws, cols, RANK_EPS).unwrap();
        assert!(plan.is_noop());
    }
    assert_eq!(c.coef, coef);
    assert_eq!(c.target, target);
}

#[test]
fn zero_first_column_gets_unit_entry_at_its_own_index() {
    for cols in [vec![3], vec![3, 4], vec![3, 4, 5]] {
        let mut c = RepairCase::new(20);
        c.set_col(3, vec![0.0; 10]);
        let before = block_product(&c.coef, &c.target, &cols);
        let plan = {
            let a_side = MatrixRef::from(&c.a);
            let mut ws = Workspace::new(a_side, &c.coef).unwrap();
            repair_block(a_side, &mut c.coef, &mut c.target, &mut ws, &cols, RANK_EPS).unwrap()
        };
        assert_eq!(plan.zeroed_first, Some(3));
        let mut unit = [0.0; 10];
        unit[3] = 1.0;
        assert_eq!(c.coef.col(3), &unit[..]);
        assert!(c.target.col(3).iter().all(|&x| x == 0.0));
        // Exact: only a zero rank-one term was touched.
        assert_eq!(block_product(&c.coef, &c.target, &cols), before);
        c.repair(&cols);
    }
}

#[test]
fn collinear_pair_is_folded() {
    for alpha in [0.5, 2.0] {
        let mut c = RepairCase::new(30);
        let u2 = c.combo(&[(alpha, 3)]);
        c.set_col(4, u2);
        let plan = c.repair(&[3, 4]);
        let pair = plan.collinear_pair.expect("pair repair");
        assert!((pair.alpha - alpha).abs() < 1e-12);
        // u₁(3) ≠ 0, so the unit entry goes to row 4.
        assert_eq!(pair.unit_row, 4);
        assert!(plan.zeroed_first.is_none() && plan.dependent_triple.is_none());
    }
}

#[test]
fn collinear_pair_target_columns_follow_the_fold() {
    let mut c = RepairCase::new(31);
    let u2 = c.combo(&[(2.0, 3)]);
    c.set_col(4, u2);
    let v1: Vec<f64> = c.target.col(3).to_vec();
    let v2: Vec<f64> = c.target.col(4).to_vec();
    let a_side = MatrixRef::from(&c.a);
    let mut ws = Workspace::new(a_side, &c.coef).unwrap();
    repair_block(
        a_side,
        &mut c.coef,
        &mut c.target,
        &mut ws,
        &[3, 4],
        RANK_EPS,
    )
    .unwrap();
    for t in 0..8 {
        assert!((c.target[(t, 3)] - (v1[t] + 2.0 * v2[t])).abs() < 1e-14);
        assert_eq!(c.target[(t, 4)], 0.0);
    }
}

#[test]
fn collinear_pair_uses_first_index_when_its_entry_is_zero() {
    let mut c = RepairCase::new(32);
    let mut u1 = c.coef.col(3).to_vec();
    u1[3] = 0.0;
    c.set_col(3, u1);
    let u2 = c.combo(&[(0.5, 3)]);
    c.set_col(4, u2);
    let plan = c.repair(&[3, 4, 5]);
    assert_eq!(plan.collinear_pair.unwrap().unit_row, 3);
}

#[test]
fn dependent_triple_all_sign_cases() {
    // Case 1: u₃ = 0.5u₁ + 0.25u₂.
    let mut c = RepairCase::new(40);
    let u3 = c.combo(&[(0.5, 3), (0.25, 4)]);
    c.set_col(5, u3);
    let plan = c.repair(&[3, 4, 5]);
    let t = plan.dependent_triple.expect("triple repair");
    assert_eq!(t.perm, [0, 1, 2]);
    assert_eq!(t.cols, [3, 4, 5]);
    assert!((t.alpha - 0.5).abs() < 1e-10 && (t.beta - 0.25).abs() < 1e-10);

    // Case 2: u₂ = 0.5u₁ + 2u₃, so u₃ = −0.25u₁ + 0.5u₂.
    let mut c = RepairCase::new(41);
    let u2 = c.combo(&[(0.5, 3), (2.0, 5)]);
    c.set_col(4, u2);
    let plan = c.repair(&[3, 4, 5]);
    let t = plan.dependent_triple.expect("triple repair");
    assert_eq!(t.perm, [0, 2, 1]);
    assert_eq!(t.cols, [3, 5, 4]);
    assert!((t.alpha - 0.5).abs() < 1e-10 && (t.beta - 2.0).abs() < 1e-10);

    // Case 3: u₁ = 0.5u₂ + 2u₃, so u₃ = 0.5u₁ − 0.25u₂.
    let mut c = RepairCase::new(42);
    let u1 = c.combo(&[(0.5, 4), (2.0, 5)]);
    c.set_col(3, u1);
    let plan = c.repair(&[3, 4, 5]);
    let t = plan.dependent_triple.expect("triple repair");
    assert_eq!(t.perm, [1, 2, 0]);
    assert_eq!(t.cols, [4, 5, 3]);
    assert!((t.alpha - 0.5).abs() < 1e-10 && (t.beta - 2.0).abs() < 1e-10);

    // Zero third column: both coefficients vanish.
    let mut c = RepairCase::new(43);
    c.set_col(5, vec![0.0; 10]);
    let t = c
        .repair(&[3, 4, 5])
        .dependent_triple
        .expect("triple repair");
    assert_eq!((t.perm, t.alpha, t.beta), ([0, 1, 2], 0.0, 0.0));
}

#[test]
fn dependent_triple_unit_entry_placement() {
    // Nonsingular 2×2 minor on rows (3, 4): unit entry at row 5.
    let mut c = RepairCase::new(50);
    let u3 = c.combo(&[(1.0, 3), (1.0, 4)]);
    c.set_col(5, u3);
    assert_eq!(c.repair(&[3, 4, 5]).dependent_triple.unwrap().unit_row, 5);

    // Both kept columns vanish on rows 3 and 4: unit entry at row 3.
    let mut c = RepairCase::new(51);
    for j in [3, 4] {
        let mut col = c.coef.col(j).to_vec();
        col[3] = 0.0;
        col[4] = 0.0;
        c.set_col(j, col);
    }
    let u3 = c.combo(&[(1.0, 3), (2.0, 4)]);
    c.set_col(5, u3);
    assert_eq!(c.repair(&[3, 4, 5]).dependent_triple.unwrap().unit_row, 3);

    // Singular minor with a nonzero row 3: unit entry at row 4.
    let mut c = RepairCase::new(52);
    for j in [3, 4] {
        let mut col = c.coef.col(j).to_vec();
        col[3] = 1.0;
        col[4] = 0.0;
        c.set_col(j, col);
    }
    let u3 = c.combo(&[(0.3, 3), (0.7, 4)]);
    c.set_col(5, u3);
    assert_eq!(c.repair(&[3, 4, 5]).dependent_triple.unwrap().unit_row, 4);
}

#[test]
fn chained_repairs_in_one_block() {
    // u₁ = 0 and u₃ = u₂: steps i and iii both fire.
    let mut c = RepairCase::new(60);
    c.set_col(3, vec![0.0; 10]);
    let u3 = c.combo(&[(1.0, 4)]);
    c.set_col(5, u3);
    let plan = c.repair(&[3, 4, 5]);
    assert_eq!(plan.zeroed_first, Some(3));
    assert!(plan.dependent_triple.is_some());

    // u₂ = 2u₁ and u₃ = 3u₁: steps ii and iii both fire.
    let mut c = RepairCase::new(61);
    let u2 = c.combo(&[(2.0, 3)]);
    let u3 = c.combo(&[(3.0, 3)]);
    c.set_col(4, u2);
    c.set_col(5, u3);
    let plan = c.repair(&[3, 4, 5]);
    assert!(plan.collinear_pair.is_some() && plan.dependent_triple.is_some());

    // All three columns zero.
    let mut c = RepairCase::new(62);
    for j in 3..6 {
        c.set_col(j, vec![0.0; 10]);
    }
    let plan = c.repair(&[3, 4, 5]);
    assert_eq!(plan.steps(), 3);
}

#[test]
fn unrepaired_rank_deficiency_is_an_error() {
    let mut c = RepairCase::new(70);
    let u3 = c.combo(&[(1.0, 3), (1.0, 4)]);
    c.set_col(5, u3);
    let mut ws = Workspace::new((&c.a).into(), &c.coef).unwrap();
    let err = update_block(&mut ws, &mut c.target, &[3, 4, 5], RANK_EPS).unwrap_err();
    assert!(matches!(err, Error::RankDeficient(_)));
    c.set_col(4, c.coef.col(3).to_vec());
    let mut ws = Workspace::new((&c.a).into(), &c.coef).unwrap();
    assert!(update_block(&mut ws, &mut c.target, &[3, 4], RANK_EPS).is_err());
}

/// Reference HALS column update written from the formula, using only
/// products of the raw matrices.
fn hals_reference(a: &DenseMatrix, u: &DenseMatrix, v: &mut DenseMatrix) {
    let (m, n, r) = (a.rows(), a.cols(), u.cols());
    for j in 0..r {
        let norm: f64 = (0..m).map(|i| u[(i, j)] * u[(i, j)]).sum();
        for t in 0..n {
            let atu: f64 = (0..m).map(|i| a[(i, t)] * u[(i, j)]).sum();
            let mut vm = 0.0;
            for l in 0..r {
                let ulj: f64 = (0..m).map(|i| u[(i, l)] * u[(i, j)]).sum();
                vm += v[(t, l)] * ulj;
            }
            v[(t, j)] = ((atu - vm + v[(t, j)] * norm) / norm).max(0.0);
        }
    }
}

#[test]
fn single_column_blocks_are_hals() {
    for seed in 0..20 {
        let a = random_matrix(14, 11, seed);
        let u = random_matrix(14, 5, seed + 100);
        let v0 = random_matrix(11, 5, seed + 200);
        let mut expected = v0.clone();
        hals_reference(&a, &u, &mut expected);

        let mut coef = u.clone();
        let mut v = v0.clone();
        sweep_side(
            (&a).into(),
            &mut coef,
            &mut v,
            &block_columns(5, 1),
            RANK_EPS,
            Side::V,
            &mut |_| {},
        )
        .unwrap();
        let worst = v
            .data()
            .iter()
            .zip(expected.data())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        assert!(worst <= 1e-12, "seed {seed}: {worst:e}");
    }
}

#[test]
fn exact_optimum_is_a_fixed_point() {
    for k in [2, 3] {
        let u = random_matrix(12, 3, 5);
        let v_true = random_matrix(9, 3, 6);
        let a = u.matmul_t(&v_true).unwrap();
        let mut coef = u.clone();
        let mut v = v_true.clone();
        sweep_side(
            (&a).into(),
            &mut coef,
            &mut v,
            &block_columns(3, k),
            RANK_EPS,
            Side::V,
            &mut |_| {},
        )
        .unwrap();
        let worst = v
            .data()
            .iter()
            .zip(v_true.data())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        assert!(worst <= 1e-12, "k = {k}: {worst:e}");
    }
}

#[test]
fn block_update_solves_each_row_against_the_materialized_residual() {
    for seed in 0..10 {
        let a = random_matrix(20, 15, seed);
        let u = random_matrix(20, 6, seed + 1);
        let v = random_matrix(15, 6, seed + 2);
        let cols = [3, 4, 5];
        // R = A − U₁V₁ᵀ over the other block.
        let others = block_product(&u, &v, &[0, 1, 2]);
        let resid = DenseMatrix::from_fn(20, 15, |i, j| a[(i, j)] - others[(i, j)]);
        let ui = u.select_columns(&cols);

        let mut ws = Workspace::new((&a).into(), &u).unwrap();
        let mut updated = v.clone();
        update_block(&mut ws, &mut updated, &cols, RANK_EPS).unwrap();
        for t in 0..15 {
            let sol = nnls_rank3(&ui, resid.col(t)).unwrap();
            for (slot, &c) in cols.iter().enumerate() {
                let d = (updated[(t, c)] - sol.y[slot]).abs();
                assert!(d <= 1e-10, "seed {seed} row {t}: {d:e}");
            }
        }
        // The other block is untouched.
        for c in 0..3 {
            assert_eq!(updated.col(c), v.col(c));
        }
    }
}

#[test]
fn pair_update_solves_each_row_against_the_materialized_residual() {
    let a = random_matrix(20, 15, 9);
    let u = random_matrix(20, 4, 10);
    let v = random_matrix(15, 4, 11);
    let others = block_product(&u, &v, &[0, 1]);
    let resid = DenseMatrix::from_fn(20, 15, |i, j| a[(i, j)] - others[(i, j)]);
    let ui = u.select_columns(&[2, 3]);
    let mut ws = Workspace::new((&a).into(), &u).unwrap();
    let mut updated = v.clone();
    update_block(&mut ws, &mut updated, &[2, 3], RANK_EPS).unwrap();
    for t in 0..15 {
        let sol = crate::nnls::nnls_oracle(&ui, resid.col(t)).unwrap();
        assert!((updated[(t, 2)] - sol.y[0]).abs() <= 1e-10);
        assert!((updated[(t, 3)] - sol.y[1]).abs() <= 1e-10);
    }
}

#[test]
fn objective_never_increases_across_block_updates() {
    for (k, r, seed) in [(1, 4, 0), (2, 5, 1), (3, 7, 2), (3, 3, 3)] {
        let a = random_matrix(30, 20, seed);
        let mut config = SolverConfig::new(r, k);
        config.seed = seed;
        let nmf = Nmf::new(&a, config).unwrap();
        let mut f = nmf.initialize().unwrap();
        let mut last = direct_objective(&a, &f.u, &f.v);
        let mut violations = 0;
        for _ in 0..20 {
            nmf.sweep(&mut f, &mut |e| {
                if !matches!(e.stage, BlockStage::Updated) {
                    return;
                }
                let obj = match e.side {
                    Side::V => direct_objective(&a, e.coef, e.target),
                    Side::U => direct_objective(&a, e.target, e.coef),
                };
                if obj > last + 1e-10 * (1.0 + last) {
                    violations += 1;
                }
                last = obj;
            })
            .unwrap();
        }
        assert_eq!(violations, 0, "k = {k}, r = {r}");
    }
}

#[test]
fn caches_match_recomputation_after_sweeps() {
    let a = random_matrix(25, 18, 8);
    let nmf = Nmf::new(&a, SolverConfig::new(7, 3)).unwrap();
    let mut f = nmf.initialize().unwrap();
    for _ in 0..5 {
        nmf.sweep(&mut f, &mut |_| {}).unwrap();
    }
    let FactorPair { mut u, mut v } = f;
    let blocks = block_columns(7, 3);
    let report = sweep_side(
        (&a).into(),
        &mut u,
        &mut v,
        &blocks,
        RANK_EPS,
        Side::V,
        &mut |_| {},
    )
    .unwrap();
    assert_caches_consistent((&a).into(), &u, &report.workspace);
}

#[test]
fn noiseless_rank3_is_recovered() {
    let mut good = 0;
    for seed in 0..5 {
        let w = random_matrix(30, 3, 1000 + seed);
        let h = random_matrix(20, 3, 2000 + seed);
        let a = w.matmul_t(&h).unwrap();
        let mut config = SolverConfig::new(3, 3);
        config.max_sweeps = 200;
        config.seed = seed;
        let (f, trace) = fit(&a, config).unwrap();
        let rel = trace.final_residual().unwrap();
        let direct = (direct_objective(&a, &f.u, &f.v) / a.frobenius_norm_sq()).sqrt();
        assert!((rel - direct).abs() < 1e-8);
        if rel < 1e-2 {
            good += 1;
        }
    }
    assert!(good >= 4, "{good} of 5 seeds converged");
}

#[test]
fn trace_is_monotone_and_stops_on_budget() {
    let a = random_matrix(40, 30, 12);
    let mut config = SolverConfig::new(6, 3);
    config.max_sweeps = 60;
    let (_, trace) = fit(&a, config.clone()).unwrap();
    assert_eq!(trace.records.len(), 60);
    for (i, w) in trace.records.windows(2).enumerate() {
        assert_eq!(w[0].sweep, i + 1);
        assert!(w[1].rel_residual <= w[0].rel_residual + 1e-10 * (1.0 + w[0].rel_residual));
        assert!(w[1].elapsed_s >= w[0].elapsed_s);
    }

    config.tol_residual_change = Some(1e-3);
    let (_, short) = fit(&a, config.clone()).unwrap();
    assert!(short.records.len() < 60);

    config.tol_residual_change = None;
    config.time_limit = Some(1e-9);
    let (_, one) = fit(&a, config).unwrap();
    assert_eq!(one.records.len(), 1);
}

#[test]
fn stationary_at_convergence() {
    let w = random_matrix(30, 4, 300);
    let h = random_matrix(25, 4, 301);
    let a = w.matmul_t(&h).unwrap();
    let mut config = SolverConfig::new(4, 3);
    config.max_sweeps = 3000;
    config.tol_residual_change = Some(1e-13);
    let (f, _) = fit(&a, config).unwrap();
    let pg = projected_gradient_norm((&a).into(), &f.u, &f.v).unwrap();
    assert!(pg <= 1e-4, "projected gradient {pg:e}");
}

#[test]
fn sparse_and_dense_inputs_agree() {
    let dense = crate::synth::gen_dense(&crate::synth::SynthSpec {
        m: 30,
        n: 25,
        true_rank: 4,
        noise_std: 0.0,
        sparsity: 0.0,
        seed: 5,
    })
    .unwrap();
    let masked = DenseMatrix::from_fn(30, 25, |i, j| {
        if (i + 2 * j) % 3 == 0 {
            dense[(i, j)]
        } else {
            0.0
        }
    });
    let sparse = CsrMatrix::from_dense(&masked).unwrap();
    let mut config = SolverConfig::new(5, 2);
    config.max_sweeps = 30;
    let (fd, td) = fit(&masked, config.clone()).unwrap();
    let (fs, ts) = fit(&sparse, config).unwrap();
    let worst =
        fd.u.data()
            .iter()
            .zip(fs.u.data())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
    assert!(worst < 1e-8, "{worst:e}");
    let dr = (td.final_residual().unwrap() - ts.final_residual().unwrap()).abs();
    assert!(dr < 1e-10);
}

#[test]
fn invalid_problems_are_rejected() {
    let a = random_matrix(6, 5, 1);
    assert!(Nmf::new(&a, SolverConfig::new(6, 3)).is_err());
    assert!(Nmf::new(&a, SolverConfig::new(3, 4)).is_err());
    assert!(Nmf::new(&a, SolverConfig::new(3, 0)).is_err());
    let mut c = SolverConfig::new(3, 3);
    c.max_sweeps = 0;
    assert!(Nmf::new(&a, c).is_err());
    let mut c = SolverConfig::new(3, 3);
    c.rank_eps = 0.0;
    assert!(Nmf::new(&a, c).is_err());
    let mut neg = a.clone();
    neg[(2, 2)] = -1.0;
    assert!(matches!(
        Nmf::new(&neg, SolverConfig::new(3, 3)),
        Err(Error::InvalidMatrix(_))
    ));
    let zero = DenseMatrix::zeros(6, 5);
    assert!(matches!(
        Nmf::new(&zero, SolverConfig::new(3, 3)),
        Err(Error::ZeroMatrix)
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn factors_stay_nonnegative_and_descend(
        m in 4usize..14,
        n in 4usize..14,
        r_frac in 0.0f64..1.0,
        k in 1usize..=3,
        seed in any::<u64>(),
    ) {
        let r = 1 + ((m.min(n) - 1) as f64 * r_frac) as usize;
        let a = random_matrix(m, n, seed);
        let mut config = SolverConfig::new(r, k);
        config.seed = seed ^ 1;
        let nmf = Nmf::new(&a, config).unwrap();
        let mut f = nmf.initialize().unwrap();
        let mut last = direct_objective(&a, &f.u, &f.v);
        let mut ok = true;
        for _ in 0..5 {
            nmf.sweep(&mut f, &mut |e| {
                ok &= e.coef.min_value() >= 0.0 && e.target.min_value() >= 0.0;
                if matches!(e.stage, BlockStage::Updated) {
                    let obj = match e.side {
                        Side::V => direct_objective(&a, e.coef, e.target),
                        Side::U => direct_objective(&a, e.target, e.coef),
                    };
                    ok &= obj <= last + 1e-10 * (1.0 + last);
                    last = obj;
                }
            }).unwrap();
        }
        prop_assert!(ok);
    }

    #[test]
    fn nonnegative_combination_repair_preserves_product(
        alpha in 0.0f64..3.0,
        beta in 0.0f64..3.0,
        which in 0usize..3,
        seed in any::<u64>(),
    ) {
        // Column `which` of the block [3, 4, 5] becomes α·(one other) + β·(the other).
        let mut c = RepairCase::new(seed);
        let others: Vec<usize> = (3..6).filter(|&j| j != 3 + which).collect();
        let col = c.combo(&[(alpha, others[0]), (beta, others[1])]);
        c.set_col(3 + which, col);
        let plan = c.repair(&[3, 4, 5]);
        prop_assert!(!plan.is_noop());
    }
}
