use nalgebra::DMatrix;
use plurisem_core::linmap::{self, DesignFactor, GramPseudoInverse, LinearMap, SolveOptions, Solver};
use plurisem_core::seed;
use proptest::prelude::*;
use rand::Rng;

/// Normal equations solved by Gauss–Jordan elimination with partial pivoting.
fn normal_equations_oracle(x: &DMatrix<f64>, y: &DMatrix<f64>) -> DMatrix<f64> {
    let p = x.ncols();
    let q = y.ncols();
    let mut a = vec![vec![0.0; p + q]; p];
    for i in 0..p {
        for j in 0..p {
            a[i][j] = (0..x.nrows()).map(|r| x[(r, i)] * x[(r, j)]).sum();
        }
        for j in 0..q {
            a[i][p + j] = (0..x.nrows()).map(|r| x[(r, i)] * y[(r, j)]).sum();
        }
    }
    for c in 0..p {
        let piv = (c..p).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
        a.swap(c, piv);
        let d = a[c][c];
        for v in a[c].iter_mut() {
            *v /= d;
        }
        for r in 0..p {
            if r != c {
                let f = a[r][c];
                let pivot_row = a[c].clone();
                for (v, pv) in a[r].iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
            }
        }
    }
    DMatrix::from_fn(p, q, |i, j| a[i][p + j])
}

fn random_matrix(rng: &mut impl Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
}

fn residual_norm(x: &DMatrix<f64>, b: &DMatrix<f64>, y: &DMatrix<f64>) -> f64 {
    (x * b - y).norm()
}

#[test]
fn hundred_random_systems_match_the_normal_equations() {
    let rng = &mut seed::rng(2024);
    let start = std::time::Instant::now();
    for case in 0..100 {
        let p = rng.random_range(1..=12);
        let n = rng.random_range(p + 5..=60);
        let x = random_matrix(rng, n, p);
        let y = random_matrix(rng, n, 3);
        let oracle = normal_equations_oracle(&x, &y);
        let r_oracle = residual_norm(&x, &oracle, &y);
        for solver in [Solver::CrossProduct, Solver::Svd] {
            let opts = SolveOptions {
                solver,
                ..SolveOptions::default()
            };
            let map = linmap::solve_least_squares(&x, &y, opts).unwrap();
            let r = residual_norm(&x, map.matrix(), &y);
            assert!(
                (r - r_oracle).abs() / r_oracle <= 1e-8,
                "case {case} {solver:?}: {r} vs {r_oracle}"
            );
            assert!((map.matrix() - &oracle).amax() < 1e-8);
            assert_eq!(map.provenance().rank, p);
        }
    }
    assert!(start.elapsed().as_secs_f64() < 5.0);
}

#[test]
fn exact_systems_are_recovered() {
    let rng = &mut seed::rng(7);
    let x = random_matrix(rng, 40, 6);
    let b = random_matrix(rng, 6, 4);
    let y = &x * &b;
    let map = linmap::solve_least_squares(&x, &y, SolveOptions::default()).unwrap();
    assert!((map.matrix() - b).amax() < 1e-10);
}

#[test]
fn duplicated_column_gets_the_minimum_norm_split() {
    // y = 2·x0 with x0 repeated: the minimum-norm answer splits the weight.
    let rng = &mut seed::rng(3);
    let base = random_matrix(rng, 30, 1);
    let x = DMatrix::from_fn(30, 2, |r, _| base[(r, 0)]);
    let y = &base * 2.0;
    for solver in [Solver::CrossProduct, Solver::Svd] {
        let opts = SolveOptions {
            solver,
            ..SolveOptions::default()
        };
        let map = linmap::solve_least_squares(&x, &y, opts).unwrap();
        assert_eq!(map.provenance().rank, 1);
        assert!((map.matrix()[(0, 0)] - 1.0).abs() < 1e-9);
        assert!((map.matrix()[(1, 0)] - 1.0).abs() < 1e-9);
    }
}

#[test]
fn ridge_shrinks_the_solution() {
    let rng = &mut seed::rng(5);
    let x = random_matrix(rng, 50, 5);
    let y = random_matrix(rng, 50, 2);
    let plain = linmap::solve_least_squares(&x, &y, SolveOptions::default()).unwrap();
    let ridged = linmap::solve_least_squares(
        &x,
        &y,
        SolveOptions {
            ridge: 10.0,
            ..SolveOptions::default()
        },
    )
    .unwrap();
    assert!(ridged.matrix().norm() < plain.matrix().norm());
    // (XᵀX + λI) B = XᵀY
    let lhs = (x.transpose() * &x + DMatrix::identity(5, 5) * 10.0) * ridged.matrix();
    assert!((lhs - x.transpose() * &y).amax() < 1e-9);
}

#[test]
fn shared_gram_solves_several_targets() {
    let rng = &mut seed::rng(9);
    let x = random_matrix(rng, 80, 7);
    let g = linmap::gram(&x);
    let pinv = GramPseudoInverse::new(&g, 80, SolveOptions::default()).unwrap();
    for _ in 0..3 {
        let y = random_matrix(rng, 80, 2);
        let shared = pinv.solve(&(x.transpose() * &y)).unwrap();
        let direct = linmap::solve_least_squares(&x, &y, SolveOptions::default()).unwrap();
        assert!((shared.matrix() - direct.matrix()).amax() < 1e-10);
    }
}

#[test]
fn wide_designs_match_the_svd_solution() {
    let rng = &mut seed::rng(11);
    for (n, p) in [(12, 40), (25, 26), (7, 300)] {
        let x = random_matrix(rng, n, p);
        let y = random_matrix(rng, n, 3);
        for ridge in [0.0, 0.3] {
            let svd = linmap::solve_least_squares(
                &x,
                &y,
                SolveOptions {
                    solver: Solver::Svd,
                    ridge,
                    ..SolveOptions::default()
                },
            )
            .unwrap();
            let opts = SolveOptions {
                ridge,
                ..SolveOptions::default()
            };
            let dual = linmap::solve_least_squares(&x, &y, opts).unwrap();
            assert!((dual.matrix() - svd.matrix()).amax() < 1e-8, "{n}x{p} ridge {ridge}");
            assert_eq!(dual.provenance().rank, n);
            // Minimum-norm interpolation when unregularised.
            if ridge == 0.0 {
                assert!((&x * dual.matrix() - &y).amax() < 1e-9);
            }
        }
        let f = DesignFactor::new(&x, SolveOptions::default()).unwrap();
        let targets = random_matrix(rng, 4, 2);
        let groups: Vec<usize> = (0..n).map(|i| i % 4).collect();
        let y = DMatrix::from_fn(n, 2, |r, c| targets[(groups[r], c)]);
        let a = f.solve_grouped(&x, &groups, &targets).unwrap();
        let b = f.solve(&x, &y).unwrap();
        assert!((a.matrix() - b.matrix()).amax() < 1e-12);
    }
}

#[test]
fn saved_maps_load_with_f32_precision() {
    let rng = &mut seed::rng(1);
    let m = LinearMap::from_matrix(random_matrix(rng, 5, 3)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("map.bin");
    m.save(&path).unwrap();
    let back = LinearMap::load(&path).unwrap();
    assert_eq!((back.rows(), back.cols()), (5, 3));
    assert!((back.matrix() - m.matrix()).amax() < 1e-6);
    let v = [1.0, 0.0, 0.0, 0.0, 0.0];
    assert!((back.apply(&v).unwrap()[1] - m.matrix()[(0, 1)]).abs() < 1e-6);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn residual_is_orthogonal_to_the_column_space(
        n in 1usize..40,
        p in 1usize..10,
        q in 1usize..4,
        s in any::<u64>(),
    ) {
        let rng = &mut seed::rng(s);
        let x = random_matrix(rng, n, p);
        let y = random_matrix(rng, n, q);
        let map = linmap::solve_least_squares(&x, &y, SolveOptions::default()).unwrap();
        let r = &y - &x * map.matrix();
        let scale = 1.0 + x.norm() * y.norm();
        prop_assert!((x.transpose() * r).amax() / scale < 1e-8);
    }

    #[test]
    fn grouped_rows_equal_materialised_rows(
        n_types in 1usize..8,
        n_rows in 1usize..30,
        s in any::<u64>(),
    ) {
        let rng = &mut seed::rng(s);
        let x = random_matrix(rng, n_rows, 4);
        let targets = random_matrix(rng, n_types, 3);
        let groups: Vec<usize> = (0..n_rows).map(|_| rng.random_range(0..n_types)).collect();
        let y = DMatrix::from_fn(n_rows, 3, |r, c| targets[(groups[r], c)]);
        let grouped = linmap::grouped_cross(&x, &groups, &targets).unwrap();
        prop_assert!((grouped - x.transpose() * y).amax() < 1e-10);
    }
}
