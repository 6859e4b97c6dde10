mod common;

use common::*;
use ellimpc::linalg::*;
use ellimpc::Error;
use proptest::prelude::*;

fn matrix_strategy(rows: usize, cols: usize) -> impl Strategy<Value = Matrix> {
    prop::collection::vec(-2.0..2.0f64, rows * cols).prop_map(move |d| Matrix::from_row_slice(rows, cols, &d))
}

fn spd_strategy(max_n: usize) -> impl Strategy<Value = Matrix> {
    (1..=max_n).prop_flat_map(|n| {
        matrix_strategy(n, n).prop_map(move |m| (&m.tr_matmul(&m) + &Matrix::identity(n).scale(0.1)).symmetrize())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn cholesky_reconstructs(s in spd_strategy(8)) {
        let u = cholesky(&s).unwrap();
        let back = u.tr_matmul(&u);
        prop_assert!((&back - &s).max_abs() <= 1e-12 * s.max_abs().max(1.0));
        for i in 0..u.rows() {
            prop_assert!(u[(i, i)] > 0.0);
            for j in 0..i {
                prop_assert_eq!(u[(i, j)], 0.0);
            }
        }
    }

    #[test]
    fn spd_solve_residual(s in spd_strategy(8), seed in any::<u64>()) {
        let b = random_vec(&mut rng(seed), s.rows(), 1.0);
        let x = solve_spd(&s, &b).unwrap();
        let res = dist_inf(&s.mul_vec(&x), &b);
        prop_assert!(res <= 1e-9 * (1.0 + s.norm_inf() * norm_inf(&x)));
    }

    #[test]
    fn eigen_decomposition_reconstructs(s in spd_strategy(7)) {
        let eig = symmetric_eigen(&s).unwrap();
        let back = eig.map(|v| v);
        prop_assert!((&back - &s).max_abs() <= 1e-11 * s.max_abs().max(1.0));
        let vtv = eig.vectors.tr_matmul(&eig.vectors);
        prop_assert!((&vtv - &Matrix::identity(s.rows())).max_abs() <= 1e-12);
    }

    #[test]
    fn square_root_squares_back(s in spd_strategy(6)) {
        let (h, ih) = symmetric_sqrt(&s).unwrap();
        prop_assert!((&(&h * &h) - &s).max_abs() <= 1e-10 * s.max_abs().max(1.0));
        prop_assert!((&(&h * &ih) - &Matrix::identity(s.rows())).max_abs() <= 1e-9);
        prop_assert!(h.is_symmetric(1e-12));
    }

    #[test]
    fn banded_matches_dense(n in 1usize..=5, blocks in 1usize..=10, seed in any::<u64>()) {
        let mut r = rng(seed);
        let (dense, diag, off) = random_block_tridiag(&mut r, n, blocks);
        let f = BlockTridiagCholesky::factor(&diag, &off).unwrap();
        let lower = dense_cholesky_lower(&dense);
        let rel = (&f.to_dense_factor() - &lower.transpose()).max_abs() / lower.max_abs();
        prop_assert!(rel <= 1e-10);
        let b = random_vec(&mut r, n * blocks, 1.0);
        let x = f.solve(&b);
        prop_assert!(dist_inf(&dense.mul_vec(&x), &b) <= 1e-8);
    }

    #[test]
    fn lyapunov_residual(a in matrix_strategy(4, 4), m in spd_strategy(4).prop_filter("size", |m| m.rows() == 4)) {
        let radius = spectral_radius_estimate(&a);
        prop_assume!(radius > 1e-3);
        let ak = a.scale(0.9 / radius);
        let t = solve_discrete_lyapunov(&ak, &m).unwrap();
        let res = &(&ak.tr_matmul(&(&t * &ak)) - &t) + &m;
        prop_assert!(res.max_abs() <= 1e-9 * t.max_abs().max(1.0));
    }
}

#[test]
fn spectral_radius_of_rotation_and_jordan() {
    let (c, s) = (0.6_f64.cos(), 0.6_f64.sin());
    let rot = Matrix::from_row_slice(2, 2, &[0.8 * c, -0.8 * s, 0.8 * s, 0.8 * c]);
    assert!((spectral_radius_estimate(&rot) - 0.8).abs() < 1e-9);
    // non-normal: the estimate converges slowly but stays an upper bound
    let jordan = Matrix::from_row_slice(2, 2, &[0.5, 10.0, 0.0, 0.5]);
    let est = spectral_radius_estimate(&jordan);
    assert!((0.5..0.5 + 1e-6).contains(&est), "{est}");
}

#[test]
fn lyapunov_rejects_unstable() {
    let a = Matrix::from_diag(&[1.2, 0.1]);
    assert!(matches!(
        solve_discrete_lyapunov(&a, &Matrix::identity(2)),
        Err(Error::NotStable { .. })
    ));
}

#[test]
fn lqr_gain_satisfies_riccati_identity() {
    let mut r = rng(7);
    for _ in 0..20 {
        let a = random_matrix(&mut r, 3, 3, 1.0);
        let b = random_matrix(&mut r, 3, 2, 1.0);
        let q = random_spd(&mut r, 3, 0.5);
        let rr = random_spd(&mut r, 2, 0.5);
        let k = riccati_lqr(&a, &b, &q, &rr).unwrap();
        let ak = &a + &(&b * &k);
        assert!(spectral_radius_estimate(&ak) < 1.0);
        // the Lyapunov solution of the optimal loop is the Riccati solution,
        // whose gain must reproduce K
        let p = solve_discrete_lyapunov(&ak, &(&q + &k.tr_matmul(&(&rr * &k)))).unwrap();
        let gram = &rr + &b.tr_matmul(&(&p * &b));
        let rhs = b.tr_matmul(&(&p * &a));
        let mut k_again = Matrix::zeros(2, 3);
        for j in 0..3 {
            let col: Vec<f64> = (0..2).map(|i| rhs[(i, j)]).collect();
            for (i, v) in dense_solve(&gram, &col).into_iter().enumerate() {
                k_again[(i, j)] = -v;
            }
        }
        assert!((&k_again - &k).max_abs() < 1e-8 * (1.0 + k.max_abs()));
    }
}

#[test]
fn zoh_of_double_integrator() {
    let ac = Matrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
    let bc = Matrix::from_row_slice(2, 1, &[0.0, 1.0]);
    let h = 0.3;
    let (a, b) = zoh_discretize(&ac, &bc, h).unwrap();
    let ea = Matrix::from_row_slice(2, 2, &[1.0, h, 0.0, 1.0]);
    let eb = Matrix::from_row_slice(2, 1, &[h * h / 2.0, h]);
    assert!((&a - &ea).max_abs() < 1e-14);
    assert!((&b - &eb).max_abs() < 1e-14);
}

#[test]
fn expm_of_skew_is_rotation() {
    let w = 1.3;
    let e = expm(&Matrix::from_row_slice(2, 2, &[0.0, -w, w, 0.0]));
    let rot = Matrix::from_row_slice(2, 2, &[w.cos(), -w.sin(), w.sin(), w.cos()]);
    assert!((&e - &rot).max_abs() < 1e-13);
}
