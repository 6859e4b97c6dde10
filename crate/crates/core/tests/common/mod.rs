//! Random instance generators and independent oracles shared by the
//! integration tests.
#![allow(dead_code)]

use ellimpc::linalg::{spectral_radius_estimate, Matrix};
use ellimpc::problem::Layout;
use ellimpc::{Ellipsoid, MpcProblem, StageBounds};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(rng: &mut impl Rng, rows: usize, cols: usize, amp: f64) -> Matrix {
    let data: Vec<f64> = (0..rows * cols).map(|_| rng.gen_range(-amp..amp)).collect();
    Matrix::from_row_slice(rows, cols, &data)
}

pub fn random_vec(rng: &mut impl Rng, n: usize, amp: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-amp..amp)).collect()
}

/// `MᵀM + shift·I`.
pub fn random_spd(rng: &mut impl Rng, n: usize, shift: f64) -> Matrix {
    let m = random_matrix(rng, n, n, 1.0);
    (&m.tr_matmul(&m) + &Matrix::identity(n).scale(shift)).symmetrize()
}

pub fn random_diag(rng: &mut impl Rng, n: usize, lo: f64, hi: f64) -> Matrix {
    let d: Vec<f64> = (0..n).map(|_| rng.gen_range(lo..hi)).collect();
    Matrix::from_diag(&d)
}

/// Random `A` rescaled to spectral radius `radius`.
pub fn random_stable(rng: &mut impl Rng, n: usize, radius: f64) -> Matrix {
    let a = random_matrix(rng, n, n, 1.0);
    let rho = spectral_radius_estimate(&a).max(1e-3);
    a.scale(radius / rho)
}

/// Steady state `x = Ax + Bu` by fixed-point iteration (A is stable).
pub fn steady_state(a: &Matrix, b: &Matrix, u: &[f64]) -> Vec<f64> {
    let bu = b.mul_vec(u);
    let mut x = vec![0.0; a.rows()];
    for _ in 0..5000 {
        let mut next = a.mul_vec(&x);
        next.iter_mut().zip(&bu).for_each(|(v, w)| *v += w);
        let done = next.iter().zip(&x).all(|(p, q)| (p - q).abs() < 1e-15 * (1.0 + q.abs()));
        x = next;
        if done {
            break;
        }
    }
    x
}

/// A valid problem with some bounds and the ellipsoid likely to be active.
pub fn random_problem(rng: &mut impl Rng, n: usize, m: usize, horizon: usize, diagonal: bool) -> MpcProblem {
    let radius = rng.gen_range(0.5..1.05);
    let a = random_stable(rng, n, radius);
    let b = random_matrix(rng, n, m, 1.0);
    let (q, r, t) = if diagonal {
        (random_diag(rng, n, 0.5, 5.0), random_diag(rng, m, 0.1, 2.0), random_diag(rng, n, 0.5, 5.0))
    } else {
        (random_spd(rng, n, 0.5), random_spd(rng, m, 0.1), random_spd(rng, n, 0.5))
    };
    let u_ref = random_vec(rng, m, 0.2);
    let x_ref = if spectral_radius_estimate(&a) < 0.95 {
        steady_state(&a, &b, &u_ref)
    } else {
        // no cheap steady state; fall back to the origin
        vec![0.0; n]
    };
    let u_ref = if x_ref.iter().all(|v| *v == 0.0) { vec![0.0; m] } else { u_ref };
    let x_lo: Vec<f64> = (0..n).map(|_| -rng.gen_range(0.5..3.0)).collect();
    let x_hi: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..3.0)).collect();
    let u_lo: Vec<f64> = (0..m).map(|_| -rng.gen_range(0.3..2.0)).collect();
    let u_hi: Vec<f64> = (0..m).map(|_| rng.gen_range(0.3..2.0)).collect();
    let p = random_spd(rng, n, 0.3);
    let c = x_ref.clone();
    let radius = rng.gen_range(0.3..2.0);
    MpcProblem {
        a,
        b,
        q,
        r,
        t,
        horizon,
        bounds: StageBounds::uniform(&x_lo, &x_hi, &u_lo, &u_hi, horizon),
        terminal: Ellipsoid::new(p, c, radius),
        x_ref,
        u_ref,
    }
}

/// Weighted projection oracle via the scalar dual: maximise
/// `Ψ(y) = y/(1+2y)·ãᵀPã − r²y` over `y ≥ 0` by bisection on `Ψ'`, then
/// `v = ã/(1+2y*) + c` with `ã = a − c`.
pub fn projection_dual_oracle(a: &[f64], ell: &Ellipsoid) -> Vec<f64> {
    let at: Vec<f64> = a.iter().zip(&ell.c).map(|(x, c)| x - c).collect();
    let s = ell.p.quad_form(&at);
    let r2 = ell.r * ell.r;
    let dpsi = |y: f64| s / ((1.0 + 2.0 * y) * (1.0 + 2.0 * y)) - r2;
    let y = if dpsi(0.0) <= 0.0 {
        0.0
    } else {
        let (mut lo, mut hi) = (0.0, 1.0);
        while dpsi(hi) > 0.0 {
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if dpsi(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };
    at.iter().zip(&ell.c).map(|(x, c)| x / (1.0 + 2.0 * y) + c).collect()
}

pub fn p_norm(p: &Matrix, x: &[f64], y: &[f64]) -> f64 {
    let d: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
    p.quad_form(&d).max(0.0).sqrt()
}

/// Random block-tridiagonal SPD matrix: `LᵀL` for a random upper block
/// bidiagonal `L` plus a diagonal shift, returned as dense matrix and blocks.
pub fn random_block_tridiag(rng: &mut impl Rng, n: usize, blocks: usize) -> (Matrix, Vec<Matrix>, Vec<Matrix>) {
    let dim = n * blocks;
    let mut l = Matrix::zeros(dim, dim);
    for k in 0..blocks {
        for i in 0..n {
            for j in 0..n {
                l[(k * n + i, k * n + j)] = rng.gen_range(-1.0..1.0);
                if k + 1 < blocks {
                    l[(k * n + i, (k + 1) * n + j)] = rng.gen_range(-1.0..1.0);
                }
            }
        }
    }
    let mut s = l.tr_matmul(&l);
    for i in 0..dim {
        s[(i, i)] += 0.5;
    }
    let s = s.symmetrize();
    let block = |r: usize, c: usize| {
        let mut out = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                out[(i, j)] = s[(r * n + i, c * n + j)];
            }
        }
        out
    };
    let diag = (0..blocks).map(|k| block(k, k)).collect();
    let off = (0..blocks - 1).map(|k| block(k, k + 1)).collect();
    (s, diag, off)
}

/// Plain dense lower Cholesky `S = LLᵀ`, written independently of the crate.
pub fn dense_cholesky_lower(s: &Matrix) -> Matrix {
    let n = s.rows();
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut d = s[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        assert!(d > 0.0, "matrix not positive definite");
        l[(j, j)] = d.sqrt();
        for i in j + 1..n {
            let mut v = s[(i, j)];
            for k in 0..j {
                v -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = v / l[(j, j)];
        }
    }
    l
}

/// Gaussian elimination with partial pivoting.
#[allow(clippy::needless_range_loop)]
pub fn dense_solve(a: &Matrix, b: &[f64]) -> Vec<f64> {
    let n = a.rows();
    let mut m: Vec<Vec<f64>> = (0..n).map(|i| {
        let mut row = a.row(i).to_vec();
        row.push(b[i]);
        row
    }).collect();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs())).unwrap();
        m.swap(col, piv);
        for row in col + 1..n {
            let f = m[row][col] / m[col][col];
            for k in col..=n {
                m[row][k] -= f * m[col][k];
            }
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut v = m[i][n];
        for k in i + 1..n {
            v -= m[i][k] * x[k];
        }
        x[i] = v / m[i][i];
    }
    x
}

/// Splits `z` into `(u_i)` and `(x_i)` sequences, `x_0 = x_t`.
pub fn unpack(layout: Layout, z: &[f64], x_t: &[f64]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let us = (0..layout.horizon).map(|i| z[layout.u(i)].to_vec()).collect();
    let mut xs = vec![x_t.to_vec()];
    xs.extend((1..=layout.horizon).map(|i| z[layout.x(i)].to_vec()));
    (us, xs)
}
