use super::cholesky::solve_spd;
use super::eigen::spectral_radius_estimate;
use super::Matrix;
use crate::error::{Error, Result};

/// Stability margin required by [`solve_discrete_lyapunov`].
pub const STABILITY_MARGIN: f64 = 1e-6;

const LYAPUNOV_MAX_DOUBLINGS: usize = 64;

/// Solves `A_Kᵀ T A_K − T + M = 0` for Schur-stable `A_K`.
///
/// Uses the doubling form of `T = Σ (A_Kᵀ)^i M A_K^i`: each pass adds the
/// next `2^j` terms at once (`T ← T + A_jᵀ T A_j`, `A_{j+1} = A_j²`).
pub fn solve_discrete_lyapunov(ak: &Matrix, m: &Matrix) -> Result<Matrix> {
    if !ak.is_square() || !m.is_square() || ak.rows() != m.rows() {
        return Err(Error::Dimension("Lyapunov operands must be square and equal size".into()));
    }
    let radius = spectral_radius_estimate(ak);
    if !(radius < 1.0 - STABILITY_MARGIN) {
        return Err(Error::NotStable { radius });
    }
    let mut t = m.symmetrize();
    let mut a = ak.clone();
    for _ in 0..LYAPUNOV_MAX_DOUBLINGS {
        let increment = a.tr_matmul(&(&t * &a));
        t = &t + &increment;
        if increment.norm_inf() <= 1e-14 * t.norm_inf().max(f64::MIN_POSITIVE) {
            return Ok(t.symmetrize());
        }
        a = &a * &a;
    }
    Err(Error::NoConvergence {
        iterations: LYAPUNOV_MAX_DOUBLINGS,
    })
}

#[derive(Debug, Clone, Copy)]
pub struct RiccatiOptions {
    pub max_iter: usize,
    /// Relative stopping threshold on `‖P_{k+1} − P_k‖_∞`.
    pub tol: f64,
}

impl Default for RiccatiOptions {
    fn default() -> Self {
        Self {
            max_iter: 10_000,
            tol: 1e-12,
        }
    }
}

/// Infinite-horizon discrete LQR gain `K` for the law `u = K x`
/// (note the sign: `A + BK` is the closed loop).
pub fn riccati_lqr(a: &Matrix, b: &Matrix, q: &Matrix, r: &Matrix) -> Result<Matrix> {
    riccati_lqr_with(a, b, q, r, RiccatiOptions::default())
}

pub fn riccati_lqr_with(
    a: &Matrix,
    b: &Matrix,
    q: &Matrix,
    r: &Matrix,
    opts: RiccatiOptions,
) -> Result<Matrix> {
    let n = a.rows();
    let m = b.cols();
    if !a.is_square() || b.rows() != n || q.rows() != n || !q.is_square() || r.rows() != m || !r.is_square() {
        return Err(Error::Dimension("inconsistent LQR operands".into()));
    }
    let mut p = q.symmetrize();
    for _ in 0..opts.max_iter {
        let gain = lqr_gain(a, b, r, &p)?;
        // P⁺ = Q + Aᵀ P (A + B K)
        let ak = a + &(b * &gain);
        let next = (q + &a.tr_matmul(&(&p * &ak))).symmetrize();
        let delta = (&next - &p).norm_inf();
        p = next;
        if delta < opts.tol * p.norm_inf().max(1.0) {
            return lqr_gain(a, b, r, &p);
        }
    }
    Err(Error::NoConvergence {
        iterations: opts.max_iter,
    })
}

/// `K = −(R + BᵀPB)⁻¹ BᵀPA`
fn lqr_gain(a: &Matrix, b: &Matrix, r: &Matrix, p: &Matrix) -> Result<Matrix> {
    let pb = p * b;
    let s = (r + &b.tr_matmul(&pb)).symmetrize();
    let rhs = pb.tr_matmul(a);
    let mut k = Matrix::zeros(b.cols(), a.cols());
    let mut col = vec![0.0; b.cols()];
    for j in 0..a.cols() {
        for i in 0..b.cols() {
            col[i] = rhs[(i, j)];
        }
        let x = solve_spd(&s, &col)?;
        for i in 0..b.cols() {
            k[(i, j)] = -x[i];
        }
    }
    Ok(k)
}
