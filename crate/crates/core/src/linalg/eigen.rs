use super::Matrix;
use crate::error::{Error, Result};

/// Default lower bound on eigenvalues accepted by [`symmetric_sqrt`].
pub const DEFAULT_EIGEN_FLOOR: f64 = 1e-12;

const JACOBI_MAX_SWEEPS: usize = 100;

/// Eigen-decomposition `S = V·diag(values)·Vᵀ` of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    /// Eigenvectors stored as columns.
    pub vectors: Matrix,
}

impl SymmetricEigen {
    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// `V·diag(f(values))·Vᵀ`
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Matrix {
        let n = self.values.len();
        let mut out = Matrix::zeros(n, n);
        let mapped: Vec<f64> = self.values.iter().map(|&v| f(v)).collect();
        for i in 0..n {
            for j in 0..=i {
                let s: f64 = (0..n)
                    .map(|k| self.vectors[(i, k)] * mapped[k] * self.vectors[(j, k)])
                    .sum();
                out[(i, j)] = s;
                out[(j, i)] = s;
            }
        }
        out
    }
}

/// Cyclic Jacobi eigenvalue iteration for a symmetric matrix.
pub fn symmetric_eigen(s: &Matrix) -> Result<SymmetricEigen> {
    if !s.is_square() {
        return Err(Error::Dimension("eigen-decomposition of a non-square matrix".into()));
    }
    if !s.is_finite() {
        return Err(Error::NonFinite("symmetric eigen-decomposition input"));
    }
    let n = s.rows();
    let mut a = s.symmetrize();
    let mut v = Matrix::identity(n);
    let scale = a.max_abs().max(f64::MIN_POSITIVE);

    for _ in 0..JACOBI_MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)] * a[(i, j)])
            .sum();
        if off.sqrt() <= 1e-17 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq.abs() <= f64::MIN_POSITIVE {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - sn * akq;
                    a[(k, q)] = sn * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - sn * aqk;
                    a[(q, k)] = sn * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - sn * vkq;
                    v[(k, q)] = sn * vkp + c * vkq;
                }
            }
        }
    }
    Ok(SymmetricEigen {
        values: a.diagonal(),
        vectors: v,
    })
}

pub fn min_eigenvalue(s: &Matrix) -> Result<f64> {
    Ok(symmetric_eigen(s)?.min_value())
}

/// Symmetric square root `P^{1/2}` and its inverse `P^{-1/2}`.
pub fn symmetric_sqrt(p: &Matrix) -> Result<(Matrix, Matrix)> {
    symmetric_sqrt_with_floor(p, DEFAULT_EIGEN_FLOOR)
}

pub fn symmetric_sqrt_with_floor(p: &Matrix, eigen_floor: f64) -> Result<(Matrix, Matrix)> {
    let eig = symmetric_eigen(p)?;
    if let Some((index, &pivot)) = eig
        .values
        .iter()
        .enumerate()
        .find(|(_, &v)| !(v > eigen_floor))
    {
        return Err(Error::NotPositiveDefinite { index, pivot });
    }
    Ok((eig.map(f64::sqrt), eig.map(|v| 1.0 / v.sqrt())))
}

/// Upper estimate of the spectral radius from Gelfand's formula
/// `ρ(A) = lim ‖A^k‖^{1/k}`, evaluated at `k = 2^40` by repeated squaring
/// with renormalisation.
pub fn spectral_radius_estimate(a: &Matrix) -> f64 {
    const SQUARINGS: i32 = 40;
    let mut m = a.clone();
    let mut log_norm = 0.0;
    let mut power = 1.0;
    for _ in 0..SQUARINGS {
        let s = m.norm_inf();
        if s == 0.0 {
            return 0.0;
        }
        m = m.scale(1.0 / s);
        log_norm += s.ln() / power;
        m = &m * &m;
        power *= 2.0;
    }
    let s = m.norm_inf();
    if s == 0.0 {
        return 0.0;
    }
    (log_norm + s.ln() / power).exp()
}
