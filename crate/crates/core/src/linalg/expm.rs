use super::Matrix;
use crate::error::{Error, Result};

const TAYLOR_TERMS: usize = 20;

/// Matrix exponential by scaling and squaring with a truncated Taylor
/// series on the scaled matrix (‖A/2^s‖_∞ ≤ 1/2).
pub fn expm(a: &Matrix) -> Matrix {
    assert!(a.is_square(), "expm of a non-square matrix");
    let n = a.rows();
    let norm = a.norm_inf();
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as i32
    } else {
        0
    };
    let scaled = a.scale(0.5f64.powi(squarings));

    let mut sum = Matrix::identity(n);
    let mut term = Matrix::identity(n);
    for k in 1..=TAYLOR_TERMS {
        term = (&term * &scaled).scale(1.0 / k as f64);
        sum = &sum + &term;
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}

/// Zero-order-hold discretisation of `ẋ = A_c x + B_c u` with period `ts`.
///
/// Both matrices come from one exponential of the augmented generator
/// `[[A_c, B_c], [0, 0]]·ts`.
pub fn zoh_discretize(ac: &Matrix, bc: &Matrix, ts: f64) -> Result<(Matrix, Matrix)> {
    if !(ts > 0.0) || !ts.is_finite() {
        return Err(Error::InvalidArgument(format!("sampling time must be positive, got {ts}")));
    }
    if !ac.is_square() || bc.rows() != ac.rows() {
        return Err(Error::Dimension(format!(
            "A_c is {}x{}, B_c is {}x{}",
            ac.rows(),
            ac.cols(),
            bc.rows(),
            bc.cols()
        )));
    }
    if !ac.is_finite() || !bc.is_finite() {
        return Err(Error::NonFinite("continuous-time model"));
    }
    let n = ac.rows();
    let m = bc.cols();
    let mut aug = Matrix::zeros(n + m, n + m);
    for i in 0..n {
        for j in 0..n {
            aug[(i, j)] = ac[(i, j)] * ts;
        }
        for j in 0..m {
            aug[(i, n + j)] = bc[(i, j)] * ts;
        }
    }
    let e = expm(&aug);
    let mut a = Matrix::zeros(n, n);
    let mut b = Matrix::zeros(n, m);
    for i in 0..n {
        for j in 0..n {
            a[(i, j)] = e[(i, j)];
        }
        for j in 0..m {
            b[(i, j)] = e[(i, n + j)];
        }
    }
    Ok((a, b))
}
