use super::Matrix;
use crate::error::{Error, Result};

/// Default lower bound on a Cholesky pivot before the matrix is declared
/// not positive definite.
pub const DEFAULT_PIVOT_FLOOR: f64 = 1e-14;

/// Upper-triangular Cholesky factor `U` with `UᵀU = S`.
pub fn cholesky(s: &Matrix) -> Result<Matrix> {
    cholesky_with_floor(s, DEFAULT_PIVOT_FLOOR)
}

pub fn cholesky_with_floor(s: &Matrix, pivot_floor: f64) -> Result<Matrix> {
    if !s.is_square() {
        return Err(Error::Dimension(format!(
            "cholesky of a {}x{} matrix",
            s.rows(),
            s.cols()
        )));
    }
    let n = s.rows();
    let mut u = Matrix::zeros(n, n);
    for j in 0..n {
        let mut d = s[(j, j)];
        for k in 0..j {
            d -= u[(k, j)] * u[(k, j)];
        }
        if !(d > pivot_floor) {
            return Err(Error::NotPositiveDefinite { index: j, pivot: d });
        }
        let ujj = d.sqrt();
        u[(j, j)] = ujj;
        for i in j + 1..n {
            let mut v = s[(j, i)];
            for k in 0..j {
                v -= u[(k, j)] * u[(k, i)];
            }
            u[(j, i)] = v / ujj;
        }
    }
    Ok(u)
}

/// Solves `U x = b` in place for upper-triangular `U`.
pub fn solve_upper_in_place(u: &Matrix, x: &mut [f64]) {
    let n = u.rows();
    for i in (0..n).rev() {
        let row = u.row(i);
        let mut v = x[i];
        for j in i + 1..n {
            v -= row[j] * x[j];
        }
        x[i] = v / row[i];
    }
}

/// Solves `Uᵀ x = b` in place for upper-triangular `U`.
pub fn solve_upper_tr_in_place(u: &Matrix, x: &mut [f64]) {
    let n = u.rows();
    for i in 0..n {
        let mut v = x[i];
        for k in 0..i {
            v -= u[(k, i)] * x[k];
        }
        x[i] = v / u[(i, i)];
    }
}

/// `U⁻ᵀ · M`, column by column.
pub fn solve_upper_tr_matrix(u: &Matrix, m: &Matrix) -> Matrix {
    let mut out = m.clone();
    let mut col = vec![0.0; m.rows()];
    for j in 0..m.cols() {
        for i in 0..m.rows() {
            col[i] = m[(i, j)];
        }
        solve_upper_tr_in_place(u, &mut col);
        for i in 0..m.rows() {
            out[(i, j)] = col[i];
        }
    }
    out
}

/// Solves `S x = b` for symmetric positive definite `S`.
pub fn solve_spd(s: &Matrix, b: &[f64]) -> Result<Vec<f64>> {
    let u = cholesky(s)?;
    let mut x = b.to_vec();
    solve_upper_tr_in_place(&u, &mut x);
    solve_upper_in_place(&u, &mut x);
    Ok(x)
}

/// Inverse of a symmetric positive definite matrix; the result is symmetrized.
pub fn spd_inverse(s: &Matrix) -> Result<Matrix> {
    let n = s.rows();
    let u = cholesky(s)?;
    let mut inv = Matrix::zeros(n, n);
    let mut col = vec![0.0; n];
    for j in 0..n {
        col.fill(0.0);
        col[j] = 1.0;
        solve_upper_tr_in_place(&u, &mut col);
        solve_upper_in_place(&u, &mut col);
        for i in 0..n {
            inv[(i, j)] = col[i];
        }
    }
    Ok(inv.symmetrize())
}
