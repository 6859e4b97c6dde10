use super::cholesky::{
    cholesky_with_floor, solve_upper_in_place, solve_upper_tr_in_place, solve_upper_tr_matrix,
    DEFAULT_PIVOT_FLOOR,
};
use super::Matrix;
use crate::error::{Error, Result};

/// Upper block-bidiagonal Cholesky factor `W_c` of a block-tridiagonal
/// symmetric positive definite matrix `W = W_cᵀ W_c`.
///
/// Only the `N` diagonal blocks (`beta`, upper triangular) and the `N-1`
/// superdiagonal blocks (`alpha`) are kept; the sparsity pattern is implied.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockTridiagCholesky {
    block: usize,
    beta: Vec<Matrix>,
    alpha: Vec<Matrix>,
}

impl BlockTridiagCholesky {
    /// Factors `W` from its diagonal blocks `W_ii` and superdiagonal blocks `W_{i,i+1}`.
    pub fn factor(diag: &[Matrix], offdiag: &[Matrix]) -> Result<Self> {
        Self::factor_with_floor(diag, offdiag, DEFAULT_PIVOT_FLOOR)
    }

    pub fn factor_with_floor(diag: &[Matrix], offdiag: &[Matrix], pivot_floor: f64) -> Result<Self> {
        let count = diag.len();
        if count == 0 {
            return Err(Error::Dimension("block-tridiagonal matrix with no blocks".into()));
        }
        if offdiag.len() + 1 != count {
            return Err(Error::Dimension(format!(
                "{} diagonal blocks need {} off-diagonal blocks, got {}",
                count,
                count - 1,
                offdiag.len()
            )));
        }
        let n = diag[0].rows();
        if diag.iter().chain(offdiag).any(|b| b.rows() != n || b.cols() != n) {
            return Err(Error::Dimension("blocks must all be square of equal size".into()));
        }

        let mut beta = Vec::with_capacity(count);
        let mut alpha = Vec::with_capacity(count - 1);
        let mut schur = diag[0].clone();
        for i in 0..count {
            let b = cholesky_with_floor(&schur, pivot_floor).map_err(|e| match e {
                Error::NotPositiveDefinite { index, pivot } => Error::NotPositiveDefinite {
                    index: i * n + index,
                    pivot,
                },
                other => other,
            })?;
            if i + 1 < count {
                let a = solve_upper_tr_matrix(&b, &offdiag[i]);
                schur = &diag[i + 1] - &a.tr_matmul(&a);
                alpha.push(a);
            }
            beta.push(b);
        }
        Ok(Self { block: n, beta, alpha })
    }

    pub fn block_size(&self) -> usize {
        self.block
    }

    pub fn block_count(&self) -> usize {
        self.beta.len()
    }

    pub fn beta(&self) -> &[Matrix] {
        &self.beta
    }

    pub fn alpha(&self) -> &[Matrix] {
        &self.alpha
    }

    pub(crate) fn from_parts(block: usize, beta: Vec<Matrix>, alpha: Vec<Matrix>) -> Self {
        Self { block, beta, alpha }
    }

    pub fn stored_floats(&self) -> usize {
        (self.beta.len() + self.alpha.len()) * self.block * self.block
    }

    /// Solves `W μ = rhs`, returning `μ`.
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let mut x = rhs.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    /// Forward substitution with `W_cᵀ` followed by backward substitution
    /// with `W_c`, overwriting `x`. Returns the number of block-row visits,
    /// which is `2N`.
    pub fn solve_in_place(&self, x: &mut [f64]) -> usize {
        let n = self.block;
        let count = self.beta.len();
        assert_eq!(x.len(), n * count, "rhs length mismatch");
        let mut visits = 0;

        // W_cᵀ μ̂ = rhs
        for i in 0..count {
            if i > 0 {
                let (done, rest) = x.split_at_mut(i * n);
                self.alpha[i - 1].gemv_tr(-1.0, &done[(i - 1) * n..], 1.0, &mut rest[..n]);
            }
            solve_upper_tr_in_place(&self.beta[i], &mut x[i * n..(i + 1) * n]);
            visits += 1;
        }
        // W_c μ = μ̂
        for i in (0..count).rev() {
            if i + 1 < count {
                let (head, tail) = x.split_at_mut((i + 1) * n);
                self.alpha[i].gemv(-1.0, &tail[..n], 1.0, &mut head[i * n..]);
            }
            solve_upper_in_place(&self.beta[i], &mut x[i * n..(i + 1) * n]);
            visits += 1;
        }
        visits
    }

    /// Dense `W_c` (test and diagnostics helper).
    pub fn to_dense_factor(&self) -> Matrix {
        let n = self.block;
        let dim = n * self.beta.len();
        let mut wc = Matrix::zeros(dim, dim);
        for (i, b) in self.beta.iter().enumerate() {
            copy_block(&mut wc, b, i * n, i * n);
        }
        for (i, a) in self.alpha.iter().enumerate() {
            copy_block(&mut wc, a, i * n, (i + 1) * n);
        }
        wc
    }

    /// Dense `W_cᵀ W_c`.
    pub fn reconstruct(&self) -> Matrix {
        let wc = self.to_dense_factor();
        wc.tr_matmul(&wc)
    }
}

fn copy_block(dst: &mut Matrix, src: &Matrix, row: usize, col: usize) {
    for i in 0..src.rows() {
        for j in 0..src.cols() {
            dst[(row + i, col + j)] = src[(i, j)];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_blocks() {
        let diag = vec![Matrix::identity(2); 3];
        let off = vec![Matrix::zeros(2, 2); 2];
        let f = BlockTridiagCholesky::factor(&diag, &off).unwrap();
        assert!(f.beta().iter().all(|b| *b == Matrix::identity(2)));
        assert!(f.alpha().iter().all(|a| *a == Matrix::zeros(2, 2)));
        assert_eq!(f.solve(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]), vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
    }

    #[test]
    fn scalar_two_by_two() {
        // W = [[2,1],[1,2]]: beta1 = √2, alpha1 = 1/√2, beta2 = √(3/2)
        let diag = vec![Matrix::from_diag(&[2.0]), Matrix::from_diag(&[2.0])];
        let off = vec![Matrix::from_diag(&[1.0])];
        let f = BlockTridiagCholesky::factor(&diag, &off).unwrap();
        assert!((f.beta()[0][(0, 0)] - 2f64.sqrt()).abs() < 1e-15);
        assert!((f.alpha()[0][(0, 0)] - 0.5f64.sqrt()).abs() < 1e-15);
        assert!((f.beta()[1][(0, 0)] - 1.5f64.sqrt()).abs() < 1e-15);
        let mu = f.solve(&[3.0, 3.0]);
        assert!((mu[0] - 1.0).abs() < 1e-14 && (mu[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn visits_scale_linearly() {
        let f = |count: usize| {
            let diag = vec![Matrix::identity(3); count];
            let off = vec![Matrix::zeros(3, 3); count - 1];
            let w = BlockTridiagCholesky::factor(&diag, &off).unwrap();
            w.solve_in_place(&mut vec![1.0; 3 * count])
        };
        assert_eq!(f(14), 2 * f(7));
    }

    #[test]
    fn indefinite_block_reports_global_index() {
        let diag = vec![Matrix::identity(2), Matrix::from_diag(&[1.0, 0.5])];
        let off = vec![Matrix::identity(2)];
        match BlockTridiagCholesky::factor(&diag, &off) {
            Err(Error::NotPositiveDefinite { index, .. }) => assert_eq!(index, 2),
            other => panic!("expected NotPositiveDefinite, got {other:?}"),
        }
    }

    #[test]
    fn block_count_mismatch() {
        let diag = vec![Matrix::identity(2); 3];
        assert!(BlockTridiagCholesky::factor(&diag, &[]).is_err());
    }
}
