//! ρ-dependent precomputation for the online ADMM loop.
//!
//! Everything here depends on the model, the costs, `P` and `ρ`; the
//! ellipsoid centre and radius and the reference may change between solves
//! without a rebuild. Memory is affine in the horizon: the only per-stage
//! data are the `N` diagonal and `N − 1` superdiagonal blocks of `W_c`.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::linalg::{spd_inverse, symmetric_sqrt, BlockTridiagCholesky, Matrix};
use crate::problem::{Layout, MpcProblem};

const CACHE_MAGIC: &[u8; 4] = b"ELMP";
const CACHE_VERSION: u32 = 1;
const FLAG_DIAGONAL_COSTS: u32 = 1;

/// Inverse of a diagonal block of `Ĥ`, either dense or as its diagonal.
#[derive(Debug, Clone, PartialEq)]
pub enum BlockInverse {
    Dense(Matrix),
    Diagonal(Vec<f64>),
}

impl BlockInverse {
    #[inline]
    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        match self {
            BlockInverse::Dense(m) => m.gemv(1.0, x, 0.0, out),
            BlockInverse::Diagonal(d) => {
                for ((o, &di), &xi) in out.iter_mut().zip(d).zip(x) {
                    *o = di * xi;
                }
            }
        }
    }

    pub fn to_dense(&self) -> Matrix {
        match self {
            BlockInverse::Dense(m) => m.clone(),
            BlockInverse::Diagonal(d) => Matrix::from_diag(d),
        }
    }

    fn stored_floats(&self) -> usize {
        match self {
            BlockInverse::Dense(m) => m.rows() * m.cols(),
            BlockInverse::Diagonal(d) => d.len(),
        }
    }
}

/// Selects the componentwise path for `(Q+ρI)⁻¹`, `(R+ρI)⁻¹`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum CostStructure {
    /// Diagonal path iff both `Q` and `R` are diagonal.
    #[default]
    Auto,
    Diagonal,
    Dense,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OfflineData {
    layout: Layout,
    /// Penalty per block slot; a scalar ρ occupies one entry.
    rho: Vec<f64>,
    r_inv: BlockInverse,
    q_inv: BlockInverse,
    t_inv: Matrix,
    wc: BlockTridiagCholesky,
    p_half: Matrix,
    p_invhalf: Matrix,
    a: Matrix,
    b: Matrix,
    rho_p: Matrix,
}

impl OfflineData {
    pub fn build(problem: &MpcProblem, rho: f64) -> Result<Self> {
        Self::build_with(problem, rho, CostStructure::Auto)
    }

    pub fn build_with(problem: &MpcProblem, rho: f64, structure: CostStructure) -> Result<Self> {
        if !(rho > 0.0) || !rho.is_finite() {
            return Err(Error::InvalidArgument(format!("rho must be positive, got {rho}")));
        }
        let layout = problem.layout();
        let (n, m) = (layout.n, layout.m);
        let diagonal = match structure {
            CostStructure::Auto => problem.costs_are_diagonal(),
            CostStructure::Diagonal if !problem.costs_are_diagonal() => {
                return Err(Error::InvalidArgument(
                    "diagonal cost path requested but Q or R is not diagonal".into(),
                ))
            }
            CostStructure::Diagonal => true,
            CostStructure::Dense => false,
        };

        let shifted_inverse = |c: &Matrix| -> Result<BlockInverse> {
            if diagonal {
                Ok(BlockInverse::Diagonal(c.diagonal().iter().map(|d| 1.0 / (d + rho)).collect()))
            } else {
                let shifted = c + &Matrix::identity(c.rows()).scale(rho);
                Ok(BlockInverse::Dense(spd_inverse(&shifted)?))
            }
        };
        let r_inv = shifted_inverse(&problem.r)?;
        let q_inv = shifted_inverse(&problem.q)?;
        let rho_p = problem.terminal.p.scale(rho);
        let t_inv = spd_inverse(&(&problem.t + &rho_p))?;
        let (p_half, p_invhalf) = symmetric_sqrt(&problem.terminal.p)?;

        let (diag, offdiag) = w_blocks(&problem.a, &problem.b, &r_inv.to_dense(), &q_inv.to_dense(), &t_inv, layout.horizon);
        let wc = BlockTridiagCholesky::factor(&diag, &offdiag)?;
        debug_assert_eq!(wc.block_size(), n);
        debug_assert_eq!(problem.b.cols(), m);

        Ok(Self {
            layout,
            rho: vec![rho],
            r_inv,
            q_inv,
            t_inv,
            wc,
            p_half,
            p_invhalf,
            a: problem.a.clone(),
            b: problem.b.clone(),
            rho_p,
        })
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn rho(&self) -> f64 {
        self.rho[0]
    }

    pub fn diagonal_costs(&self) -> bool {
        matches!(self.q_inv, BlockInverse::Diagonal(_))
    }

    pub fn r_inv(&self) -> &BlockInverse {
        &self.r_inv
    }

    pub fn q_inv(&self) -> &BlockInverse {
        &self.q_inv
    }

    pub fn t_inv(&self) -> &Matrix {
        &self.t_inv
    }

    pub fn wc(&self) -> &BlockTridiagCholesky {
        &self.wc
    }

    pub fn p_half(&self) -> &Matrix {
        &self.p_half
    }

    pub fn p_invhalf(&self) -> &Matrix {
        &self.p_invhalf
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }

    pub fn b(&self) -> &Matrix {
        &self.b
    }

    pub fn rho_p(&self) -> &Matrix {
        &self.rho_p
    }

    /// Number of `f64` values held.
    pub fn stored_floats(&self) -> usize {
        let sq = |m: &Matrix| m.rows() * m.cols();
        self.rho.len()
            + self.r_inv.stored_floats()
            + self.q_inv.stored_floats()
            + sq(&self.t_inv)
            + self.wc.stored_floats()
            + sq(&self.p_half)
            + sq(&self.p_invhalf)
            + sq(&self.a)
            + sq(&self.b)
            + sq(&self.rho_p)
    }

    /// Applies the block-diagonal `Ĥ⁻¹` to a full-length `z`-shaped vector.
    pub fn apply_hhat_inv(&self, x: &[f64], out: &mut [f64]) {
        let l = self.layout;
        for i in 0..l.horizon {
            let u = l.u(i);
            self.r_inv.apply(&x[u.clone()], &mut out[u]);
            if i > 0 {
                let xi = l.x(i);
                self.q_inv.apply(&x[xi.clone()], &mut out[xi]);
            }
        }
        let xn = l.x(l.horizon);
        self.t_inv.gemv(1.0, &x[xn.clone()], 0.0, &mut out[xn]);
    }

    /// `out ← G·w` using only `A`, `B` (block row `i`: `A x_i + B u_i − x_{i+1}`).
    pub fn apply_g(&self, w: &[f64], out: &mut [f64]) {
        let l = self.layout;
        let n = l.n;
        for i in 0..l.horizon {
            let row = &mut out[i * n..(i + 1) * n];
            self.b.gemv(1.0, &w[l.u(i)], 0.0, row);
            if i > 0 {
                self.a.gemv(1.0, &w[l.x(i)], 1.0, row);
            }
            for (r, &x) in row.iter_mut().zip(&w[l.x(i + 1)]) {
                *r -= x;
            }
        }
    }

    /// `out ← Gᵀ·μ`.
    pub fn apply_g_tr(&self, mu: &[f64], out: &mut [f64]) {
        let l = self.layout;
        let n = l.n;
        for i in 0..l.horizon {
            let mu_i = &mu[i * n..(i + 1) * n];
            self.b.gemv_tr(1.0, mu_i, 0.0, &mut out[l.u(i)]);
            let xi = l.x(i + 1);
            let dst = &mut out[xi];
            if i + 1 < l.horizon {
                self.a.gemv_tr(1.0, &mu[(i + 1) * n..(i + 2) * n], 0.0, dst);
                for (d, &v) in dst.iter_mut().zip(mu_i) {
                    *d -= v;
                }
            } else {
                for (d, &v) in dst.iter_mut().zip(mu_i) {
                    *d = -v;
                }
            }
        }
    }

    // -- binary cache -------------------------------------------------------

    /// Serialises to the `ELMP` cache format (little-endian).
    pub fn write_cache<W: Write>(&self, mut w: W) -> Result<()> {
        let l = self.layout;
        w.write_all(CACHE_MAGIC)?;
        for v in [CACHE_VERSION, l.n as u32, l.m as u32, l.horizon as u32] {
            w.write_all(&v.to_le_bytes())?;
        }
        let flags = if self.diagonal_costs() { FLAG_DIAGONAL_COSTS } else { 0 };
        w.write_all(&flags.to_le_bytes())?;
        w.write_all(&(self.rho.len() as u32).to_le_bytes())?;
        let mut put = |vals: &[f64]| -> Result<()> {
            for v in vals {
                w.write_all(&v.to_le_bytes())?;
            }
            Ok(())
        };
        put(&self.rho)?;
        for inv in [&self.r_inv, &self.q_inv] {
            match inv {
                BlockInverse::Dense(m) => put(m.as_slice())?,
                BlockInverse::Diagonal(d) => put(d)?,
            }
        }
        put(self.t_inv.as_slice())?;
        for b in self.wc.beta() {
            put(b.as_slice())?;
        }
        for a in self.wc.alpha() {
            put(a.as_slice())?;
        }
        for m in [&self.p_half, &self.p_invhalf, &self.a, &self.b, &self.rho_p] {
            put(m.as_slice())?;
        }
        Ok(())
    }

    pub fn to_cache_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_cache(&mut buf).expect("writing to a Vec cannot fail");
        buf
    }

    pub fn read_cache<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != CACHE_MAGIC {
            return Err(Error::Cache("bad magic bytes".into()));
        }
        let mut u32s = [0u32; 6];
        for v in u32s.iter_mut() {
            let mut b = [0u8; 4];
            r.read_exact(&mut b)?;
            *v = u32::from_le_bytes(b);
        }
        let [version, n, m, horizon, flags, rho_len] = u32s.map(|v| v as usize);
        if version != CACHE_VERSION as usize {
            return Err(Error::Cache(format!("unsupported version {version}")));
        }
        if n == 0 || m == 0 || horizon < 2 || rho_len == 0 {
            return Err(Error::Cache("invalid dimensions".into()));
        }
        let diagonal = flags as u32 & FLAG_DIAGONAL_COSTS != 0;

        let mut take = |count: usize| -> Result<Vec<f64>> {
            let mut out = Vec::with_capacity(count);
            let mut b = [0u8; 8];
            for _ in 0..count {
                r.read_exact(&mut b)?;
                out.push(f64::from_le_bytes(b));
            }
            Ok(out)
        };
        let rho = take(rho_len)?;
        let mut inverse = |k: usize| -> Result<BlockInverse> {
            Ok(if diagonal {
                BlockInverse::Diagonal(take(k)?)
            } else {
                BlockInverse::Dense(Matrix::from_row_slice(k, k, &take(k * k)?))
            })
        };
        let r_inv = inverse(m)?;
        let q_inv = inverse(n)?;
        let mut mat = |rows: usize, cols: usize| -> Result<Matrix> {
            Ok(Matrix::from_row_slice(rows, cols, &take(rows * cols)?))
        };
        let t_inv = mat(n, n)?;
        let beta = (0..horizon).map(|_| mat(n, n)).collect::<Result<Vec<_>>>()?;
        let alpha = (0..horizon - 1).map(|_| mat(n, n)).collect::<Result<Vec<_>>>()?;
        let p_half = mat(n, n)?;
        let p_invhalf = mat(n, n)?;
        let a = mat(n, n)?;
        let b = mat(n, m)?;
        let rho_p = mat(n, n)?;

        Ok(Self {
            layout: Layout::new(n, m, horizon),
            rho,
            r_inv,
            q_inv,
            t_inv,
            wc: BlockTridiagCholesky::from_parts(n, beta, alpha),
            p_half,
            p_invhalf,
            a,
            b,
            rho_p,
        })
    }
}

/// Diagonal and superdiagonal blocks of `W = G Ĥ⁻¹ Gᵀ`.
///
/// Row `i` of `G` touches `x_i` (via `A`, for `i ≥ 1`), `u_i` (via `B`) and
/// `x_{i+1}` (via `−I`), so
/// `W_ii = A Q̂⁻¹ Aᵀ [i ≥ 1] + B R̂⁻¹ Bᵀ + X̂_{i+1}⁻¹` and
/// `W_{i,i+1} = −Q̂⁻¹ Aᵀ`, with `X̂_N⁻¹ = (T + ρP)⁻¹`.
pub(crate) fn w_blocks(
    a: &Matrix,
    b: &Matrix,
    r_inv: &Matrix,
    q_inv: &Matrix,
    t_inv: &Matrix,
    horizon: usize,
) -> (Vec<Matrix>, Vec<Matrix>) {
    let brb = b.matmul(&r_inv.matmul(&b.transpose()));
    let aqa = a.matmul(&q_inv.matmul(&a.transpose()));
    let off = -&q_inv.matmul(&a.transpose());
    let mut diag = Vec::with_capacity(horizon);
    for i in 0..horizon {
        let next = if i + 1 == horizon { t_inv } else { q_inv };
        let mut d = &brb + next;
        if i > 0 {
            d = &d + &aqa;
        }
        diag.push(d.symmetrize());
    }
    (diag, vec![off; horizon - 1])
}
