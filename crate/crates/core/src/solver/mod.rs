//! Online ADMM iteration for the ellipsoid-terminal MPC problem.

mod admm;
mod dense;
mod kkt;
mod steps;

pub use admm::{admm_solve, admm_solve_traced, AdmmSolver};
pub use dense::{dense_reference_solve, dense_reference_solve_traced, DenseMatrices};
pub use kkt::{kkt_residuals, KktReport};
pub use steps::{
    compute_qhat, compute_residuals, dual_update, project_box, project_ellipsoid_weighted, v_update, z_update,
    ZWorkspace,
};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::problem::Layout;

/// How the iterates of the previous solve seed the next one.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum WarmStart {
    /// `v⁰ = 0`, `λ⁰ = 0`.
    #[default]
    Cold,
    /// Reuse the previous iterates unchanged.
    Keep,
    /// Shift the previous iterates one stage forward, repeating the last stage.
    Shift,
}

impl std::str::FromStr for WarmStart {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cold" => Ok(WarmStart::Cold),
            "keep" => Ok(WarmStart::Keep),
            "shift" => Ok(WarmStart::Shift),
            other => Err(Error::InvalidArgument(format!("unknown warm-start mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    /// Primal exit tolerance (default 1e-3).
    pub eps_p: f64,
    /// Dual exit tolerance (default 1e-3).
    pub eps_d: f64,
    /// Iteration cap (default 4000).
    pub max_iter: usize,
    pub warmstart: WarmStart,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            eps_p: 1e-3,
            eps_d: 1e-3,
            max_iter: 4000,
            warmstart: WarmStart::Cold,
        }
    }
}

impl SolverSettings {
    pub fn check(&self) -> Result<()> {
        if !(self.eps_p > 0.0) || !(self.eps_d > 0.0) {
            return Err(Error::InvalidArgument("exit tolerances must be positive".into()));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidArgument("max_iter must be at least 1".into()));
        }
        Ok(())
    }
}

/// ADMM iterates `(z, v, λ)` and the iteration counter.
///
/// Each vector is full length, `z∘` first and the terminal block last.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub z: Vec<f64>,
    pub v: Vec<f64>,
    pub lambda: Vec<f64>,
    pub k: usize,
    layout: Layout,
}

impl SolverState {
    pub fn zeros(layout: Layout) -> Self {
        let len = layout.total_len();
        Self {
            z: vec![0.0; len],
            v: vec![0.0; len],
            lambda: vec![0.0; len],
            k: 0,
            layout,
        }
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn z_circ(&self) -> &[f64] {
        &self.z[..self.layout.circ_len()]
    }

    pub fn z_f(&self) -> &[f64] {
        &self.z[self.layout.circ_len()..]
    }

    pub fn v_circ(&self) -> &[f64] {
        &self.v[..self.layout.circ_len()]
    }

    pub fn v_f(&self) -> &[f64] {
        &self.v[self.layout.circ_len()..]
    }

    pub fn lambda_circ(&self) -> &[f64] {
        &self.lambda[..self.layout.circ_len()]
    }

    pub fn lambda_f(&self) -> &[f64] {
        &self.lambda[self.layout.circ_len()..]
    }

    /// Iterates shifted one prediction stage forward with the last stage
    /// repeated; the counter is reset.
    pub fn shifted(&self) -> Self {
        let l = self.layout;
        let shift = |src: &[f64], terminal_compatible: bool| {
            let mut out = src.to_vec();
            for i in 0..l.horizon - 1 {
                out[l.u(i)].copy_from_slice(&src[l.u(i + 1)]);
                if i >= 1 {
                    out[l.x(i)].copy_from_slice(&src[l.x(i + 1)]);
                }
            }
            if terminal_compatible {
                out[l.x(l.horizon - 1)].copy_from_slice(&src[l.x(l.horizon)]);
            }
            out
        };
        Self {
            z: shift(&self.z, true),
            v: shift(&self.v, true),
            // λ_f lives in P^{1/2}-scaled coordinates and is not copied into λ∘
            lambda: shift(&self.lambda, false),
            k: 0,
            layout: l,
        }
    }

    pub(crate) fn check_layout(&self, layout: Layout) -> Result<()> {
        if self.layout != layout {
            return Err(Error::Dimension(format!(
                "warm-start state has layout {:?}, problem has {:?}",
                self.layout, layout
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Residuals {
    #[serde(rename = "r_p")]
    pub primal: f64,
    #[serde(rename = "r_d")]
    pub dual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Converged,
    MaxIterations,
}

#[derive(Debug, Clone)]
pub struct SolverResult {
    /// Final `(z̃, ṽ, λ̃)`.
    pub state: SolverState,
    pub iterations: usize,
    pub residuals: Residuals,
    pub status: SolveStatus,
    /// First `m` entries of `ṽ`, the control action to apply.
    pub u_apply: Vec<f64>,
    /// `ṽ_f` lies on the ellipsoid boundary (relative 1e-6 on the radius).
    pub terminal_active: bool,
}

impl SolverResult {
    pub fn converged(&self) -> bool {
        self.status == SolveStatus::Converged
    }
}
