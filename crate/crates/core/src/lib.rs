//! Sparse ADMM solver for linear MPC with an ellipsoidal terminal constraint.
//!
//! The problem solved at every sample time is
//!
//! ```text
//! min  Σ ‖x_i − x_r‖²_Q + ‖u_i − u_r‖²_R + ‖x_N − x_r‖²_T
//! s.t. x_0 = x(t),  x_{i+1} = A x_i + B u_i,
//!      x̲_i ≤ x_i ≤ x̄_i,  u̲_i ≤ u_i ≤ ū_i,  x_N ∈ E(P, c, r)
//! ```
//!
//! Modules:
//! - [`linalg`]: dense kernels, block-tridiagonal Cholesky, ZOH, Lyapunov/LQR
//! - [`problem`]: problem data, validation, JSON problem file
//! - [`offline`]: ρ-dependent factorizations and the binary cache
//! - [`solver`]: the ADMM iteration, a dense oracle and KKT certificates
//! - [`terminal`]: ellipsoidal admissible invariant sets (fixed shape)
//! - [`sim`]: closed-loop simulation and the three-mass benchmark

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod linalg;
pub mod offline;
pub mod problem;
pub mod sim;
pub mod solver;
pub mod terminal;

pub use error::{Error, Result};
pub use linalg::Matrix;
pub use offline::{CostStructure, OfflineData};
pub use problem::{Ellipsoid, MpcProblem, StageBounds};
pub use solver::{admm_solve, SolveStatus, SolverResult, SolverSettings, SolverState, WarmStart};
