//! Small dense kernels and the structured factorizations the solver needs.

mod banded;
mod cholesky;
mod control;
mod eigen;
mod expm;
mod matrix;

pub use banded::BlockTridiagCholesky;
pub use cholesky::{
    cholesky, cholesky_with_floor, solve_spd, solve_upper_in_place, solve_upper_tr_in_place, spd_inverse,
    DEFAULT_PIVOT_FLOOR,
};
pub use control::{
    riccati_lqr, riccati_lqr_with, solve_discrete_lyapunov, RiccatiOptions, STABILITY_MARGIN,
};
pub use eigen::{
    min_eigenvalue, spectral_radius_estimate, symmetric_eigen, symmetric_sqrt, symmetric_sqrt_with_floor,
    SymmetricEigen, DEFAULT_EIGEN_FLOOR,
};
pub use expm::{expm, zoh_discretize};
pub use matrix::{dist_inf, dot, norm_inf, Matrix};
