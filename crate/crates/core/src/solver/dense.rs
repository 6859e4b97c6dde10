//! The same ADMM iteration carried out with dense, unstructured matrices.
//!
//! Used as an oracle for the sparse implementation on small instances; it
//! deliberately shares none of the block bookkeeping of [`OfflineData`].
//!
//! [`OfflineData`]: crate::offline::OfflineData

use super::admm::initial_state;
use super::steps::{project_box, project_ellipsoid_weighted};
use super::{Residuals, SolveStatus, SolverResult, SolverSettings, SolverState};
use crate::error::{Error, Result};
use crate::linalg::{cholesky, dist_inf, norm_inf, solve_upper_in_place, solve_upper_tr_in_place, spd_inverse, symmetric_sqrt, Matrix};
use crate::problem::MpcProblem;

/// Dense `H`, `q`, `G`, `b`, `C`, `D` of the ADMM splitting.
#[derive(Debug, Clone)]
pub struct DenseMatrices {
    pub h: Matrix,
    pub q: Vec<f64>,
    pub g: Matrix,
    pub b: Vec<f64>,
    pub c: Matrix,
    pub d: Matrix,
}

impl DenseMatrices {
    pub fn build(problem: &MpcProblem, x_t: &[f64]) -> Result<Self> {
        let (n, m, horizon) = (problem.n(), problem.m(), problem.horizon);
        let nz = horizon * (n + m);
        let (p_half, _) = symmetric_sqrt(&problem.terminal.p)?;

        // z = (u_0, x_1, u_1, …, x_{N−1}, u_{N−1}, x_N); walk the blocks in order
        let mut blocks: Vec<(&Matrix, bool)> = Vec::new(); // (cost block, is terminal)
        for i in 0..horizon {
            if i > 0 {
                blocks.push((&problem.q, false));
            }
            blocks.push((&problem.r, false));
        }
        blocks.push((&problem.t, true));

        let mut h = Matrix::zeros(nz, nz);
        let mut c = Matrix::zeros(nz, nz);
        let mut offset = 0;
        for (cost, terminal) in &blocks {
            let k = cost.rows();
            for i in 0..k {
                for j in 0..k {
                    h[(offset + i, offset + j)] = cost[(i, j)];
                    c[(offset + i, offset + j)] = if *terminal {
                        p_half[(i, j)]
                    } else if i == j {
                        1.0
                    } else {
                        0.0
                    };
                }
            }
            offset += k;
        }
        let d = -&c;

        let mut q = Vec::with_capacity(nz);
        let ru = problem.r.mul_vec(&problem.u_ref);
        let qx = problem.q.mul_vec(&problem.x_ref);
        for i in 0..horizon {
            if i > 0 {
                q.extend(qx.iter().map(|v| -v));
            }
            q.extend(ru.iter().map(|v| -v));
        }
        q.extend(problem.t.mul_vec(&problem.x_ref).iter().map(|v| -v));

        // G: row block i is [… A (at x_i) B (at u_i) −I (at x_{i+1}) …]
        let mut g = Matrix::zeros(horizon * n, nz);
        let u_col = |i: usize| i * (n + m);
        let x_col = |i: usize| m + (i - 1) * (n + m);
        for i in 0..horizon {
            for r in 0..n {
                for j in 0..m {
                    g[(i * n + r, u_col(i) + j)] = problem.b[(r, j)];
                }
                if i > 0 {
                    for j in 0..n {
                        g[(i * n + r, x_col(i) + j)] = problem.a[(r, j)];
                    }
                }
                g[(i * n + r, x_col(i + 1) + r)] = -1.0;
            }
        }
        let mut b = vec![0.0; horizon * n];
        for (dst, v) in b.iter_mut().zip(problem.a.mul_vec(x_t)) {
            *dst = -v;
        }
        Ok(Self { h, q, g, b, c, d })
    }
}

/// Dense-matrix ADMM with the same inputs and exit rule as the sparse solver.
pub fn dense_reference_solve(
    problem: &MpcProblem,
    rho: f64,
    x_t: &[f64],
    settings: &SolverSettings,
    previous: Option<&SolverState>,
) -> Result<SolverResult> {
    dense_reference_solve_traced(problem, rho, x_t, settings, previous, |_| {})
}

pub fn dense_reference_solve_traced(
    problem: &MpcProblem,
    rho: f64,
    x_t: &[f64],
    settings: &SolverSettings,
    previous: Option<&SolverState>,
    mut observer: impl FnMut(&SolverState),
) -> Result<SolverResult> {
    settings.check()?;
    if !(rho > 0.0) {
        return Err(Error::InvalidArgument(format!("rho must be positive, got {rho}")));
    }
    let layout = problem.layout();
    let nz = layout.total_len();
    let split = layout.circ_len();
    let dm = DenseMatrices::build(problem, x_t)?;

    let hhat = &dm.h + &dm.c.tr_matmul(&dm.c).scale(rho);
    let hhat_inv = spd_inverse(&hhat)?;
    let w = dm.g.matmul(&hhat_inv).matmul(&dm.g.transpose());
    let w_chol = cholesky(&w.symmetrize())?;
    let ctd = dm.c.tr_matmul(&dm.d);
    let (p_half, _) = symmetric_sqrt(&problem.terminal.p)?;
    // P^{-1/2} formed as P⁻¹ P^{1/2}
    let p_invhalf = spd_inverse(&problem.terminal.p)?.matmul(&p_half);
    let (lo, hi) = problem.bounds.v_circ_bounds();

    let mut state = initial_state(layout, settings.warmstart, previous)?;
    let mut residuals = Residuals {
        primal: f64::INFINITY,
        dual: f64::INFINITY,
    };
    let mut status = SolveStatus::MaxIterations;

    for _ in 0..settings.max_iter {
        let z_prev = state.z.clone();

        // q̂ = q + ρCᵀDv + Cᵀλ
        let mut qhat = dm.q.clone();
        axpy(rho, &ctd.mul_vec(&state.v), &mut qhat);
        axpy(1.0, &dm.c.tr_mul_vec(&state.lambda), &mut qhat);

        let mut mu: Vec<f64> = dm.g.mul_vec(&hhat_inv.mul_vec(&qhat));
        axpy(1.0, &dm.b, &mut mu);
        mu.iter_mut().for_each(|v| *v = -*v);
        solve_upper_tr_in_place(&w_chol, &mut mu);
        solve_upper_in_place(&w_chol, &mut mu);

        let mut rhs = dm.g.tr_mul_vec(&mu);
        axpy(1.0, &qhat, &mut rhs);
        state.z = hhat_inv.mul_vec(&rhs).into_iter().map(|v| -v).collect();

        let arg_circ: Vec<f64> = (0..split).map(|i| state.z[i] + state.lambda[i] / rho).collect();
        let mut arg_f = state.z[split..].to_vec();
        axpy(1.0 / rho, &p_invhalf.mul_vec(&state.lambda[split..]), &mut arg_f);
        let mut v = project_box(&arg_circ, &lo, &hi);
        v.extend(project_ellipsoid_weighted(&arg_f, &problem.terminal));
        state.v = v;

        let mut gap = dm.c.mul_vec(&state.z);
        axpy(1.0, &dm.d.mul_vec(&state.v), &mut gap);
        axpy(rho, &gap, &mut state.lambda);
        state.k += 1;

        residuals = Residuals {
            primal: norm_inf(&gap),
            dual: dist_inf(&state.z, &z_prev),
        };
        observer(&state);
        if residuals.primal <= settings.eps_p && residuals.dual <= settings.eps_d {
            status = SolveStatus::Converged;
            break;
        }
    }
    debug_assert_eq!(state.z.len(), nz);

    let u_apply = state.v[..layout.m].to_vec();
    let terminal_active = problem.terminal.on_boundary(state.v_f(), 1e-6);
    Ok(SolverResult {
        iterations: state.k,
        state,
        residuals,
        status,
        u_apply,
        terminal_active,
    })
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}
