use serde::Serialize;

use super::dense::DenseMatrices;
use super::steps::project_ellipsoid_weighted;
use super::SolverState;
use crate::error::Result;
use crate::linalg::{dist_inf, norm_inf, solve_spd, spd_inverse, symmetric_sqrt};
use crate::problem::MpcProblem;

/// Optimality measures of an iterate triple for the QCQP, independent of
/// the solver internals.
///
/// `stationarity` and the two complementarity measures are scaled by
/// `max(1, ‖Hz‖_∞, ‖q‖_∞, ‖Cᵀλ‖_∞)`; the remaining entries are absolute.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KktReport {
    /// `‖Gz − b‖_∞`
    pub equality: f64,
    /// Largest bound violation of `v∘`.
    pub box_violation: f64,
    /// `max(0, (v_f − c)ᵀP(v_f − c) − r²)/r²`
    pub ellipsoid_violation: f64,
    /// `‖Cz + Dv‖_∞`
    pub consensus: f64,
    /// `‖Hz + q + Cᵀλ + Gᵀμ‖_∞` with `μ` the least-squares multiplier.
    pub stationarity: f64,
    /// Normal-cone residual of `λ∘` at `v∘` for the box.
    pub complementarity_box: f64,
    /// Normal-cone residual of `P^{1/2}λ_f` at `v_f` for the ellipsoid.
    pub complementarity_ellipsoid: f64,
}

impl KktReport {
    pub fn max_measure(&self) -> f64 {
        [
            self.equality,
            self.box_violation,
            self.ellipsoid_violation,
            self.consensus,
            self.stationarity,
            self.complementarity_box,
            self.complementarity_ellipsoid,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }

    pub fn passes(&self, threshold: f64) -> bool {
        self.max_measure() <= threshold
    }
}

/// Evaluates [`KktReport`] for `state` at initial state `x_t`.
pub fn kkt_residuals(problem: &MpcProblem, state: &SolverState, x_t: &[f64]) -> Result<KktReport> {
    let layout = problem.layout();
    let split = layout.circ_len();
    let dm = DenseMatrices::build(problem, x_t)?;
    let (z, v, lambda) = (&state.z, &state.v, &state.lambda);

    let gz = dm.g.mul_vec(z);
    let equality = dist_inf(&gz, &dm.b);

    let (lo, hi) = problem.bounds.v_circ_bounds();
    let box_violation = v[..split]
        .iter()
        .zip(lo.iter().zip(&hi))
        .map(|(&x, (&l, &h))| (l - x).max(x - h).max(0.0))
        .fold(0.0, f64::max);

    let ell = &problem.terminal;
    let r2 = ell.r * ell.r;
    let ellipsoid_violation = ((ell.quad(&v[split..]) - r2) / r2).max(0.0);

    let mut gap = dm.c.mul_vec(z);
    for (g, dv) in gap.iter_mut().zip(dm.d.mul_vec(v)) {
        *g += dv;
    }
    let consensus = norm_inf(&gap);

    // g = Hz + q + Cᵀλ; remove its component in range(Gᵀ)
    let hz = dm.h.mul_vec(z);
    let ct_lambda = dm.c.tr_mul_vec(lambda);
    let grad: Vec<f64> = hz.iter().zip(&dm.q).zip(&ct_lambda).map(|((a, b), c)| a + b + c).collect();
    let ggt = dm.g.matmul(&dm.g.transpose());
    let mu = solve_spd(&ggt, &dm.g.mul_vec(&grad))?;
    let gt_mu = dm.g.tr_mul_vec(&mu);
    let residual: Vec<f64> = grad.iter().zip(&gt_mu).map(|(a, b)| a - b).collect();
    let scale = [norm_inf(&hz), norm_inf(&dm.q), norm_inf(&ct_lambda), 1.0]
        .into_iter()
        .fold(0.0, f64::max);
    let stationarity = norm_inf(&residual) / scale;

    // v ∈ argmin over the set of ⟨−Cᵀλ, ·⟩  ⇔  v = Π(v + s·g) for s > 0
    let complementarity_box = v[..split]
        .iter()
        .zip(&lambda[..split])
        .zip(lo.iter().zip(&hi))
        .map(|((&x, &l), (&a, &b))| (x - (x + l / scale).min(b).max(a)).abs())
        .fold(0.0, f64::max);

    let (p_half, _) = symmetric_sqrt(&ell.p)?;
    let p_inv = spd_inverse(&ell.p)?;
    let step = p_inv.matmul(&p_half).mul_vec(&lambda[split..]);
    let trial: Vec<f64> = v[split..].iter().zip(&step).map(|(x, s)| x + s / scale).collect();
    let complementarity_ellipsoid = dist_inf(&v[split..], &project_ellipsoid_weighted(&trial, ell));

    Ok(KktReport {
        equality,
        box_violation,
        ellipsoid_violation,
        consensus,
        stationarity,
        complementarity_box,
        complementarity_ellipsoid,
    })
}
