use log::{debug, trace};

use super::steps::{compute_qhat, compute_residuals, dual_update, v_update, z_update, ZWorkspace};
use super::{Residuals, SolveStatus, SolverResult, SolverSettings, SolverState, WarmStart};
use crate::error::{Error, Result};
use crate::offline::OfflineData;
use crate::problem::MpcProblem;

/// Relative tolerance on the radius for flagging an active terminal constraint.
const TERMINAL_ACTIVE_TOL: f64 = 1e-6;

/// Runs the sparse ADMM iteration from `x_t`.
///
/// `previous` seeds the iterates according to `settings.warmstart`; it is
/// ignored for cold starts. Non-convergence is reported through
/// [`SolveStatus::MaxIterations`], not as an error.
pub fn admm_solve(
    problem: &MpcProblem,
    offline: &OfflineData,
    x_t: &[f64],
    settings: &SolverSettings,
    previous: Option<&SolverState>,
) -> Result<SolverResult> {
    admm_solve_traced(problem, offline, x_t, settings, previous, |_| {})
}

/// [`admm_solve`] with a callback invoked after every iteration.
pub fn admm_solve_traced(
    problem: &MpcProblem,
    offline: &OfflineData,
    x_t: &[f64],
    settings: &SolverSettings,
    previous: Option<&SolverState>,
    mut observer: impl FnMut(&SolverState),
) -> Result<SolverResult> {
    settings.check()?;
    let layout = offline.layout();
    if problem.layout() != layout {
        return Err(Error::Dimension(format!(
            "offline data built for {:?}, problem is {:?}",
            layout,
            problem.layout()
        )));
    }
    if x_t.len() != layout.n {
        return Err(Error::Dimension(format!("x_t has length {}, expected {}", x_t.len(), layout.n)));
    }
    if x_t.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("x_t"));
    }

    let mut state = initial_state(layout, settings.warmstart, previous)?;
    let q = problem.linear_cost();
    let b0: Vec<f64> = offline.a().mul_vec(x_t).into_iter().map(|v| -v).collect();
    let (lo, hi) = problem.bounds.v_circ_bounds();
    let ell = &problem.terminal;

    let mut ws = ZWorkspace::new(offline);
    let mut qhat = vec![0.0; layout.total_len()];
    let mut z_prev = state.z.clone();
    let mut scratch = vec![0.0; layout.n];
    let mut residuals = Residuals {
        primal: f64::INFINITY,
        dual: f64::INFINITY,
    };
    let mut status = SolveStatus::MaxIterations;

    for _ in 0..settings.max_iter {
        compute_qhat(&q, &state.v, &state.lambda, offline, &mut qhat);
        std::mem::swap(&mut z_prev, &mut state.z);
        z_update(offline, &qhat, &b0, &mut ws, &mut state.z);
        v_update(&state.z, &state.lambda, offline, &lo, &hi, ell, &mut state.v);
        dual_update(&state.z, &state.v, offline, &mut state.lambda, &mut scratch);
        state.k += 1;

        residuals = compute_residuals(&state.z, &z_prev, &state.v, offline, &mut scratch);
        trace!("k={} r_p={:e} r_d={:e}", state.k, residuals.primal, residuals.dual);
        observer(&state);
        if residuals.primal <= settings.eps_p && residuals.dual <= settings.eps_d {
            status = SolveStatus::Converged;
            break;
        }
    }

    let iterations = state.k;
    debug!(
        "admm finished: {:?} after {} iterations (r_p={:e}, r_d={:e})",
        status, iterations, residuals.primal, residuals.dual
    );
    let u_apply = state.v[layout.u(0)].to_vec();
    let terminal_active = ell.on_boundary(state.v_f(), TERMINAL_ACTIVE_TOL);
    Ok(SolverResult {
        state,
        iterations,
        residuals,
        status,
        u_apply,
        terminal_active,
    })
}

pub(crate) fn initial_state(
    layout: crate::problem::Layout,
    mode: WarmStart,
    previous: Option<&SolverState>,
) -> Result<SolverState> {
    let state = match (mode, previous) {
        (WarmStart::Cold, _) | (_, None) => SolverState::zeros(layout),
        (WarmStart::Keep, Some(prev)) => {
            prev.check_layout(layout)?;
            SolverState { k: 0, ..prev.clone() }
        }
        (WarmStart::Shift, Some(prev)) => {
            prev.check_layout(layout)?;
            prev.shifted()
        }
    };
    Ok(state)
}

/// Solver bound to one problem and one set of offline data, carrying the
/// previous iterates for warm starts between sample times.
#[derive(Debug)]
pub struct AdmmSolver<'a> {
    problem: &'a MpcProblem,
    offline: &'a OfflineData,
    pub settings: SolverSettings,
    previous: Option<SolverState>,
}

impl<'a> AdmmSolver<'a> {
    pub fn new(problem: &'a MpcProblem, offline: &'a OfflineData, settings: SolverSettings) -> Self {
        Self {
            problem,
            offline,
            settings,
            previous: None,
        }
    }

    pub fn problem(&self) -> &MpcProblem {
        self.problem
    }

    pub fn solve(&mut self, x_t: &[f64]) -> Result<SolverResult> {
        let result = admm_solve(self.problem, self.offline, x_t, &self.settings, self.previous.as_ref())?;
        self.previous = Some(result.state.clone());
        Ok(result)
    }

    pub fn reset(&mut self) {
        self.previous = None;
    }
}
