//! Ellipsoidal admissible invariant sets with a fixed shape.
//!
//! The terminal gain is the LQR gain, the terminal cost `T` solves the
//! closed-loop Lyapunov equation, and the ellipsoid reuses `P = T` centred on
//! `x_r`. Only the radius is optimised: it is the largest `r` for which
//! every point of `E(P, x_r, r)` satisfies the state constraints and maps to
//! an admissible input under `u = K(x − x_r) + u_r`.

use log::{info, warn};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{min_eigenvalue, riccati_lqr, solve_discrete_lyapunov, spd_inverse, symmetric_eigen, symmetric_sqrt, Matrix};
use crate::problem::{Ellipsoid, StageBounds};

/// Contraction factors tried by [`build_terminal_set`], in increasing order.
pub const DEFAULT_LAMBDA_GRID: [f64; 7] = [0.5, 0.6, 0.7, 0.8, 0.9, 0.95, 0.99];

/// Relative slack on the invariance eigenvalue test.
const INVARIANCE_TOL: f64 = 1e-10;

/// Admissible region `C x ≤ c`, `D u ≤ d`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolytopeConstraints {
    pub c: Matrix,
    pub c_vec: Vec<f64>,
    pub d: Matrix,
    pub d_vec: Vec<f64>,
}

impl PolytopeConstraints {
    /// Rows `±e_j` for every finite box bound.
    pub fn from_boxes(x_lo: &[f64], x_hi: &[f64], u_lo: &[f64], u_hi: &[f64]) -> Self {
        let (c, c_vec) = box_rows(x_lo, x_hi);
        let (d, d_vec) = box_rows(u_lo, u_hi);
        Self { c, c_vec, d, d_vec }
    }

    /// Uses the first step's bounds (state step 1, input step 0).
    pub fn from_stage_bounds(bounds: &StageBounds) -> Result<Self> {
        let first = |v: &[Vec<f64>], what: &str| {
            v.first()
                .cloned()
                .ok_or_else(|| Error::InvalidArgument(format!("no {what} bounds")))
        };
        Ok(Self::from_boxes(
            &first(&bounds.x_lo, "state")?,
            &first(&bounds.x_hi, "state")?,
            &first(&bounds.u_lo, "input")?,
            &first(&bounds.u_hi, "input")?,
        ))
    }

    /// `x` satisfies `C x ≤ c` with absolute slack `tol`.
    pub fn state_admissible(&self, x: &[f64], tol: f64) -> bool {
        self.c.mul_vec(x).iter().zip(&self.c_vec).all(|(v, b)| *v <= b + tol)
    }

    pub fn input_admissible(&self, u: &[f64], tol: f64) -> bool {
        self.d.mul_vec(u).iter().zip(&self.d_vec).all(|(v, b)| *v <= b + tol)
    }
}

fn box_rows(lo: &[f64], hi: &[f64]) -> (Matrix, Vec<f64>) {
    let dim = lo.len();
    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    for j in 0..dim {
        if hi[j].is_finite() {
            let mut row = vec![0.0; dim];
            row[j] = 1.0;
            rows.push(row);
            rhs.push(hi[j]);
        }
        if lo[j].is_finite() {
            let mut row = vec![0.0; dim];
            row[j] = -1.0;
            rows.push(row);
            rhs.push(-lo[j]);
        }
    }
    let m = if rows.is_empty() {
        Matrix::zeros(0, dim)
    } else {
        Matrix::from_rows(&rows).expect("rows have equal length")
    };
    (m, rhs)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TerminalIngredients {
    pub k: Matrix,
    pub t: Matrix,
    pub ellipsoid: Ellipsoid,
    pub lambda: f64,
}

/// JSON fragment with the keys of the problem file plus `K` and `lambda`.
#[derive(Debug, Clone, Serialize)]
pub struct TerminalFragment {
    #[serde(rename = "P")]
    pub p: Vec<Vec<f64>>,
    pub c: Vec<f64>,
    pub r: f64,
    #[serde(rename = "K")]
    pub k: Vec<Vec<f64>>,
    #[serde(rename = "T")]
    pub t: Vec<Vec<f64>>,
    pub lambda: f64,
}

impl TerminalIngredients {
    pub fn fragment(&self) -> TerminalFragment {
        TerminalFragment {
            p: self.ellipsoid.p.to_rows(),
            c: self.ellipsoid.c.clone(),
            r: self.ellipsoid.r,
            k: self.k.to_rows(),
            t: self.t.to_rows(),
            lambda: self.lambda,
        }
    }

    /// `u = K(x − x_r) + u_r`
    pub fn control(&self, x: &[f64], x_r: &[f64], u_r: &[f64]) -> Vec<f64> {
        let dx: Vec<f64> = x.iter().zip(x_r).map(|(a, b)| a - b).collect();
        let mut u = u_r.to_vec();
        self.k.gemv(1.0, &dx, 1.0, &mut u);
        u
    }
}

/// `T` solving `(A+BK)ᵀT(A+BK) − T = −Q − KᵀRK`.
pub fn terminal_cost(a: &Matrix, b: &Matrix, k: &Matrix, q: &Matrix, r: &Matrix) -> Result<Matrix> {
    let ak = a + &(b * k);
    let rhs = q + &k.tr_matmul(&(r * k));
    solve_discrete_lyapunov(&ak, &rhs.symmetrize())
}

/// Largest `r` such that `E(P, x_r, r)` satisfies `C x ≤ c` and
/// `D (K(x − x_r) + u_r) ≤ d`, from the support function
/// `max_{xᵀPx ≤ r²} wᵀx = r √(wᵀP⁻¹w)`.
///
/// Rows with a zero normal are skipped with a warning. A non-positive
/// shifted bound is a [`Error::DegenerateConstraint`].
pub fn max_admissible_radius(
    p: &Matrix,
    k: &Matrix,
    constraints: &PolytopeConstraints,
    x_r: &[f64],
    u_r: &[f64],
) -> Result<f64> {
    let p_inv = spd_inverse(p)?;
    let c_shift: Vec<f64> = constraints
        .c_vec
        .iter()
        .zip(constraints.c.mul_vec(x_r))
        .map(|(c, cx)| c - cx)
        .collect();
    let d_shift: Vec<f64> = constraints
        .d_vec
        .iter()
        .zip(constraints.d.mul_vec(u_r))
        .map(|(d, du)| d - du)
        .collect();
    let dk = &constraints.d * k;

    let mut radius = f64::INFINITY;
    let rows = (0..constraints.c.rows())
        .map(|j| (constraints.c.row(j), c_shift[j]))
        .chain((0..dk.rows()).map(|j| (dk.row(j), d_shift[j])));
    for (row_index, (w, bound)) in rows.enumerate() {
        let support = p_inv.quad_form(w);
        if support <= 0.0 && bound >= 0.0 {
            warn!("constraint row {row_index} has a zero normal in the terminal set; skipped");
            continue;
        }
        if !(bound > 0.0) {
            return Err(Error::DegenerateConstraint { row: row_index, bound });
        }
        radius = radius.min(bound / support.sqrt());
    }
    if !radius.is_finite() {
        return Err(Error::InvalidArgument("no constraint bounds the terminal set".into()));
    }
    Ok(radius)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InvarianceCheck {
    pub holds: bool,
    /// Minimum eigenvalue of `λP − A_KᵀPA_K`.
    pub margin: f64,
}

/// S-procedure test `λP − A_KᵀPA_K ⪰ 0` with `0 ≤ λ ≤ 1`; when it holds,
/// `E(P, 0, r)` is invariant for `x⁺ = A_K x`.
pub fn check_invariance(p: &Matrix, a: &Matrix, b: &Matrix, k: &Matrix, lambda: f64, r: f64) -> Result<InvarianceCheck> {
    if !(r > 0.0) {
        return Err(Error::InvalidArgument(format!("radius must be positive, got {r}")));
    }
    let ak = a + &(b * k);
    let lhs = &p.scale(lambda) - &ak.tr_matmul(&(p * &ak));
    let margin = min_eigenvalue(&lhs.symmetrize())?;
    let holds = (0.0..=1.0).contains(&lambda) && margin >= -INVARIANCE_TOL * p.norm_inf();
    Ok(InvarianceCheck { holds, margin })
}

/// Smallest `λ` with `λP − A_KᵀPA_K ⪰ 0`, i.e. the largest eigenvalue of
/// `P^{-1/2} A_KᵀPA_K P^{-1/2}`.
pub fn critical_lambda(p: &Matrix, ak: &Matrix) -> Result<f64> {
    let (_, p_invhalf) = symmetric_sqrt(p)?;
    let m = p_invhalf.matmul(&ak.tr_matmul(&(p * ak))).matmul(&p_invhalf);
    Ok(symmetric_eigen(&m.symmetrize())?.max_value().max(0.0))
}

/// Fixed-shape terminal ingredients: LQR `K`, Lyapunov `T`, `P = T`,
/// `c = x_r`, maximal admissible `r`, smallest feasible `λ` from the grid.
///
/// With `P = T` the feasible contraction factor is often above every grid
/// point; the exact [`critical_lambda`] is then used if it does not exceed 1.
#[allow(clippy::too_many_arguments)]
pub fn build_terminal_set(
    a: &Matrix,
    b: &Matrix,
    q: &Matrix,
    r: &Matrix,
    constraints: &PolytopeConstraints,
    x_r: &[f64],
    u_r: &[f64],
    lambda_grid: &[f64],
) -> Result<TerminalIngredients> {
    if lambda_grid.iter().any(|l| !(*l > 0.0 && *l <= 1.0)) {
        return Err(Error::InvalidArgument("lambda grid must lie in (0, 1]".into()));
    }
    let k = riccati_lqr(a, b, q, r)?;
    let t = terminal_cost(a, b, &k, q, r)?;
    let p = t.clone();
    let radius = max_admissible_radius(&p, &k, constraints, x_r, u_r)?;

    let mut grid = lambda_grid.to_vec();
    grid.sort_by(f64::total_cmp);
    let mut chosen = None;
    for &lambda in &grid {
        if check_invariance(&p, a, b, &k, lambda, radius)?.holds {
            chosen = Some(lambda);
            break;
        }
    }
    if chosen.is_none() {
        let ak = a + &(b * &k);
        let lambda = critical_lambda(&p, &ak)?.min(1.0);
        if check_invariance(&p, a, b, &k, lambda, radius)?.holds {
            info!("no grid point passes; using the critical contraction factor {lambda}");
            chosen = Some(lambda);
        }
    }
    let lambda = chosen.ok_or(Error::NoInvariantSet)?;
    Ok(TerminalIngredients {
        k,
        t,
        ellipsoid: Ellipsoid::new(p, x_r.to_vec(), radius),
        lambda,
    })
}
