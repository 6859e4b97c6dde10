//! Closed-loop simulation and the three-mass spring chain benchmark.

use std::io::Write;
use std::time::Instant;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{zoh_discretize, Matrix};
use crate::offline::OfflineData;
use crate::problem::{MpcProblem, StageBounds};
use crate::solver::{AdmmSolver, SolveStatus, SolverSettings};
use crate::terminal::{build_terminal_set, PolytopeConstraints, TerminalIngredients, DEFAULT_LAMBDA_GRID};

/// Discrete plant `x⁺ = A x + B u`.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantModel {
    pub a: Matrix,
    pub b: Matrix,
    pub state_labels: Vec<String>,
    pub input_labels: Vec<String>,
    /// Sampling period in seconds.
    pub ts: f64,
}

impl PlantModel {
    pub fn step(&self, x: &[f64], u: &[f64]) -> Vec<f64> {
        let mut next = self.a.mul_vec(x);
        self.b.gemv(1.0, u, 1.0, &mut next);
        next
    }
}

/// Problem data without terminal ingredients.
#[derive(Debug, Clone, PartialEq)]
pub struct MpcSkeleton {
    pub a: Matrix,
    pub b: Matrix,
    pub q: Matrix,
    pub r: Matrix,
    pub horizon: usize,
    pub bounds: StageBounds,
    pub x_ref: Vec<f64>,
    pub u_ref: Vec<f64>,
}

impl MpcSkeleton {
    pub fn constraints(&self) -> Result<PolytopeConstraints> {
        PolytopeConstraints::from_stage_bounds(&self.bounds)
    }

    pub fn build_terminal(&self) -> Result<TerminalIngredients> {
        build_terminal_set(
            &self.a,
            &self.b,
            &self.q,
            &self.r,
            &self.constraints()?,
            &self.x_ref,
            &self.u_ref,
            &DEFAULT_LAMBDA_GRID,
        )
    }

    pub fn complete(&self, terminal: &TerminalIngredients) -> MpcProblem {
        MpcProblem {
            a: self.a.clone(),
            b: self.b.clone(),
            q: self.q.clone(),
            r: self.r.clone(),
            t: terminal.t.clone(),
            horizon: self.horizon,
            bounds: self.bounds.clone(),
            terminal: terminal.ellipsoid.clone(),
            x_ref: self.x_ref.clone(),
            u_ref: self.u_ref.clone(),
        }
    }
}

pub mod three_mass {
    //! Three objects in a row joined by springs, outer ones also tied to walls.
    //! Forces act on the first and last object. Positions are in decimetres,
    //! velocities in m/s.

    pub const OUTER_MASS: f64 = 1.0;
    pub const CENTRAL_MASS: f64 = 0.5;
    pub const SPRING: f64 = 2.0;
    pub const SAMPLE_TIME: f64 = 0.2;
    pub const HORIZON: usize = 10;
    pub const RHO: f64 = 15.0;
    pub const POSITION_MIN: f64 = -10.0;
    pub const POSITION_MAX: f64 = 3.0;
    pub const FORCE_MAX: f64 = 0.8;
    pub const X_REF: [f64; 6] = [2.5, 2.5, 2.5, 0.0, 0.0, 0.0];
    pub const U_REF: [f64; 2] = [0.5, 0.5];
    pub const Q_DIAG: [f64; 6] = [15.0, 15.0, 15.0, 1.0, 1.0, 1.0];
    pub const R_DIAG: [f64; 2] = [0.1, 0.1];
    /// Index of the central object's position in the state.
    pub const CENTRAL_POSITION: usize = 1;
}

/// Continuous-time `(A_c, B_c)` of the three-mass chain.
pub fn three_mass_continuous() -> (Matrix, Matrix) {
    use three_mass::*;
    let masses = [OUTER_MASS, CENTRAL_MASS, OUTER_MASS];
    // dm → m on spring deflections
    let k = SPRING / 10.0;
    let mut ac = Matrix::zeros(6, 6);
    for i in 0..3 {
        ac[(i, 3 + i)] = 10.0;
    }
    // every object sees two springs: walls at both ends, neighbours inside
    for i in 0..3 {
        ac[(3 + i, i)] = -2.0 * k / masses[i];
        if i > 0 {
            ac[(3 + i, i - 1)] = k / masses[i];
        }
        if i < 2 {
            ac[(3 + i, i + 1)] = k / masses[i];
        }
    }
    let mut bc = Matrix::zeros(6, 2);
    bc[(3, 0)] = 1.0 / masses[0];
    bc[(5, 1)] = 1.0 / masses[2];
    (ac, bc)
}

/// Discretised plant and problem skeleton for the three-mass benchmark.
pub fn build_three_mass_model() -> Result<(PlantModel, MpcSkeleton)> {
    use three_mass::*;
    let (ac, bc) = three_mass_continuous();
    let (a, b) = zoh_discretize(&ac, &bc, SAMPLE_TIME)?;
    let plant = PlantModel {
        a: a.clone(),
        b: b.clone(),
        state_labels: ["p1 [dm]", "p2 [dm]", "p3 [dm]", "v1 [m/s]", "v2 [m/s]", "v3 [m/s]"]
            .map(String::from)
            .to_vec(),
        input_labels: ["F_f [N]", "F_l [N]"].map(String::from).to_vec(),
        ts: SAMPLE_TIME,
    };
    let inf = f64::INFINITY;
    let x_lo = [POSITION_MIN, POSITION_MIN, POSITION_MIN, -inf, -inf, -inf];
    let x_hi = [POSITION_MAX, POSITION_MAX, POSITION_MAX, inf, inf, inf];
    let skeleton = MpcSkeleton {
        a,
        b,
        q: Matrix::from_diag(&Q_DIAG),
        r: Matrix::from_diag(&R_DIAG),
        horizon: HORIZON,
        bounds: StageBounds::uniform(&x_lo, &x_hi, &[-FORCE_MAX; 2], &[FORCE_MAX; 2], HORIZON),
        x_ref: X_REF.to_vec(),
        u_ref: U_REF.to_vec(),
    };
    Ok((plant, skeleton))
}

/// Full benchmark: plant, problem with fixed-shape terminal set, and the
/// terminal ingredients used.
pub fn three_mass_case_study() -> Result<(PlantModel, MpcProblem, TerminalIngredients)> {
    let (plant, skeleton) = build_three_mass_model()?;
    let terminal = skeleton.build_terminal()?;
    let problem = skeleton.complete(&terminal);
    Ok((plant, problem, terminal))
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub t: usize,
    pub x: Vec<f64>,
    pub u: Vec<f64>,
    pub iterations: usize,
    pub r_p: f64,
    pub r_d: f64,
    pub solve_ms: f64,
    pub status: SolveStatus,
    pub terminal_active: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ClosedLoopLog {
    pub records: Vec<StepRecord>,
    /// State after the last applied input.
    pub final_state: Vec<f64>,
}

impl ClosedLoopLog {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Writes `t,x1..xn,u1..um,iters,rp,rd,solve_ms,terminal_active`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let (n, m) = match self.records.first() {
            Some(r) => (r.x.len(), r.u.len()),
            None => (self.final_state.len(), 0),
        };
        let mut header = vec!["t".to_string()];
        header.extend((1..=n).map(|i| format!("x{i}")));
        header.extend((1..=m).map(|i| format!("u{i}")));
        header.extend(["iters", "rp", "rd", "solve_ms", "terminal_active"].map(String::from));
        writeln!(w, "{}", header.join(","))?;
        for r in &self.records {
            let mut fields = vec![r.t.to_string()];
            fields.extend(r.x.iter().chain(&r.u).map(|v| fmt_float(*v)));
            fields.push(r.iterations.to_string());
            fields.extend([r.r_p, r.r_d, r.solve_ms].map(fmt_float));
            fields.push(r.terminal_active.to_string());
            writeln!(w, "{}", fields.join(","))?;
        }
        Ok(())
    }
}

/// 17 significant digits.
fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// Runs `steps` sample times from `x0`, applying the first input of every
/// solution to the plant. Non-converged solves are logged, not fatal.
pub fn closed_loop_simulate(
    problem: &MpcProblem,
    offline: &OfflineData,
    plant: &PlantModel,
    x0: &[f64],
    steps: usize,
    settings: &SolverSettings,
) -> Result<ClosedLoopLog> {
    if x0.len() != plant.a.rows() {
        return Err(Error::Dimension(format!("x0 has length {}, expected {}", x0.len(), plant.a.rows())));
    }
    let mut solver = AdmmSolver::new(problem, offline, *settings);
    let mut x = x0.to_vec();
    let mut records = Vec::with_capacity(steps);
    for t in 0..steps {
        let start = Instant::now();
        let result = solver.solve(&x)?;
        let solve_ms = start.elapsed().as_secs_f64() * 1e3;
        if !result.converged() {
            log::warn!("step {t}: solver stopped at max_iter (r_p={:e})", result.residuals.primal);
        }
        let next = plant.step(&x, &result.u_apply);
        records.push(StepRecord {
            t,
            x: std::mem::replace(&mut x, next),
            u: result.u_apply,
            iterations: result.iterations,
            r_p: result.residuals.primal,
            r_d: result.residuals.dual,
            solve_ms,
            status: result.status,
            terminal_active: result.terminal_active,
        });
    }
    Ok(ClosedLoopLog {
        records,
        final_state: x,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OrderStats {
    pub average: f64,
    /// Lower median for even counts.
    pub median: f64,
    pub max: f64,
    pub min: f64,
}

impl OrderStats {
    pub fn of(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyLog);
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        Ok(Self {
            average: sorted.iter().sum::<f64>() / sorted.len() as f64,
            median: sorted[(sorted.len() - 1) / 2],
            max: sorted[sorted.len() - 1],
            min: sorted[0],
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RunStats {
    pub steps: usize,
    pub converged: usize,
    pub iterations: OrderStats,
    pub solve_ms: OrderStats,
}

pub fn summarize_stats(log: &ClosedLoopLog) -> Result<RunStats> {
    let iters: Vec<f64> = log.records.iter().map(|r| r.iterations as f64).collect();
    let times: Vec<f64> = log.records.iter().map(|r| r.solve_ms).collect();
    Ok(RunStats {
        steps: log.len(),
        converged: log.records.iter().filter(|r| r.status == SolveStatus::Converged).count(),
        iterations: OrderStats::of(&iters)?,
        solve_ms: OrderStats::of(&times)?,
    })
}
