//! MPC problem data, static validation and the JSON problem file.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{min_eigenvalue, Matrix};

/// Default tolerance on `‖A x_r + B u_r − x_r‖_∞`.
pub const STEADY_STATE_TOL: f64 = 1e-8;

/// `E(P, c, r) = { x : (x − c)ᵀ P (x − c) ≤ r² }`
#[derive(Debug, Clone, PartialEq)]
pub struct Ellipsoid {
    pub p: Matrix,
    pub c: Vec<f64>,
    pub r: f64,
}

impl Ellipsoid {
    pub fn new(p: Matrix, c: Vec<f64>, r: f64) -> Self {
        Self { p, c, r }
    }

    pub fn dim(&self) -> usize {
        self.c.len()
    }

    /// `(x − c)ᵀ P (x − c)`
    pub fn quad(&self, x: &[f64]) -> f64 {
        let d: Vec<f64> = x.iter().zip(&self.c).map(|(a, b)| a - b).collect();
        self.p.quad_form(&d)
    }

    pub fn contains(&self, x: &[f64], rel_tol: f64) -> bool {
        self.quad(x) <= self.r * self.r * (1.0 + rel_tol)
    }

    /// `x` lies on the boundary within a relative tolerance on the radius.
    pub fn on_boundary(&self, x: &[f64], rel_tol: f64) -> bool {
        (self.quad(x).sqrt() - self.r).abs() <= rel_tol * self.r
    }
}

/// Per-step box bounds. State bounds cover steps `1..N-1`, input bounds
/// steps `0..N-1`. Infinite entries mean "unbounded".
#[derive(Debug, Clone, PartialEq)]
pub struct StageBounds {
    pub x_lo: Vec<Vec<f64>>,
    pub x_hi: Vec<Vec<f64>>,
    pub u_lo: Vec<Vec<f64>>,
    pub u_hi: Vec<Vec<f64>>,
}

impl StageBounds {
    pub fn uniform(x_lo: &[f64], x_hi: &[f64], u_lo: &[f64], u_hi: &[f64], horizon: usize) -> Self {
        let steps = horizon.saturating_sub(1);
        Self {
            x_lo: vec![x_lo.to_vec(); steps],
            x_hi: vec![x_hi.to_vec(); steps],
            u_lo: vec![u_lo.to_vec(); horizon],
            u_hi: vec![u_hi.to_vec(); horizon],
        }
    }

    /// Same bounds for another horizon, taking the first step's values.
    pub fn with_horizon(&self, horizon: usize) -> Self {
        let first = |v: &[Vec<f64>]| v.first().cloned().unwrap_or_default();
        Self::uniform(
            &first(&self.x_lo),
            &first(&self.x_hi),
            &first(&self.u_lo),
            &first(&self.u_hi),
            horizon,
        )
    }

    /// Bounds on `v∘ = (u_0, x_1, u_1, …, x_{N−1}, u_{N−1})`, flattened.
    pub fn v_circ_bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let mut lo = Vec::new();
        let mut hi = Vec::new();
        for i in 0..self.u_lo.len() {
            if i > 0 {
                lo.extend_from_slice(&self.x_lo[i - 1]);
                hi.extend_from_slice(&self.x_hi[i - 1]);
            }
            lo.extend_from_slice(&self.u_lo[i]);
            hi.extend_from_slice(&self.u_hi[i]);
        }
        (lo, hi)
    }
}

/// Index layout of the decision vector
/// `z = (u_0, x_1, u_1, …, x_{N−1}, u_{N−1}, x_N)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layout {
    pub n: usize,
    pub m: usize,
    pub horizon: usize,
}

impl Layout {
    pub fn new(n: usize, m: usize, horizon: usize) -> Self {
        Self { n, m, horizon }
    }

    /// Length of `z∘`.
    pub fn circ_len(&self) -> usize {
        self.horizon * (self.n + self.m) - self.n
    }

    pub fn total_len(&self) -> usize {
        self.horizon * (self.n + self.m)
    }

    /// Number of equality constraints (rows of `G`).
    pub fn eq_len(&self) -> usize {
        self.horizon * self.n
    }

    /// `u_i`, `i ∈ 0..N`.
    #[inline]
    pub fn u(&self, i: usize) -> Range<usize> {
        let s = i * (self.n + self.m);
        s..s + self.m
    }

    /// `x_i`, `i ∈ 1..=N` (`x_N` sits right after `z∘`).
    #[inline]
    pub fn x(&self, i: usize) -> Range<usize> {
        debug_assert!(i >= 1);
        let s = self.m + (i - 1) * (self.n + self.m);
        s..s + self.n
    }
}

/// Ingredients of the ellipsoid-terminal linear MPC problem.
#[derive(Debug, Clone, PartialEq)]
pub struct MpcProblem {
    pub a: Matrix,
    pub b: Matrix,
    pub q: Matrix,
    pub r: Matrix,
    pub t: Matrix,
    pub horizon: usize,
    pub bounds: StageBounds,
    pub terminal: Ellipsoid,
    pub x_ref: Vec<f64>,
    pub u_ref: Vec<f64>,
}

impl MpcProblem {
    pub fn n(&self) -> usize {
        self.a.rows()
    }

    pub fn m(&self) -> usize {
        self.b.cols()
    }

    pub fn layout(&self) -> Layout {
        Layout::new(self.n(), self.m(), self.horizon)
    }

    /// Whether `Q` and `R` are diagonal, which enables the componentwise fast path.
    pub fn costs_are_diagonal(&self) -> bool {
        self.q.is_diagonal() && self.r.is_diagonal()
    }

    pub fn with_horizon(&self, horizon: usize) -> Self {
        Self {
            horizon,
            bounds: self.bounds.with_horizon(horizon),
            ..self.clone()
        }
    }

    pub fn with_reference(&self, x_ref: Vec<f64>, u_ref: Vec<f64>) -> Self {
        Self {
            x_ref,
            u_ref,
            ..self.clone()
        }
    }

    /// Steady-state defect `‖A x_r + B u_r − x_r‖_∞`.
    pub fn steady_state_defect(&self) -> f64 {
        let mut next = self.a.mul_vec(&self.x_ref);
        self.b.gemv(1.0, &self.u_ref, 1.0, &mut next);
        next.iter().zip(&self.x_ref).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    /// Linear cost `q = −(R u_r, Q x_r, R u_r, …, Q x_r, R u_r, T x_r)`.
    pub fn linear_cost(&self) -> Vec<f64> {
        let layout = self.layout();
        let ru = self.r.mul_vec(&self.u_ref);
        let qx = self.q.mul_vec(&self.x_ref);
        let tx = self.t.mul_vec(&self.x_ref);
        let mut q = vec![0.0; layout.total_len()];
        for i in 0..self.horizon {
            for (d, s) in q[layout.u(i)].iter_mut().zip(&ru) {
                *d = -s;
            }
            if i > 0 {
                for (d, s) in q[layout.x(i)].iter_mut().zip(&qx) {
                    *d = -s;
                }
            }
        }
        for (d, s) in q[layout.x(self.horizon)].iter_mut().zip(&tx) {
            *d = -s;
        }
        q
    }

    pub fn validate(&self) -> ValidationReport {
        validate(self)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub field: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub step: Option<usize>,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, field: &str, step: Option<usize>, message: impl Into<String>) {
        self.violations.push(Violation {
            field: field.into(),
            step,
            message: message.into(),
        });
    }

    pub fn into_result(self) -> Result<()> {
        if self.is_ok() {
            Ok(())
        } else {
            let msg = self
                .violations
                .iter()
                .map(|v| match v.step {
                    Some(s) => format!("{} (step {}): {}", v.field, s, v.message),
                    None => format!("{}: {}", v.field, v.message),
                })
                .collect::<Vec<_>>()
                .join("; ");
            Err(Error::InvalidProblem(msg))
        }
    }
}

/// Reports every violated static invariant of `problem`.
pub fn validate(problem: &MpcProblem) -> ValidationReport {
    let mut report = ValidationReport::default();
    let n = problem.a.rows();
    let m = problem.b.cols();

    let shape = |mat: &Matrix, r: usize, c: usize| mat.rows() == r && mat.cols() == c;
    let mut dims_ok = true;
    let mut check_shape = |report: &mut ValidationReport, name: &str, mat: &Matrix, r: usize, c: usize| {
        if !shape(mat, r, c) {
            dims_ok = false;
            report.push(name, None, format!("expected {r}x{c}, got {}x{}", mat.rows(), mat.cols()));
        } else if !mat.is_finite() {
            dims_ok = false;
            report.push(name, None, "contains non-finite entries");
        }
    };
    check_shape(&mut report, "A", &problem.a, n, n);
    check_shape(&mut report, "B", &problem.b, n, m);
    check_shape(&mut report, "Q", &problem.q, n, n);
    check_shape(&mut report, "R", &problem.r, m, m);
    check_shape(&mut report, "T", &problem.t, n, n);
    check_shape(&mut report, "P", &problem.terminal.p, n, n);
    if n == 0 || m == 0 {
        dims_ok = false;
        report.push("B", None, "need at least one state and one input");
    }
    for (name, v, len) in [
        ("c", &problem.terminal.c, n),
        ("x_ref", &problem.x_ref, n),
        ("u_ref", &problem.u_ref, m),
    ] {
        if v.len() != len {
            dims_ok = false;
            report.push(name, None, format!("expected length {len}, got {}", v.len()));
        } else if v.iter().any(|x| !x.is_finite()) {
            dims_ok = false;
            report.push(name, None, "contains non-finite entries");
        }
    }
    if problem.horizon < 2 {
        report.push("N", None, format!("horizon must be at least 2, got {}", problem.horizon));
    }
    if !(problem.terminal.r > 0.0) || !problem.terminal.r.is_finite() {
        report.push("r", None, format!("radius must be positive and finite, got {}", problem.terminal.r));
    }

    check_bounds(&mut report, "x", &problem.bounds.x_lo, &problem.bounds.x_hi, problem.horizon.saturating_sub(1), n, 1);
    check_bounds(&mut report, "u", &problem.bounds.u_lo, &problem.bounds.u_hi, problem.horizon, m, 0);

    if !dims_ok {
        return report;
    }

    for (name, mat) in [("Q", &problem.q), ("R", &problem.r), ("T", &problem.t)] {
        check_psd(&mut report, name, mat, false);
    }
    check_psd(&mut report, "P", &problem.terminal.p, true);

    let defect = problem.steady_state_defect();
    if !(defect <= STEADY_STATE_TOL) {
        report.push(
            "x_ref",
            None,
            format!("(x_ref, u_ref) is not a steady state: defect {defect:e} > {STEADY_STATE_TOL:e}"),
        );
    }
    report
}

fn check_bounds(
    report: &mut ValidationReport,
    var: &str,
    lo: &[Vec<f64>],
    hi: &[Vec<f64>],
    steps: usize,
    len: usize,
    first_step: usize,
) {
    let lo_name = format!("{var}_lo");
    let hi_name = format!("{var}_hi");
    if lo.len() != steps || hi.len() != steps {
        report.push(
            &lo_name,
            None,
            format!("expected {steps} per-step bounds, got {} lower and {} upper", lo.len(), hi.len()),
        );
        return;
    }
    for (k, (l, h)) in lo.iter().zip(hi).enumerate() {
        let step = k + first_step;
        if l.len() != len || h.len() != len {
            report.push(&lo_name, Some(step), format!("bounds must have length {len}"));
            continue;
        }
        if l.iter().chain(h).any(|v| v.is_nan()) {
            report.push(&hi_name, Some(step), "NaN bound");
            continue;
        }
        if let Some(j) = (0..len).find(|&j| !(l[j] < h[j])) {
            report.push(
                &hi_name,
                Some(step),
                format!("lower bound {} not below upper bound {} (component {j})", l[j], h[j]),
            );
        }
    }
}

fn check_psd(report: &mut ValidationReport, name: &str, mat: &Matrix, definite: bool) {
    let scale = mat.max_abs().max(1.0);
    if !mat.is_symmetric(1e-12 * scale) {
        report.push(name, None, "not symmetric");
        return;
    }
    match min_eigenvalue(mat) {
        Ok(min) if definite && !(min > 1e-12 * scale) => {
            report.push(name, None, format!("not positive definite (min eigenvalue {min:e})"))
        }
        Ok(min) if !definite && min < -1e-12 * scale => {
            report.push(name, None, format!("not positive semidefinite (min eigenvalue {min:e})"))
        }
        Ok(_) => {}
        Err(e) => report.push(name, None, e.to_string()),
    }
}

// ---------------------------------------------------------------------------
// JSON problem file

/// Bounds in a problem file: one vector for every step, or one per step.
/// `null` entries are unbounded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BoundSpec {
    Uniform(Vec<Option<f64>>),
    PerStep(Vec<Vec<Option<f64>>>),
}

impl BoundSpec {
    fn expand(&self, steps: usize, unbounded: f64) -> Vec<Vec<f64>> {
        let fill = |v: &[Option<f64>]| v.iter().map(|x| x.unwrap_or(unbounded)).collect::<Vec<_>>();
        match self {
            BoundSpec::Uniform(v) => vec![fill(v); steps],
            BoundSpec::PerStep(vs) => vs.iter().map(|v| fill(v)).collect(),
        }
    }

    fn compress(steps: &[Vec<f64>]) -> Self {
        let opt = |v: &[f64]| v.iter().map(|x| x.is_finite().then_some(*x)).collect::<Vec<_>>();
        match steps.first() {
            Some(first) if steps.iter().all(|s| s == first) => BoundSpec::Uniform(opt(first)),
            _ => BoundSpec::PerStep(steps.iter().map(|s| opt(s)).collect()),
        }
    }
}

/// On-disk problem description. Matrices are row-major nested arrays.
/// `P`, `c`, `r` may be omitted when the terminal set is yet to be built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemFile {
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    pub b: Vec<Vec<f64>>,
    #[serde(rename = "Q")]
    pub q: Vec<Vec<f64>>,
    #[serde(rename = "R")]
    pub r_cost: Vec<Vec<f64>>,
    #[serde(rename = "T", default, skip_serializing_if = "Option::is_none")]
    pub t: Option<Vec<Vec<f64>>>,
    #[serde(rename = "N")]
    pub horizon: usize,
    pub x_lo: BoundSpec,
    pub x_hi: BoundSpec,
    pub u_lo: BoundSpec,
    pub u_hi: BoundSpec,
    #[serde(rename = "P", default, skip_serializing_if = "Option::is_none")]
    pub p: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    pub x_ref: Vec<f64>,
    pub u_ref: Vec<f64>,
}

impl ProblemFile {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json_pretty(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_problem(problem: &MpcProblem) -> Self {
        Self {
            a: problem.a.to_rows(),
            b: problem.b.to_rows(),
            q: problem.q.to_rows(),
            r_cost: problem.r.to_rows(),
            t: Some(problem.t.to_rows()),
            horizon: problem.horizon,
            x_lo: BoundSpec::compress(&problem.bounds.x_lo),
            x_hi: BoundSpec::compress(&problem.bounds.x_hi),
            u_lo: BoundSpec::compress(&problem.bounds.u_lo),
            u_hi: BoundSpec::compress(&problem.bounds.u_hi),
            p: Some(problem.terminal.p.to_rows()),
            c: Some(problem.terminal.c.clone()),
            r: Some(problem.terminal.r),
            x_ref: problem.x_ref.clone(),
            u_ref: problem.u_ref.clone(),
        }
    }

    pub fn bounds(&self) -> StageBounds {
        let steps = self.horizon.saturating_sub(1);
        StageBounds {
            x_lo: self.x_lo.expand(steps, f64::NEG_INFINITY),
            x_hi: self.x_hi.expand(steps, f64::INFINITY),
            u_lo: self.u_lo.expand(self.horizon, f64::NEG_INFINITY),
            u_hi: self.u_hi.expand(self.horizon, f64::INFINITY),
        }
    }

    pub fn has_terminal(&self) -> bool {
        self.t.is_some() && self.p.is_some() && self.c.is_some() && self.r.is_some()
    }

    /// Builds the problem; fails if the terminal ingredients are missing or a
    /// matrix is ragged. Semantic checks are left to [`validate`].
    pub fn to_problem(&self) -> Result<MpcProblem> {
        let missing = |k: &str| Error::InvalidProblem(format!("missing key `{k}`"));
        Ok(MpcProblem {
            a: Matrix::from_rows(&self.a)?,
            b: Matrix::from_rows(&self.b)?,
            q: Matrix::from_rows(&self.q)?,
            r: Matrix::from_rows(&self.r_cost)?,
            t: Matrix::from_rows(self.t.as_ref().ok_or_else(|| missing("T"))?)?,
            horizon: self.horizon,
            bounds: self.bounds(),
            terminal: Ellipsoid::new(
                Matrix::from_rows(self.p.as_ref().ok_or_else(|| missing("P"))?)?,
                self.c.clone().ok_or_else(|| missing("c"))?,
                self.r.ok_or_else(|| missing("r"))?,
            ),
            x_ref: self.x_ref.clone(),
            u_ref: self.u_ref.clone(),
        })
    }
}
