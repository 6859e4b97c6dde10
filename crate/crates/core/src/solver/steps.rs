//! The individual updates of one ADMM iteration.
//!
//! All vectors are full `z`-shaped (`z∘` followed by `z_f = x_N`) unless
//! noted otherwise.

use crate::linalg::Matrix;
use crate::offline::OfflineData;
use crate::problem::Ellipsoid;

use super::Residuals;

/// `q̂ = q + (λ∘ − ρ v∘, P^{1/2} λ_f − ρ P v_f)`.
pub fn compute_qhat(q: &[f64], v: &[f64], lambda: &[f64], offline: &OfflineData, out: &mut [f64]) {
    let split = offline.layout().circ_len();
    let rho = offline.rho();
    for i in 0..split {
        out[i] = q[i] + lambda[i] - rho * v[i];
    }
    let out_f = &mut out[split..];
    out_f.copy_from_slice(&q[split..]);
    offline.p_half().gemv(1.0, &lambda[split..], 1.0, out_f);
    offline.rho_p().gemv(-1.0, &v[split..], 1.0, out_f);
}

/// Scratch buffers for [`z_update`].
#[derive(Debug, Clone)]
pub struct ZWorkspace {
    w: Vec<f64>,
    mu: Vec<f64>,
    rhs: Vec<f64>,
}

impl ZWorkspace {
    pub fn new(offline: &OfflineData) -> Self {
        let l = offline.layout();
        Self {
            w: vec![0.0; l.total_len()],
            mu: vec![0.0; l.eq_len()],
            rhs: vec![0.0; l.total_len()],
        }
    }

    /// Multiplier of `G z = b` from the last update.
    pub fn mu(&self) -> &[f64] {
        &self.mu
    }
}

/// Solves `min ½zᵀĤz + q̂ᵀz s.t. Gz = b` with `b = (b0, 0, …, 0)`:
/// `W μ = −(G Ĥ⁻¹ q̂ + b)`, then `z = −Ĥ⁻¹(Gᵀμ + q̂)`.
pub fn z_update(offline: &OfflineData, qhat: &[f64], b0: &[f64], ws: &mut ZWorkspace, z: &mut [f64]) {
    offline.apply_hhat_inv(qhat, &mut ws.w);
    offline.apply_g(&ws.w, &mut ws.mu);
    for (m, &b) in ws.mu.iter_mut().zip(b0) {
        *m += b;
    }
    ws.mu.iter_mut().for_each(|m| *m = -*m);
    offline.wc().solve_in_place(&mut ws.mu);
    offline.apply_g_tr(&ws.mu, &mut ws.rhs);
    for (r, &q) in ws.rhs.iter_mut().zip(qhat) {
        *r += q;
    }
    offline.apply_hhat_inv(&ws.rhs, z);
    z.iter_mut().for_each(|v| *v = -*v);
}

/// Componentwise `max(min(w, hi), lo)`.
pub fn project_box(w: &[f64], lo: &[f64], hi: &[f64]) -> Vec<f64> {
    w.iter().zip(lo).zip(hi).map(|((&x, &l), &h)| x.min(h).max(l)).collect()
}

/// Minimiser of `½‖v − a‖²_P` over `E(P, c, r)`: `a` itself when inside,
/// otherwise the radial scaling `c + r(a − c)/‖a − c‖_P`.
pub fn project_ellipsoid_weighted(a: &[f64], ell: &Ellipsoid) -> Vec<f64> {
    let mut out = a.to_vec();
    project_ellipsoid_in_place(&mut out, &ell.p, &ell.c, ell.r);
    out
}

#[inline]
pub(crate) fn project_ellipsoid_in_place(x: &mut [f64], p: &Matrix, c: &[f64], r: f64) {
    for (xi, ci) in x.iter_mut().zip(c) {
        *xi -= ci;
    }
    let quad = p.quad_form(x);
    let scale = if quad > r * r { r / quad.sqrt() } else { 1.0 };
    for (xi, ci) in x.iter_mut().zip(c) {
        *xi = scale * *xi + ci;
    }
}

/// `v∘ = clip(z∘ + λ∘/ρ)`, `v_f = Π_E(z_f + ρ⁻¹ P^{-1/2} λ_f)`.
pub fn v_update(
    z: &[f64],
    lambda: &[f64],
    offline: &OfflineData,
    lo: &[f64],
    hi: &[f64],
    ell: &Ellipsoid,
    v: &mut [f64],
) {
    let split = offline.layout().circ_len();
    let inv_rho = 1.0 / offline.rho();
    for i in 0..split {
        v[i] = (z[i] + inv_rho * lambda[i]).min(hi[i]).max(lo[i]);
    }
    let v_f = &mut v[split..];
    v_f.copy_from_slice(&z[split..]);
    offline.p_invhalf().gemv(inv_rho, &lambda[split..], 1.0, v_f);
    project_ellipsoid_in_place(v_f, &ell.p, &ell.c, ell.r);
}

/// `λ∘ += ρ(z∘ − v∘)`, `λ_f += ρ P^{1/2}(z_f − v_f)`.
pub fn dual_update(z: &[f64], v: &[f64], offline: &OfflineData, lambda: &mut [f64], scratch: &mut [f64]) {
    let split = offline.layout().circ_len();
    let rho = offline.rho();
    for i in 0..split {
        lambda[i] += rho * (z[i] - v[i]);
    }
    for (s, (a, b)) in scratch.iter_mut().zip(z[split..].iter().zip(&v[split..])) {
        *s = a - b;
    }
    offline.p_half().gemv(rho, scratch, 1.0, &mut lambda[split..]);
}

/// `r_p = ‖Cz + Dv‖_∞` (blockwise) and `r_d = ‖z − z_prev‖_∞`.
pub fn compute_residuals(z: &[f64], z_prev: &[f64], v: &[f64], offline: &OfflineData, scratch: &mut [f64]) -> Residuals {
    let split = offline.layout().circ_len();
    let mut primal = z[..split]
        .iter()
        .zip(&v[..split])
        .fold(0.0f64, |acc, (a, b)| acc.max((a - b).abs()));
    for (s, (a, b)) in scratch.iter_mut().zip(z[split..].iter().zip(&v[split..])) {
        *s = a - b;
    }
    let p_half = offline.p_half();
    for i in 0..p_half.rows() {
        let row: f64 = p_half.row(i).iter().zip(scratch.iter()).map(|(a, b)| a * b).sum();
        primal = primal.max(row.abs());
    }
    let dual = z.iter().zip(z_prev).fold(0.0f64, |acc, (a, b)| acc.max((a - b).abs()));
    Residuals { primal, dual }
}
