//! Discrete variational derivatives of `E₁ₕ`, the stabilized nonlinear terms,
//! the relaxation factor, and the maximum-bound stabilizer.

use crate::energy::{m_times_u, ModelParams};
use crate::error::{Error, Result};
use crate::fields::{m_tensor, GridFunction, Mat, QTensorField, ScalarField, SymTensorField};
use crate::operators::stencil::{double_divergence, hessian};

/// Largest admissible `s − E₁ₕ` before `exp` is treated as divergence.
pub const G_EXPONENT_LIMIT: f64 = 700.0;

#[derive(Clone, Debug)]
pub struct VariationPair {
    pub mu_q: QTensorField,
    pub mu_u: ScalarField,
}

fn dev_in_place(m: &mut Mat, d: usize) {
    let shift = (0..d).map(|i| m[i][i]).sum::<f64>() / d as f64;
    for (i, row) in m.iter_mut().enumerate().take(d) {
        row[i] -= shift;
    }
}

fn matmul(a: &Mat, b: &Mat, d: usize) -> Mat {
    let mut out = [[0.0; 3]; 3];
    for i in 0..d {
        for j in 0..d {
            out[i][j] = (0..d).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

fn mu_q_with(q: &QTensorField, u: &ScalarField, hess: &SymTensorField, p: &ModelParams) -> QTensorField {
    let g = *q.grid();
    let d = g.dim();
    let q2 = p.q * p.q;
    let c_cross = if p.coupled { 2.0 * p.b0 * q2 / p.s_plus } else { 0.0 };
    let c_quad = if p.coupled { 2.0 * p.b0 * q2 * q2 / (p.s_plus * p.s_plus) } else { 0.0 };
    let mut out = QTensorField::zeros(g);
    for idx in 0..g.len() {
        let m = q.matrix(idx);
        let mut sq = matmul(&m, &m, d);
        let t2: f64 = (0..d).map(|i| sq[i][i]).sum();
        dev_in_place(&mut sq, d);
        let uu = u.data[idx];
        let mut forcing = hess.matrix(idx);
        dev_in_place(&mut forcing, d);
        let lin = p.nem_a + p.nem_c * t2 + c_quad * uu * uu;
        let mut r = [[0.0; 3]; 3];
        for i in 0..d {
            for j in 0..d {
                r[i][j] = lin * m[i][j] - p.nem_b * sq[i][j] + c_cross * uu * forcing[i][j];
            }
        }
        out.set_matrix(idx, &r);
    }
    out
}

fn mu_u_with(q: &QTensorField, u: &ScalarField, hess: &SymTensorField, p: &ModelParams) -> Result<ScalarField> {
    let mut out = u.map(|x| p.sm_a * x + p.sm_b * x * x + p.sm_c * x * x * x);
    if !p.coupled {
        return Ok(out);
    }
    let m = m_tensor(q, p.s_plus)?;
    let q2 = p.q * p.q;
    let ddiv = double_divergence(&m_times_u(&m, u));
    for (idx, v) in out.data.iter_mut().enumerate() {
        let m_dd = m.contract_at(hess, idx);
        let m_sq = m.contract_at(&m, idx);
        *v += 2.0 * p.b0 * q2 * (m_dd + ddiv.data[idx]) + 2.0 * p.b0 * q2 * q2 * m_sq * u.data[idx];
    }
    Ok(out)
}

/// `μ_Q = AQ − B dev(Q²) + C trQ² Q + (2B₀q²/s₊) dev(u D²u) + 2B₀q⁴ u² Q / s₊²`.
pub fn mu_q(q: &QTensorField, u: &ScalarField, p: &ModelParams) -> Result<QTensorField> {
    q.grid().check_same(u.grid())?;
    Ok(mu_q_with(q, u, &hessian(u), p))
}

/// `μ_u = au + bu² + cu³ + 2B₀q²(M:D²u + ∇·∇·(Mu)) + 2B₀q⁴|M|²u`.
pub fn mu_u(q: &QTensorField, u: &ScalarField, p: &ModelParams) -> Result<ScalarField> {
    q.grid().check_same(u.grid())?;
    mu_u_with(q, u, &hessian(u), p)
}

/// Both variations with one shared Hessian.
pub fn variations(q: &QTensorField, u: &ScalarField, p: &ModelParams) -> Result<VariationPair> {
    q.grid().check_same(u.grid())?;
    let hess = hessian(u);
    Ok(VariationPair { mu_q: mu_q_with(q, u, &hess, p), mu_u: mu_u_with(q, u, &hess, p)? })
}

/// `g = exp(s − E₁ₕ)`.
pub fn g_factor(s: f64, e1h: f64) -> Result<f64> {
    let diff = s - e1h;
    if !diff.is_finite() || diff > G_EXPONENT_LIMIT {
        return Err(Error::Divergence {
            step: 0,
            reason: format!("relaxation exponent s - E1h = {diff:e} exceeds {G_EXPONENT_LIMIT}"),
        });
    }
    Ok(diff.exp())
}

/// `g(κ X − μ)`.
pub fn stabilized<F: GridFunction>(x: &F, mu: &F, g: f64, kappa: f64) -> F {
    x.zip_with(mu, |a, b| g * (kappa * a - b))
}

/// `N_Q = g(κ₁Q − μ_Q)`.
pub fn n_q(q: &QTensorField, u: &ScalarField, g: f64, p: &ModelParams) -> Result<QTensorField> {
    Ok(stabilized(q, &mu_q(q, u, p)?, g, p.kappa1))
}

/// `N_u = g(κ₂u − μ_u)`.
pub fn n_u(q: &QTensorField, u: &ScalarField, g: f64, p: &ModelParams) -> Result<ScalarField> {
    Ok(stabilized(u, &mu_u(q, u, p)?, g, p.kappa2))
}

/// `b₂ = 0`, `b₃ = |B|/√6`.
pub fn b_d(p: &ModelParams) -> f64 {
    if p.dim == 3 {
        p.nem_b.abs() / 6f64.sqrt()
    } else {
        0.0
    }
}

/// Coupling forcing `(2B₀q²/s₊) dev(u D²u)`.
pub fn coupling_forcing(u: &ScalarField, p: &ModelParams) -> QTensorField {
    if !p.coupled {
        return QTensorField::zeros(*u.grid());
    }
    let c = 2.0 * p.b0 * p.q * p.q / p.s_plus;
    let uh = hessian(u).map_components(|comp| comp.zip_with(u, |a, b| a * b));
    crate::fields::deviatoric(&uh).scaled(c)
}

/// `S = max |coupling forcing|_F`.
pub fn forcing_sup(u: &ScalarField, p: &ModelParams) -> f64 {
    crate::operators::norms::linf(&coupling_forcing(u, p))
}

/// `f_d(ξ) = −Aξ + b_dξ² − Cξ³ + S`.
pub fn f_d(p: &ModelParams, xi: f64, forcing: f64) -> f64 {
    -p.nem_a * xi + b_d(p) * xi * xi - p.nem_c * xi * xi * xi + forcing
}

/// Smallest `η ≥ q_sup` with `f_d(η) ≤ 0`.
pub fn eta_bound(p: &ModelParams, q_sup: f64, forcing: f64) -> f64 {
    let lo0 = q_sup.max(0.0);
    if f_d(p, lo0, forcing) <= 0.0 {
        return lo0;
    }
    let mut lo = lo0;
    let mut hi = lo0.max(1e-3);
    while f_d(p, hi, forcing) > 0.0 {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f_d(p, mid, forcing) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// `κ₀ = max{ sup Ã + Cη², max_{ξ∈[0,η]} (A − 2b_dξ + 3Cξ²) }` with
/// `Ã = A + 2B₀q⁴u²/s₊²` and `u_inf` bounding `|u|`.
///
/// The quadratic is convex, so its maximum over the interval sits at an endpoint.
pub fn kappa0_bound(p: &ModelParams, eta: f64, u_inf: f64) -> f64 {
    let coupling = if p.coupled { 2.0 * p.b0 * p.q.powi(4) * u_inf * u_inf / (p.s_plus * p.s_plus) } else { 0.0 };
    let first = p.nem_a + coupling + p.nem_c * eta * eta;
    let at_eta = p.nem_a - 2.0 * b_d(p) * eta + 3.0 * p.nem_c * eta * eta;
    first.max(p.nem_a.max(at_eta))
}
