//! Bulk potentials, the nonlinear energy `E₁ₕ`, and the modified energy `ℰ_h`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{m_tensor, GridFunction, Mat, QTensorField, ScalarField, SymTensorField};
use crate::operators::norms::{grad_norm_sq, inner_unchecked, integral, lap_norm_sq};
use crate::operators::stencil::hessian;

/// Physical constants and scheme parameters.
///
/// Defaults are the standard 2D coupled test case (`s₊ = √(−2A/C) = 1`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelParams {
    #[serde(rename = "K")]
    pub k: f64,
    #[serde(rename = "A")]
    pub nem_a: f64,
    #[serde(rename = "B")]
    pub nem_b: f64,
    #[serde(rename = "C")]
    pub nem_c: f64,
    #[serde(rename = "a")]
    pub sm_a: f64,
    #[serde(rename = "b")]
    pub sm_b: f64,
    #[serde(rename = "c")]
    pub sm_c: f64,
    #[serde(rename = "B0")]
    pub b0: f64,
    pub q: f64,
    pub s_plus: f64,
    pub kappa1: f64,
    pub kappa2: f64,
    pub eta0: f64,
    pub dim: usize,
    pub coupled: bool,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            k: 0.1,
            nem_a: -1.0,
            nem_b: 0.0,
            nem_c: 2.0,
            sm_a: -5.0,
            sm_b: 0.0,
            sm_c: 5.0,
            b0: 0.7e-4,
            q: 5.0,
            s_plus: 1.0,
            kappa1: 8.0,
            kappa2: 8.0,
            eta0: 0.95,
            dim: 2,
            coupled: true,
        }
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("C", self.nem_c),
            ("c", self.sm_c),
            ("B0", self.b0),
            ("s_plus", self.s_plus),
            ("kappa1", self.kappa1),
            ("kappa2", self.kappa2),
            ("K", self.k),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::param(name, format!("must be positive, got {v}")));
            }
        }
        for (name, v) in [("A", self.nem_a), ("B", self.nem_b), ("a", self.sm_a), ("b", self.sm_b), ("q", self.q)] {
            if !v.is_finite() {
                return Err(Error::param(name, "must be finite"));
            }
        }
        if !(0.0..=1.0).contains(&self.eta0) {
            return Err(Error::param("eta0", format!("must lie in [0, 1], got {}", self.eta0)));
        }
        if self.dim != 2 && self.dim != 3 {
            return Err(Error::param("dim", format!("must be 2 or 3, got {}", self.dim)));
        }
        if self.dim == 2 && self.nem_b != 0.0 {
            return Err(Error::param("B", "the cubic invariant vanishes in 2D; set B = 0"));
        }
        if self.coupled && self.dim == 2 && !(self.nem_a < 0.0) {
            return Err(Error::param("A", "coupled 2D model needs A < 0 for a nematic equilibrium"));
        }
        Ok(())
    }

    /// `√(−2A/C)`, the 2D equilibrium order parameter.
    pub fn equilibrium_s_plus(&self) -> Option<f64> {
        let v = -2.0 * self.nem_a / self.nem_c;
        (v > 0.0).then(|| v.sqrt())
    }
}

fn tr_sq(m: &Mat, d: usize) -> f64 {
    let mut s = 0.0;
    for row in m.iter().take(d) {
        for x in row.iter().take(d) {
            s += x * x;
        }
    }
    s
}

fn tr_cube(m: &Mat, d: usize) -> f64 {
    let mut s = 0.0;
    for i in 0..d {
        for j in 0..d {
            for k in 0..d {
                s += m[i][j] * m[j][k] * m[k][i];
            }
        }
    }
    s
}

/// Nematic bulk density `(A/2)trQ² − (B/3)trQ³ + (C/4)(trQ²)²`; the cubic term only in 3D.
pub fn f_bn(q: &QTensorField, p: &ModelParams) -> ScalarField {
    let g = *q.grid();
    let d = g.dim();
    let mut out = ScalarField::zeros(g);
    for (idx, v) in out.data.iter_mut().enumerate() {
        let m = q.matrix(idx);
        let t2 = tr_sq(&m, d);
        let cubic = if d == 3 { p.nem_b / 3.0 * tr_cube(&m, d) } else { 0.0 };
        *v = p.nem_a / 2.0 * t2 - cubic + p.nem_c / 4.0 * t2 * t2;
    }
    out
}

/// Smectic bulk density `(a/2)u² + (b/3)u³ + (c/4)u⁴`.
pub fn f_s(u: &ScalarField, p: &ModelParams) -> ScalarField {
    u.map(|x| {
        let x2 = x * x;
        p.sm_a / 2.0 * x2 + p.sm_b / 3.0 * x2 * x + p.sm_c / 4.0 * x2 * x2
    })
}

/// `M u` with `M = Q/s₊ + I/d`.
pub(crate) fn m_times_u(m: &SymTensorField, u: &ScalarField) -> SymTensorField {
    m.map_components(|c| c.zip_with(u, |a, b| a * b))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct E1Breakdown {
    pub bulk_nematic: f64,
    pub bulk_smectic: f64,
    /// `2B₀q²⟨D²u, Mu⟩`
    pub coupling_cross: f64,
    /// `B₀q⁴‖Mu‖²`
    pub coupling_quad: f64,
}

impl E1Breakdown {
    pub fn total(&self) -> f64 {
        self.bulk_nematic + self.bulk_smectic + self.coupling_cross + self.coupling_quad
    }
}

/// The nonlinear energy `E₁ₕ` term by term. The decoupled model drops both coupling terms.
pub fn e1_discrete(q: &QTensorField, u: &ScalarField, p: &ModelParams) -> Result<E1Breakdown> {
    q.grid().check_same(u.grid())?;
    let mut out = E1Breakdown {
        bulk_nematic: integral(&f_bn(q, p)),
        bulk_smectic: integral(&f_s(u, p)),
        ..Default::default()
    };
    if p.coupled {
        let mu = m_times_u(&m_tensor(q, p.s_plus)?, u);
        let q2 = p.q * p.q;
        out.coupling_cross = 2.0 * p.b0 * q2 * inner_unchecked(&hessian(u), &mu);
        out.coupling_quad = p.b0 * q2 * q2 * inner_unchecked(&mu, &mu);
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EnergyReport {
    /// `K/2‖∇_h Q‖² + B₀‖Δ_h u‖²`
    pub e0: f64,
    pub elastic: f64,
    pub smectic_elastic: f64,
    pub e1: f64,
    pub breakdown: E1Breakdown,
    pub s: f64,
    /// `exp(s − E₁ₕ)`; `None` when it would overflow.
    pub g: Option<f64>,
    /// `ℰ_h = E0 + s`
    pub modified: f64,
}

/// Quadratic part `K/2‖∇_h Q‖² + B₀‖Δ_h u‖²`, split into its two terms.
pub fn quadratic_energy(q: &QTensorField, u: &ScalarField, p: &ModelParams) -> (f64, f64) {
    (p.k / 2.0 * grad_norm_sq(q), p.b0 * lap_norm_sq(u))
}

pub fn modified_energy(q: &QTensorField, u: &ScalarField, s: f64, p: &ModelParams) -> Result<EnergyReport> {
    let breakdown = e1_discrete(q, u, p)?;
    Ok(report_from_parts(q, u, s, breakdown, p))
}

pub(crate) fn report_from_parts(
    q: &QTensorField,
    u: &ScalarField,
    s: f64,
    breakdown: E1Breakdown,
    p: &ModelParams,
) -> EnergyReport {
    let (elastic, smectic_elastic) = quadratic_energy(q, u, p);
    let e0 = elastic + smectic_elastic;
    let e1 = breakdown.total();
    let diff = s - e1;
    EnergyReport {
        e0,
        elastic,
        smectic_elastic,
        e1,
        breakdown,
        s,
        g: (diff <= crate::variations::G_EXPONENT_LIMIT).then(|| diff.exp()),
        modified: e0 + s,
    }
}
