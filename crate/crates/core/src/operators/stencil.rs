//! Periodic finite-difference stencils.

use crate::error::{Error, Result};
use crate::fields::{GridFunction, ScalarField, SymTensorField};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DiffMode {
    Forward,
    Backward,
    Central,
}

/// First difference along `axis`: `D⁺`, `D⁻` or `Dᶜ`.
pub fn diff(f: &ScalarField, axis: usize, mode: DiffMode) -> Result<ScalarField> {
    let dim = f.grid().dim();
    if axis >= dim {
        return Err(Error::Axis { axis, dim });
    }
    Ok(diff_along(f, axis, mode))
}

pub(crate) fn diff_along(f: &ScalarField, axis: usize, mode: DiffMode) -> ScalarField {
    let g = *f.grid();
    let h = g.spacing();
    let mut out = ScalarField::zeros(g);
    let src = &f.data;
    for (idx, v) in out.data.iter_mut().enumerate() {
        *v = match mode {
            DiffMode::Forward => (src[g.neighbor(idx, axis, 1)] - src[idx]) / h,
            DiffMode::Backward => (src[idx] - src[g.neighbor(idx, axis, -1)]) / h,
            DiffMode::Central => {
                (src[g.neighbor(idx, axis, 1)] - src[g.neighbor(idx, axis, -1)]) / (2.0 * h)
            }
        };
    }
    out
}

/// `D⁺_k D⁻_k f` as the compact three-point stencil.
pub fn second_diff(f: &ScalarField, axis: usize) -> ScalarField {
    let g = *f.grid();
    let inv_h2 = 1.0 / (g.spacing() * g.spacing());
    let mut out = ScalarField::zeros(g);
    let src = &f.data;
    for (idx, v) in out.data.iter_mut().enumerate() {
        let (p, m) = (g.neighbor(idx, axis, 1), g.neighbor(idx, axis, -1));
        *v = (src[p] - 2.0 * src[idx] + src[m]) * inv_h2;
    }
    out
}

/// Mixed central difference `Dᶜ_k Dᶜ_l f`.
pub fn mixed_central(f: &ScalarField, k: usize, l: usize) -> ScalarField {
    diff_along(&diff_along(f, l, DiffMode::Central), k, DiffMode::Central)
}

fn scalar_laplacian(f: &ScalarField) -> ScalarField {
    // Accumulated axis by axis so that tr(hessian(f)) == laplacian(f) bitwise.
    let g = *f.grid();
    let mut out = ScalarField::zeros(g);
    for axis in 0..g.dim() {
        let dd = second_diff(f, axis);
        for (o, x) in out.data.iter_mut().zip(&dd.data) {
            *o += x;
        }
    }
    out
}

/// `Δ_h = Σ_k D⁺_k D⁻_k`, applied componentwise to tensor fields.
pub fn laplacian<F: GridFunction>(f: &F) -> F {
    f.map_components(scalar_laplacian)
}

/// `Δ_h² = Δ_h Δ_h`.
pub fn biharmonic<F: GridFunction>(f: &F) -> F {
    laplacian(&laplacian(f))
}

/// Discrete Hessian: `D⁺_k D⁻_k` on the diagonal, `Dᶜ_{k,l}` off the diagonal.
pub fn hessian(f: &ScalarField) -> SymTensorField {
    let g = *f.grid();
    let d = g.dim();
    let mut t = SymTensorField::zeros(g);
    for k in 0..d {
        *t.entry_mut(k, k) = second_diff(f, k);
        for l in k + 1..d {
            *t.entry_mut(k, l) = mixed_central(f, k, l);
        }
    }
    t
}

/// Adjoint of [`hessian`] under the discrete inner products:
/// `Σ_k D⁺_k D⁻_k T^kk + Σ_{k≠l} Dᶜ_{k,l} T^kl`.
pub fn double_divergence(t: &SymTensorField) -> ScalarField {
    let g = *t.grid();
    let d = g.dim();
    let mut out = ScalarField::zeros(g);
    for k in 0..d {
        let diag = second_diff(t.entry(k, k), k);
        for (o, x) in out.data.iter_mut().zip(&diag.data) {
            *o += x;
        }
        for l in k + 1..d {
            let off = mixed_central(t.entry(k, l), k, l);
            for (o, x) in out.data.iter_mut().zip(&off.data) {
                *o += 2.0 * x;
            }
        }
    }
    out
}
