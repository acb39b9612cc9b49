//! Discrete inner products and the l², l∞, H¹, H² norms.

use crate::error::Result;
use crate::fields::{frobenius_pointwise, GridFunction, ScalarField};

use super::stencil::{diff_along, laplacian, DiffMode};

/// `⟨f, g⟩_h = h^d Σ f g`, with tensors contracted over all `d²` entries.
pub fn inner<F: GridFunction>(f: &F, g: &F) -> Result<f64> {
    f.grid().check_same(g.grid())?;
    Ok(inner_unchecked(f, g))
}

pub(crate) fn inner_unchecked<F: GridFunction>(f: &F, g: &F) -> f64 {
    let (x, y) = (f.components(), g.components());
    let sum: f64 = f
        .metric()
        .iter()
        .map(|&(a, b, w)| w * dot(&x[a].data, &y[b].data))
        .sum();
    sum * f.grid().cell_volume()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `[∇_h f, ∇_h g]_h = Σ_k ⟨D⁺_k f, D⁺_k g⟩_h`.
pub fn grad_inner<F: GridFunction>(f: &F, g: &F) -> Result<f64> {
    f.grid().check_same(g.grid())?;
    let mut total = 0.0;
    for axis in 0..f.grid().dim() {
        let df = f.map_components(|c| diff_along(c, axis, DiffMode::Forward));
        let dg = g.map_components(|c| diff_along(c, axis, DiffMode::Forward));
        total += inner_unchecked(&df, &dg);
    }
    Ok(total)
}

/// `‖∇_h f‖²`.
pub fn grad_norm_sq<F: GridFunction>(f: &F) -> f64 {
    grad_inner(f, f).expect("same grid")
}

/// `‖Δ_h f‖²`.
pub fn lap_norm_sq<F: GridFunction>(f: &F) -> f64 {
    let l = laplacian(f);
    inner_unchecked(&l, &l)
}

/// `max_nodes |f|_F` (plain max-abs for scalars).
pub fn linf<F: GridFunction>(f: &F) -> f64 {
    frobenius_pointwise(f).max_abs()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Norms {
    pub l2: f64,
    pub linf: f64,
    pub h1: f64,
    pub h2: f64,
}

pub fn norms<F: GridFunction>(f: &F) -> Norms {
    let l2_sq = inner_unchecked(f, f);
    let h1_sq = l2_sq + grad_norm_sq(f);
    let h2_sq = h1_sq + lap_norm_sq(f);
    Norms { l2: l2_sq.sqrt(), linf: linf(f), h1: h1_sq.sqrt(), h2: h2_sq.sqrt() }
}

/// `⟨f, 1⟩_h`.
pub fn integral(f: &ScalarField) -> f64 {
    f.data.iter().sum::<f64>() * f.grid().cell_volume()
}
