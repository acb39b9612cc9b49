//! Seeded random fields and states for invariant checks.
//!
//! Everything random in the crate is drawn from a single [`ChaCha8Rng`], so a
//! seed reproduces a report exactly.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::fields::{GridFunction, PeriodicGrid, QTensorField, ScalarField, SymTensorField};

pub type Rng = ChaCha8Rng;

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(rng: &mut Rng, lo: f64, hi: f64) -> f64 {
    rng.random_range(lo..hi)
}

/// Independent uniform values in `[-amp, amp]` at every node.
pub fn random_scalar(rng: &mut Rng, grid: PeriodicGrid, amp: f64) -> ScalarField {
    let data = (0..grid.len()).map(|_| rng.random_range(-amp..amp)).collect();
    ScalarField::from_vec(grid, data).expect("length matches grid")
}

/// Random traceless tensor with entries in `[-amp, amp]`.
pub fn random_q(rng: &mut Rng, grid: PeriodicGrid, amp: f64) -> QTensorField {
    QTensorField::zeros(grid).map_components(|_| random_scalar(rng, grid, amp))
}

pub fn random_sym(rng: &mut Rng, grid: PeriodicGrid, amp: f64) -> SymTensorField {
    SymTensorField::zeros(grid).map_components(|_| random_scalar(rng, grid, amp))
}

/// Sum of a few random low-frequency Fourier modes, scaled to max-abs `amp`.
pub fn smooth_scalar(rng: &mut Rng, grid: PeriodicGrid, amp: f64, max_wavenumber: i32) -> ScalarField {
    let d = grid.dim();
    let mut f = ScalarField::zeros(grid);
    for _ in 0..6 {
        let mut k = [0.0; 3];
        for kk in k.iter_mut().take(d) {
            *kk = rng.random_range(-max_wavenumber..=max_wavenumber) as f64;
        }
        let (a, phase) = (rng.random_range(-1.0..1.0), rng.random_range(0.0..std::f64::consts::TAU));
        let mode = ScalarField::from_fn(grid, |x| a * (k[0] * x[0] + k[1] * x[1] + k[2] * x[2] + phase).cos());
        f = f.axpy(1.0, &mode);
    }
    let m = f.max_abs();
    if m > 0.0 {
        f.scaled(amp / m)
    } else {
        f
    }
}

pub fn smooth_q(rng: &mut Rng, grid: PeriodicGrid, amp: f64, max_wavenumber: i32) -> QTensorField {
    QTensorField::zeros(grid).map_components(|_| smooth_scalar(rng, grid, amp, max_wavenumber))
}
