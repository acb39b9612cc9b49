//! Functions of the linear operators, applied by diagonalizing the periodic
//! stencils with the DFT.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::fields::{GridFunction, PeriodicGrid, ScalarField};

use super::functions::{phi1_neg, q1_fn, q_fn};

/// n-dimensional complex DFT built from 1-D plans, one axis at a time.
pub struct Transform {
    grid: PeriodicGrid,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Transform {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Transform").field("grid", &self.grid).finish()
    }
}

impl Transform {
    pub fn new(grid: PeriodicGrid) -> Self {
        let mut planner = FftPlanner::new();
        let n = grid.nodes_per_axis();
        Transform { grid, forward: planner.plan_fft_forward(n), inverse: planner.plan_fft_inverse(n) }
    }

    pub fn grid(&self) -> &PeriodicGrid {
        &self.grid
    }

    pub fn forward(&self, f: &ScalarField) -> Vec<Complex64> {
        let mut data: Vec<Complex64> = f.data.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        self.along_axes(&mut data, self.forward.as_ref());
        data
    }

    /// Normalized inverse; the imaginary part (roundoff only) is dropped.
    pub fn inverse(&self, mut data: Vec<Complex64>) -> ScalarField {
        self.along_axes(&mut data, self.inverse.as_ref());
        let scale = 1.0 / self.grid.len() as f64;
        let out = data.into_iter().map(|c| c.re * scale).collect();
        ScalarField::from_vec(self.grid, out).expect("length matches grid")
    }

    fn along_axes(&self, data: &mut [Complex64], fft: &dyn Fft<f64>) {
        let n = self.grid.nodes_per_axis();
        let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
        let mut line = vec![Complex64::default(); n];
        for axis in 0..self.grid.dim() {
            let stride = self.grid.stride(axis);
            if stride == 1 {
                fft.process_with_scratch(data, &mut scratch);
                continue;
            }
            let block = n * stride;
            for start in (0..data.len()).step_by(block) {
                for inner in 0..stride {
                    let base = start + inner;
                    for (k, c) in line.iter_mut().enumerate() {
                        *c = data[base + k * stride];
                    }
                    fft.process_with_scratch(&mut line, &mut scratch);
                    for (k, c) in line.iter().enumerate() {
                        data[base + k * stride] = *c;
                    }
                }
            }
        }
    }
}

/// Per-mode eigenvalue of `Δ_h`: `−(4/h²) Σ_axes sin²(π m/J)`.
pub fn laplacian_symbol(grid: &PeriodicGrid) -> Vec<f64> {
    let n = grid.nodes_per_axis();
    let h = grid.spacing();
    let axis_part: Vec<f64> = (0..n)
        .map(|m| {
            let s = (std::f64::consts::PI * m as f64 / n as f64).sin();
            -4.0 / (h * h) * s * s
        })
        .collect();
    (0..grid.len())
        .map(|idx| (0..grid.dim()).map(|axis| axis_part[grid.coord(idx, axis)]).sum())
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum OperatorKind {
    /// `−KΔ_h`, shifted by `gκ₁`.
    Elastic { k: f64 },
    /// `2B₀Δ_h²`, shifted by `gκ₂`.
    Biharmonic { b0: f64 },
}

/// The g-independent part of a linear operator: its symbol and a DFT plan.
#[derive(Debug)]
pub struct OperatorSymbol {
    kind: OperatorKind,
    lap: Vec<f64>,
    base: Vec<f64>,
    transform: Transform,
}

impl OperatorSymbol {
    pub fn new(grid: PeriodicGrid, kind: OperatorKind) -> Result<Arc<Self>> {
        let lap = laplacian_symbol(&grid);
        let base = match kind {
            OperatorKind::Elastic { k } => {
                if !(k > 0.0) {
                    return Err(Error::param("K", "must be positive"));
                }
                lap.iter().map(|l| -k * l).collect()
            }
            OperatorKind::Biharmonic { b0 } => {
                if !(b0 > 0.0) {
                    return Err(Error::param("B0", "must be positive"));
                }
                lap.iter().map(|l| 2.0 * b0 * l * l).collect()
            }
        };
        Ok(Arc::new(OperatorSymbol { kind, lap, base, transform: Transform::new(grid) }))
    }

    pub fn grid(&self) -> &PeriodicGrid {
        self.transform.grid()
    }

    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    pub fn lap_symbol(&self) -> &[f64] {
        &self.lap
    }

    pub fn transform(&self) -> &Transform {
        &self.transform
    }

    /// Tabulates the shifted operator `base + gκ` at step size `tau`.
    pub fn kernel(self: &Arc<Self>, g: f64, kappa: f64, tau: f64) -> Result<SpectralKernel> {
        if !(kappa > 0.0) {
            return Err(Error::param("kappa", "stabilizer must be positive"));
        }
        if !(g > 0.0) || !g.is_finite() {
            return Err(Error::param("g", "relaxation factor must be positive and finite"));
        }
        if !(tau >= 0.0) || !tau.is_finite() {
            return Err(Error::param("tau", "must be non-negative and finite"));
        }
        let shift = g * kappa;
        let eigen: Vec<f64> = self.base.iter().map(|b| b + shift).collect();
        let n = eigen.len();
        let (mut exp, mut phi1, mut q, mut q1) =
            (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
        for &lam in &eigen {
            let z = tau * lam;
            exp.push((-z).exp());
            phi1.push(phi1_neg(z));
            q.push(q_fn(z));
            q1.push(q1_fn(z));
        }
        Ok(SpectralKernel { symbol: Arc::clone(self), shift, tau, eigen, exp, phi1, q, q1 })
    }
}

/// Builds a fresh symbol and tabulates it once.
pub fn build_kernel(grid: PeriodicGrid, kind: OperatorKind, g: f64, kappa: f64, tau: f64) -> Result<SpectralKernel> {
    OperatorSymbol::new(grid, kind)?.kernel(g, kappa, tau)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KernelFn {
    /// `e^{−τλ}`
    Exp,
    /// `φ₁(−τλ)`
    Phi1,
}

/// Spectral weight `w(λ)` for `⟨w(𝓛)U, U⟩_h`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Weight {
    Identity,
    Operator,
    Q,
    Q1,
    /// `Q(τλ)·λ`
    QL,
    /// `Q(τλ)²`, i.e. `‖Q(τ𝓛)U‖²`.
    QSquared,
}

#[derive(Clone, Debug)]
pub struct SpectralKernel {
    symbol: Arc<OperatorSymbol>,
    shift: f64,
    tau: f64,
    eigen: Vec<f64>,
    exp: Vec<f64>,
    phi1: Vec<f64>,
    q: Vec<f64>,
    q1: Vec<f64>,
}

impl SpectralKernel {
    pub fn grid(&self) -> &PeriodicGrid {
        self.symbol.grid()
    }

    pub fn symbol(&self) -> &Arc<OperatorSymbol> {
        &self.symbol
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// `gκ`.
    pub fn shift(&self) -> f64 {
        self.shift
    }

    pub fn eigen(&self) -> &[f64] {
        &self.eigen
    }

    pub fn table(&self, which: KernelFn) -> &[f64] {
        match which {
            KernelFn::Exp => &self.exp,
            KernelFn::Phi1 => &self.phi1,
        }
    }

    pub fn q_table(&self) -> &[f64] {
        &self.q
    }

    pub fn q1_table(&self) -> &[f64] {
        &self.q1
    }

    fn weight(&self, which: Weight, m: usize) -> f64 {
        match which {
            Weight::Identity => 1.0,
            Weight::Operator => self.eigen[m],
            Weight::Q => self.q[m],
            Weight::Q1 => self.q1[m],
            Weight::QL => self.q[m] * self.eigen[m],
            Weight::QSquared => self.q[m] * self.q[m],
        }
    }

    fn check<F: GridFunction>(&self, f: &F) {
        assert_eq!(f.grid(), self.grid(), "kernel and field live on different grids");
    }

    fn per_mode<F: GridFunction>(&self, f: &F, mut op: impl FnMut(usize, Complex64) -> Complex64) -> F {
        self.check(f);
        let tr = self.symbol.transform();
        f.map_components(|c| {
            let mut hat = tr.forward(c);
            for (m, v) in hat.iter_mut().enumerate() {
                *v = op(m, *v);
            }
            tr.inverse(hat)
        })
    }

    /// `e^{−τ𝓛} f` or `φ₁(−τ𝓛) f`, componentwise for tensors.
    pub fn apply<F: GridFunction>(&self, which: KernelFn, f: &F) -> F {
        let table = self.table(which);
        self.per_mode(f, |m, v| v * table[m])
    }

    /// `𝓛 f` through the symbol.
    pub fn apply_operator<F: GridFunction>(&self, f: &F) -> F {
        self.per_mode(f, |m, v| v * self.eigen[m])
    }

    /// `e^{−τ𝓛} x + τ φ₁(−τ𝓛) n` in one transform pass.
    pub fn etd_update<F: GridFunction>(&self, x: &F, n: &F) -> F {
        self.check(x);
        self.check(n);
        let tr = self.symbol.transform();
        let mut n_comps = n.components().iter();
        x.map_components(|xc| {
            let nc = n_comps.next().expect("same component layout");
            let (mut xh, nh) = (tr.forward(xc), tr.forward(nc));
            for (m, v) in xh.iter_mut().enumerate() {
                *v = *v * self.exp[m] + nh[m] * (self.tau * self.phi1[m]);
            }
            tr.inverse(xh)
        })
    }

    /// Solves `Q(τ𝓛)(X − x)/τ + 𝓛X = n` mode by mode.
    pub fn implicit_update<F: GridFunction>(&self, x: &F, n: &F) -> F {
        self.check(x);
        self.check(n);
        assert!(self.tau > 0.0, "implicit form needs tau > 0");
        let tr = self.symbol.transform();
        let mut n_comps = n.components().iter();
        x.map_components(|xc| {
            let nc = n_comps.next().expect("same component layout");
            let (mut xh, nh) = (tr.forward(xc), tr.forward(nc));
            for (m, v) in xh.iter_mut().enumerate() {
                let a = self.q[m] / self.tau;
                *v = (*v * a + nh[m]) / (a + self.eigen[m]);
            }
            tr.inverse(xh)
        })
    }

    /// `⟨w(𝓛)f, f⟩_h` by Parseval; tensor entries contracted over all `d²` slots.
    pub fn weighted_norm<F: GridFunction>(&self, which: Weight, f: &F) -> f64 {
        self.check(f);
        let tr = self.symbol.transform();
        let hats: Vec<Vec<Complex64>> = f.components().iter().map(|c| tr.forward(c)).collect();
        let mut total = 0.0;
        for &(a, b, w) in f.metric() {
            let s: f64 = hats[a]
                .iter()
                .zip(&hats[b])
                .enumerate()
                .map(|(m, (x, y))| self.weight(which, m) * (x * y.conj()).re)
                .sum();
            total += w * s;
        }
        total * f.grid().cell_volume() / f.grid().len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::QTensorField;
    use crate::operators::norms::{grad_norm_sq, inner, lap_norm_sq};
    use crate::operators::stencil::{biharmonic, laplacian};
    use crate::sampling::{random_q, random_scalar, rng};

    fn elastic(grid: PeriodicGrid, g: f64, tau: f64) -> SpectralKernel {
        build_kernel(grid, OperatorKind::Elastic { k: 0.1 }, g, 8.0, tau).unwrap()
    }

    #[test]
    fn round_trip_is_identity() {
        let mut r = rng(11);
        for (d, n) in [(2, 16), (3, 6), (2, 5)] {
            let g = PeriodicGrid::periodic_box(d, n).unwrap();
            let tr = Transform::new(g);
            let f = random_scalar(&mut r, g, 1.0);
            let back = tr.inverse(tr.forward(&f));
            assert!(back.difference(&f).max_abs() < 1e-13 * f.max_abs());
        }
    }

    #[test]
    fn zero_mode_kernel() {
        let g = PeriodicGrid::periodic_box(2, 8).unwrap();
        let k = elastic(g, 1.5, 0.3);
        assert_eq!(k.symbol().lap_symbol()[0], 0.0);
        assert_eq!(k.eigen()[0], 1.5 * 8.0);
        assert_eq!(k.table(KernelFn::Exp)[0], (-0.3f64 * 12.0).exp());
        let c = ScalarField::constant(g, 2.5);
        let out = k.apply(KernelFn::Exp, &c);
        let expected = 2.5 * (-0.3f64 * 12.0).exp();
        assert!(out.data.iter().all(|v| (v - expected).abs() < 1e-14));
    }

    #[test]
    fn limits_at_tau_zero() {
        let g = PeriodicGrid::periodic_box(2, 8).unwrap();
        let k = elastic(g, 1.0, 0.0);
        assert!(k.table(KernelFn::Phi1).iter().all(|&v| v == 1.0));
        assert!(k.q_table().iter().all(|&v| v == 1.0));
        assert!(k.q1_table().iter().all(|&v| v == 1.0));
        let f = random_q(&mut rng(12), g, 1.0);
        let out = k.apply(KernelFn::Exp, &f);
        assert!(out.difference(&f).max_abs_entry() < 1e-14);
    }

    #[test]
    fn two_node_symbol_by_hand() {
        // J = 2: per-axis symbol is 0 or −4/h², with h = π.
        let g = PeriodicGrid::periodic_box(2, 2).unwrap();
        let h2 = std::f64::consts::PI.powi(2);
        assert_eq!(g.spacing().powi(2), h2);
        let lap = laplacian_symbol(&g);
        let expected = [0.0, -4.0 / h2, -4.0 / h2, -8.0 / h2];
        for (a, b) in lap.iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
        let k = build_kernel(g, OperatorKind::Biharmonic { b0: 0.5 }, 1.0, 2.0, 1.0).unwrap();
        for (m, e) in expected.iter().enumerate() {
            assert!((k.eigen()[m] - (e * e + 2.0)).abs() < 1e-14);
        }
    }

    #[test]
    fn stabilizer_must_be_positive() {
        let g = PeriodicGrid::periodic_box(2, 4).unwrap();
        assert!(build_kernel(g, OperatorKind::Elastic { k: 0.1 }, 1.0, 0.0, 0.1).is_err());
        assert!(build_kernel(g, OperatorKind::Elastic { k: 0.1 }, 0.0, 1.0, 0.1).is_err());
        assert!(build_kernel(g, OperatorKind::Elastic { k: 0.0 }, 1.0, 1.0, 0.1).is_err());
        assert!(build_kernel(g, OperatorKind::Elastic { k: 0.1 }, 1.0, 1.0, -1.0).is_err());
    }

    #[test]
    fn single_mode_eigenfunction() {
        let g = PeriodicGrid::periodic_box(2, 32).unwrap();
        let h = g.spacing();
        let k = elastic(g, 1.0, 0.25);
        let f = ScalarField::from_fn(g, |x| (3.0 * x[0]).sin());
        let lam = 0.1 * (4.0 / (h * h)) * (1.5 * h).sin().powi(2) + 8.0;
        let out = k.apply(KernelFn::Exp, &f);
        let phi = k.apply(KernelFn::Phi1, &f);
        for idx in 0..g.len() {
            assert!((out.data[idx] - (-0.25 * lam).exp() * f.data[idx]).abs() < 1e-14);
            assert!((phi.data[idx] - phi1_neg(0.25 * lam) * f.data[idx]).abs() < 1e-14);
        }
    }

    #[test]
    fn spectral_matches_stencil() {
        let mut r = rng(13);
        for d in [2, 3] {
            let g = PeriodicGrid::periodic_box(d, 8).unwrap();
            let f = random_scalar(&mut r, g, 1.0);
            let e = build_kernel(g, OperatorKind::Elastic { k: 0.7 }, 1.0, 3.0, 0.1).unwrap();
            let stencil = laplacian(&f).scaled(-0.7).axpy(3.0, &f);
            let spectral = e.apply_operator(&f);
            assert!(spectral.difference(&stencil).max_abs() < 1e-12 * stencil.max_abs());
            let b = build_kernel(g, OperatorKind::Biharmonic { b0: 0.3 }, 2.0, 1.0, 0.1).unwrap();
            let stencil = biharmonic(&f).scaled(0.6).axpy(2.0, &f);
            let spectral = b.apply_operator(&f);
            assert!(spectral.difference(&stencil).max_abs() < 1e-12 * stencil.max_abs());
        }
    }

    #[test]
    fn exp_is_first_order_near_identity() {
        let g = PeriodicGrid::periodic_box(2, 16).unwrap();
        let f = random_q(&mut rng(14), g, 1.0);
        let tau = 1e-8;
        let k = elastic(g, 1.0, tau);
        let approx = f.axpy(-tau, &k.apply_operator(&f));
        let err = k.apply(KernelFn::Exp, &f).difference(&approx).max_abs_entry();
        let lmax = k.eigen().iter().cloned().fold(0.0, f64::max);
        assert!(err < (tau * lmax).powi(2) + 1e-14);
    }

    #[test]
    fn parseval_norms() {
        let mut r = rng(15);
        let g = PeriodicGrid::periodic_box(3, 6).unwrap();
        let q = random_q(&mut r, g, 1.0);
        let k = build_kernel(g, OperatorKind::Elastic { k: 0.4 }, 1.0, 2.0, 0.5).unwrap();
        let l2 = inner(&q, &q).unwrap();
        assert!((k.weighted_norm(Weight::Identity, &q) - l2).abs() < 1e-12 * l2);
        let energy = 0.4 * grad_norm_sq(&q) + 2.0 * l2;
        assert!((k.weighted_norm(Weight::Operator, &q) - energy).abs() < 1e-12 * energy);
        let u = random_scalar(&mut r, g, 1.0);
        let b = build_kernel(g, OperatorKind::Biharmonic { b0: 0.2 }, 1.0, 2.0, 0.5).unwrap();
        let energy = 0.4 * lap_norm_sq(&u) + 2.0 * inner(&u, &u).unwrap();
        assert!((b.weighted_norm(Weight::Operator, &u) - energy).abs() < 1e-12 * energy);
        assert_eq!(k.weighted_norm(Weight::Q1, &QTensorField::zeros(g)), 0.0);
    }

    #[test]
    fn q_norm_tends_to_l2() {
        let g = PeriodicGrid::periodic_box(2, 16).unwrap();
        let u = random_scalar(&mut rng(16), g, 1.0);
        let l2 = inner(&u, &u).unwrap();
        let mut prev = f64::INFINITY;
        for tau in [1e-2, 1e-3, 1e-4] {
            let k = elastic(g, 1.0, tau);
            let gap = (l2 - k.weighted_norm(Weight::Q, &u)).abs() / l2;
            let lmax = k.eigen().iter().cloned().fold(0.0, f64::max);
            assert!(gap <= tau * lmax);
            assert!(gap < prev);
            prev = gap;
        }
    }

    #[test]
    fn implicit_and_etd_updates_agree() {
        let mut r = rng(17);
        let g = PeriodicGrid::periodic_box(2, 16).unwrap();
        for tau in [1e-3, 1e-1, 10.0] {
            let k = elastic(g, 1.3, tau);
            let x = random_q(&mut r, g, 1.0);
            let n = random_q(&mut r, g, 1.0);
            let a = k.etd_update(&x, &n);
            let b = k.implicit_update(&x, &n);
            assert!(a.difference(&b).max_abs_entry() < 1e-12 * a.max_abs_entry());
        }
    }
}
