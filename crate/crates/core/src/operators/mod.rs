//! Finite-difference operators, discrete norms, and the spectral backend.

pub mod functions;
pub mod norms;
pub mod spectral;
pub mod stencil;

pub use functions::{phi1_neg, q1_fn, q_fn};
pub use norms::{grad_inner, grad_norm_sq, inner, integral, lap_norm_sq, linf, norms, Norms};
pub use spectral::{build_kernel, KernelFn, OperatorKind, OperatorSymbol, SpectralKernel, Transform, Weight};
pub use stencil::{biharmonic, diff, double_divergence, hessian, laplacian, mixed_central, second_diff, DiffMode};
