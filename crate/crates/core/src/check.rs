//! Randomized invariant battery shared by the `check` command and the test suites.
//!
//! Every function draws from the caller's generator, so a seed fixes the report.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::energy::{e1_discrete, ModelParams};
use crate::error::Result;
use crate::fields::{GridFunction, PeriodicGrid, QTensorField, ScalarField};
use crate::operators::norms::{grad_inner, inner, norms};
use crate::operators::spectral::{OperatorKind, OperatorSymbol, SpectralKernel, Weight};
use crate::operators::stencil::{double_divergence, hessian, laplacian, mixed_central};
use crate::sampling::{random_q, random_scalar, random_sym, smooth_q, smooth_scalar, uniform, Rng};
use crate::stepper::{Scheme, SimState, StepReport, Stepper, XiBranch};
use crate::variations::variations;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Outcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Outcome {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        Outcome { name: name.to_string(), passed, detail }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {:<28} {}", if self.passed { "PASS" } else { "FAIL" }, self.name, self.detail)
    }
}

/// Sizes of the randomized samples.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CheckConfig {
    pub sbp_pairs: usize,
    pub chain_fields: usize,
    pub gradient_states: usize,
    pub equivalence_states: usize,
    pub equivalence_taus: Vec<f64>,
    pub feasibility_steps: usize,
    pub feasibility_taus: Vec<f64>,
}

impl Default for CheckConfig {
    fn default() -> Self {
        CheckConfig {
            sbp_pairs: 100,
            chain_fields: 1000,
            gradient_states: 50,
            equivalence_states: 20,
            equivalence_taus: vec![1e-3, 1e-1, 10.0],
            feasibility_steps: 100,
            feasibility_taus: vec![2f64.powi(-8), 0.1, 1.0, 10.0],
        }
    }
}

fn grid(d: usize, n: usize) -> PeriodicGrid {
    PeriodicGrid::periodic_box(d, n).expect("valid grid")
}

/// `|⟨Δ_h U, V⟩ + [∇_h U, ∇_h V]| ≤ 1e-12 ‖U‖_{H¹}‖V‖_{H¹}`.
pub fn summation_by_parts(rng: &mut Rng, pairs: usize) -> Outcome {
    let mut worst: f64 = 0.0;
    for k in 0..pairs {
        let g = if k % 2 == 0 { grid(2, 16) } else { grid(3, 6) };
        let u = random_scalar(rng, g, 1.0);
        let v = random_scalar(rng, g, 1.0);
        let lhs = inner(&laplacian(&u), &v).expect("same grid") + grad_inner(&u, &v).expect("same grid");
        worst = worst.max(lhs.abs() / (norms(&u).h1 * norms(&v).h1));
    }
    Outcome::new("summation_by_parts", worst <= 1e-12, format!("max scaled residual {worst:.3e} over {pairs} pairs"))
}

/// Mixed central differences are self-adjoint; the double divergence is the Hessian's adjoint.
pub fn adjoint_pairs(rng: &mut Rng, pairs: usize) -> Outcome {
    let mut worst_mixed: f64 = 0.0;
    let mut worst_ddiv: f64 = 0.0;
    for k in 0..pairs {
        let g = if k % 2 == 0 { grid(2, 12) } else { grid(3, 6) };
        let u = random_scalar(rng, g, 1.0);
        let v = random_scalar(rng, g, 1.0);
        for (a, b) in [(0, 1), (0, 2), (1, 2)] {
            if b >= g.dim() {
                continue;
            }
            let l = inner(&mixed_central(&u, a, b), &v).expect("same grid");
            let r = inner(&u, &mixed_central(&v, a, b)).expect("same grid");
            worst_mixed = worst_mixed.max((l - r).abs() / l.abs().max(r.abs()).max(f64::MIN_POSITIVE));
        }
        let t = random_sym(rng, g, 1.0);
        let l = inner(&double_divergence(&t), &v).expect("same grid");
        let r = inner(&t, &hessian(&v)).expect("same grid");
        let scale = inner(&t, &t).expect("same grid").sqrt() * norms(&v).h2;
        worst_ddiv = worst_ddiv.max((l - r).abs() / scale);
    }
    Outcome::new(
        "adjoint_pairs",
        worst_mixed <= 1e-12 && worst_ddiv <= 1e-12,
        format!("mixed {worst_mixed:.3e}, double divergence {worst_ddiv:.3e} over {pairs} pairs"),
    )
}

/// The six chains of weighted-norm inequalities, as `(lhs, rhs)` pairs that must satisfy `lhs ≤ rhs`.
// [0..3]: ‖Q U‖² ≤ ‖U‖²_Q ≤ ‖U‖² ≤ ‖U‖²_{Q₁}
// [3]:    ⟨Q𝓛U, U⟩ ≤ ⟨𝓛U, U⟩, lhs also ≥ 0
// [4]:    ‖U‖²_{Q₁} ≤ ⟨𝓛U, U⟩, lhs also ≥ 0
fn chain_pairs<F: GridFunction>(k: &SpectralKernel, f: &F) -> [(f64, f64); 5] {
    let qsq = k.weighted_norm(Weight::QSquared, f);
    let q = k.weighted_norm(Weight::Q, f);
    let id = k.weighted_norm(Weight::Identity, f);
    let q1 = k.weighted_norm(Weight::Q1, f);
    let ql = k.weighted_norm(Weight::QL, f);
    let l = k.weighted_norm(Weight::Operator, f);
    [(qsq, q), (q, id), (id, q1), (ql, l), (q1, l)]
}

fn violates(lhs: f64, rhs: f64, tol: f64) -> bool {
    lhs > rhs + tol * rhs.abs().max(lhs.abs())
}

/// Counts violations of the six chains on `fields` random fields. The draws keep
/// `g κ ≥ 2` and `τ ≤ 1`, where the third and sixth chains are guaranteed.
pub fn norm_chains(rng: &mut Rng, fields: usize, tol: f64) -> Result<Outcome> {
    let p = ModelParams::default();
    let symbols = [
        (OperatorSymbol::new(grid(2, 16), OperatorKind::Elastic { k: p.k })?, OperatorSymbol::new(grid(2, 16), OperatorKind::Biharmonic { b0: p.b0 })?),
        (OperatorSymbol::new(grid(3, 6), OperatorKind::Elastic { k: p.k })?, OperatorSymbol::new(grid(3, 6), OperatorKind::Biharmonic { b0: p.b0 })?),
    ];
    let mut counts = [0usize; 6];
    for k in 0..fields {
        let (sq, su) = &symbols[k % 2];
        let g = *sq.grid();
        let gf = uniform(rng, 0.5, 2.0);
        let tau = uniform(rng, 1e-4, 1.0);
        let kq = sq.kernel(gf, p.kappa1, tau)?;
        let ku = su.kernel(gf, p.kappa2, tau)?;
        let q = if k % 4 < 2 { random_q(rng, g, 1.0) } else { smooth_q(rng, g, 1.0, 3) };
        let u = if k % 4 < 2 { random_scalar(rng, g, 1.0) } else { smooth_scalar(rng, g, 1.0, 3) };
        for (offset, pairs) in [(0, chain_pairs(&kq, &q)), (3, chain_pairs(&ku, &u))] {
            let chain1 = pairs[..3].iter().any(|&(a, b)| violates(a, b, tol));
            let chain2 = violates(pairs[3].0, pairs[3].1, tol) || pairs[3].0 < 0.0;
            let chain3 = violates(pairs[4].0, pairs[4].1, tol) || pairs[4].0 < 0.0;
            counts[offset] += chain1 as usize;
            counts[offset + 1] += chain2 as usize;
            counts[offset + 2] += chain3 as usize;
        }
    }
    let total: usize = counts.iter().sum();
    Ok(Outcome::new(
        "norm_inequality_chains",
        total == 0,
        format!("violations per chain {counts:?} over {fields} fields (tol {tol:e})"),
    ))
}

/// Central-difference directional derivatives of `E₁ₕ` against `⟨μ, δ⟩`.
pub fn gradient_checks(rng: &mut Rng, states: usize, eps: f64, tol: f64) -> Result<Outcome> {
    let base = ModelParams::default();
    let sets = [
        ("standard", base, grid(2, 8)),
        ("strong-2d", ModelParams { b0: 0.05, q: 2.0, ..base }, grid(2, 8)),
        ("strong-3d", ModelParams { b0: 0.05, q: 2.0, dim: 3, nem_b: 0.8, ..base }, grid(3, 5)),
    ];
    let mut worst: f64 = 0.0;
    let mut failures = 0;
    for (_, p, g) in &sets {
        for k in 0..states {
            let (q, u, dq, du) = if k % 2 == 0 {
                (smooth_q(rng, *g, 0.4, 3), smooth_scalar(rng, *g, 0.5, 3), smooth_q(rng, *g, 1.0, 3), smooth_scalar(rng, *g, 1.0, 3))
            } else {
                (random_q(rng, *g, 0.4), random_scalar(rng, *g, 0.5), random_q(rng, *g, 1.0), random_scalar(rng, *g, 1.0))
            };
            let v = variations(&q, &u, p)?;
            let e = |a: &QTensorField, b: &ScalarField| -> Result<f64> { Ok(e1_discrete(a, b, p)?.total()) };
            let fd_q = (e(&q.axpy(eps, &dq), &u)? - e(&q.axpy(-eps, &dq), &u)?) / (2.0 * eps);
            let fd_u = (e(&q, &u.axpy(eps, &du))? - e(&q, &u.axpy(-eps, &du))?) / (2.0 * eps);
            let an_q = inner(&v.mu_q, &dq)?;
            let an_u = inner(&v.mu_u, &du)?;
            for rel in [(fd_q - an_q).abs() / an_q.abs(), (fd_u - an_u).abs() / an_u.abs()] {
                worst = worst.max(rel);
                failures += (!(rel <= tol)) as usize;
            }
        }
    }
    let names: Vec<&str> = sets.iter().map(|s| s.0).collect();
    Ok(Outcome::new(
        "gradient_consistency",
        failures == 0,
        format!("max rel error {worst:.3e} over {states} states x {names:?} (eps {eps:e}, tol {tol:e})"),
    ))
}

fn rel_diff_field<F: GridFunction>(a: &F, b: &F) -> f64 {
    a.difference(b).max_abs_entry() / a.max_abs_entry().max(b.max_abs_entry()).max(f64::MIN_POSITIVE)
}

/// ETD and implicit single steps from the same random states.
pub fn scheme_equivalence(rng: &mut Rng, states: usize, taus: &[f64], tol: f64) -> Result<Outcome> {
    let p = ModelParams::default();
    let g = grid(2, 32);
    let stepper = Stepper::new(g, p, Scheme::Etd)?;
    let mut worst: f64 = 0.0;
    for _ in 0..states {
        let q = smooth_q(rng, g, 0.6, 6);
        let u = smooth_scalar(rng, g, 0.4, 6);
        let e1 = e1_discrete(&q, &u, &p)?.total();
        let state = SimState::new(q, u, e1 + uniform(rng, -0.5, 0.5), &p)?;
        for &tau in taus {
            let (a, _) = stepper.step_as(Scheme::Etd, &state, tau)?;
            let (b, _) = stepper.step_as(Scheme::Implicit, &state, tau)?;
            let ds = (a.s() - b.s()).abs() / a.s().abs().max(b.s().abs()).max(f64::MIN_POSITIVE);
            worst = worst.max(rel_diff_field(a.q(), b.q())).max(rel_diff_field(a.u(), b.u())).max(ds);
        }
    }
    Ok(Outcome::new(
        "scheme_equivalence",
        worst <= tol,
        format!("max rel difference {worst:.3e} over {states} states x {} step sizes", taus.len()),
    ))
}

/// `ξ ∈ [0, 1]` and `s^{n+1} − s̃ ≤ η₀τ𝓡 + 1e-12` on every report; both branches must occur.
pub fn relaxation_feasibility<'a>(reports: impl IntoIterator<Item = &'a StepReport>, eta0: f64) -> Outcome {
    let (mut n, mut bad, mut tracking, mut budget) = (0, 0, 0, 0);
    let mut worst: f64 = f64::NEG_INFINITY;
    for r in reports {
        n += 1;
        let slack = r.s - r.s_tilde - eta0 * r.tau * r.r;
        worst = worst.max(slack);
        if !(0.0..=1.0).contains(&r.xi) || slack > 1e-12 {
            bad += 1;
        }
        match r.branch {
            XiBranch::Budget => budget += 1,
            XiBranch::Tracking | XiBranch::Guard => tracking += 1,
        }
    }
    Outcome::new(
        "relaxation_feasibility",
        bad == 0 && tracking > 0 && budget > 0,
        format!("{bad} infeasible of {n} steps, max slack {worst:.3e}, branches tracking={tracking} budget={budget}"),
    )
}

/// Runs the standard setup at each step size and collects every report.
pub fn standard_runs(p: &ModelParams, g: PeriodicGrid, taus: &[f64], steps: usize) -> Result<Vec<(f64, Vec<StepReport>)>> {
    let stepper = Stepper::new(g, *p, Scheme::Etd)?;
    taus.iter()
        .map(|&tau| {
            let init = crate::harness::standard_initial_state(g, p)?;
            Ok((tau, stepper.run_collect(init, tau, steps)?.1))
        })
        .collect()
}

/// Full battery; the generator is seeded once.
pub fn run_battery(cfg: &CheckConfig, seed: u64, p: &ModelParams, g: PeriodicGrid) -> Result<Vec<Outcome>> {
    let mut rng = crate::sampling::rng(seed);
    let mut out = vec![
        summation_by_parts(&mut rng, cfg.sbp_pairs),
        adjoint_pairs(&mut rng, cfg.sbp_pairs / 4 + 1),
        norm_chains(&mut rng, cfg.chain_fields, 1e-12)?,
        gradient_checks(&mut rng, cfg.gradient_states, 1e-5, 1e-6)?,
        scheme_equivalence(&mut rng, cfg.equivalence_states, &cfg.equivalence_taus, 1e-10)?,
    ];
    let runs = standard_runs(p, g, &cfg.feasibility_taus, cfg.feasibility_steps)?;
    out.push(relaxation_feasibility(runs.iter().flat_map(|(_, r)| r), p.eta0));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_battery_passes_and_is_reproducible() {
        let cfg = CheckConfig {
            sbp_pairs: 8,
            chain_fields: 40,
            gradient_states: 4,
            equivalence_states: 2,
            feasibility_steps: 20,
            ..Default::default()
        };
        let p = ModelParams::default();
        let g = grid(2, 32);
        let a = run_battery(&cfg, 7, &p, g).unwrap();
        for o in &a[..5] {
            assert!(o.passed, "{o}");
        }
        let b = run_battery(&cfg, 7, &p, g).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn chain_detector_sees_a_bad_regime() {
        // τ large and gκ small break the third chain; make sure it is detected.
        let p = ModelParams::default();
        let s = OperatorSymbol::new(grid(2, 16), OperatorKind::Elastic { k: p.k }).unwrap();
        let k = s.kernel(0.01, 1.0, 50.0).unwrap();
        let u = QTensorField::zeros(grid(2, 16)).map_components(|_| ScalarField::constant(grid(2, 16), 1.0));
        let pairs = chain_pairs(&k, &u);
        assert!(violates(pairs[4].0, pairs[4].1, 1e-12));
    }

    #[test]
    fn feasibility_flags_missing_branch() {
        let r = StepReport {
            step: 1,
            t: 0.1,
            tau: 0.1,
            e0: 0.0,
            e1h: 0.0,
            s: 0.0,
            s_tilde: 0.0,
            xi: 0.0,
            branch: XiBranch::Tracking,
            g: 1.0,
            r: 0.0,
            energy_before: 0.0,
            energy_after: 0.0,
            max_abs_q_f: 0.0,
            max_abs_u: 0.0,
        };
        assert!(!relaxation_feasibility([&r], 0.95).passed);
        let r2 = StepReport { branch: XiBranch::Budget, ..r };
        assert!(relaxation_feasibility([&r, &r2], 0.95).passed);
        let r3 = StepReport { xi: 1.5, ..r2 };
        assert!(!relaxation_feasibility([&r, &r3], 0.95).passed);
    }
}
