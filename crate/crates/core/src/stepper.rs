//! One relaxed exponential-SAV time step, in ETD form or in the equivalent
//! implicit form, plus the time loop.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::energy::{e1_discrete, quadratic_energy, ModelParams};
use crate::error::{Error, Result};
use crate::fields::{frobenius_pointwise, GridFunction, PeriodicGrid, QTensorField, ScalarField};
use crate::operators::norms::inner_unchecked;
use crate::operators::spectral::{OperatorKind, OperatorSymbol, SpectralKernel, Weight};
use crate::variations::{g_factor, stabilized, variations};

/// Fields, auxiliary variable and clock, with `E₀` and `E₁ₕ` cached.
#[derive(Clone, Debug)]
pub struct SimState {
    q: QTensorField,
    u: ScalarField,
    s: f64,
    t: f64,
    step: usize,
    e0: f64,
    e1h: f64,
}

impl SimState {
    pub fn new(q: QTensorField, u: ScalarField, s: f64, p: &ModelParams) -> Result<Self> {
        Self::at(q, u, s, 0.0, 0, p)
    }

    /// `s⁰ = E₁ₕ⁰`, so that `g⁰ = 1`.
    pub fn initial(q: QTensorField, u: ScalarField, p: &ModelParams) -> Result<Self> {
        let e1 = e1_discrete(&q, &u, p)?.total();
        Self::at(q, u, e1, 0.0, 0, p)
    }

    pub fn at(q: QTensorField, u: ScalarField, s: f64, t: f64, step: usize, p: &ModelParams) -> Result<Self> {
        q.grid().check_same(u.grid())?;
        if q.grid().dim() != p.dim {
            return Err(Error::param("dim", format!("grid is {}D but parameters say {}D", q.grid().dim(), p.dim)));
        }
        let e1h = e1_discrete(&q, &u, p)?.total();
        let (a, b) = quadratic_energy(&q, &u, p);
        Ok(SimState { q, u, s, t, step, e0: a + b, e1h })
    }

    pub fn q(&self) -> &QTensorField {
        &self.q
    }

    pub fn u(&self) -> &ScalarField {
        &self.u
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn step(&self) -> usize {
        self.step
    }

    pub fn grid(&self) -> &PeriodicGrid {
        self.q.grid()
    }

    pub fn e0(&self) -> f64 {
        self.e0
    }

    pub fn e1h(&self) -> f64 {
        self.e1h
    }

    /// `ℰ_h = E₀ + s`.
    pub fn modified_energy(&self) -> f64 {
        self.e0 + self.s
    }

    pub fn max_abs_q(&self) -> f64 {
        frobenius_pointwise(&self.q).max_abs()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    #[default]
    Etd,
    Implicit,
}

/// Which case of the relaxation formula produced `ξ`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum XiBranch {
    /// `E₁ₕ^{n+1} ≤ s̃`: ξ = 0.
    Tracking,
    /// `E₁ₕ^{n+1} > s̃`: ξ from the dissipation budget.
    Budget,
    /// Gap below the division guard: ξ = 0.
    Guard,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StepReport {
    pub step: usize,
    pub t: f64,
    pub tau: f64,
    pub e0: f64,
    pub e1h: f64,
    pub s: f64,
    pub s_tilde: f64,
    pub xi: f64,
    pub branch: XiBranch,
    pub g: f64,
    pub r: f64,
    pub energy_before: f64,
    pub energy_after: f64,
    pub max_abs_q_f: f64,
    pub max_abs_u: f64,
}

/// `ξ` and the branch that produced it.
pub fn xi_with_branch(s_tilde: f64, e1h_next: f64, r: f64, tau: f64, eta0: f64) -> (f64, XiBranch) {
    let gap = e1h_next - s_tilde;
    if gap <= 0.0 {
        return (0.0, XiBranch::Tracking);
    }
    if gap < 1e-14 * (1.0 + s_tilde.abs()) {
        return (0.0, XiBranch::Guard);
    }
    ((1.0 - eta0 * tau * r / gap).clamp(0.0, 1.0), XiBranch::Budget)
}

/// `ξ = 0` if `E₁ₕ^{n+1} ≤ s̃`, else `max(0, 1 − η₀τR / (E₁ₕ^{n+1} − s̃))`.
pub fn xi_optimal(s_tilde: f64, e1h_next: f64, r: f64, tau: f64, eta0: f64) -> f64 {
    xi_with_branch(s_tilde, e1h_next, r, tau, eta0).0
}

/// `𝓡 = (‖δQ‖²_{Q₁,𝓛} + ‖δu‖²_{Q₁,𝓓}) / τ`.
pub fn dissipation_rate(
    delta_q: &QTensorField,
    delta_u: &ScalarField,
    tau: f64,
    kq: &SpectralKernel,
    ku: &SpectralKernel,
) -> f64 {
    (kq.weighted_norm(Weight::Q1, delta_q) + ku.weighted_norm(Weight::Q1, delta_u)) / tau
}

/// Owns the cached operator symbols for one grid and parameter set.
#[derive(Clone, Debug)]
pub struct Stepper {
    params: ModelParams,
    scheme: Scheme,
    elastic: Arc<OperatorSymbol>,
    biharmonic: Arc<OperatorSymbol>,
}

impl Stepper {
    pub fn new(grid: PeriodicGrid, params: ModelParams, scheme: Scheme) -> Result<Self> {
        params.validate()?;
        if grid.dim() != params.dim {
            return Err(Error::param("dim", format!("grid is {}D but parameters say {}D", grid.dim(), params.dim)));
        }
        Ok(Stepper {
            params,
            scheme,
            elastic: OperatorSymbol::new(grid, OperatorKind::Elastic { k: params.k })?,
            biharmonic: OperatorSymbol::new(grid, OperatorKind::Biharmonic { b0: params.b0 })?,
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn grid(&self) -> &PeriodicGrid {
        self.elastic.grid()
    }

    /// Kernels of `𝓛_Q` and `𝓓_u` at relaxation factor `g`.
    pub fn kernels(&self, g: f64, tau: f64) -> Result<(SpectralKernel, SpectralKernel)> {
        Ok((
            self.elastic.kernel(g, self.params.kappa1, tau)?,
            self.biharmonic.kernel(g, self.params.kappa2, tau)?,
        ))
    }

    pub fn step(&self, state: &SimState, tau: f64) -> Result<(SimState, StepReport)> {
        self.step_as(self.scheme, state, tau)
    }

    pub fn step_as(&self, scheme: Scheme, state: &SimState, tau: f64) -> Result<(SimState, StepReport)> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::param("tau", format!("must be positive, got {tau}")));
        }
        if state.grid() != self.grid() {
            return Err(Error::GridMismatch);
        }
        let p = &self.params;
        let next_step = state.step + 1;
        let diverged = |reason: String| Error::Divergence { step: next_step, reason };

        let g = g_factor(state.s, state.e1h).map_err(|e| match e {
            Error::Divergence { reason, .. } => diverged(reason),
            other => other,
        })?;
        let vars = variations(&state.q, &state.u, p)?;
        let n_q = stabilized(&state.q, &vars.mu_q, g, p.kappa1);
        let n_u = stabilized(&state.u, &vars.mu_u, g, p.kappa2);
        let (kq, ku) = self.kernels(g, tau)?;
        let (q1, u1) = match scheme {
            Scheme::Etd => (kq.etd_update(&state.q, &n_q), ku.etd_update(&state.u, &n_u)),
            Scheme::Implicit => (kq.implicit_update(&state.q, &n_q), ku.implicit_update(&state.u, &n_u)),
        };
        if !q1.is_finite() {
            return Err(diverged("non-finite Q".into()));
        }
        if !u1.is_finite() {
            return Err(diverged("non-finite u".into()));
        }
        let dq = q1.difference(&state.q);
        let du = u1.difference(&state.u);
        let s_tilde = state.s + g * (inner_unchecked(&vars.mu_q, &dq) + inner_unchecked(&vars.mu_u, &du));
        let r = dissipation_rate(&dq, &du, tau, &kq, &ku);
        let e1_next = e1_discrete(&q1, &u1, p)?.total();
        let (xi, branch) = xi_with_branch(s_tilde, e1_next, r, tau, p.eta0);
        let s1 = xi * s_tilde + (1.0 - xi) * e1_next;
        if !s1.is_finite() {
            return Err(diverged(format!("non-finite auxiliary variable (s_tilde = {s_tilde}, E1h = {e1_next})")));
        }
        let (a, b) = quadratic_energy(&q1, &u1, p);
        let next = SimState { q: q1, u: u1, s: s1, t: state.t + tau, step: next_step, e0: a + b, e1h: e1_next };
        let report = StepReport {
            step: next_step,
            t: next.t,
            tau,
            e0: next.e0,
            e1h: e1_next,
            s: s1,
            s_tilde,
            xi,
            branch,
            g,
            r,
            energy_before: state.modified_energy(),
            energy_after: next.modified_energy(),
            max_abs_q_f: next.max_abs_q(),
            max_abs_u: next.u.max_abs(),
        };
        Ok((next, report))
    }

    /// Advances `n_steps` steps, handing every report to `observe`.
    pub fn run(
        &self,
        state0: SimState,
        tau: f64,
        n_steps: usize,
        mut observe: impl FnMut(&SimState, &StepReport) -> Result<()>,
    ) -> Result<SimState> {
        let mut state = state0;
        for _ in 0..n_steps {
            let (next, report) = self.step(&state, tau)?;
            observe(&next, &report)?;
            state = next;
        }
        Ok(state)
    }

    /// [`run`](Self::run) collecting every report.
    pub fn run_collect(&self, state0: SimState, tau: f64, n_steps: usize) -> Result<(SimState, Vec<StepReport>)> {
        let mut reports = Vec::with_capacity(n_steps);
        let last = self.run(state0, tau, n_steps, |_, r| {
            reports.push(*r);
            Ok(())
        })?;
        Ok((last, reports))
    }
}

pub fn etd_step(stepper: &Stepper, state: &SimState, tau: f64) -> Result<(SimState, StepReport)> {
    stepper.step_as(Scheme::Etd, state, tau)
}

pub fn implicit_step(stepper: &Stepper, state: &SimState, tau: f64) -> Result<(SimState, StepReport)> {
    stepper.step_as(Scheme::Implicit, state, tau)
}
