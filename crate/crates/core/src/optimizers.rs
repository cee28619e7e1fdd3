//! Gradient descent with Armijo backtracking and the dissipative Hamiltonian
//! flow discretized by symplectic Euler.
//!
//! The flow is
//!
//! ```text
//! p' = -∇f(q) - c p
//! q' = -κ ∇f(q) + p / m
//! ```
//!
//! with friction coefficient `c = γ/m²` (default) or `c = γ/m`. Its energy
//! `H = ‖p‖²/(2m) + f(q)` is non-increasing, and its stationary points are
//! exactly `p = 0` with `∇f(q) = 0`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Objective value with an optional `(J1, J2, J3)` breakdown for logging.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Evaluation {
    pub value: f64,
    pub components: Option<[f64; 3]>,
}

pub trait Objective {
    fn evaluate(&self, q: &[f64]) -> Result<Evaluation>;

    fn gradient(&self, q: &[f64]) -> Result<Vec<f64>>;

    fn evaluate_with_gradient(&self, q: &[f64]) -> Result<(Evaluation, Vec<f64>)> {
        Ok((self.evaluate(q)?, self.gradient(q)?))
    }
}

/// Objective built from plain closures.
pub struct FnObjective<F, G> {
    pub f: F,
    pub grad: G,
}

impl<F, G> FnObjective<F, G>
where
    F: Fn(&[f64]) -> f64,
    G: Fn(&[f64]) -> Vec<f64>,
{
    pub fn new(f: F, grad: G) -> Self {
        Self { f, grad }
    }
}

impl<F, G> Objective for FnObjective<F, G>
where
    F: Fn(&[f64]) -> f64,
    G: Fn(&[f64]) -> Vec<f64>,
{
    fn evaluate(&self, q: &[f64]) -> Result<Evaluation> {
        Ok(Evaluation { value: (self.f)(q), components: None })
    }

    fn gradient(&self, q: &[f64]) -> Result<Vec<f64>> {
        Ok((self.grad)(q))
    }
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Termination {
    Converged,
    MaxSteps,
    HorizonReached,
    /// Backtracking found no sufficient decrease; the iterate is kept.
    LineSearchExhausted(String),
    Error(String),
}

impl Termination {
    pub fn label(&self) -> &str {
        match self {
            Termination::Converged => "converged",
            Termination::MaxSteps => "max_steps",
            Termination::HorizonReached => "horizon_reached",
            Termination::LineSearchExhausted(_) | Termination::Error(_) => "error",
        }
    }

    pub fn message(&self) -> Option<&str> {
        match self {
            Termination::LineSearchExhausted(m) | Termination::Error(m) => Some(m),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyRecord {
    pub k: usize,
    pub t: f64,
    pub e_pot: f64,
    pub e_kin: f64,
    pub e_tot: f64,
}

impl EnergyRecord {
    pub fn new(k: usize, t: f64, e_pot: f64, e_kin: f64) -> Self {
        Self { k, t, e_pot, e_kin, e_tot: e_pot + e_kin }
    }
}

#[derive(Clone, Debug)]
pub struct OptimizerResult {
    pub q: Vec<f64>,
    pub p: Option<Vec<f64>>,
    /// `(step, q)` snapshots.
    pub trajectory: Vec<(usize, Vec<f64>)>,
    pub energy: Vec<EnergyRecord>,
    pub evaluations: Vec<Evaluation>,
    pub gradient_norm: f64,
    pub termination: Termination,
}

pub fn energy_history(result: &OptimizerResult) -> &[EnergyRecord] {
    &result.energy
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ArmijoParams {
    pub c1: f64,
    pub shrink: f64,
    pub initial_step: f64,
    pub max_backtracks: usize,
    /// Caps the length `s ‖∇f‖` of the first trial step of each iteration.
    pub max_step_length: Option<f64>,
}

impl Default for ArmijoParams {
    fn default() -> Self {
        Self { c1: 1e-4, shrink: 0.5, initial_step: 1.0, max_backtracks: 50, max_step_length: None }
    }
}

impl ArmijoParams {
    /// First trial step for a gradient of norm `g_norm`.
    pub fn first_step(&self, g_norm: f64) -> f64 {
        match self.max_step_length {
            Some(len) if g_norm * self.initial_step > len => len / g_norm,
            _ => self.initial_step,
        }
    }
}

/// Steepest descent with backtracking until `f(q - s g) <= f(q) - c1 s ‖g‖²`.
///
/// Trial points the objective rejects (e.g. degenerate shapes) count as
/// failed trials and shrink the step.
pub fn gradient_descent_armijo(
    q0: &[f64],
    objective: &dyn Objective,
    tol: f64,
    max_iter: usize,
    armijo: &ArmijoParams,
) -> OptimizerResult {
    let mut q = q0.to_vec();
    let mut result = OptimizerResult {
        q: q.clone(),
        p: None,
        trajectory: Vec::new(),
        energy: Vec::new(),
        evaluations: Vec::new(),
        gradient_norm: f64::NAN,
        termination: Termination::MaxSteps,
    };
    let (mut eval, mut grad) = match objective.evaluate_with_gradient(&q) {
        Ok(v) => v,
        Err(e) => {
            result.termination = Termination::Error(format!("initial evaluation failed: {e}"));
            return result;
        }
    };
    let record = |result: &mut OptimizerResult, k: usize, q: &[f64], eval: Evaluation| {
        result.trajectory.push((k, q.to_vec()));
        result.energy.push(EnergyRecord::new(k, k as f64, eval.value, 0.0));
        result.evaluations.push(eval);
    };
    record(&mut result, 0, &q, eval);
    let mut k = 0;
    loop {
        let g_norm = norm(&grad);
        result.gradient_norm = g_norm;
        if g_norm <= tol {
            result.termination = Termination::Converged;
            break;
        }
        if k == max_iter {
            result.termination = Termination::MaxSteps;
            break;
        }
        let mut step = armijo.first_step(g_norm);
        let mut accepted = None;
        for _ in 0..=armijo.max_backtracks {
            let trial: Vec<f64> = q.iter().zip(&grad).map(|(x, g)| x - step * g).collect();
            if let Ok(e) = objective.evaluate(&trial) {
                if e.value <= eval.value - armijo.c1 * step * g_norm * g_norm {
                    accepted = Some(trial);
                    break;
                }
            }
            step *= armijo.shrink;
        }
        let Some(next) = accepted else {
            result.termination = Termination::LineSearchExhausted(format!(
                "line search exhausted {} backtracks at iteration {k} (f = {}, ‖∇f‖ = {g_norm:e})",
                armijo.max_backtracks, eval.value
            ));
            break;
        };
        match objective.evaluate_with_gradient(&next) {
            Ok((e, g)) => {
                q = next;
                eval = e;
                grad = g;
            }
            Err(e) => {
                result.termination = Termination::Error(format!("gradient failed at iteration {}: {e}", k + 1));
                break;
            }
        }
        k += 1;
        record(&mut result, k, &q, eval);
    }
    result.q = q;
    result
}

/// How the friction term scales with the mass.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum FrictionExponent {
    /// `γ/m`, the continuous heavy-ball-with-friction system.
    Linear,
    /// `γ/m²`, the scheme used for the shape experiments.
    #[default]
    Quadratic,
}

impl TryFrom<u8> for FrictionExponent {
    type Error = String;
    fn try_from(v: u8) -> std::result::Result<Self, String> {
        match v {
            1 => Ok(Self::Linear),
            2 => Ok(Self::Quadratic),
            other => Err(format!("friction_exponent must be 1 or 2, got {other}")),
        }
    }
}

impl From<FrictionExponent> for u8 {
    fn from(v: FrictionExponent) -> u8 {
        match v {
            FrictionExponent::Linear => 1,
            FrictionExponent::Quadratic => 2,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HamiltonianParams {
    pub mass: f64,
    pub friction: f64,
    pub kappa: f64,
    pub step: f64,
    pub horizon: f64,
    pub steps: usize,
    pub friction_exponent: FrictionExponent,
    /// Stop early once `‖∇f‖` falls below this.
    pub grad_tol: Option<f64>,
    /// Keep every n-th position in the trajectory (first and last always kept).
    pub snapshot_every: usize,
}

impl HamiltonianParams {
    /// Parameters for `steps` steps over `[0, horizon]`.
    pub fn new(mass: f64, friction: f64, kappa: f64, horizon: f64, steps: usize) -> Result<Self> {
        let params = Self {
            mass,
            friction,
            kappa,
            step: horizon / steps as f64,
            horizon,
            steps,
            friction_exponent: FrictionExponent::default(),
            grad_tol: None,
            snapshot_every: 1,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.mass > 0.0
            && self.friction > 0.0
            && self.kappa >= 0.0
            && self.step > 0.0
            && self.horizon > 0.0
            && self.steps > 0
            && self.snapshot_every > 0;
        if !ok {
            return Err(Error::Domain(format!(
                "Hamiltonian parameters need m, γ, α, T > 0, κ >= 0 and a positive step count: {self:?}"
            )));
        }
        if ((self.steps as f64) * self.step - self.horizon).abs() > 1e-12 * self.horizon {
            return Err(Error::Domain(format!(
                "{} steps of {} do not cover the horizon {}",
                self.steps, self.step, self.horizon
            )));
        }
        Ok(())
    }

    /// Coefficient `c` in `p_{k+1} = p_k - α ∇f - α c p_k`.
    pub fn friction_coefficient(&self) -> f64 {
        match self.friction_exponent {
            FrictionExponent::Linear => self.friction / self.mass,
            FrictionExponent::Quadratic => self.friction / (self.mass * self.mass),
        }
    }

    pub fn kinetic_energy(&self, p: &[f64]) -> f64 {
        p.iter().map(|x| x * x).sum::<f64>() / (2.0 * self.mass)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HamiltonianState {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
    pub t: f64,
    pub k: usize,
}

impl HamiltonianState {
    pub fn new(q: Vec<f64>, p: Vec<f64>) -> Result<Self> {
        if q.len() != p.len() {
            return Err(Error::Contract(format!("position has {} entries, momentum {}", q.len(), p.len())));
        }
        Ok(Self { q, p, t: 0.0, k: 0 })
    }

    pub fn at_rest(q: Vec<f64>) -> Self {
        let p = vec![0.0; q.len()];
        Self { q, p, t: 0.0, k: 0 }
    }
}

/// One symplectic Euler step given `∇f(q_k)`: momentum first, then position
/// with the new momentum; the same gradient enters both updates.
pub fn advance(state: &HamiltonianState, params: &HamiltonianParams, grad: &[f64]) -> Result<HamiltonianState> {
    if grad.len() != state.q.len() {
        return Err(Error::Contract(format!("gradient has {} entries, state {}", grad.len(), state.q.len())));
    }
    if let Some(i) = grad.iter().position(|g| !g.is_finite()) {
        return Err(Error::Numerical(format!("non-finite gradient component {i} at step {}", state.k)));
    }
    let (a, m) = (params.step, params.mass);
    let c = params.friction_coefficient();
    let p: Vec<f64> = state.p.iter().zip(grad).map(|(p, g)| p - a * g - a * c * p).collect();
    let q = state
        .q
        .iter()
        .zip(grad)
        .zip(&p)
        .map(|((q, g), p)| q - a * params.kappa * g + a / m * p)
        .collect();
    Ok(HamiltonianState { q, p, t: (state.k + 1) as f64 * a, k: state.k + 1 })
}

pub fn symplectic_euler_step<G>(state: &HamiltonianState, params: &HamiltonianParams, grad: G) -> Result<HamiltonianState>
where
    G: FnOnce(&[f64]) -> Result<Vec<f64>>,
{
    let g = grad(&state.q)?;
    advance(state, params, &g)
}

/// Integrates the flow over the full horizon, recording energies at every step.
pub fn hamiltonian_flow(
    q0: &[f64],
    p0: &[f64],
    params: &HamiltonianParams,
    objective: &dyn Objective,
) -> OptimizerResult {
    let mut result = OptimizerResult {
        q: q0.to_vec(),
        p: Some(p0.to_vec()),
        trajectory: Vec::new(),
        energy: Vec::new(),
        evaluations: Vec::new(),
        gradient_norm: f64::NAN,
        termination: Termination::HorizonReached,
    };
    if let Err(e) = params.validate() {
        result.termination = Termination::Error(e.to_string());
        return result;
    }
    let mut state = match HamiltonianState::new(q0.to_vec(), p0.to_vec()) {
        Ok(s) => s,
        Err(e) => {
            result.termination = Termination::Error(e.to_string());
            return result;
        }
    };
    let (mut eval, mut grad) = match objective.evaluate_with_gradient(&state.q) {
        Ok(v) => v,
        Err(e) => {
            result.termination = Termination::Error(format!("initial evaluation failed: {e}"));
            return result;
        }
    };
    loop {
        let k = state.k;
        result.energy.push(EnergyRecord::new(k, state.t, eval.value, params.kinetic_energy(&state.p)));
        result.evaluations.push(eval);
        result.gradient_norm = norm(&grad);
        if k % params.snapshot_every == 0 || k == params.steps {
            result.trajectory.push((k, state.q.clone()));
        }
        if params.grad_tol.is_some_and(|tol| result.gradient_norm <= tol) {
            result.termination = Termination::Converged;
            break;
        }
        if k == params.steps {
            result.termination = Termination::HorizonReached;
            break;
        }
        let next = match advance(&state, params, &grad) {
            Ok(s) => s,
            Err(e) => {
                result.termination = Termination::Error(e.to_string());
                break;
            }
        };
        match objective.evaluate_with_gradient(&next.q) {
            Ok((e, g)) => {
                state = next;
                eval = e;
                grad = g;
            }
            Err(e) => {
                result.termination = Termination::Error(format!("evaluation failed at step {}: {e}", next.k));
                break;
            }
        }
    }
    if result.trajectory.last().is_none_or(|(k, _)| *k != state.k) {
        result.trajectory.push((state.k, state.q.clone()));
    }
    result.q = state.q;
    result.p = Some(state.p);
    result
}
