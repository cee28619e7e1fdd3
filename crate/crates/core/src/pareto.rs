//! Local biobjective (J1, J2) fronts by warm-started weight sweeps.

use serde::{Deserialize, Serialize};

use crate::objectives::{Problem, ShapeObjective};
use crate::optimizers::{gradient_descent_armijo, ArmijoParams, Termination};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrontPoint {
    /// Weight on J1; J2 carries `1 - weight`.
    pub weight: f64,
    pub q_opt: Vec<f64>,
    pub j1: f64,
    pub j2: f64,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl FrontPoint {
    /// Weakly better in both objectives and strictly better in one.
    pub fn dominates(&self, other: &FrontPoint) -> bool {
        self.j1 <= other.j1 && self.j2 <= other.j2 && (self.j1 < other.j1 || self.j2 < other.j2)
    }
}

/// Sweeps `weights` in order, each solve starting from the previous optimum.
///
/// A weight whose descent does not reach `tol` is kept and flagged.
pub fn trace_front(
    problem: &Problem,
    q_start: &[f64],
    weights: &[f64],
    tol: f64,
    max_iter_each: usize,
    armijo: &ArmijoParams,
) -> Vec<FrontPoint> {
    let mut q = q_start.to_vec();
    let mut front = Vec::with_capacity(weights.len());
    for &w in weights {
        let objective = ShapeObjective::biobjective(problem, w);
        let run = gradient_descent_armijo(&q, &objective, tol, max_iter_each, armijo);
        let [j1, j2, _] = run
            .evaluations
            .last()
            .and_then(|e| e.components)
            .unwrap_or([f64::NAN; 3]);
        front.push(FrontPoint {
            weight: w,
            q_opt: run.q.clone(),
            j1,
            j2,
            residual: run.gradient_norm,
            iterations: run.energy.len().saturating_sub(1),
            converged: run.termination == Termination::Converged,
        });
        if run.q.iter().all(|v| v.is_finite()) {
            q = run.q;
        }
    }
    front
}

/// Maximal non-dominated subset, sorted by J2 (stable).
pub fn dominance_filter(points: &[FrontPoint]) -> Vec<FrontPoint> {
    let mut kept: Vec<FrontPoint> = points
        .iter()
        .filter(|p| !points.iter().any(|o| o.dominates(p)))
        .cloned()
        .collect();
    kept.sort_by(|a, b| a.j2.total_cmp(&b.j2));
    kept
}

/// Consecutive pairs along the sweep where J2 grew although its weight grew.
pub fn monotonicity_violations(front: &[FrontPoint]) -> Vec<usize> {
    front
        .windows(2)
        .enumerate()
        .filter(|(_, w)| {
            let j2_weight_up = (1.0 - w[1].weight) > (1.0 - w[0].weight);
            w[0].converged && w[1].converged && j2_weight_up && w[1].j2 > w[0].j2
        })
        .map(|(i, _)| i)
        .collect()
}
