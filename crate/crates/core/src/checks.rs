//! Invariant checks on a configured problem, run by `shapeflow check`.

use serde::Serialize;

use crate::config::ProblemConfig;
use crate::error::Result;
use crate::fem::{assemble_system, relative_residual, solve_state};
use crate::objectives::Problem;
use crate::optimizers::{advance, HamiltonianState};
use crate::spline::ShapeParams;

#[derive(Clone, Debug, Serialize)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl CheckOutcome {
    fn new(name: &'static str, passed: bool, detail: String) -> Self {
        Self { name, passed, detail }
    }
}

/// Per-component error `|g_i - fd_i| / max(1, |fd_i|)` of the adjoint
/// gradient of `λ1 J1 + λ2 J2` against central differences with step `h`.
pub fn gradient_relative_errors(problem: &Problem, params: &ShapeParams, h: f64) -> Result<Vec<f64>> {
    let [l1, l2, _] = problem.weights.lambda();
    let smooth = |p: &ShapeParams| -> Result<f64> {
        let v = problem.evaluate(p)?;
        Ok(l1 * v.j1 + l2 * v.j2)
    };
    let g = problem.gradient_with(params, false)?;
    let flat = params.to_flat();
    let mut errs = Vec::with_capacity(flat.len());
    for i in 0..flat.len() {
        let (mut up, mut down) = (flat.clone(), flat.clone());
        up[i] += h;
        down[i] -= h;
        let fd = (smooth(&params.from_flat(&up)?)? - smooth(&params.from_flat(&down)?)?) / (2.0 * h);
        errs.push((g.total[i] - fd).abs() / fd.abs().max(1.0));
    }
    Ok(errs)
}

/// Quick structural checks at the configured starting shape.
pub fn run_checks(config: &ProblemConfig) -> Result<Vec<CheckOutcome>> {
    let problem = config.build_problem()?;
    let q0 = config.build_initial_shape()?;
    let mut out = Vec::new();

    let basis = problem.shape_map.basis();
    let mut pu = 0.0f64;
    for k in 0..=1000 {
        let s: f64 = basis.eval(k as f64 / 1000.0)?.iter().sum();
        pu = pu.max((s - 1.0).abs());
    }
    out.push(CheckOutcome::new("partition_of_unity", pu <= 1e-12, format!("max |Σϑ - 1| = {pu:.2e}")));

    let mesh = problem.shape_map.mesh(&q0)?;
    let min_area = (0..mesh.triangles.len()).map(|e| mesh.area(e)).fold(f64::INFINITY, f64::min);
    out.push(CheckOutcome::new("positive_triangle_areas", min_area > 0.0, format!("min area = {min_area:.3e}")));

    let system = assemble_system(&mesh, &problem.material, &problem.loads)?;
    let asym = system.stiffness.asymmetry();
    out.push(CheckOutcome::new("stiffness_symmetric", asym == 0.0, format!("max |K_ij - K_ji| = {asym:e}")));
    let sol = solve_state(&system, &mesh, &problem.material)?;
    let res = relative_residual(&system, &sol);
    out.push(CheckOutcome::new("state_residual", res <= 1e-10, format!("relative residual = {res:.2e}")));

    let j3 = problem.penalty(&q0)?;
    out.push(CheckOutcome::new("start_clears_obstacle", j3 == 0.0, format!("J3(q0) = {j3:e}")));

    let errs = gradient_relative_errors(&problem, &q0, 1e-6)?;
    let worst = errs.iter().fold(0.0f64, |m, &e| m.max(e));
    out.push(CheckOutcome::new("adjoint_gradient_vs_differences", worst <= 1e-4, format!("max relative error = {worst:.2e}")));

    let params = config.hamiltonian_params()?;
    let flat = q0.to_flat();
    let state = HamiltonianState::at_rest(flat.clone());
    let next = advance(&state, &params, &vec![0.0; flat.len()])?;
    let still = next.q == state.q && next.p.iter().all(|&p| p == 0.0);
    out.push(CheckOutcome::new("flow_rests_at_critical_points", still, "zero gradient, zero momentum".into()));
    Ok(out)
}
