//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary (`harness = false`). It exits non-zero on a failed
//! criterion only when `ACCEPTANCE_STRICT=1`, so the outcome of every line is
//! visible in a normal `cargo test` run.

use std::path::PathBuf;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use shapeflow::config::ProblemConfig;
use shapeflow::fem::{assemble_system, solve_state_with, Support};
use shapeflow::intersect::{triangle_circle_area, ObstacleCircle};
use shapeflow::mesh::signed_area;
use shapeflow::objectives::Problem;
use shapeflow::optimizers::{
    advance, hamiltonian_flow, FnObjective, FrictionExponent, HamiltonianParams, HamiltonianState,
};
use shapeflow::run::{obstacle_side, run, trace, RunReport, Side};
use shapeflow::{BoundaryLoads, MaterialParams};

const BAND: f64 = 0.5;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn in_band(value: f64, reference: f64) -> bool {
    (value - reference).abs() <= BAND * reference.abs()
}

fn config(name: &str) -> ProblemConfig {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name);
    ProblemConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

struct Case {
    config: ProblemConfig,
    problem: Problem,
    report: Result<RunReport, String>,
    elapsed: Duration,
    _dir: tempfile::TempDir,
}

fn run_case(name: &str) -> Case {
    let config = config(name);
    let problem = config.build_problem().expect("problem");
    let dir = tempfile::tempdir().expect("tempdir");
    let start = Instant::now();
    let report = run(&config, dir.path()).map_err(|e| e.to_string());
    Case { config, problem, report, elapsed: start.elapsed(), _dir: dir }
}

fn side_name(s: Side) -> &'static str {
    match s {
        Side::Above => "above",
        Side::Below => "below",
        Side::Overlapping => "overlapping",
    }
}

fn escape_summary(case: &Case, gd_ref: f64, hf_ref: f64) -> Result<(bool, bool, String), String> {
    let report = case.report.as_ref().map_err(|e| format!("run failed: {e}"))?;
    let gd = &report.gd.as_ref().ok_or("no gradient descent run")?.summary;
    let hf = &report.hamiltonian.as_ref().ok_or("no Hamiltonian run")?.summary;
    let cy = case.problem.obstacle.center[1];
    let gd_ok = gd.side == Side::Above && in_band(gd.j_lambda, gd_ref);
    let hf_ok = hf.j3 == 0.0 && hf.side == Side::Below && hf.j_lambda < gd.j_lambda && in_band(hf.j_lambda, hf_ref);
    let detail = format!(
        "GD: J = {:.4} (ref {gd_ref}), {} after {} steps [{}], obstacle center y {cy}; \
         HF: J = {:.4} (ref {hf_ref}), J3 = {:.4}, {}; runtime {:.1}s",
        gd.j_lambda,
        side_name(gd.side),
        gd.steps,
        gd.termination,
        hf.j_lambda,
        hf.j3,
        side_name(hf.side),
        case.elapsed.as_secs_f64()
    );
    Ok((gd_ok, hf_ok, detail))
}

fn criterion_1(tc1: &Case) -> Outcome {
    match escape_summary(tc1, 0.1584, 0.0365) {
        Ok((gd_ok, hf_ok, detail)) => {
            outcome(gd_ok && hf_ok && tc1.elapsed < Duration::from_secs(300), format!("{detail}; GD ok {gd_ok}, HF ok {hf_ok}"))
        }
        Err(e) => outcome(false, e),
    }
}

fn criterion_2(tc2: &Case) -> Outcome {
    let (gd_ok, hf_ok, detail) = match escape_summary(tc2, 0.1795, 0.1141) {
        Ok(v) => v,
        Err(e) => return outcome(false, e),
    };
    let report = tc2.report.as_ref().unwrap();
    let gd = &report.gd.as_ref().unwrap().summary;
    let hf = &report.hamiltonian.as_ref().unwrap().summary;
    let capped = gd.steps <= tc2.config.optimizer.gradient_descent.max_iter;
    let parts = in_band(hf.j1, 0.0413) && in_band(hf.j2, 0.3251);
    outcome(
        gd_ok && capped && hf_ok && parts,
        format!("{detail}; HF J1 = {:.4} (ref 0.0413), J2 = {:.4} (ref 0.3251); GD ok {gd_ok}, HF ok {}", hf.j1, hf.j2, hf_ok && parts),
    )
}

fn criterion_3(tc1: &Case) -> Outcome {
    let Ok(report) = &tc1.report else { return outcome(false, "run failed".into()) };
    let Some(hf) = &report.hamiltonian else { return outcome(false, "no Hamiltonian run".into()) };
    let e = &hf.result.energy;
    let n = e.len();
    let pot: Vec<f64> = e.iter().map(|r| r.e_pot).collect();
    let kin: Vec<f64> = e.iter().map(|r| r.e_kin).collect();
    let tot0 = e[0].e_tot;

    let early = n / 5;
    let sharp = pot[..=early].iter().cloned().fold(f64::INFINITY, f64::min) <= 0.25 * pot[0];
    let k_peak = (0..n).max_by(|&a, &b| kin[a].total_cmp(&kin[b])).unwrap();
    let rise_decay = k_peak > 0 && k_peak < n - 1 && kin[n - 1] <= 0.5 * kin[k_peak];
    // first local minimum of the potential, then the largest later fall from a running peak
    let k1 = (1..n - 1).find(|&k| pot[k] <= pot[k - 1] && pot[k] <= pot[k + 1]).unwrap_or(n - 1);
    let (mut peak, mut drop, mut t_drop) = (pot[k1], 0.0f64, f64::NAN);
    for k in k1..n {
        peak = peak.max(pot[k]);
        if peak - pot[k] > drop {
            drop = peak - pot[k];
            t_drop = e[k].t;
        }
    }
    let secondary = drop >= 0.1 * pot[k1];
    let max_up = e.windows(2).map(|w| w[1].e_tot - w[0].e_tot).fold(0.0f64, f64::max);
    let dissipative = e[n - 1].e_tot < tot0 && max_up <= 0.05 * tot0;
    outcome(
        sharp && rise_decay && secondary && dissipative,
        format!(
            "sharp initial drop {sharp}; kinetic peak {:.3} at t = {:.3}, final {:.3e} ({rise_decay}); \
             secondary drop {:.4} after first minimum {:.4} at t = {:.3}, largest by t = {t_drop:.3} ({secondary}); \
             e_tot {:.4} -> {:.4}, max step increase {:.2e} ({dissipative})",
            kin[k_peak],
            e[k_peak].t,
            kin[n - 1],
            drop,
            pot[k1],
            e[k1].t,
            tot0,
            e[n - 1].e_tot,
            max_up
        ),
    )
}

fn random_shape(rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut q: Vec<f64> = (0..3).map(|_| rng.random_range(-0.15..0.35)).collect();
    q.extend((0..3).map(|_| rng.random_range(0.08..0.45)));
    q
}

fn criterion_4(tc1: &Case) -> Outcome {
    let problem = &tc1.problem;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let h = 1e-6;
    let mut worst = 0.0f64;
    let mut overlapping = 0;
    for _ in 0..20 {
        let q = random_shape(&mut rng);
        let params = problem.params(&q).unwrap();
        if problem.penalty(&params).unwrap() > 0.0 {
            overlapping += 1;
        }
        let g = problem.gradient(&params).unwrap().total;
        for i in 0..q.len() {
            let (mut up, mut down) = (q.clone(), q.clone());
            up[i] += h;
            down[i] -= h;
            let f = |x: &[f64]| problem.evaluate(&problem.params(x).unwrap()).unwrap().j_lambda;
            let fd = (f(&up) - f(&down)) / (2.0 * h);
            worst = worst.max((g[i] - fd).abs() / fd.abs().max(1.0));
        }
    }
    outcome(worst <= 1e-4, format!("20 shapes ({overlapping} touching the obstacle), max error {worst:.2e} (tol 1e-4)"))
}

fn criterion_5() -> Outcome {
    let cfg = config("testcase1.toml");
    let map = cfg.shape_map().unwrap();
    let rod = cfg.straight_shape().unwrap();
    let mesh = map.mesh(&rod).unwrap();
    let mat = MaterialParams::new(320e9, 0.25, 5.0, 24.05e6).unwrap();
    let g = 1e7;
    let sys = assemble_system(&mesh, &mat, &BoundaryLoads::tensile(g)).unwrap();
    let sol = solve_state_with(&sys, &mesh, &mat, Support::Roller).unwrap();
    let worst = sol
        .stress
        .iter()
        .map(|s| ((s.xx - g).abs().max(s.yy.abs()).max(s.xy.abs())) / g)
        .fold(0.0f64, f64::max);
    outcome(worst <= 1e-8, format!("max relative stress deviation {worst:.2e} over {} elements (tol 1e-8)", sol.stress.len()))
}

/// Fraction of `n` uniform samples in the triangle that fall inside the disk.
fn monte_carlo(tri: [[f64; 2]; 3], circle: &ObstacleCircle, n: u64, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let [a, b, c] = tri;
    let (u, v) = ([b[0] - a[0], b[1] - a[1]], [c[0] - a[0], c[1] - a[1]]);
    let r2 = circle.radius * circle.radius;
    let mut hits = 0u64;
    for _ in 0..n {
        let (mut s, mut t): (f64, f64) = (rng.random(), rng.random());
        if s + t > 1.0 {
            (s, t) = (1.0 - s, 1.0 - t);
        }
        let x = a[0] + s * u[0] + t * v[0] - circle.center[0];
        let y = a[1] + s * u[1] + t * v[1] - circle.center[1];
        hits += u64::from(x * x + y * y <= r2);
    }
    hits as f64 / n as f64
}

fn criterion_6() -> Outcome {
    let samples = 10_000_000u64;
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let pairs: Vec<([[f64; 2]; 3], ObstacleCircle)> = (0..200)
        .map(|_| {
            let tri = [0; 3].map(|_| [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]);
            // circle placed near the triangle so that most pairs overlap partially
            let centroid = [(tri[0][0] + tri[1][0] + tri[2][0]) / 3.0, (tri[0][1] + tri[1][1] + tri[2][1]) / 3.0];
            let center = [centroid[0] + rng.random_range(-0.6..0.6), centroid[1] + rng.random_range(-0.6..0.6)];
            (tri, ObstacleCircle::new(center, rng.random_range(0.1..0.9)).unwrap())
        })
        .collect();
    let z: Vec<f64> = pairs
        .par_iter()
        .enumerate()
        .map(|(i, (tri, circle))| {
            let area = signed_area(tri[0], tri[1], tri[2]).abs();
            let p = monte_carlo(*tri, circle, samples, 1000 + i as u64);
            let se = area * (p * (1.0 - p) / samples as f64).sqrt();
            let exact = triangle_circle_area(*tri, circle).area;
            let err = (exact - area * p).abs();
            if se == 0.0 {
                if err <= 1e-12 { 0.0 } else { f64::INFINITY }
            } else {
                err / se
            }
        })
        .collect();
    let worst = z.iter().cloned().fold(0.0f64, f64::max);
    let beyond = z.iter().filter(|&&v| v > 3.0).count();

    // analytic cases
    let tri = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
    let contained = triangle_circle_area(tri, &ObstacleCircle::new([0.25, 0.25], 0.1).unwrap()).area;
    let containing = triangle_circle_area(tri, &ObstacleCircle::new([0.3, 0.3], 5.0).unwrap()).area;
    let disjoint = triangle_circle_area(tri, &ObstacleCircle::new([3.0, 3.0], 0.5).unwrap()).area;
    let analytic = (contained - std::f64::consts::PI * 0.01).abs() <= 1e-10
        && (containing - 0.5).abs() <= 1e-10
        && disjoint.abs() <= 1e-10;
    outcome(
        beyond == 0 && analytic,
        format!("200 pairs, 1e7 samples each: {beyond} beyond 3 SE, max |z| = {worst:.2}; analytic cases exact {analytic}"),
    )
}

fn criterion_7() -> Outcome {
    let n = 6;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    // random symmetric positive definite A = B Bᵀ + I
    let b: Vec<Vec<f64>> = (0..n).map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let a: Vec<Vec<f64>> =
        (0..n).map(|i| (0..n).map(|j| (0..n).map(|k| b[i][k] * b[j][k]).sum::<f64>() + f64::from(u8::from(i == j))).collect()).collect();
    let c: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let grad = |q: &[f64]| -> Vec<f64> { (0..n).map(|i| (0..n).map(|j| a[i][j] * q[j]).sum::<f64>() - c[i]).collect() };

    let (alpha, m, gamma) = (0.05, 2.0, 3.0);
    let mut params = HamiltonianParams::new(m, gamma, 0.0, 100.0 * alpha, 100).unwrap();
    params.friction_exponent = FrictionExponent::Linear;
    let q0: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let p0: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();

    // single-line recursion with ᾱ = α²/m, β = 1 - αγ/m and q_{-1} = q0 - (α/m) p0
    let (a_bar, beta) = (alpha * alpha / m, 1.0 - alpha * gamma / m);
    let mut prev: Vec<f64> = q0.iter().zip(&p0).map(|(q, p)| q - alpha / m * p).collect();
    let mut hb = q0.clone();
    let mut s = HamiltonianState::new(q0, p0).unwrap();
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let g = grad(&s.q);
        s = advance(&s, &params, &g).unwrap();
        let gh = grad(&hb);
        let next: Vec<f64> = (0..n).map(|i| hb[i] - a_bar * gh[i] + beta * (hb[i] - prev[i])).collect();
        prev = std::mem::replace(&mut hb, next);
        let scale = hb.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        worst = worst.max(s.q.iter().zip(&hb).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max) / scale);
        // momentum consistent with the substitution p_k = (m/α)(q_k - q_{k-1})
        let p_sub: Vec<f64> = hb.iter().zip(&prev).map(|(x, y)| m / alpha * (x - y)).collect();
        let p_scale = s.p.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        worst = worst.max(s.p.iter().zip(&p_sub).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max) / p_scale * alpha / m);
    }
    outcome(worst <= 1e-12, format!("100 steps, 6-D quadratic: max deviation {worst:.2e} (tol 1e-12)"))
}

fn criterion_8() -> Outcome {
    let f = |q: &[f64]| (q[0] * q[0] - 1.0).powi(2);
    let df = |q: &[f64]| vec![4.0 * q[0] * (q[0] * q[0] - 1.0)];
    let params = HamiltonianParams::new(10.0, 100.0, 1e-3, 40.0, 4000).unwrap();

    let mut fixed_ok = true;
    for q in [-1.0, 0.0, 1.0] {
        let s = HamiltonianState::at_rest(vec![q]);
        let next = advance(&s, &params, &df(&s.q)).unwrap();
        fixed_ok &= next.q == s.q && next.p == s.p;
        let moving = HamiltonianState::new(vec![q], vec![0.1]).unwrap();
        fixed_ok &= advance(&moving, &params, &df(&moving.q)).unwrap().q != moving.q;
    }
    for q in [-1.7, -0.4, 0.3, 0.9, 1.2] {
        let s = HamiltonianState::at_rest(vec![q]);
        fixed_ok &= advance(&s, &params, &df(&s.q)).unwrap() != HamiltonianState { k: 1, t: params.step, ..s.clone() };
    }

    let objective = FnObjective::new(f, df);
    let starts = [1.5, -1.3, 0.4, -0.7, 2.0, 0.05];
    let residuals: Vec<f64> =
        starts.iter().map(|&q0| hamiltonian_flow(&[q0], &[0.0], &params, &objective).gradient_norm).collect();
    let worst = residuals.iter().cloned().fold(0.0f64, f64::max);
    outcome(
        fixed_ok && worst <= 1e-3,
        format!(
            "fixed exactly at critical points with p = 0 and nowhere else sampled: {fixed_ok}; \
             double well from {} starts, max final |f'| = {worst:.2e} (tol 1e-3)",
            starts.len()
        ),
    )
}

fn criterion_9(tc2: &Case) -> Outcome {
    let Ok(report) = &tc2.report else { return outcome(false, "run failed".into()) };
    let Some(hf) = &report.hamiltonian else { return outcome(false, "no Hamiltonian run".into()) };
    let problem = &tc2.problem;
    let whale_start = tc2.config.straight_shape().unwrap().to_flat();
    let whale_side = obstacle_side(problem, &whale_start).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let spoon = match trace(&tc2.config, &hf.summary.q, &dir.path().join("spoon")) {
        Ok(r) => r,
        Err(e) => return outcome(false, format!("spoon sweep failed: {e}")),
    };
    let whale = match trace(&tc2.config, &whale_start, &dir.path().join("whale")) {
        Ok(r) => r,
        Err(e) => return outcome(false, format!("whale sweep failed: {e}")),
    };
    let undominated: Vec<String> = whale
        .filtered
        .iter()
        .filter(|w| !spoon.front.iter().any(|s| s.j2 <= w.j2 + 0.005 && s.j1 <= w.j1))
        .map(|w| format!("({:.4}, {:.4})", w.j1, w.j2))
        .collect();
    let anchor = spoon
        .front
        .iter()
        .min_by(|a, b| (a.j2 - 0.2068).abs().total_cmp(&(b.j2 - 0.2068).abs()))
        .map(|p| format!("spoon point nearest J2 = 0.2068: (J1, J2) = ({:.4}, {:.4}), ref (0.0771, 0.2068)", p.j1, p.j2))
        .unwrap_or_default();
    outcome(
        undominated.is_empty() && whale_side == Side::Below,
        format!(
            "spoon sweep from the HF result, whale sweep from the straight joint ({} the obstacle): \
             {} of {} whale points not matched by a spoon point {}; {anchor}",
            side_name(whale_side),
            undominated.len(),
            whale.filtered.len(),
            undominated.join(" ")
        ),
    )
}

fn main() {
    let strict = std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    // `cargo test` passes harness flags; listing must not run the suite
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let tc1 = run_case("testcase1.toml");
    let tc2 = run_case("testcase2.toml");
    let results: Vec<(u8, &str, Outcome)> = vec![
        (1, "obstacle escape, straight joint", criterion_1(&tc1)),
        (2, "obstacle escape, S-shaped joint", criterion_2(&tc2)),
        (3, "energy history shape", criterion_3(&tc1)),
        (4, "gradient vs central differences", criterion_4(&tc1)),
        (5, "FEM patch test", criterion_5()),
        (6, "intersection area vs Monte Carlo", criterion_6()),
        (7, "heavy-ball equivalence", criterion_7()),
        (8, "fixed points and double-well criticality", criterion_8()),
        (9, "spoon front dominates whale front", criterion_9(&tc2)),
    ];
    let mut failed = 0;
    for (id, name, o) in &results {
        println!("criterion {id} [{}] {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.pass);
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if strict && failed > 0 {
        std::process::exit(1);
    }
}
