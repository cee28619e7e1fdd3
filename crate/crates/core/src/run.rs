//! Full runs driven by a configuration: optimizers, artifacts, manifests.

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::ProblemConfig;
use crate::error::{Error, Result};
use crate::export::{
    energy_rows, write_coefficients, write_energy_csv, write_front_csv, write_objectives_csv, write_shape_svg,
    EnergyRow, SvgOptions,
};
use crate::objectives::{ObjectiveValue, Problem, ShapeObjective};
use crate::optimizers::{gradient_descent_armijo, hamiltonian_flow, OptimizerResult, Termination};
use crate::pareto::{dominance_filter, monotonicity_violations, trace_front, FrontPoint};

/// Overrides the directory that relative `output.directory` values resolve against.
pub const OUTPUT_ROOT_ENV: &str = "SHAPEFLOW_OUTPUT_ROOT";

/// Where a run with this configuration writes; the working directory is the
/// default root.
pub fn output_dir(config: &ProblemConfig) -> PathBuf {
    let dir = Path::new(&config.output.directory);
    if dir.is_absolute() {
        return dir.to_path_buf();
    }
    match std::env::var_os(OUTPUT_ROOT_ENV) {
        Some(root) if !root.is_empty() => PathBuf::from(root).join(dir),
        _ => dir.to_path_buf(),
    }
}

/// Position of a shape relative to the obstacle center, judged at its
/// abscissa. A shape that only grazes the circle still counts as above or
/// below; the overlap itself is reported by J3.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Above,
    Below,
    Overlapping,
}

pub fn obstacle_side(problem: &Problem, q: &[f64]) -> Result<Side> {
    let (lower, upper) = boundaries_at(problem, q, problem.obstacle.center[0])?;
    let cy = problem.obstacle.center[1];
    Ok(if lower > cy {
        Side::Above
    } else if upper < cy {
        Side::Below
    } else {
        Side::Overlapping
    })
}

/// Lower and upper boundary heights of the meshed shape at `x`.
pub fn boundaries_at(problem: &Problem, q: &[f64], x: f64) -> Result<(f64, f64)> {
    let (ml, th) = problem.shape_map.profiles(&problem.params(q)?)?;
    let xs = problem.shape_map.column_x();
    if !(x >= xs[0] && x <= xs[xs.len() - 1]) {
        return Err(Error::Domain(format!("x = {x} outside the shape")));
    }
    let i = xs.partition_point(|&c| c <= x).clamp(1, xs.len() - 1);
    let s = (x - xs[i - 1]) / (xs[i] - xs[i - 1]);
    let at = |v: &[f64]| v[i - 1] + s * (v[i] - v[i - 1]);
    let (m, t) = (at(&ml), at(&th));
    Ok((m - 0.5 * t, m + 0.5 * t))
}

#[derive(Clone, Debug, Serialize)]
pub struct MethodSummary {
    pub method: String,
    pub termination: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub steps: usize,
    pub j_lambda: f64,
    pub j1: f64,
    pub j2: f64,
    pub j3: f64,
    pub gradient_norm: f64,
    pub side: Side,
    pub q: Vec<f64>,
}

/// One optimizer's outcome with its full history.
#[derive(Clone, Debug)]
pub struct MethodRun {
    pub summary: MethodSummary,
    pub result: OptimizerResult,
    pub rows: Vec<EnergyRow>,
}

#[derive(Clone, Debug, Serialize)]
pub struct InitialSummary {
    pub j_lambda: f64,
    pub j1: f64,
    pub j2: f64,
    pub j3: f64,
    pub q: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct RunReport {
    pub dir: PathBuf,
    pub q0: Vec<f64>,
    pub initial: ObjectiveValue,
    pub gd: Option<MethodRun>,
    pub hamiltonian: Option<MethodRun>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    status: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<&'a str>,
    initial: Option<InitialSummary>,
    results: Vec<&'a MethodSummary>,
    config: &'a ProblemConfig,
}

fn write_manifest(dir: &Path, manifest: &Manifest) -> Result<()> {
    let text = toml::to_string_pretty(manifest).map_err(|e| Error::Contract(format!("manifest: {e}")))?;
    std::fs::write(dir.join("manifest.toml"), text)?;
    Ok(())
}

fn svg_options(config: &ProblemConfig) -> SvgOptions {
    SvgOptions { mesh_edges: config.output.mesh_edges, ..Default::default() }
}

fn write_shape(config: &ProblemConfig, problem: &Problem, q: &[f64], path: &Path, title: &str) -> Result<()> {
    if !config.output.svg {
        return Ok(());
    }
    let mesh = problem.shape_map.mesh(&problem.params(q)?)?;
    write_shape_svg(path, &mesh, &problem.obstacle, title, &svg_options(config))
}

fn summarize(method: &str, problem: &Problem, result: &OptimizerResult) -> MethodSummary {
    let [j1, j2, j3] = result.evaluations.last().and_then(|e| e.components).unwrap_or([f64::NAN; 3]);
    let error = result.termination.message().map(str::to_string);
    MethodSummary {
        method: method.into(),
        termination: result.termination.label().into(),
        error,
        steps: result.energy.last().map_or(0, |r| r.k),
        j_lambda: result.evaluations.last().map_or(f64::NAN, |e| e.value),
        j1,
        j2,
        j3,
        gradient_norm: result.gradient_norm,
        side: obstacle_side(problem, &result.q).unwrap_or(Side::Overlapping),
        q: result.q.clone(),
    }
}

/// Writes a method's energy and objective histories, shape snapshots and
/// final coefficients into `dir`.
fn write_method(config: &ProblemConfig, problem: &Problem, dir: &Path, name: &str, result: &OptimizerResult) -> Result<Vec<EnergyRow>> {
    std::fs::create_dir_all(dir)?;
    let rows = energy_rows(&result.energy, &result.evaluations);
    write_energy_csv(&dir.join("energy.csv"), &rows)?;
    write_objectives_csv(&dir.join("objectives.csv"), &rows, &result.trajectory)?;
    write_coefficients(&dir.join("final.txt"), &result.q)?;
    if config.output.svg {
        let snaps = dir.join("snapshots");
        std::fs::create_dir_all(&snaps)?;
        let every = config.output.snapshot_every;
        let last = result.trajectory.last().map_or(0, |(k, _)| *k);
        for (k, q) in result.trajectory.iter().filter(|(k, _)| k % every == 0 || *k == last) {
            write_shape(config, problem, q, &snaps.join(format!("k{k:04}.svg")), &format!("{name}, k = {k}"))?;
        }
        write_shape(config, problem, &result.q, &dir.join("final.svg"), &format!("{name}, final"))?;
    }
    Ok(rows)
}

/// Runs the configured optimizers from the constructed starting shape.
///
/// On a numerical failure inside an optimizer the artifacts written so far
/// and a manifest with `status = "numerical_failure"` are left in place and
/// the failure is returned.
pub fn run(config: &ProblemConfig, dir: &Path) -> Result<RunReport> {
    let problem = config.build_problem()?;
    let q0 = config.build_initial_shape()?.to_flat();
    std::fs::create_dir_all(dir)?;
    let initial = match problem.evaluate(&problem.params(&q0)?) {
        Ok(v) => v,
        Err(e) => {
            let msg = e.to_string();
            write_manifest(
                dir,
                &Manifest { status: "numerical_failure", error: Some(&msg), initial: None, results: vec![], config },
            )?;
            return Err(e);
        }
    };
    write_coefficients(&dir.join("q0.txt"), &q0)?;
    write_shape(config, &problem, &q0, &dir.join("initial.svg"), "initial shape")?;

    let objective = ShapeObjective::weighted(&problem);
    let mut report = RunReport { dir: dir.to_path_buf(), q0: q0.clone(), initial, gd: None, hamiltonian: None };
    let opt = &config.optimizer;
    if opt.mode.runs_gd() {
        let gd = &opt.gradient_descent;
        let result = gradient_descent_armijo(&q0, &objective, gd.tol, gd.max_iter, &gd.armijo);
        let rows = write_method(config, &problem, &dir.join("gd"), "gradient descent", &result)?;
        report.gd = Some(MethodRun { summary: summarize("gd", &problem, &result), result, rows });
    }
    if opt.mode.runs_hamiltonian() {
        let params = config.hamiltonian_params()?;
        let p0 = opt.hamiltonian.p0.clone().unwrap_or_else(|| vec![0.0; q0.len()]);
        let result = hamiltonian_flow(&q0, &p0, &params, &objective);
        let rows = write_method(config, &problem, &dir.join("hamiltonian"), "Hamiltonian flow", &result)?;
        report.hamiltonian = Some(MethodRun { summary: summarize("hamiltonian", &problem, &result), result, rows });
    }

    let summaries: Vec<&MethodSummary> = report.gd.iter().chain(&report.hamiltonian).map(|m| &m.summary).collect();
    // a stalled line search keeps a usable iterate and is reported, not fatal
    let failure = report
        .gd
        .iter()
        .chain(&report.hamiltonian)
        .find_map(|m| match &m.result.termination {
            Termination::Error(e) => Some(format!("{}: {e}", m.summary.method)),
            _ => None,
        });
    let v = &report.initial;
    let manifest = Manifest {
        status: if failure.is_some() { "numerical_failure" } else { "ok" },
        error: failure.as_deref(),
        initial: Some(InitialSummary { j_lambda: v.j_lambda, j1: v.j1, j2: v.j2, j3: v.j3, q: q0 }),
        results: summaries,
        config,
    };
    write_manifest(dir, &manifest)?;
    match failure {
        Some(msg) => Err(Error::Numerical(msg)),
        None => Ok(report),
    }
}

#[derive(Serialize)]
struct TraceManifest<'a> {
    status: &'a str,
    start: &'a [f64],
    weights: &'a [f64],
    converged: usize,
    /// Sweep positions where J2 grew although its weight grew.
    monotonicity_violations: Vec<usize>,
    config: &'a ProblemConfig,
}

#[derive(Clone, Debug)]
pub struct TraceReport {
    pub front: Vec<FrontPoint>,
    pub filtered: Vec<FrontPoint>,
}

/// Sweeps the biobjective (J1, J2) weights from `q_start` and writes the
/// raw and non-dominated fronts into `dir`.
pub fn trace(config: &ProblemConfig, q_start: &[f64], dir: &Path) -> Result<TraceReport> {
    let problem = config.build_problem()?;
    let n_free = problem.template.n_free();
    if q_start.len() != n_free {
        return Err(Error::Config(format!("start has {} coefficients, expected {n_free}", q_start.len())));
    }
    problem.params(q_start).map_err(|e| Error::Config(format!("start shape: {e}")))?;
    let weights = config.trace.weight_grid();
    let t = &config.trace;
    let front = trace_front(&problem, q_start, &weights, t.tol, t.max_iter, &config.optimizer.gradient_descent.armijo);
    let filtered = dominance_filter(&front);
    std::fs::create_dir_all(dir)?;
    write_front_csv(&dir.join("front.csv"), &front)?;
    write_front_csv(&dir.join("front_filtered.csv"), &filtered)?;
    let converged = front.iter().filter(|p| p.converged).count();
    let finite = front.iter().all(|p| p.j1.is_finite() && p.j2.is_finite());
    let text = toml::to_string_pretty(&TraceManifest {
        status: if finite { "ok" } else { "numerical_failure" },
        start: q_start,
        weights: &weights,
        converged,
        monotonicity_violations: monotonicity_violations(&front),
        config,
    })
    .map_err(|e| Error::Contract(format!("manifest: {e}")))?;
    std::fs::write(dir.join("manifest.toml"), text)?;
    if !finite {
        return Err(Error::Numerical("front sweep produced non-finite objective values".into()));
    }
    Ok(TraceReport { front, filtered })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick_config(mode: &str) -> ProblemConfig {
        let text = format!(
            r#"
            [obstacle]
            center = [0.5, 0.26]
            radius = 0.05
            [weights]
            lambda = [0.4, 0.3, 0.3]
            penalty = 100.0
            [geometry]
            n_x = 11
            n_y = 3
            [objective]
            angles = 16
            [optimizer]
            mode = "{mode}"
            [optimizer.gradient_descent]
            max_iter = 4
            [optimizer.gradient_descent.armijo]
            max_step_length = 0.05
            [optimizer.hamiltonian]
            steps = 12
            friction = 100.0
            [output]
            snapshot_every = 5
            [trace]
            weights = [0.3, 0.6]
            max_iter = 3
            "#
        );
        ProblemConfig::from_toml(&text).unwrap()
    }

    fn listing(dir: &Path) -> Vec<String> {
        let mut out: Vec<String> = walk(dir).iter().map(|p| p.strip_prefix(dir).unwrap().display().to_string()).collect();
        out.sort();
        out
    }

    fn walk(dir: &Path) -> Vec<PathBuf> {
        let mut out = Vec::new();
        for e in std::fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                out.extend(walk(&p));
            } else {
                out.push(p);
            }
        }
        out
    }

    #[test]
    fn artifacts_and_manifest() {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = quick_config("both");
        let report = run(&cfg, tmp.path()).unwrap();
        let files = listing(tmp.path());
        for f in [
            "manifest.toml",
            "q0.txt",
            "initial.svg",
            "gd/energy.csv",
            "gd/objectives.csv",
            "gd/final.txt",
            "gd/snapshots/k0000.svg",
            "hamiltonian/energy.csv",
            "hamiltonian/snapshots/k0000.svg",
            "hamiltonian/snapshots/k0005.svg",
            "hamiltonian/snapshots/k0010.svg",
            "hamiltonian/snapshots/k0012.svg",
        ] {
            assert!(files.contains(&f.to_string()), "{f} missing from {files:?}");
        }
        let energy = std::fs::read_to_string(tmp.path().join("hamiltonian/energy.csv")).unwrap();
        assert_eq!(energy.lines().count(), 12 + 2);
        let hf = report.hamiltonian.unwrap();
        assert_eq!(hf.rows.len(), 13);

        // every effective parameter is echoed, defaults included
        let manifest: toml::Table = std::fs::read_to_string(tmp.path().join("manifest.toml")).unwrap().parse().unwrap();
        assert_eq!(manifest["status"].as_str(), Some("ok"));
        let echoed: ProblemConfig = manifest["config"].clone().try_into().unwrap();
        assert_eq!(echoed, cfg);
        assert_eq!(manifest["results"].as_array().unwrap().len(), 2);
    }

    #[test]
    fn runs_are_byte_identical() {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let cfg = quick_config("hamiltonian");
        run(&cfg, a.path()).unwrap();
        run(&cfg, b.path()).unwrap();
        assert_eq!(listing(a.path()), listing(b.path()));
        for f in listing(a.path()) {
            assert_eq!(std::fs::read(a.path().join(&f)).unwrap(), std::fs::read(b.path().join(&f)).unwrap(), "{f}");
        }
    }

    #[test]
    fn numerical_failure_leaves_partial_artifacts() {
        let tmp = tempfile::tempdir().unwrap();
        let mut cfg = quick_config("hamiltonian");
        // an enormous kick folds the shape within a few steps
        cfg.optimizer.hamiltonian.p0 = Some(vec![0.0, 0.0, 0.0, -1e4, -1e4, -1e4]);
        let err = run(&cfg, tmp.path()).unwrap_err();
        assert!(matches!(err, Error::Numerical(_)), "{err}");
        let manifest: toml::Table = std::fs::read_to_string(tmp.path().join("manifest.toml")).unwrap().parse().unwrap();
        assert_eq!(manifest["status"].as_str(), Some("numerical_failure"));
        assert!(tmp.path().join("hamiltonian/energy.csv").exists());
    }

    #[test]
    fn trace_writes_fronts() {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = quick_config("gd");
        let q0 = cfg.straight_shape().unwrap().to_flat();
        let report = trace(&cfg, &q0, tmp.path()).unwrap();
        assert_eq!(report.front.len(), 2);
        let text = std::fs::read_to_string(tmp.path().join("front.csv")).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(matches!(trace(&cfg, &q0[..3], tmp.path()), Err(Error::Config(_))));
    }

    #[test]
    fn straight_rod_sits_below_and_start_above() {
        let cfg = quick_config("gd");
        let problem = cfg.build_problem().unwrap();
        let rod = cfg.straight_shape().unwrap().to_flat();
        assert_eq!(obstacle_side(&problem, &rod).unwrap(), Side::Below);
        let q0 = cfg.build_initial_shape().unwrap().to_flat();
        assert_eq!(obstacle_side(&problem, &q0).unwrap(), Side::Above);
        let (lo, hi) = boundaries_at(&problem, &rod, 0.5).unwrap();
        assert!((lo - 0.0).abs() < 1e-12 && (hi - 0.2).abs() < 1e-12);
    }

    #[test]
    fn output_root_override() {
        let mut cfg = quick_config("gd");
        cfg.output.directory = "case".into();
        // the only test touching this variable
        std::env::set_var(OUTPUT_ROOT_ENV, "/tmp/root");
        assert_eq!(output_dir(&cfg), PathBuf::from("/tmp/root/case"));
        std::env::remove_var(OUTPUT_ROOT_ENV);
        assert_eq!(output_dir(&cfg), PathBuf::from("case"));
        cfg.output.directory = "/abs/case".into();
        assert_eq!(output_dir(&cfg), PathBuf::from("/abs/case"));
    }
}
