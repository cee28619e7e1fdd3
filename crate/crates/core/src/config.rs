//! Declarative run configuration (TOML) and construction of the problem and
//! the starting shape from it.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{BoundaryLoads, MaterialParams};
use crate::intersect::ObstacleCircle;
use crate::mesh::ShapeMap;
use crate::objectives::{eval_j3, FiniteDifference, ObjectiveWeights, Problem, WeibullQuadrature};
use crate::optimizers::{ArmijoParams, FrictionExponent, HamiltonianParams};
use crate::spline::{BSplineBasis, ShapeParams};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    #[serde(default)]
    pub material: MaterialConfig,
    #[serde(default)]
    pub loads: LoadConfig,
    #[serde(default)]
    pub geometry: GeometryConfig,
    pub obstacle: ObstacleConfig,
    pub weights: WeightConfig,
    #[serde(default)]
    pub objective: ObjectiveConfig,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default)]
    pub initial_shape: InitialShapeConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub trace: TraceConfig,
}

/// Beryllium oxide in SI units.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MaterialConfig {
    pub youngs_modulus: f64,
    pub poisson_ratio: f64,
    pub weibull_modulus: f64,
    /// Weibull scale stress [Pa].
    pub sigma0: f64,
}

impl Default for MaterialConfig {
    fn default() -> Self {
        Self { youngs_modulus: 320e9, poisson_ratio: 0.25, weibull_modulus: 5.0, sigma0: DEFAULT_SIGMA0 }
    }
}

/// Calibrated so the constructed starting shape of the straight-joint case
/// has `J_λ ≈ 3.94` and the unobstructed straight-rod optimum is near 0.0365.
pub const DEFAULT_SIGMA0: f64 = 24.05e6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LoadConfig {
    /// Surface traction on the right edge [Pa].
    pub traction: [f64; 2],
    /// Body force [N/m³].
    pub volume_force: [f64; 2],
}

impl Default for LoadConfig {
    fn default() -> Self {
        Self { traction: [1e7, 0.0], volume_force: [0.0, 0.0] }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeometryConfig {
    pub length: f64,
    /// Height of the left and right boundary edges.
    pub boundary_height: f64,
    /// Meanline height at the left edge.
    pub left_meanline: f64,
    /// Vertical offset of the right edge relative to the left (negative = lower).
    pub right_offset: f64,
    pub n_x: usize,
    pub n_y: usize,
    pub n_basis: usize,
    pub degree: usize,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        Self {
            length: 1.0,
            boundary_height: 0.2,
            left_meanline: 0.1,
            right_offset: 0.0,
            n_x: 41,
            n_y: 7,
            n_basis: 5,
            degree: 3,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObstacleConfig {
    pub center: [f64; 2],
    pub radius: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightConfig {
    /// Weights of (J1, J2, J3); positive, summing to one.
    pub lambda: [f64; 3],
    /// Penalty coefficient `c_P` of J3.
    pub penalty: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ObjectiveConfig {
    /// Directions in the Weibull angular quadrature.
    pub angles: usize,
    pub fd_rel_step: f64,
    pub fd_floor: f64,
}

impl Default for ObjectiveConfig {
    fn default() -> Self {
        let fd = FiniteDifference::default();
        Self { angles: 64, fd_rel_step: fd.rel_step, fd_floor: fd.floor }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Gd,
    Hamiltonian,
    #[default]
    Both,
}

impl Mode {
    pub fn runs_gd(self) -> bool {
        matches!(self, Mode::Gd | Mode::Both)
    }

    pub fn runs_hamiltonian(self) -> bool {
        matches!(self, Mode::Hamiltonian | Mode::Both)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerConfig {
    pub mode: Mode,
    pub gradient_descent: GdConfig,
    pub hamiltonian: HamiltonianConfig,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GdConfig {
    pub tol: f64,
    pub max_iter: usize,
    pub armijo: ArmijoParams,
}

impl Default for GdConfig {
    fn default() -> Self {
        Self { tol: 1e-5, max_iter: 200, armijo: ArmijoParams::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HamiltonianConfig {
    pub mass: f64,
    pub friction: f64,
    pub kappa: f64,
    pub horizon: f64,
    pub steps: usize,
    pub friction_exponent: FrictionExponent,
    /// Optional early stop on `‖∇f‖`; absent means the full horizon runs.
    pub grad_tol: Option<f64>,
    /// Initial momentum; zero when absent.
    pub p0: Option<Vec<f64>>,
}

impl Default for HamiltonianConfig {
    fn default() -> Self {
        Self {
            mass: 10.0,
            friction: 100.0,
            kappa: 1e-3,
            horizon: 1.0,
            steps: 250,
            friction_exponent: FrictionExponent::Quadratic,
            grad_tol: None,
            p0: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitialShapeConfig {
    /// Clearance between the shape's lower boundary and the obstacle top.
    pub margin: f64,
    /// Upper bound on shape heights; a start that must rise above it is rejected.
    pub max_height: f64,
    /// Free thickness coefficients; the boundary height when absent.
    pub thickness: Option<f64>,
    /// Relative lift of each free meanline coefficient (all equal when empty).
    pub lift_profile: Vec<f64>,
}

impl Default for InitialShapeConfig {
    fn default() -> Self {
        Self { margin: 0.01, max_height: 1.0, thickness: None, lift_profile: Vec::new() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub directory: String,
    pub snapshot_every: usize,
    pub svg: bool,
    pub mesh_edges: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { directory: "out".into(), snapshot_every: 10, svg: true, mesh_edges: false }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TraceConfig {
    /// Explicit J1 weights; when empty, `count` equispaced values in
    /// `[w_min, w_max]` are used.
    pub weights: Vec<f64>,
    pub count: usize,
    pub w_min: f64,
    pub w_max: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for TraceConfig {
    fn default() -> Self {
        Self { weights: Vec::new(), count: 21, w_min: 0.05, w_max: 0.95, tol: 1e-5, max_iter: 200 }
    }
}

impl TraceConfig {
    pub fn weight_grid(&self) -> Vec<f64> {
        if !self.weights.is_empty() {
            return self.weights.clone();
        }
        match self.count {
            0 => Vec::new(),
            1 => vec![self.w_min],
            n => (0..n).map(|i| self.w_min + (self.w_max - self.w_min) * i as f64 / (n - 1) as f64).collect(),
        }
    }
}

fn config_error<E: std::fmt::Display>(what: &str) -> impl FnOnce(E) -> Error + '_ {
    move |e| Error::Config(format!("{what}: {e}"))
}

impl ProblemConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Resolved configuration, defaults included.
    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("configuration serializes")
    }

    /// Field-level checks beyond what parsing enforces.
    pub fn validate(&self) -> Result<()> {
        self.material()?;
        self.obstacle()?;
        self.objective_weights()?;
        WeibullQuadrature::new(self.objective.angles).map_err(config_error("objective.angles"))?;
        self.hamiltonian_params()?;
        let g = &self.geometry;
        if g.n_basis < 3 || g.degree == 0 || g.degree >= g.n_basis {
            return Err(Error::Config(format!(
                "geometry: need n_basis >= 3 and 1 <= degree < n_basis, got n_basis = {}, degree = {}",
                g.n_basis, g.degree
            )));
        }
        if let Some(p0) = &self.optimizer.hamiltonian.p0 {
            let n_free = 2 * (g.n_basis - 2);
            if p0.len() != n_free {
                return Err(Error::Config(format!(
                    "optimizer.hamiltonian.p0 has {} entries, expected {n_free}",
                    p0.len()
                )));
            }
        }
        if !(g.boundary_height > 0.0) {
            return Err(Error::Config(format!("geometry.boundary_height must be > 0, got {}", g.boundary_height)));
        }
        self.shape_map()?;
        let gd = &self.optimizer.gradient_descent;
        if !(gd.tol > 0.0) {
            return Err(Error::Config(format!("optimizer.gradient_descent.tol must be > 0, got {}", gd.tol)));
        }
        let a = &gd.armijo;
        if !(a.c1 > 0.0 && a.c1 < 1.0 && a.shrink > 0.0 && a.shrink < 1.0 && a.initial_step > 0.0) {
            return Err(Error::Config(format!("optimizer.gradient_descent.armijo out of range: {a:?}")));
        }
        if self.output.snapshot_every == 0 {
            return Err(Error::Config("output.snapshot_every must be >= 1".into()));
        }
        let lp = &self.initial_shape.lift_profile;
        if !lp.is_empty() && (lp.len() != g.n_basis - 2 || lp.iter().any(|&w| !(w >= 0.0)) || lp.iter().all(|&w| w == 0.0)) {
            return Err(Error::Config(format!(
                "initial_shape.lift_profile needs {} non-negative entries, not all zero, got {lp:?}",
                g.n_basis - 2
            )));
        }
        if !(self.initial_shape.margin >= 0.0) {
            return Err(Error::Config(format!("initial_shape.margin must be >= 0, got {}", self.initial_shape.margin)));
        }
        let grid = self.trace.weight_grid();
        if grid.iter().any(|&w| !(w > 0.0 && w < 1.0)) {
            return Err(Error::Config(format!("trace weights must lie in (0, 1), got {grid:?}")));
        }
        if grid.windows(2).any(|w| w[1] <= w[0]) && grid.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::Config("trace weights must be strictly monotone".into()));
        }
        Ok(())
    }

    pub fn material(&self) -> Result<MaterialParams> {
        let m = &self.material;
        MaterialParams::new(m.youngs_modulus, m.poisson_ratio, m.weibull_modulus, m.sigma0)
            .map_err(config_error("material"))
    }

    pub fn loads(&self) -> BoundaryLoads {
        BoundaryLoads { traction: self.loads.traction, volume_force: self.loads.volume_force }
    }

    pub fn obstacle(&self) -> Result<ObstacleCircle> {
        ObstacleCircle::new(self.obstacle.center, self.obstacle.radius).map_err(config_error("obstacle"))
    }

    pub fn objective_weights(&self) -> Result<ObjectiveWeights> {
        ObjectiveWeights::new(self.weights.lambda, self.weights.penalty).map_err(config_error("weights"))
    }

    pub fn shape_map(&self) -> Result<ShapeMap> {
        let g = &self.geometry;
        let basis = BSplineBasis::clamped_uniform(g.n_basis, g.degree).map_err(config_error("geometry"))?;
        ShapeMap::new(basis, g.n_x, g.n_y, g.length).map_err(config_error("geometry"))
    }

    pub fn hamiltonian_params(&self) -> Result<HamiltonianParams> {
        let h = &self.optimizer.hamiltonian;
        let mut params = HamiltonianParams::new(h.mass, h.friction, h.kappa, h.horizon, h.steps)
            .map_err(config_error("optimizer.hamiltonian"))?;
        params.friction_exponent = h.friction_exponent;
        params.grad_tol = h.grad_tol;
        params.validate().map_err(config_error("optimizer.hamiltonian"))?;
        Ok(params)
    }

    /// Straight profile between the boundary edges: linear meanline
    /// interpolated at the Greville abscissae, constant thickness. Only the
    /// first and last coefficient of each family are meaningful as the
    /// pinned boundary values.
    pub fn straight_shape(&self) -> Result<ShapeParams> {
        let g = &self.geometry;
        let basis = BSplineBasis::clamped_uniform(g.n_basis, g.degree).map_err(config_error("geometry"))?;
        let q_ml = basis.greville().iter().map(|z| g.left_meanline + z * g.right_offset).collect();
        ShapeParams::with_pinned_ends(q_ml, vec![g.boundary_height; g.n_basis]).map_err(config_error("geometry"))
    }

    pub fn build_problem(&self) -> Result<Problem> {
        let o = &self.objective;
        Ok(Problem {
            shape_map: self.shape_map()?,
            template: self.straight_shape()?,
            material: self.material()?,
            loads: self.loads(),
            obstacle: self.obstacle()?,
            weights: self.objective_weights()?,
            quadrature: WeibullQuadrature::new(o.angles).map_err(config_error("objective.angles"))?,
            fd: FiniteDifference { rel_step: o.fd_rel_step, floor: o.fd_floor },
        })
    }

    pub fn build_initial_shape(&self) -> Result<ShapeParams> {
        build_initial_shape(self)
    }
}

/// Lifts the free meanline coefficients of the straight profile by a common
/// amount so the mesh's lower boundary stays `margin` above the obstacle
/// across its horizontal extent.
pub fn build_initial_shape(config: &ProblemConfig) -> Result<ShapeParams> {
    let map = config.shape_map()?;
    let circle = config.obstacle()?;
    let mut straight = config.straight_shape()?;
    let n = straight.n_basis();
    let free_ml: Vec<usize> = (0..n).filter(|&i| straight.free_mask[i]).collect();
    if let Some(t) = config.initial_shape.thickness {
        for i in (0..n).filter(|&i| straight.free_mask[n + i]) {
            straight.q_th[i] = t;
        }
        straight = ShapeParams::new(straight.q_ml, straight.q_th, straight.free_mask)
            .map_err(config_error("initial_shape.thickness"))?;
    }
    let profile = &config.initial_shape.lift_profile;
    let lift = |k: usize| if profile.is_empty() { 1.0 } else { profile[k] };
    let target = circle.center[1] + circle.radius + config.initial_shape.margin;
    let (lo_x, hi_x) = (circle.center[0] - circle.radius, circle.center[0] + circle.radius);

    let mut lifted = straight.clone();
    for (k, &i) in free_ml.iter().enumerate() {
        lifted.q_ml[i] += lift(k);
    }
    let (ml0, th) = map.profiles(&straight)?;
    let (ml1, _) = map.profiles(&lifted)?;
    // lower boundary at column i is low[i] + delta * rate[i]
    let low: Vec<f64> = ml0.iter().zip(&th).map(|(m, t)| m - 0.5 * t).collect();
    let rate: Vec<f64> = ml1.iter().zip(&ml0).map(|(a, b)| a - b).collect();

    let xs = map.column_x();
    let mut samples: Vec<(f64, f64)> = Vec::new();
    let lerp = |x: f64, v: &[f64]| -> f64 {
        let i = xs.partition_point(|&c| c <= x).clamp(1, xs.len() - 1);
        let s = (x - xs[i - 1]) / (xs[i] - xs[i - 1]);
        v[i - 1] + s * (v[i] - v[i - 1])
    };
    for x in [lo_x, hi_x] {
        if x >= xs[0] && x <= xs[xs.len() - 1] {
            samples.push((lerp(x, &low), lerp(x, &rate)));
        }
    }
    for (i, &x) in xs.iter().enumerate() {
        if x >= lo_x && x <= hi_x {
            samples.push((low[i], rate[i]));
        }
    }

    let mut delta = 0.0f64;
    for &(l, r) in &samples {
        if l >= target {
            continue;
        }
        if !(r > 0.0) {
            return Err(Error::Config(format!(
                "initial shape cannot be lifted over the obstacle at height {target} (pinned section)"
            )));
        }
        delta = delta.max((target - l) / r);
    }
    let mut start = straight.clone();
    for (k, &i) in free_ml.iter().enumerate() {
        start.q_ml[i] += delta * lift(k);
    }
    let mesh = map.mesh(&start).map_err(config_error("initial shape"))?;
    let top = mesh.nodes.iter().map(|p| p[1]).fold(f64::NEG_INFINITY, f64::max);
    if top > config.initial_shape.max_height {
        return Err(Error::Config(format!(
            "initial shape must rise to {top:.3} to clear the obstacle, above initial_shape.max_height = {}",
            config.initial_shape.max_height
        )));
    }
    let j3 = eval_j3(&mesh, &circle, config.weights.penalty);
    if j3 != 0.0 {
        return Err(Error::Config(format!("constructed initial shape still overlaps the obstacle (J3 = {j3:e})")));
    }
    Ok(start)
}
