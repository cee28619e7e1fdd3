//! Linear elasticity on P1 triangles under plane strain.
//!
//! Displacement degrees of freedom are interleaved per node: `2 * node + c`
//! with `c = 0` for x and `c = 1` for y.

use serde::{Deserialize, Serialize};

use crate::band::{BandCholesky, BandMatrix};
use crate::error::{Error, Result};
use crate::mesh::{BoundaryTag, MeshGrid, Point};

/// Symmetric 2×2 tensor.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Sym2 {
    pub xx: f64,
    pub yy: f64,
    pub xy: f64,
}

impl Sym2 {
    pub fn trace(&self) -> f64 {
        self.xx + self.yy
    }

    /// Full contraction `A : B`.
    pub fn contract(&self, other: &Sym2) -> f64 {
        self.xx * other.xx + self.yy * other.yy + 2.0 * self.xy * other.xy
    }

    /// `nᵀ A n`.
    pub fn normal(&self, n: [f64; 2]) -> f64 {
        self.xx * n[0] * n[0] + self.yy * n[1] * n[1] + 2.0 * self.xy * n[0] * n[1]
    }

    /// Symmetric part of a full 2×2 matrix given row-major.
    pub fn sym(m: [[f64; 2]; 2]) -> Self {
        Self { xx: m[0][0], yy: m[1][1], xy: 0.5 * (m[0][1] + m[1][0]) }
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { xx: c * self.xx, yy: c * self.yy, xy: c * self.xy }
    }

    pub fn as_matrix(&self) -> [[f64; 2]; 2] {
        [[self.xx, self.xy], [self.xy, self.yy]]
    }
}

/// Elastic and Weibull material constants.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MaterialParams {
    pub youngs_modulus: f64,
    pub poisson_ratio: f64,
    pub weibull_modulus: f64,
    pub sigma0: f64,
    lame_lambda: f64,
    lame_mu: f64,
}

impl MaterialParams {
    pub fn new(youngs_modulus: f64, poisson_ratio: f64, weibull_modulus: f64, sigma0: f64) -> Result<Self> {
        if !(youngs_modulus > 0.0) {
            return Err(Error::Domain(format!("Young's modulus must be > 0, got {youngs_modulus}")));
        }
        if !(poisson_ratio > 0.0 && poisson_ratio < 0.5) {
            return Err(Error::Domain(format!("Poisson ratio must lie in (0, 0.5), got {poisson_ratio}")));
        }
        if !(weibull_modulus >= 1.0) {
            return Err(Error::Domain(format!("Weibull modulus must be >= 1, got {weibull_modulus}")));
        }
        if !(sigma0 > 0.0) {
            return Err(Error::Domain(format!("sigma0 must be > 0, got {sigma0}")));
        }
        let (e, nu) = (youngs_modulus, poisson_ratio);
        Ok(Self {
            youngs_modulus,
            poisson_ratio,
            weibull_modulus,
            sigma0,
            lame_lambda: nu * e / ((1.0 + nu) * (1.0 - 2.0 * nu)),
            lame_mu: e / (2.0 * (1.0 + nu)),
        })
    }

    pub fn lame_lambda(&self) -> f64 {
        self.lame_lambda
    }

    pub fn lame_mu(&self) -> f64 {
        self.lame_mu
    }

    /// Hooke's law `λ tr(ε) I + 2 μ ε`.
    pub fn stress(&self, strain: &Sym2) -> Sym2 {
        let l = self.lame_lambda * strain.trace();
        Sym2 {
            xx: l + 2.0 * self.lame_mu * strain.xx,
            yy: l + 2.0 * self.lame_mu * strain.yy,
            xy: 2.0 * self.lame_mu * strain.xy,
        }
    }
}

/// Constant surface traction on loaded edges and constant body force.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryLoads {
    pub traction: [f64; 2],
    pub volume_force: [f64; 2],
}

impl BoundaryLoads {
    pub fn tensile(g: f64) -> Self {
        Self { traction: [g, 0.0], volume_force: [0.0, 0.0] }
    }

    pub fn zero() -> Self {
        Self { traction: [0.0; 2], volume_force: [0.0; 2] }
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { traction: self.traction.map(|v| c * v), volume_force: self.volume_force.map(|v| c * v) }
    }
}

/// Area and gradients of the three barycentric shape functions.
#[derive(Clone, Copy, Debug)]
pub struct ElementGeometry {
    pub area: f64,
    pub grads: [[f64; 2]; 3],
}

impl ElementGeometry {
    pub fn new(v: [Point; 3]) -> Self {
        let two_a = (v[1][0] - v[0][0]) * (v[2][1] - v[0][1]) - (v[1][1] - v[0][1]) * (v[2][0] - v[0][0]);
        let grads = std::array::from_fn(|i| {
            let (j, k) = ((i + 1) % 3, (i + 2) % 3);
            [(v[j][1] - v[k][1]) / two_a, (v[k][0] - v[j][0]) / two_a]
        });
        Self { area: 0.5 * two_a, grads }
    }

    /// Displacement gradient `H[a][b] = ∂u_a/∂x_b` from nodal values.
    pub fn displacement_gradient(&self, u: [[f64; 2]; 3]) -> [[f64; 2]; 2] {
        let mut h = [[0.0; 2]; 2];
        for (ui, gi) in u.iter().zip(&self.grads) {
            for a in 0..2 {
                for b in 0..2 {
                    h[a][b] += ui[a] * gi[b];
                }
            }
        }
        h
    }
}

/// 6×6 P1 element stiffness, local dofs ordered `(node, component)`.
///
/// Only the upper triangle is computed; the lower one is its exact mirror.
pub fn element_stiffness(geom: &ElementGeometry, mat: &MaterialParams) -> [[f64; 6]; 6] {
    let (lam, mu, g) = (mat.lame_lambda, mat.lame_mu, &geom.grads);
    let mut k = [[0.0; 6]; 6];
    for r in 0..6 {
        for s in r..6 {
            let (i, a, j, c) = (r / 2, r % 2, s / 2, s % 2);
            let gij = g[i][0] * g[j][0] + g[i][1] * g[j][1];
            let delta = if a == c { gij } else { 0.0 };
            let v = geom.area * (lam * g[i][a] * g[j][c] + mu * (delta + g[i][c] * g[j][a]));
            k[r][s] = v;
            k[s][r] = v;
        }
    }
    k
}

/// Assembled stiffness matrix and load vector, before boundary conditions.
#[derive(Clone, Debug)]
pub struct LinearSystem {
    pub stiffness: BandMatrix,
    pub load: Vec<f64>,
}

const GAUSS2: [(f64, f64); 2] = [(-0.577_350_269_189_625_8, 1.0), (0.577_350_269_189_625_8, 1.0)];

pub fn assemble_system(mesh: &MeshGrid, mat: &MaterialParams, loads: &BoundaryLoads) -> Result<LinearSystem> {
    if mesh.tagged_nodes(BoundaryTag::Dirichlet).is_empty() {
        return Err(Error::Constraint("mesh has no Dirichlet edge; stiffness would be singular".into()));
    }
    let n_dof = 2 * mesh.nodes.len();
    let half_band = mesh
        .triangles
        .iter()
        .map(|t| 2 * (t.iter().max().unwrap() - t.iter().min().unwrap()) + 1)
        .max()
        .unwrap_or(1);
    let mut stiffness = BandMatrix::zeros(n_dof, half_band);
    let mut load = vec![0.0; n_dof];
    for (e, tri) in mesh.triangles.iter().enumerate() {
        let geom = ElementGeometry::new(mesh.vertices(e));
        let ke = element_stiffness(&geom, mat);
        for (li, &ni) in tri.iter().enumerate() {
            for a in 0..2 {
                for (lj, &nj) in tri.iter().enumerate() {
                    for c in 0..2 {
                        stiffness.add(2 * ni + a, 2 * nj + c, ke[2 * li + a][2 * lj + c]);
                    }
                }
                load[2 * ni + a] += geom.area * loads.volume_force[a] / 3.0;
            }
        }
    }
    for edge in mesh.boundary.iter().filter(|b| b.tag == BoundaryTag::NeumannFixed) {
        let [na, nb] = edge.nodes;
        let (pa, pb) = (mesh.nodes[na], mesh.nodes[nb]);
        let len = (pb[0] - pa[0]).hypot(pb[1] - pa[1]);
        for (xi, w) in GAUSS2 {
            let (phi_a, phi_b) = (0.5 * (1.0 - xi), 0.5 * (1.0 + xi));
            for c in 0..2 {
                let g = 0.5 * len * w * loads.traction[c];
                load[2 * na + c] += g * phi_a;
                load[2 * nb + c] += g * phi_b;
            }
        }
    }
    Ok(LinearSystem { stiffness, load })
}

/// How the Dirichlet edge is held.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Support {
    /// Both displacement components vanish on the Dirichlet edge.
    #[default]
    Clamped,
    /// Only `u_x` vanishes on the Dirichlet edge, plus `u_y` at its lowest node.
    Roller,
}

fn constrained_dofs(mesh: &MeshGrid, support: Support) -> Vec<usize> {
    let nodes = mesh.tagged_nodes(BoundaryTag::Dirichlet);
    match support {
        Support::Clamped => nodes.iter().flat_map(|&n| [2 * n, 2 * n + 1]).collect(),
        Support::Roller => {
            let lowest = nodes
                .iter()
                .copied()
                .min_by(|&a, &b| mesh.nodes[a][1].total_cmp(&mesh.nodes[b][1]))
                .expect("non-empty Dirichlet set");
            let mut dofs: Vec<usize> = nodes.iter().map(|&n| 2 * n).collect();
            dofs.push(2 * lowest + 1);
            dofs.sort_unstable();
            dofs
        }
    }
}

/// Factorized stiffness with the Dirichlet rows and columns eliminated.
#[derive(Clone, Debug)]
pub struct ReducedSolver {
    factor: BandCholesky,
    constrained: Vec<usize>,
}

impl ReducedSolver {
    pub fn new(system: &LinearSystem, mesh: &MeshGrid, support: Support) -> Result<Self> {
        let constrained = constrained_dofs(mesh, support);
        if constrained.is_empty() {
            return Err(Error::Constraint("no constrained degrees of freedom".into()));
        }
        let mut k = system.stiffness.clone();
        let w = k.half_band();
        let n = k.dim();
        for &d in &constrained {
            for j in d.saturating_sub(w)..(d + w + 1).min(n) {
                k.set(d, j, 0.0);
                k.set(j, d, 0.0);
            }
            k.set(d, d, 1.0);
        }
        let factor = k.cholesky()?;
        Ok(Self { factor, constrained })
    }

    /// Solves `K x = rhs` on the free dofs with `x = 0` on constrained ones.
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let mut b = rhs.to_vec();
        for &d in &self.constrained {
            b[d] = 0.0;
        }
        let mut x = self.factor.solve(&b);
        for &d in &self.constrained {
            x[d] = 0.0;
        }
        x
    }

    pub fn constrained(&self) -> &[usize] {
        &self.constrained
    }

    pub fn pivot_ratio(&self) -> f64 {
        self.factor.pivot_ratio()
    }
}

/// Displacements with piecewise-constant strain and stress.
#[derive(Clone, Debug)]
pub struct FemSolution {
    pub displacement: Vec<[f64; 2]>,
    pub strain: Vec<Sym2>,
    pub stress: Vec<Sym2>,
    solver: ReducedSolver,
}

impl FemSolution {
    pub fn dofs(&self) -> Vec<f64> {
        self.displacement.iter().flatten().copied().collect()
    }

    /// Solves the adjoint system with the same (symmetric) reduced stiffness.
    pub fn adjoint_solve(&self, rhs: &[f64]) -> Vec<f64> {
        self.solver.solve(rhs)
    }

    pub fn solver(&self) -> &ReducedSolver {
        &self.solver
    }
}

/// Relative residual `‖K u − F‖ / ‖F‖` restricted to unconstrained dofs.
pub fn relative_residual(system: &LinearSystem, solution: &FemSolution) -> f64 {
    let u = solution.dofs();
    let ku = system.stiffness.mul_vec(&u);
    let mut free = vec![true; u.len()];
    for &d in solution.solver.constrained() {
        free[d] = false;
    }
    let (mut r2, mut f2) = (0.0, 0.0);
    for i in (0..u.len()).filter(|&i| free[i]) {
        r2 += (ku[i] - system.load[i]).powi(2);
        f2 += system.load[i].powi(2);
    }
    if f2 == 0.0 {
        r2.sqrt()
    } else {
        (r2 / f2).sqrt()
    }
}

pub fn solve_state(system: &LinearSystem, mesh: &MeshGrid, mat: &MaterialParams) -> Result<FemSolution> {
    solve_state_with(system, mesh, mat, Support::Clamped)
}

pub fn solve_state_with(
    system: &LinearSystem,
    mesh: &MeshGrid,
    mat: &MaterialParams,
    support: Support,
) -> Result<FemSolution> {
    let solver = ReducedSolver::new(system, mesh, support)?;
    let u = solver.solve(&system.load);
    if let Some(i) = u.iter().position(|v| !v.is_finite()) {
        return Err(Error::Numerical(format!(
            "non-finite displacement at dof {i} (pivot ratio {:e})",
            solver.pivot_ratio()
        )));
    }
    let displacement: Vec<[f64; 2]> = u.chunks_exact(2).map(|c| [c[0], c[1]]).collect();
    let mut strain = Vec::with_capacity(mesh.triangles.len());
    let mut stress = Vec::with_capacity(mesh.triangles.len());
    for (e, tri) in mesh.triangles.iter().enumerate() {
        let geom = ElementGeometry::new(mesh.vertices(e));
        let eps = Sym2::sym(geom.displacement_gradient(tri.map(|v| displacement[v])));
        stress.push(mat.stress(&eps));
        strain.push(eps);
    }
    Ok(FemSolution { displacement, strain, stress, solver })
}
