//! Failure probability, volume and obstacle penalty of a shape, their
//! weighted sum, and gradients with respect to the free spline coefficients.
//!
//! The failure functional is differentiated with the discrete adjoint of the
//! elasticity system combined with exact mesh sensitivities (node heights are
//! linear in the coefficients). The penalty is differentiated with central
//! differences.

use crate::error::{Error, Result};
use crate::fem::{assemble_system, solve_state, BoundaryLoads, ElementGeometry, FemSolution, MaterialParams, Sym2};
use crate::intersect::{shape_circle_area, ObstacleCircle};
use crate::mesh::{BoundaryTag, MeshGrid, ShapeMap};
use crate::optimizers::{Evaluation, Objective};
use crate::spline::ShapeParams;

/// Positive weights on the simplex plus the penalty coefficient `c_P`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ObjectiveWeights {
    lambda: [f64; 3],
    penalty: f64,
}

impl ObjectiveWeights {
    pub fn new(lambda: [f64; 3], penalty: f64) -> Result<Self> {
        if lambda.iter().any(|&l| !(l > 0.0)) {
            return Err(Error::Domain(format!("weights must be strictly positive, got {lambda:?}")));
        }
        let sum: f64 = lambda.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::Domain(format!("weights must sum to 1, got {sum}")));
        }
        if !(penalty > 0.0) {
            return Err(Error::Domain(format!("penalty coefficient must be > 0, got {penalty}")));
        }
        Ok(Self { lambda, penalty })
    }

    pub fn lambda(&self) -> [f64; 3] {
        self.lambda
    }

    pub fn penalty(&self) -> f64 {
        self.penalty
    }

    pub fn combine(&self, j: [f64; 3]) -> f64 {
        self.lambda[0] * j[0] + self.lambda[1] * j[1] + self.lambda[2] * j[2]
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ObjectiveValue {
    pub j1: f64,
    pub j2: f64,
    pub j3: f64,
    pub j_lambda: f64,
}

impl ObjectiveValue {
    pub fn components(&self) -> [f64; 3] {
        [self.j1, self.j2, self.j3]
    }
}

/// Trapezoidal rule over equispaced directions on the unit circle for the
/// Weibull density `(1/2π) ∫ ((nᵀσn)⁺ / σ0)^m dn`.
#[derive(Clone, Debug)]
pub struct WeibullQuadrature {
    normals: Vec<[f64; 2]>,
}

impl WeibullQuadrature {
    pub fn new(n_angles: usize) -> Result<Self> {
        if n_angles < 4 {
            return Err(Error::Contract(format!("need at least 4 quadrature angles, got {n_angles}")));
        }
        let normals = (0..n_angles)
            .map(|k| {
                let phi = std::f64::consts::TAU * k as f64 / n_angles as f64;
                [phi.cos(), phi.sin()]
            })
            .collect();
        Ok(Self { normals })
    }

    pub fn len(&self) -> usize {
        self.normals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.normals.is_empty()
    }

    pub fn density(&self, stress: &Sym2, mat: &MaterialParams) -> f64 {
        let m = mat.weibull_modulus;
        let sum: f64 = self
            .normals
            .iter()
            .map(|&n| (stress.normal(n).max(0.0) / mat.sigma0).powf(m))
            .sum();
        sum / self.normals.len() as f64
    }

    /// Derivative of [`Self::density`] with respect to the stress tensor.
    pub fn density_gradient(&self, stress: &Sym2, mat: &MaterialParams) -> Sym2 {
        let m = mat.weibull_modulus;
        let mut g = Sym2::default();
        for &n in &self.normals {
            let s = stress.normal(n);
            if s > 0.0 {
                let c = m * (s / mat.sigma0).powf(m - 1.0) / mat.sigma0;
                g.xx += c * n[0] * n[0];
                g.yy += c * n[1] * n[1];
                g.xy += c * n[0] * n[1];
            }
        }
        g.scaled(1.0 / self.normals.len() as f64)
    }
}

/// Weibull failure functional of a solved state.
pub fn eval_j1(mesh: &MeshGrid, sol: &FemSolution, mat: &MaterialParams, quad: &WeibullQuadrature) -> Result<f64> {
    if sol.stress.len() != mesh.triangles.len() {
        return Err(Error::Contract(format!(
            "state has {} element stresses for {} elements",
            sol.stress.len(),
            mesh.triangles.len()
        )));
    }
    Ok(sol.stress.iter().enumerate().map(|(e, s)| mesh.area(e) * quad.density(s, mat)).sum())
}

pub fn eval_j2(mesh: &MeshGrid) -> f64 {
    mesh.total_area()
}

pub fn eval_j3(mesh: &MeshGrid, circle: &ObstacleCircle, penalty: f64) -> f64 {
    penalty * shape_circle_area(mesh, circle).area
}

/// Central-difference settings: step `max(rel_step * |q_i|, floor)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FiniteDifference {
    pub rel_step: f64,
    pub floor: f64,
}

impl Default for FiniteDifference {
    fn default() -> Self {
        Self { rel_step: 1e-6, floor: 1e-8 }
    }
}

impl FiniteDifference {
    pub fn step(&self, q: f64) -> f64 {
        (self.rel_step * q.abs()).max(self.floor)
    }
}

/// Objective values with per-component gradients over the free coefficients.
#[derive(Clone, Debug)]
pub struct ObjectiveGradient {
    pub value: ObjectiveValue,
    pub j1: Vec<f64>,
    pub j2: Vec<f64>,
    /// Empty when the penalty gradient was not requested.
    pub j3: Vec<f64>,
    pub total: Vec<f64>,
    /// Some penalty component fell back to a one-sided difference.
    pub one_sided: bool,
}

/// Everything needed to evaluate a design: geometry map, material, loads,
/// obstacle, weights and the pinned coefficients.
#[derive(Clone, Debug)]
pub struct Problem {
    pub shape_map: ShapeMap,
    pub template: ShapeParams,
    pub material: MaterialParams,
    pub loads: BoundaryLoads,
    pub obstacle: ObstacleCircle,
    pub weights: ObjectiveWeights,
    pub quadrature: WeibullQuadrature,
    pub fd: FiniteDifference,
}

impl Problem {
    pub fn params(&self, flat: &[f64]) -> Result<ShapeParams> {
        self.template.from_flat(flat)
    }

    pub fn state(&self, params: &ShapeParams) -> Result<(MeshGrid, FemSolution)> {
        let mesh = self.shape_map.mesh(params)?;
        let system = assemble_system(&mesh, &self.material, &self.loads)?;
        let sol = solve_state(&system, &mesh, &self.material)?;
        Ok((mesh, sol))
    }

    fn value_of(&self, mesh: &MeshGrid, sol: &FemSolution) -> Result<ObjectiveValue> {
        let j1 = eval_j1(mesh, sol, &self.material, &self.quadrature)?;
        let j2 = eval_j2(mesh);
        let j3 = eval_j3(mesh, &self.obstacle, self.weights.penalty());
        Ok(ObjectiveValue { j1, j2, j3, j_lambda: self.weights.combine([j1, j2, j3]) })
    }

    pub fn evaluate(&self, params: &ShapeParams) -> Result<ObjectiveValue> {
        let (mesh, sol) = self.state(params)?;
        self.value_of(&mesh, &sol)
    }

    pub fn penalty(&self, params: &ShapeParams) -> Result<f64> {
        let mesh = self.shape_map.mesh(params)?;
        Ok(eval_j3(&mesh, &self.obstacle, self.weights.penalty()))
    }

    /// Gradient of `J_λ` and of each component.
    pub fn gradient(&self, params: &ShapeParams) -> Result<ObjectiveGradient> {
        self.gradient_with(params, true)
    }

    /// As [`Self::gradient`]; with `with_penalty = false` the finite-difference
    /// penalty gradient is skipped and `total` covers only `λ1 J1 + λ2 J2`.
    pub fn gradient_with(&self, params: &ShapeParams, with_penalty: bool) -> Result<ObjectiveGradient> {
        let (mesh, sol) = self.state(params)?;
        let value = self.value_of(&mesh, &sol)?;
        let (dy1, dy2) = self.node_sensitivities(&mesh, &sol);
        let j1 = self.chain_to_free(params, &dy1);
        let j2 = self.chain_to_free(params, &dy2);
        let (j3, one_sided) = if with_penalty { self.penalty_gradient(params)? } else { (Vec::new(), false) };
        let [l1, l2, l3] = self.weights.lambda();
        let total = (0..j1.len())
            .map(|i| l1 * j1[i] + l2 * j2[i] + j3.get(i).map_or(0.0, |g| l3 * g))
            .collect();
        Ok(ObjectiveGradient { value, j1, j2, j3, total, one_sided })
    }

    /// Derivatives of J1 and J2 with respect to every node's y-coordinate.
    fn node_sensitivities(&self, mesh: &MeshGrid, sol: &FemSolution) -> (Vec<f64>, Vec<f64>) {
        let mat = &self.material;
        let n_nodes = mesh.nodes.len();
        let geoms: Vec<ElementGeometry> =
            (0..mesh.triangles.len()).map(|e| ElementGeometry::new(mesh.vertices(e))).collect();

        // adjoint load ∂J1/∂u
        let mut rhs = vec![0.0; 2 * n_nodes];
        let mut weibull = Vec::with_capacity(geoms.len());
        for (e, (tri, geom)) in mesh.triangles.iter().zip(&geoms).enumerate() {
            let sigma = sol.stress[e];
            let density = self.quadrature.density(&sigma, mat);
            let t = mat.stress(&self.quadrature.density_gradient(&sigma, mat)).as_matrix();
            for (i, &node) in tri.iter().enumerate() {
                let g = geom.grads[i];
                for a in 0..2 {
                    rhs[2 * node + a] += geom.area * (t[a][0] * g[0] + t[a][1] * g[1]);
                }
            }
            weibull.push((density, t));
        }
        let adjoint = sol.adjoint_solve(&rhs);
        let lam: Vec<[f64; 2]> = adjoint.chunks_exact(2).map(|c| [c[0], c[1]]).collect();

        let mut dy1 = vec![0.0; n_nodes];
        let mut dy2 = vec![0.0; n_nodes];
        let f = self.loads.volume_force;
        let frob = |a: &[[f64; 2]; 2], b: &[[f64; 2]; 2]| {
            a[0][0] * b[0][0] + a[0][1] * b[0][1] + a[1][0] * b[1][0] + a[1][1] * b[1][1]
        };
        for (e, (tri, geom)) in mesh.triangles.iter().zip(&geoms).enumerate() {
            let area = geom.area;
            let hu = geom.displacement_gradient(tri.map(|v| sol.displacement[v]));
            let hl = geom.displacement_gradient(tri.map(|v| lam[v]));
            let sig_u = sol.stress[e].as_matrix();
            let sig_l = mat.stress(&Sym2::sym(hl)).as_matrix();
            let (density, t) = weibull[e];
            let energy = frob(&sig_u, &hl);
            let lam_sum = tri.iter().fold([0.0; 2], |acc, &v| [acc[0] + lam[v][0], acc[1] + lam[v][1]]);
            let body = (f[0] * lam_sum[0] + f[1] * lam_sum[1]) / 3.0;
            for (k, &node) in tri.iter().enumerate() {
                let gk = geom.grads[k];
                // moving vertex k upward: δA = A ∂_yφ_k, δH = -H (e_y ⊗ ∇φ_k)
                let d_area = area * gk[1];
                let shift = |h: &[[f64; 2]; 2]| {
                    [[-h[0][1] * gk[0], -h[0][1] * gk[1]], [-h[1][1] * gk[0], -h[1][1] * gk[1]]]
                };
                let (dhu, dhl) = (shift(&hu), shift(&hl));
                let explicit = d_area * density + area * frob(&t, &dhu);
                let d_residual = d_area * energy + area * (frob(&dhu, &sig_l) + frob(&sig_u, &dhl));
                dy1[node] += explicit - d_residual + d_area * body;
                dy2[node] += d_area;
            }
        }
        // traction work on loaded edges depends on their length
        let g = self.loads.traction;
        for edge in mesh.boundary.iter().filter(|b| b.tag == BoundaryTag::NeumannFixed) {
            let [a, b] = edge.nodes;
            let (pa, pb) = (mesh.nodes[a], mesh.nodes[b]);
            let len = (pb[0] - pa[0]).hypot(pb[1] - pa[1]);
            let work = 0.5 * (g[0] * (lam[a][0] + lam[b][0]) + g[1] * (lam[a][1] + lam[b][1]));
            dy1[a] += (pa[1] - pb[1]) / len * work;
            dy1[b] += (pb[1] - pa[1]) / len * work;
        }
        (dy1, dy2)
    }

    /// Pulls node-height sensitivities back to the free coefficients.
    fn chain_to_free(&self, params: &ShapeParams, dy: &[f64]) -> Vec<f64> {
        let n = params.n_basis();
        let (n_x, n_y) = self.shape_map.dims();
        let mut full = vec![0.0; 2 * n];
        for i in 0..n_x {
            let basis = self.shape_map.column_basis(i);
            let (mut plain, mut offset) = (0.0, 0.0);
            for j in 0..n_y {
                let d = dy[self.shape_map.node_index(i, j)];
                plain += d;
                offset += self.shape_map.row_offset(j) * d;
            }
            for b in 0..n {
                full[b] += basis[b] * plain;
                full[n + b] += basis[b] * offset;
            }
        }
        params.free_slots().into_iter().map(|s| full[s]).collect()
    }

    /// Central differences of J3 over the free coefficients.
    fn penalty_gradient(&self, params: &ShapeParams) -> Result<(Vec<f64>, bool)> {
        let flat = params.to_flat();
        let mut grad = Vec::with_capacity(flat.len());
        let mut one_sided = false;
        let at = |q: &[f64]| -> Result<f64> { self.penalty(&params.from_flat(q)?) };
        for i in 0..flat.len() {
            let h = self.fd.step(flat[i]);
            let mut plus = flat.clone();
            plus[i] += h;
            let mut minus = flat.clone();
            minus[i] -= h;
            let g = match (at(&plus), at(&minus)) {
                (Ok(p), Ok(m)) => (p - m) / (2.0 * h),
                (Ok(p), Err(Error::DegenerateShape { .. })) => {
                    one_sided = true;
                    (p - at(&flat)?) / h
                }
                (Err(Error::DegenerateShape { .. }), Ok(m)) => {
                    one_sided = true;
                    (at(&flat)? - m) / h
                }
                (Err(e), _) | (_, Err(e)) => return Err(e),
            };
            grad.push(g);
        }
        Ok((grad, one_sided))
    }
}

pub fn eval_j_lambda(params: &ShapeParams, problem: &Problem) -> Result<ObjectiveValue> {
    problem.evaluate(params)
}

pub fn grad_j_lambda(params: &ShapeParams, problem: &Problem) -> Result<Vec<f64>> {
    Ok(problem.gradient(params)?.total)
}

/// Which scalarization an optimizer sees.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Scalarization {
    /// `λ1 J1 + λ2 J2 + λ3 J3` with the problem's weights.
    Weighted,
    /// `w J1 + (1 − w) J2`, penalty ignored.
    Biobjective(f64),
}

/// Adapts a [`Problem`] to the optimizers' flat-vector interface.
#[derive(Clone, Copy, Debug)]
pub struct ShapeObjective<'a> {
    pub problem: &'a Problem,
    pub scalarization: Scalarization,
}

impl<'a> ShapeObjective<'a> {
    pub fn weighted(problem: &'a Problem) -> Self {
        Self { problem, scalarization: Scalarization::Weighted }
    }

    pub fn biobjective(problem: &'a Problem, w: f64) -> Self {
        Self { problem, scalarization: Scalarization::Biobjective(w) }
    }

    fn scalar(&self, v: &ObjectiveValue) -> f64 {
        match self.scalarization {
            Scalarization::Weighted => v.j_lambda,
            Scalarization::Biobjective(w) => w * v.j1 + (1.0 - w) * v.j2,
        }
    }
}

impl Objective for ShapeObjective<'_> {
    fn evaluate(&self, q: &[f64]) -> Result<Evaluation> {
        let v = self.problem.evaluate(&self.problem.params(q)?)?;
        Ok(Evaluation { value: self.scalar(&v), components: Some(v.components()) })
    }

    fn gradient(&self, q: &[f64]) -> Result<Vec<f64>> {
        Ok(self.evaluate_with_gradient(q)?.1)
    }

    fn evaluate_with_gradient(&self, q: &[f64]) -> Result<(Evaluation, Vec<f64>)> {
        let params = self.problem.params(q)?;
        let (g, value) = match self.scalarization {
            Scalarization::Weighted => {
                let g = self.problem.gradient(&params)?;
                let v = g.value;
                (g.total, v)
            }
            Scalarization::Biobjective(w) => {
                let g = self.problem.gradient_with(&params, false)?;
                let total = g.j1.iter().zip(&g.j2).map(|(a, b)| w * a + (1.0 - w) * b).collect();
                (total, g.value)
            }
        };
        Ok((Evaluation { value: self.scalar(&value), components: Some(value.components()) }, g))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::BoundaryLoads;
    use crate::mesh::ShapeMap;
    use crate::spline::BSplineBasis;

    fn problem(obstacle: ObstacleCircle) -> Problem {
        Problem {
            shape_map: ShapeMap::new(BSplineBasis::clamped_uniform(5, 3).unwrap(), 41, 7, 1.0).unwrap(),
            template: ShapeParams::with_pinned_ends(vec![0.1; 5], vec![0.2; 5]).unwrap(),
            material: MaterialParams::new(320e9, 0.25, 5.0, 20e6).unwrap(),
            loads: BoundaryLoads::tensile(1e7),
            obstacle,
            weights: ObjectiveWeights::new([0.4, 0.3, 0.3], 100.0).unwrap(),
            quadrature: WeibullQuadrature::new(64).unwrap(),
            fd: FiniteDifference::default(),
        }
    }

    fn far_circle() -> ObstacleCircle {
        ObstacleCircle::new([0.5, 5.0], 0.05).unwrap()
    }

    #[test]
    fn weights_invariants() {
        assert!(ObjectiveWeights::new([1.0, 0.0, 0.0], 1.0).is_err());
        assert!(ObjectiveWeights::new([0.5, 0.3, 0.3], 1.0).is_err());
        assert!(ObjectiveWeights::new([0.4, 0.3, 0.3], 0.0).is_err());
    }

    #[test]
    fn uniaxial_density_is_wallis_integral() {
        let mat = MaterialParams::new(1.0, 0.25, 5.0, 2.0).unwrap();
        let quad = WeibullQuadrature::new(64).unwrap();
        let s = 3.0;
        let w = quad.density(&Sym2 { xx: s, yy: 0.0, xy: 0.0 }, &mat);
        let exact = (s / 2.0f64).powi(5) * 63.0 / 256.0;
        assert!((w - exact).abs() < 1e-14 * exact);
        // homogeneity of degree m
        let w2 = quad.density(&Sym2 { xx: 2.5 * s, yy: 0.0, xy: 0.0 }, &mat);
        assert!((w2 / w - 2.5f64.powi(5)).abs() < 1e-10 * 2.5f64.powi(5));
        assert_eq!(quad.density(&Sym2::default(), &mat), 0.0);
    }

    #[test]
    fn density_gradient_matches_differences() {
        let mat = MaterialParams::new(1.0, 0.25, 5.0, 1.5).unwrap();
        let quad = WeibullQuadrature::new(64).unwrap();
        let s = Sym2 { xx: 1.2, yy: -0.4, xy: 0.7 };
        let g = quad.density_gradient(&s, &mat);
        let h = 1e-6;
        let fd = |d: Sym2| (quad.density(&Sym2 { xx: s.xx + h * d.xx, yy: s.yy + h * d.yy, xy: s.xy + h * d.xy }, &mat)
            - quad.density(&Sym2 { xx: s.xx - h * d.xx, yy: s.yy - h * d.yy, xy: s.xy - h * d.xy }, &mat))
            / (2.0 * h);
        for d in [Sym2 { xx: 1.0, ..Default::default() }, Sym2 { yy: 1.0, ..Default::default() }, Sym2 { xy: 1.0, ..Default::default() }] {
            assert!((fd(d) - g.contract(&d)).abs() < 1e-7);
        }
    }

    #[test]
    fn rod_values() {
        let p = problem(far_circle());
        let v = p.evaluate(&p.template).unwrap();
        assert!((v.j2 - 0.2).abs() < 1e-14);
        assert_eq!(v.j3, 0.0);
        assert!(v.j1 > 0.0);
        assert_eq!(v.j_lambda, 0.4 * v.j1 + 0.3 * v.j2 + 0.3 * v.j3);
    }

    #[test]
    fn unsolved_state_is_a_contract_error() {
        let p = problem(far_circle());
        let (mesh, sol) = p.state(&p.template).unwrap();
        let mut truncated = sol.clone();
        truncated.stress.truncate(10);
        assert!(matches!(eval_j1(&mesh, &truncated, &p.material, &p.quadrature), Err(Error::Contract(_))));
    }

    #[test]
    fn penalty_gradient_vanishes_far_from_obstacle() {
        let p = problem(far_circle());
        let g = p.gradient(&p.template).unwrap();
        assert!(g.j3.iter().all(|&x| x == 0.0));
        assert!(!g.one_sided);
    }

    #[test]
    fn penalty_containment_value() {
        let mut p = problem(ObstacleCircle::new([0.5, 0.1], 0.05).unwrap());
        let v = p.evaluate(&p.template).unwrap();
        assert!((v.j3 - 100.0 * std::f64::consts::PI * 0.0025).abs() < 1e-10);
        p.weights = ObjectiveWeights::new([0.4, 0.3, 0.3], 200.0).unwrap();
        assert_eq!(p.evaluate(&p.template).unwrap().j3, 2.0 * v.j3);
    }

    /// Volume derivative of the straight rod with respect to the middle
    /// thickness coefficient: trapezoidal rule of the basis function on the
    /// mesh columns, with the basis expanded as explicit polynomials.
    #[test]
    fn volume_gradient_of_rod() {
        let p = problem(far_circle());
        let g = p.gradient(&p.template).unwrap();
        let dx: f64 = 1.0 / 40.0;
        for (slot, basis) in [(3usize, 1usize), (4, 2), (5, 3)] {
            let trap: f64 = (0..41)
                .map(|i| {
                    let w = if i == 0 || i == 40 { 0.5 } else { 1.0 };
                    w * dx * crate::spline::tests::cubic_pieces(i as f64 * dx)[basis]
                })
                .sum();
            assert!((g.j2[slot] - trap).abs() < 1e-14, "slot {slot}: {} vs {trap}", g.j2[slot]);
            // continuous integral (t_{j+4} - t_j) / 4
            let exact = 0.25;
            assert!((g.j2[slot] - exact).abs() < 1e-3);
        }
        // meanline shifts do not change the volume
        assert!(g.j2[..3].iter().all(|x| x.abs() < 1e-14));
    }
}
