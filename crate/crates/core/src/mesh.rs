//! Triangular meshes of the shape, built column by column from the spline
//! meanline and thickness.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spline::{BSplineBasis, ShapeParams};

pub type Point = [f64; 2];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BoundaryTag {
    /// Clamped edge (`u = 0`).
    Dirichlet,
    /// Loaded edge carrying the surface traction.
    NeumannFixed,
    /// Traction-free edge that moves with the design.
    NeumannFree,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryEdge {
    pub nodes: [usize; 2],
    pub tag: BoundaryTag,
}

/// Node coordinates, triangle connectivity and tagged boundary edges.
///
/// Structured meshes number node `(i, j)` (column `i`, row `j` from the
/// bottom) as `i * n_y + j`.
#[derive(Clone, Debug, PartialEq)]
pub struct MeshGrid {
    pub nodes: Vec<Point>,
    pub triangles: Vec<[usize; 3]>,
    pub boundary: Vec<BoundaryEdge>,
    /// `(n_x, n_y)` for structured meshes.
    pub grid: Option<(usize, usize)>,
}

pub fn signed_area(a: Point, b: Point, c: Point) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))
}

impl MeshGrid {
    /// Builds an unstructured mesh; every triangle must be counter-clockwise.
    pub fn new(nodes: Vec<Point>, triangles: Vec<[usize; 3]>, boundary: Vec<BoundaryEdge>) -> Result<Self> {
        let mesh = Self { nodes, triangles, boundary, grid: None };
        mesh.validate()?;
        Ok(mesh)
    }

    fn validate(&self) -> Result<()> {
        let n = self.nodes.len();
        for (e, tri) in self.triangles.iter().enumerate() {
            if tri.iter().any(|&v| v >= n) {
                return Err(Error::Contract(format!("triangle {e} references a missing node")));
            }
            let area = signed_area(self.nodes[tri[0]], self.nodes[tri[1]], self.nodes[tri[2]]);
            if !(area > 0.0) {
                return Err(Error::Domain(format!("triangle {e} has non-positive area {area}")));
            }
        }
        if self.boundary.iter().any(|b| b.nodes.iter().any(|&v| v >= n)) {
            return Err(Error::Contract("boundary edge references a missing node".into()));
        }
        Ok(())
    }

    pub fn n_x(&self) -> Option<usize> {
        self.grid.map(|g| g.0)
    }

    pub fn n_y(&self) -> Option<usize> {
        self.grid.map(|g| g.1)
    }

    pub fn vertices(&self, e: usize) -> [Point; 3] {
        self.triangles[e].map(|v| self.nodes[v])
    }

    pub fn area(&self, e: usize) -> f64 {
        let [a, b, c] = self.vertices(e);
        signed_area(a, b, c)
    }

    pub fn total_area(&self) -> f64 {
        (0..self.triangles.len()).map(|e| self.area(e)).sum()
    }

    /// Nodes lying on an edge with the given tag, sorted and deduplicated.
    pub fn tagged_nodes(&self, tag: BoundaryTag) -> Vec<usize> {
        let mut nodes: Vec<usize> =
            self.boundary.iter().filter(|b| b.tag == tag).flat_map(|b| b.nodes).collect();
        nodes.sort_unstable();
        nodes.dedup();
        nodes
    }

    /// Closed boundary polygon (counter-clockwise) of a structured mesh.
    pub fn outline(&self) -> Option<Vec<Point>> {
        let (n_x, n_y) = self.grid?;
        let id = |i: usize, j: usize| i * n_y + j;
        let mut ring = Vec::with_capacity(2 * (n_x + n_y));
        ring.extend((0..n_x).map(|i| self.nodes[id(i, 0)]));
        ring.extend((1..n_y).map(|j| self.nodes[id(n_x - 1, j)]));
        ring.extend((0..n_x - 1).rev().map(|i| self.nodes[id(i, n_y - 1)]));
        ring.extend((1..n_y - 1).rev().map(|j| self.nodes[id(0, j)]));
        Some(ring)
    }

    pub fn translated(&self, by: Point) -> Self {
        let mut out = self.clone();
        for p in &mut out.nodes {
            p[0] += by[0];
            p[1] += by[1];
        }
        out
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        for p in &mut out.nodes {
            p[0] *= factor;
            p[1] *= factor;
        }
        out
    }
}

/// The map from spline coefficients to a structured `n_x × n_y` mesh.
///
/// Column `i` sits at `x_i = i * length / (n_x - 1)`; its nodes are equispaced
/// between `ml(x_i) - th(x_i)/2` and `ml(x_i) + th(x_i)/2`. Each cell is split
/// along its lower-left to upper-right diagonal.
#[derive(Clone, Debug)]
pub struct ShapeMap {
    basis: BSplineBasis,
    n_x: usize,
    n_y: usize,
    length: f64,
    xs: Vec<f64>,
    column_basis: Vec<Vec<f64>>,
}

impl ShapeMap {
    pub fn new(basis: BSplineBasis, n_x: usize, n_y: usize, length: f64) -> Result<Self> {
        if n_x < 2 || n_y < 2 {
            return Err(Error::Contract(format!("mesh needs n_x, n_y >= 2, got {n_x} x {n_y}")));
        }
        if !(length > 0.0) {
            return Err(Error::Contract(format!("length must be positive, got {length}")));
        }
        let xs: Vec<f64> = (0..n_x).map(|i| i as f64 * length / (n_x - 1) as f64).collect();
        let column_basis = (0..n_x)
            .map(|i| basis.eval(i as f64 / (n_x - 1) as f64))
            .collect::<Result<_>>()?;
        Ok(Self { basis, n_x, n_y, length, xs, column_basis })
    }

    pub fn basis(&self) -> &BSplineBasis {
        &self.basis
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.n_x, self.n_y)
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn column_x(&self) -> &[f64] {
        &self.xs
    }

    /// Basis values at column `i`.
    pub fn column_basis(&self, i: usize) -> &[f64] {
        &self.column_basis[i]
    }

    /// Relative row offset in `[-1/2, 1/2]`; node `y = ml + offset * th`.
    pub fn row_offset(&self, j: usize) -> f64 {
        j as f64 / (self.n_y - 1) as f64 - 0.5
    }

    pub fn node_index(&self, i: usize, j: usize) -> usize {
        i * self.n_y + j
    }

    /// Meanline and thickness at every column.
    pub fn profiles(&self, params: &ShapeParams) -> Result<(Vec<f64>, Vec<f64>)> {
        if params.n_basis() != self.basis.len() {
            return Err(Error::Contract(format!(
                "shape has {} coefficients per family, basis has {}",
                params.n_basis(),
                self.basis.len()
            )));
        }
        let dot = |b: &[f64], q: &[f64]| b.iter().zip(q).map(|(x, y)| x * y).sum::<f64>();
        let ml = self.column_basis.iter().map(|b| dot(b, &params.q_ml)).collect();
        let th = self.column_basis.iter().map(|b| dot(b, &params.q_th)).collect();
        Ok((ml, th))
    }

    pub fn mesh(&self, params: &ShapeParams) -> Result<MeshGrid> {
        let (ml, th) = self.profiles(params)?;
        if let Some(i) = th.iter().position(|&t| !(t > 0.0)) {
            // report the coefficient with the largest weight on the offending column
            let index = self.column_basis[i]
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .map(|(j, _)| j)
                .unwrap_or(0);
            return Err(Error::DegenerateShape { index, value: params.q_th[index] });
        }
        let (n_x, n_y) = (self.n_x, self.n_y);
        let mut nodes = Vec::with_capacity(n_x * n_y);
        for i in 0..n_x {
            for j in 0..n_y {
                nodes.push([self.xs[i], ml[i] + self.row_offset(j) * th[i]]);
            }
        }
        let id = |i: usize, j: usize| i * n_y + j;
        let mut triangles = Vec::with_capacity(2 * (n_x - 1) * (n_y - 1));
        for i in 0..n_x - 1 {
            for j in 0..n_y - 1 {
                let (ll, lr, ur, ul) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
                triangles.push([ll, lr, ur]);
                triangles.push([ll, ur, ul]);
            }
        }
        let mut boundary = Vec::with_capacity(2 * (n_x + n_y));
        for j in 0..n_y - 1 {
            boundary.push(BoundaryEdge { nodes: [id(0, j + 1), id(0, j)], tag: BoundaryTag::Dirichlet });
            boundary.push(BoundaryEdge {
                nodes: [id(n_x - 1, j), id(n_x - 1, j + 1)],
                tag: BoundaryTag::NeumannFixed,
            });
        }
        for i in 0..n_x - 1 {
            boundary.push(BoundaryEdge { nodes: [id(i, 0), id(i + 1, 0)], tag: BoundaryTag::NeumannFree });
            boundary.push(BoundaryEdge {
                nodes: [id(i + 1, n_y - 1), id(i, n_y - 1)],
                tag: BoundaryTag::NeumannFree,
            });
        }
        Ok(MeshGrid { nodes, triangles, boundary, grid: Some((n_x, n_y)) })
    }
}

/// Convenience wrapper around [`ShapeMap::mesh`].
pub fn shape_from_params(
    params: &ShapeParams,
    basis: &BSplineBasis,
    n_x: usize,
    n_y: usize,
    length: f64,
) -> Result<MeshGrid> {
    ShapeMap::new(basis.clone(), n_x, n_y, length)?.mesh(params)
}
