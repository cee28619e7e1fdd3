//! Shape optimization of 2D ceramic joints under tensile load.
//!
//! A shape is a rod described by B-spline meanline and thickness profiles.
//! Its quality is the weighted sum of a Weibull failure functional computed
//! from a linear-elasticity solve, the volume, and a penalty on the area it
//! shares with a circular obstacle. Two optimizers are provided: gradient
//! descent with Armijo backtracking, and a dissipative Hamiltonian (heavy
//! ball with friction) flow integrated with symplectic Euler whose momentum
//! lets the shape pass obstacles that trap plain descent.

pub mod band;
pub mod checks;
pub mod config;
pub mod error;
pub mod export;
pub mod fem;
pub mod intersect;
pub mod mesh;
pub mod objectives;
pub mod optimizers;
pub mod pareto;
pub mod run;
pub mod spline;

pub use error::{Error, Result};
pub use fem::{BoundaryLoads, FemSolution, MaterialParams};
pub use intersect::ObstacleCircle;
pub use mesh::{MeshGrid, ShapeMap};
pub use objectives::{ObjectiveValue, ObjectiveWeights, Problem};
pub use spline::{BSplineBasis, ShapeParams};
