//! Reference solutions: plane-stress linear triangles on plate meshes and a
//! homogeneous-deformation oracle for the hyperelastic model.

mod hyper;
mod mesh;
mod reference;
mod solver;

pub use hyper::{homogeneous_displacements, neo_hookean_uniaxial_homogeneous};
pub use mesh::{mesh_geometry, mesh_quarter_plate, mesh_square, BoundaryEdge, TriMesh};
pub use reference::{sample_field, ReferenceSolver};
pub use solver::{sample_snapshots, solve_linear_elastic, solve_with_constraints, FemSolution};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum FemError {
    #[error("meshing failed: {0}")]
    Mesh(String),
    #[error("singular system: unconstrained {mode}")]
    Singular { mode: &'static str },
    #[error("solver: {0}")]
    Solver(String),
    #[error("Newton iteration: {0}")]
    Newton(String),
    #[error("cannot draw {requested} snapshots from {available} nodes")]
    Sampling { requested: usize, available: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
