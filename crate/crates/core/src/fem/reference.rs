use std::sync::Arc;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{homogeneous_displacements, mesh_geometry, neo_hookean_uniaxial_homogeneous, solve_linear_elastic, FemError, TriMesh};
use crate::field::DisplacementField;
use crate::geometry::PlateGeometry;
use crate::mechanics::{MaterialModel, MaterialParameters};

/// Reference displacement fields for a plate problem: linear-elastic FEM,
/// or the homogeneous uniaxial solution for the Neo-Hookean square plate.
#[derive(Debug, Clone)]
pub struct ReferenceSolver {
    geometry: PlateGeometry,
    model: MaterialModel,
    mesh: Arc<TriMesh>,
}

impl ReferenceSolver {
    pub fn new(geometry: PlateGeometry, model: MaterialModel, target_h: f64) -> Result<Self, FemError> {
        geometry.validate().map_err(FemError::Mesh)?;
        if model == MaterialModel::NeoHookeanPlaneStrain && (geometry.has_hole() || geometry.left_traction[1] != 0.0) {
            return Err(FemError::Solver("the hyperelastic reference covers only a square plate under normal traction".into()));
        }
        Ok(Self { geometry, model, mesh: Arc::new(mesh_geometry(&geometry, target_h)?) })
    }

    pub fn mesh(&self) -> &Arc<TriMesh> {
        &self.mesh
    }

    pub fn geometry(&self) -> &PlateGeometry {
        &self.geometry
    }

    /// Displacements at all mesh nodes.
    pub fn solve(&self, kappa: &MaterialParameters) -> Result<DisplacementField, FemError> {
        match self.model {
            MaterialModel::LinearElasticPlaneStress => Ok(solve_linear_elastic(&self.mesh, kappa, self.geometry.left_traction)?.to_field()),
            MaterialModel::NeoHookeanPlaneStrain => {
                // outward normal (−1, 0) on the loaded edge: P₁₁ = −t̄ₓ
                let stretches = neo_hookean_uniaxial_homogeneous(kappa, -self.geometry.left_traction[0])?;
                let u = homogeneous_displacements(stretches, &self.mesh.nodes);
                Ok(DisplacementField::new(self.mesh.nodes.clone(), u))
            }
        }
    }

    /// `n` distinct nodes of the reference solution, drawn uniformly.
    pub fn sample(&self, kappa: &MaterialParameters, n: usize, seed: u64) -> Result<DisplacementField, FemError> {
        sample_field(&self.solve(kappa)?, n, seed)
    }
}

/// `n` distinct entries of a field, drawn uniformly without replacement.
pub fn sample_field(field: &DisplacementField, n: usize, seed: u64) -> Result<DisplacementField, FemError> {
    if n > field.len() {
        return Err(FemError::Sampling { requested: n, available: field.len() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let idx = sample(&mut rng, field.len(), n);
    Ok(DisplacementField::new(
        idx.iter().map(|i| field.points[i]).collect(),
        idx.iter().map(|i| field.displacements[i]).collect(),
    ))
}
