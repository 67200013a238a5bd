use serde::{Deserialize, Serialize};

use super::{deformation_gradient, kg_to_enu, linear_strain, right_cauchy_green, MaterialParameters, MechanicsError};
use crate::autodiff::linalg::{det3, trace, Mat2, Mat3};
use crate::autodiff::{Dual, Scalar};

/// Constitutive model selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MaterialModel {
    LinearElasticPlaneStress,
    NeoHookeanPlaneStrain,
}

impl MaterialModel {
    pub fn name(self) -> &'static str {
        match self {
            Self::LinearElasticPlaneStress => "linear-elastic-plane-stress",
            Self::NeoHookeanPlaneStrain => "neo-hookean-plane-strain",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        [Self::LinearElasticPlaneStress, Self::NeoHookeanPlaneStrain].into_iter().find(|m| m.name() == name)
    }

    /// In-plane stress (Cauchy for the linear model, first Piola-Kirchhoff for
    /// the hyperelastic one) from the displacement gradient.
    pub fn stress<S: Scalar>(self, grad_u: &Mat2<S>, kappa: &MaterialParameters) -> Result<Mat2<S>, MechanicsError> {
        match self {
            Self::LinearElasticPlaneStress => Ok(linear_elastic_stress_plane_stress(&linear_strain(grad_u), kappa)),
            Self::NeoHookeanPlaneStrain => first_pk_stress(&deformation_gradient(grad_u)?, kappa),
        }
    }
}

/// Plane-stress Hooke's law.
pub fn linear_elastic_stress_plane_stress<S: Scalar>(eps: &Mat2<S>, kappa: &MaterialParameters) -> Mat2<S> {
    let (e, nu) = kg_to_enu(kappa);
    let c = e / (1.0 - nu * nu);
    let sxx = (eps[0][0] + eps[1][1] * nu) * c;
    let syy = (eps[1][1] + eps[0][0] * nu) * c;
    let sxy = eps[0][1] * (2.0 * kappa.g);
    [[sxx, sxy], [sxy, syy]]
}

/// Out-of-plane strain that makes `σ_zz` vanish.
pub fn plane_stress_out_of_plane_strain<S: Scalar>(eps: &Mat2<S>, kappa: &MaterialParameters) -> S {
    let (_, nu) = kg_to_enu(kappa);
    (eps[0][0] + eps[1][1]) * (-nu / (1.0 - nu))
}

/// Neo-Hookean strain energy density of a right Cauchy-Green tensor.
pub fn neo_hookean_energy<S: Scalar>(c: &Mat3<S>, kappa: &MaterialParameters) -> Result<S, MechanicsError> {
    let det_c = det3(c);
    if det_c.value() <= 0.0 || !det_c.value().is_finite() {
        return Err(MechanicsError::InvalidDeformation { det: det_c.value() });
    }
    // J^2 = det C, ln J = ln(det C) / 2, J^(-2/3) = det C^(-1/3)
    let ln_j = det_c.checked_ln()? * 0.5;
    let vol = (det_c - 1.0 - ln_j * 2.0) * (kappa.k / 4.0);
    let iso = (det_c.checked_powf(-1.0 / 3.0)? * trace(c) - 3.0) * (kappa.g / 2.0);
    Ok(vol + iso)
}

/// In-plane block of the first Piola-Kirchhoff stress, `P = ∂ψ/∂F`, by
/// forward differentiation of the energy.
pub fn first_pk_stress<S: Scalar>(f: &Mat2<S>, kappa: &MaterialParameters) -> Result<Mat2<S>, MechanicsError> {
    let seeded: Mat2<Dual<S, 4>> = [
        [Dual::lifted_variable(f[0][0], 0), Dual::lifted_variable(f[0][1], 1)],
        [Dual::lifted_variable(f[1][0], 2), Dual::lifted_variable(f[1][1], 3)],
    ];
    let psi = neo_hookean_energy(&right_cauchy_green(&seeded), kappa)?;
    Ok([[psi.eps[0], psi.eps[1]], [psi.eps[2], psi.eps[3]]])
}
