//! Kinematics, constitutive laws and pointwise equilibrium residuals.

mod constitutive;
mod residual;

pub use constitutive::{first_pk_stress, linear_elastic_stress_plane_stress, neo_hookean_energy, plane_stress_out_of_plane_strain, MaterialModel};
pub use residual::{divergence_of_stress, pde_residual, seed_spatial, traction, traction_residual, BodyState};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::linalg::{det2, embed_plane, identity2, matmul, transpose, Mat2, Mat3};
use crate::autodiff::{AdError, Scalar};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MechanicsError {
    #[error("invalid deformation: det F = {det:e}")]
    InvalidDeformation { det: f64 },
    #[error("non-positive material parameter: K = {k}, G = {g}")]
    InvalidParameters { k: f64, g: f64 },
    #[error(transparent)]
    Autodiff(#[from] AdError),
}

/// Bulk and shear modulus in N/mm².
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaterialParameters {
    pub k: f64,
    pub g: f64,
}

impl MaterialParameters {
    pub fn new(k: f64, g: f64) -> Result<Self, MechanicsError> {
        if !(k > 0.0 && g > 0.0) {
            return Err(MechanicsError::InvalidParameters { k, g });
        }
        Ok(Self { k, g })
    }

    pub fn as_array(&self) -> [f64; 2] {
        [self.k, self.g]
    }
}

/// Young's modulus and Poisson's ratio from bulk and shear modulus.
pub fn kg_to_enu(kappa: &MaterialParameters) -> (f64, f64) {
    let MaterialParameters { k, g } = *kappa;
    (9.0 * k * g / (3.0 * k + g), (3.0 * k - 2.0 * g) / (2.0 * (3.0 * k + g)))
}

/// Inverse of [`kg_to_enu`].
pub fn enu_to_kg(e: f64, nu: f64) -> MaterialParameters {
    MaterialParameters { k: e / (3.0 * (1.0 - 2.0 * nu)), g: e / (2.0 * (1.0 + nu)) }
}

/// Symmetric part of the displacement gradient.
pub fn linear_strain<S: Scalar>(grad_u: &Mat2<S>) -> Mat2<S> {
    let off = (grad_u[0][1] + grad_u[1][0]) * 0.5;
    [[grad_u[0][0], off], [off, grad_u[1][1]]]
}

/// In-plane deformation gradient `F = I + ∇u`.
pub fn deformation_gradient<S: Scalar>(grad_u: &Mat2<S>) -> Result<Mat2<S>, MechanicsError> {
    let i = identity2::<S>();
    let f = [
        [i[0][0] + grad_u[0][0], grad_u[0][1]],
        [grad_u[1][0], i[1][1] + grad_u[1][1]],
    ];
    let j = det2(&f).value();
    if j <= 0.0 || !j.is_finite() {
        return Err(MechanicsError::InvalidDeformation { det: j });
    }
    Ok(f)
}

/// Right Cauchy-Green tensor of the plane-strain extension (`F_33 = 1`).
pub fn right_cauchy_green<S: Scalar>(f: &Mat2<S>) -> Mat3<S> {
    let f3 = embed_plane(f, S::cst(1.0));
    matmul(&transpose(&f3), &f3)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn engineering_constants_of_steel() {
        let (e, nu) = kg_to_enu(&MaterialParameters { k: 175000.0, g: 80769.0 });
        assert!((e - 210000.0).abs() / 210000.0 < 1e-4, "{e}");
        assert!((nu - 0.3).abs() < 1e-4, "{nu}");
    }

    #[test]
    fn equal_moduli_give_one_eighth() {
        let (_, nu) = kg_to_enu(&MaterialParameters { k: 3.0, g: 3.0 });
        assert!((nu - 0.125).abs() < 1e-15);
    }

    #[test]
    fn poisson_range_of_training_box() {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for k in [1e5, 2e5] {
            for g in [6e4, 1e5] {
                let (_, nu) = kg_to_enu(&MaterialParameters { k, g });
                lo = lo.min(nu);
                hi = hi.max(nu);
            }
        }
        assert!((lo - 0.125).abs() < 1e-3 && (hi - 0.3636).abs() < 1e-3, "{lo} {hi}");
    }

    #[test]
    fn enu_round_trip() {
        let kappa = MaterialParameters { k: 1.3e5, g: 7.1e4 };
        let (e, nu) = kg_to_enu(&kappa);
        let back = enu_to_kg(e, nu);
        assert!((back.k - kappa.k).abs() < 1e-9 * kappa.k && (back.g - kappa.g).abs() < 1e-9 * kappa.g);
    }

    #[test]
    fn strain_of_simple_gradients() {
        assert_eq!(linear_strain(&[[0.0, 0.0], [0.0, 0.0]]), [[0.0; 2]; 2]);
        assert_eq!(linear_strain(&[[0.0, 0.3], [-0.3, 0.0]]), [[0.0; 2]; 2]);
        assert_eq!(linear_strain(&[[0.1, 0.0], [0.0, -0.2]]), [[0.1, 0.0], [0.0, -0.2]]);
    }

    #[test]
    fn jacobians_of_simple_gradients() {
        let f = deformation_gradient(&[[0.0, 0.0], [0.0, 0.0]]).unwrap();
        assert_eq!(right_cauchy_green(&f), crate::autodiff::linalg::identity3::<f64>());
        let f = deformation_gradient(&[[0.1, 0.0], [0.0, -0.05]]).unwrap();
        assert!((det2(&f) - 1.045).abs() < 1e-15);
        let w = 0.3;
        let f = deformation_gradient(&[[0.0, w], [-w, 0.0]]).unwrap();
        assert!((det2(&f) - (1.0 + w * w)).abs() < 1e-15);
        assert!(deformation_gradient(&[[-1.0, 0.0], [0.0, 0.0]]).is_err());
    }

    #[test]
    fn parameters_must_be_positive() {
        assert!(MaterialParameters::new(1.0, 0.0).is_err());
        assert!(MaterialParameters::new(1.0, 2.0).is_ok());
    }
}
