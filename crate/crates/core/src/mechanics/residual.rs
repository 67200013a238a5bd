use serde::{Deserialize, Serialize};

use super::{MaterialModel, MaterialParameters, MechanicsError};
use crate::autodiff::linalg::Mat2;
use crate::autodiff::{Dual, Scalar};
use crate::network::Ansatz;

/// Reference density and body acceleration; both vanish by default.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct BodyState {
    pub density: f64,
    pub acceleration: [f64; 2],
}

impl BodyState {
    pub fn body_force(&self) -> [f64; 2] {
        [self.density * self.acceleration[0], self.density * self.acceleration[1]]
    }
}

/// Coordinates seeded for first and second spatial derivatives.
pub fn seed_spatial<T: Scalar>(x: [T; 2]) -> [Dual<Dual<T, 2>, 2>; 2] {
    let mut out = [Dual::lift(Dual::lift(x[0])), Dual::lift(Dual::lift(x[1]))];
    for (j, xj) in out.iter_mut().enumerate() {
        xj.re = Dual::lifted_variable(x[j], j);
        xj.eps[j] = Dual::cst(1.0);
    }
    out
}

/// `Div P` from a displacement gradient whose entries carry their own
/// spatial derivatives.
pub fn divergence_of_stress<S: Scalar>(
    model: MaterialModel,
    grad_u: &Mat2<Dual<S, 2>>,
    kappa: &MaterialParameters,
) -> Result<[S; 2], MechanicsError> {
    let p = model.stress(grad_u, kappa)?;
    Ok([p[0][0].eps[0] + p[0][1].eps[1], p[1][0].eps[0] + p[1][1].eps[1]])
}

/// `P n` for a unit reference normal.
pub fn traction<S: Scalar>(model: MaterialModel, grad_u: &Mat2<S>, kappa: &MaterialParameters, normal: [f64; 2]) -> Result<[S; 2], MechanicsError> {
    let p = model.stress(grad_u, kappa)?;
    Ok([p[0][0] * normal[0] + p[0][1] * normal[1], p[1][0] * normal[0] + p[1][1] * normal[1]])
}

fn kappa_inputs(ansatz: &Ansatz, kappa: &MaterialParameters) -> Vec<f64> {
    match ansatz.n_kappa() {
        0 => Vec::new(),
        _ => kappa.as_array().to_vec(),
    }
}

/// Equilibrium residual `Div P + ρ b` of the ansatz at an interior point.
pub fn pde_residual(ansatz: &Ansatz, model: MaterialModel, kappa: &MaterialParameters, x: [f64; 2], body: &BodyState) -> Result<[f64; 2], MechanicsError> {
    let xs = seed_spatial(x);
    let ks: Vec<Dual<Dual<f64, 2>, 2>> = kappa_inputs(ansatz, kappa).into_iter().map(Dual::cst).collect();
    let u = ansatz.eval_scalar(xs, &ks);
    let grad_u = [[u[0].eps[0], u[0].eps[1]], [u[1].eps[0], u[1].eps[1]]];
    let div = divergence_of_stress(model, &grad_u, kappa)?;
    let b = body.body_force();
    Ok([div[0] + b[0], div[1] + b[1]])
}

/// Traction residual `P n − t̄` of the ansatz at a boundary point.
pub fn traction_residual(
    ansatz: &Ansatz,
    model: MaterialModel,
    kappa: &MaterialParameters,
    x: [f64; 2],
    normal: [f64; 2],
    t_bar: [f64; 2],
) -> Result<[f64; 2], MechanicsError> {
    let grad_u = ansatz.grad_u(x, &kappa_inputs(ansatz, kappa));
    let t = traction(model, &grad_u, kappa, normal)?;
    Ok([t[0] - t_bar[0], t[1] - t_bar[1]])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::linalg::Mat2;

    fn linear_field(a: Mat2<f64>) -> impl Fn([Dual<Dual<f64, 2>, 2>; 2]) -> Mat2<Dual<f64, 2>> {
        move |x| {
            let u = [x[0] * a[0][0] + x[1] * a[0][1], x[0] * a[1][0] + x[1] * a[1][1]];
            [[u[0].eps[0], u[0].eps[1]], [u[1].eps[0], u[1].eps[1]]]
        }
    }

    #[test]
    fn affine_fields_are_in_equilibrium() {
        let kappa = MaterialParameters { k: 1.4e5, g: 7e4 };
        let field = linear_field([[2e-3, -1e-3], [5e-4, 1e-3]]);
        for model in [MaterialModel::LinearElasticPlaneStress, MaterialModel::NeoHookeanPlaneStrain] {
            let g = field(seed_spatial([-40.0, 30.0]));
            let div = divergence_of_stress(model, &g, &kappa).unwrap();
            assert!(div[0].abs() < 1e-9 && div[1].abs() < 1e-9, "{model:?}: {div:?}");
        }
    }

    #[test]
    fn quadratic_field_divergence() {
        // u_x = c x², u_y = 0 → Div σ = (E/(1−ν²)·2c, 0) under plane stress
        let kappa = MaterialParameters { k: 1.4e5, g: 7e4 };
        let c = 1e-6;
        let x = seed_spatial([-20.0, 10.0]);
        let ux = x[0] * x[0] * c;
        let g = [[ux.eps[0], ux.eps[1]], [Dual::cst(0.0), Dual::cst(0.0)]];
        let div = divergence_of_stress(MaterialModel::LinearElasticPlaneStress, &g, &kappa).unwrap();
        let (e, nu) = super::super::kg_to_enu(&kappa);
        assert!((div[0] - e / (1.0 - nu * nu) * 2.0 * c).abs() < 1e-12);
        assert!(div[1].abs() < 1e-15);
    }

    #[test]
    fn uniaxial_stress_is_traction_free_on_top() {
        let kappa = MaterialParameters { k: 1.75e5, g: 80769.0 };
        let (e, nu) = super::super::kg_to_enu(&kappa);
        let g = [[100.0 / e, 0.0], [0.0, -nu * 100.0 / e]];
        let t = traction(MaterialModel::LinearElasticPlaneStress, &g, &kappa, [0.0, 1.0]).unwrap();
        assert!(t[0].abs() < 1e-10 && t[1].abs() < 1e-10);
        let t = traction(MaterialModel::LinearElasticPlaneStress, &g, &kappa, [-1.0, 0.0]).unwrap();
        assert!((t[0] + 100.0).abs() < 1e-8);
    }

    #[test]
    fn body_force_enters_the_residual() {
        let b = BodyState { density: 2.0, acceleration: [0.0, -3.0] };
        assert_eq!(b.body_force(), [0.0, -6.0]);
        assert_eq!(BodyState::default().body_force(), [0.0, 0.0]);
    }
}
