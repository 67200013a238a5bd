use super::FemError;
use crate::autodiff::{Dual, Scalar};
use crate::mechanics::{first_pk_stress, MaterialParameters};

const MAX_NEWTON: usize = 50;

/// Principal stretches `(λ₁, λ₂)` of a homogeneous plane-strain Neo-Hookean
/// body under axial first Piola-Kirchhoff traction `t` with a free lateral
/// surface: `P₁₁ = t`, `P₂₂ = 0`.
pub fn neo_hookean_uniaxial_homogeneous(kappa: &MaterialParameters, t: f64) -> Result<(f64, f64), FemError> {
    // relative target, floored at the round-off level of the stress evaluation
    let tol = (1e-12 * t.abs().max(1.0)).max(64.0 * f64::EPSILON * (kappa.k + kappa.g));
    let residual = |lam: [f64; 2]| -> Result<([f64; 2], [[f64; 2]; 2]), FemError> {
        let z = Dual::<f64, 2>::cst(0.0);
        let f = [[Dual::variable(lam[0], 0), z], [z, Dual::variable(lam[1], 1)]];
        let p = first_pk_stress(&f, kappa).map_err(|e| FemError::Newton(format!("stress evaluation failed: {e}")))?;
        Ok(([p[0][0].re - t, p[1][1].re], [p[0][0].eps, p[1][1].eps]))
    };
    let mut lam = [1.0, 1.0];
    let (mut r, mut jac) = residual(lam)?;
    for _ in 0..MAX_NEWTON {
        let norm = r[0].hypot(r[1]);
        if norm <= tol {
            return Ok((lam[0], lam[1]));
        }
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        if det == 0.0 {
            return Err(FemError::Newton(format!("singular tangent at stretches {lam:?}")));
        }
        let step = [(jac[1][1] * r[0] - jac[0][1] * r[1]) / det, (jac[0][0] * r[1] - jac[1][0] * r[0]) / det];
        // backtrack until the stretches stay positive and the residual drops
        let mut alpha = 1.0;
        loop {
            let trial = [lam[0] - alpha * step[0], lam[1] - alpha * step[1]];
            if trial[0] > 0.0 && trial[1] > 0.0 {
                if let Ok((rt, jt)) = residual(trial) {
                    if rt[0].hypot(rt[1]) < norm || alpha < 1e-3 {
                        lam = trial;
                        r = rt;
                        jac = jt;
                        break;
                    }
                }
            }
            alpha *= 0.5;
            if alpha < 1e-10 {
                return Err(FemError::Newton(format!("line search failed at residual {norm:e}")));
            }
        }
    }
    Err(FemError::Newton(format!("no convergence after {MAX_NEWTON} iterations, residual {:e}", r[0].hypot(r[1]))))
}

/// Homogeneous displacement `u = ((λ₁ − 1) x, (λ₂ − 1) y)` at given points.
pub fn homogeneous_displacements(stretches: (f64, f64), points: &[[f64; 2]]) -> Vec<[f64; 2]> {
    points.iter().map(|x| [(stretches.0 - 1.0) * x[0], (stretches.1 - 1.0) * x[1]]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const KAPPA: MaterialParameters = MaterialParameters { k: 5000.0, g: 1000.0 };

    #[test]
    fn zero_load_is_undeformed() {
        assert_eq!(neo_hookean_uniaxial_homogeneous(&KAPPA, 0.0).unwrap(), (1.0, 1.0));
    }

    #[test]
    fn small_load_matches_plane_strain_linear_response() {
        let t = 1e-3 * KAPPA.g;
        let (l1, l2) = neo_hookean_uniaxial_homogeneous(&KAPPA, t).unwrap();
        // plane strain, σ_yy = 0: ε_xx = t (λ + 2G) / (4G (λ + G))
        let lambda = KAPPA.k - 2.0 * KAPPA.g / 3.0;
        let g = KAPPA.g;
        let exx = t * (lambda + 2.0 * g) / (4.0 * g * (lambda + g));
        let eyy = -lambda / (lambda + 2.0 * g) * exx;
        assert!(((l1 - 1.0) - exx).abs() <= 1e-2 * exx.abs());
        assert!(((l2 - 1.0) - eyy).abs() <= 1e-2 * eyy.abs());
    }

    #[test]
    fn compressive_load_converges_by_residual_substitution() {
        let t = -100.0;
        let (l1, l2) = neo_hookean_uniaxial_homogeneous(&KAPPA, t).unwrap();
        let p = first_pk_stress(&[[l1, 0.0], [0.0, l2]], &KAPPA).unwrap();
        assert!((p[0][0] - t).abs() <= 1e-10 && p[1][1].abs() <= 1e-10);
        assert!(p[0][1] == 0.0 && p[1][0] == 0.0);
        assert!(l1 < 1.0 && l2 > 1.0);
    }
}
