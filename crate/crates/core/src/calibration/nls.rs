use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::CalibrationError;
use crate::field::DisplacementField;
use crate::mechanics::MaterialParameters;
use crate::metrics::are;
use crate::network::Ansatz;
use crate::training::{lbfgs_minimize_box, Bounds, KappaBox, LbfgsConfig, Termination};

/// Diagonal weights `1 / mean|u|` per displacement component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightMatrix {
    pub wx: f64,
    pub wy: f64,
}

impl WeightMatrix {
    pub fn from_data(data: &DisplacementField) -> Result<Self, CalibrationError> {
        if data.is_empty() {
            return Err(CalibrationError::Data("no displacement data".into()));
        }
        let n = data.len() as f64;
        let mx = data.displacements.iter().map(|u| u[0].abs()).sum::<f64>() / n;
        let my = data.displacements.iter().map(|u| u[1].abs()).sum::<f64>() / n;
        let (wx, wy) = (1.0 / mx, 1.0 / my);
        if !(wx.is_finite() && wy.is_finite()) {
            return Err(CalibrationError::Weights { mean_abs: [mx, my] });
        }
        Ok(Self { wx, wy })
    }

    pub fn as_array(&self) -> [f64; 2] {
        [self.wx, self.wy]
    }
}

/// Surrogate displacements at the sensors, all x components then all y.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    pub values: Vec<f64>,
    /// Set when `kappa` lies outside the trained parameter box.
    pub extrapolated: bool,
}

fn require_parametric(ansatz: &Ansatz) -> Result<(), CalibrationError> {
    if ansatz.n_kappa() != 2 {
        return Err(CalibrationError::Config(format!("calibration needs a surrogate with two parameter inputs, got {}", ansatz.n_kappa())));
    }
    Ok(())
}

pub fn parameters_to_state(ansatz: &Ansatz, kappa: &MaterialParameters, sensors: &[[f64; 2]]) -> Result<StateVector, CalibrationError> {
    require_parametric(ansatz)?;
    let k = kappa.as_array();
    let u = ansatz.eval_batch(sensors, &vec![k.as_slice(); sensors.len()]);
    Ok(StateVector { values: stack(&u), extrapolated: !ansatz.config.contains_kappa(&k) })
}

/// State vector and its derivative with respect to `(K, G)`: row `i` of the
/// Jacobian belongs to entry `i` of the state.
pub fn parameters_to_state_jacobian(
    ansatz: &Ansatz,
    kappa: &MaterialParameters,
    sensors: &[[f64; 2]],
) -> Result<(Vec<f64>, Vec<[f64; 2]>), CalibrationError> {
    require_parametric(ansatz)?;
    let k = kappa.as_array();
    let rows = ansatz.eval_batch_kappa_jacobian(sensors, &vec![k.as_slice(); sensors.len()]);
    let n = sensors.len();
    let mut values = vec![0.0; 2 * n];
    let mut jac = vec![[0.0; 2]; 2 * n];
    for (p, (u, du)) in rows.iter().enumerate() {
        for c in 0..2 {
            values[c * n + p] = u[c];
            jac[c * n + p] = du[c];
        }
    }
    Ok((values, jac))
}

fn stack(u: &[[f64; 2]]) -> Vec<f64> {
    u.iter().map(|v| v[0]).chain(u.iter().map(|v| v[1])).collect()
}

/// Weighted least-squares misfit of the surrogate against sensor data.
#[derive(Debug, Clone)]
pub struct NlsObjective<'a> {
    ansatz: &'a Ansatz,
    sensors: Vec<[f64; 2]>,
    data: Vec<f64>,
    weights: [f64; 2],
}

impl<'a> NlsObjective<'a> {
    pub fn new(ansatz: &'a Ansatz, data: &DisplacementField, weights: WeightMatrix) -> Result<Self, CalibrationError> {
        require_parametric(ansatz)?;
        data.validate(2).map_err(|e| CalibrationError::Data(e.to_string()))?;
        Ok(Self { ansatz, sensors: data.points.clone(), data: data.stacked(), weights: weights.as_array() })
    }

    /// `½‖W(û(κ) − d)‖²` and its gradient with respect to `(K, G)`.
    pub fn value_and_gradient(&self, kappa: &MaterialParameters) -> Result<(f64, [f64; 2]), CalibrationError> {
        let (u, jac) = parameters_to_state_jacobian(self.ansatz, kappa, &self.sensors)?;
        let n = self.sensors.len();
        let mut value = 0.0;
        let mut grad = [0.0; 2];
        for (i, ((ui, di), row)) in u.iter().zip(&self.data).zip(&jac).enumerate() {
            let w = self.weights[i / n];
            let r = w * (ui - di);
            value += 0.5 * r * r;
            grad[0] += w * r * row[0];
            grad[1] += w * r * row[1];
        }
        if !value.is_finite() {
            return Err(CalibrationError::Numerical(format!("non-finite misfit at {kappa:?}")));
        }
        Ok((value, grad))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NlsResult {
    pub kappa: MaterialParameters,
    pub loss: f64,
    /// Gradient of the misfit with respect to `(K, G)` at the estimate.
    pub gradient: [f64; 2],
    /// Norm of the box-projected gradient in unit-box coordinates, the
    /// quantity the optimizer drives below its tolerance.
    pub scaled_gradient_norm: f64,
    pub evaluations: usize,
    pub iterations: usize,
    pub termination: Termination,
    pub wall_time_s: f64,
}

/// Box-constrained weighted NLS estimate, optimized in unit-box coordinates.
/// `kappa0` defaults to the box centre.
pub fn nls_calibrate(
    ansatz: &Ansatz,
    data: &DisplacementField,
    kappa0: Option<MaterialParameters>,
    kappa_box: &KappaBox,
    config: &LbfgsConfig,
) -> Result<NlsResult, CalibrationError> {
    let start = Instant::now();
    kappa_box.validate().map_err(|e| CalibrationError::Config(e.to_string()))?;
    let objective = NlsObjective::new(ansatz, data, WeightMatrix::from_data(data)?)?;
    let width = kappa_box.width();
    let q0 = kappa_box.to_unit(&kappa0.unwrap_or_else(|| kappa_box.center()));
    let scaled = |q: &[f64]| -> Result<(f64, Vec<f64>), CalibrationError> {
        let (v, g) = objective.value_and_gradient(&kappa_box.map_unit([q[0], q[1]]))?;
        Ok((v, vec![g[0] * width[0], g[1] * width[1]]))
    };
    let bounds = Bounds { lower: vec![0.0; 2], upper: vec![1.0; 2] };
    let (q, trace) = lbfgs_minimize_box(scaled, &q0, config, &bounds).map_err(|e| CalibrationError::Numerical(e.to_string()))?;
    let kappa = kappa_box.map_unit([q[0], q[1]]);
    let (loss, gradient) = objective.value_and_gradient(&kappa)?;
    Ok(NlsResult {
        kappa,
        loss,
        gradient,
        scaled_gradient_norm: *trace.gradient_norms.last().expect("trace holds the start point"),
        evaluations: trace.evaluations + 1,
        iterations: trace.iterations(),
        termination: trace.termination.clone().expect("optimizer sets a termination reason"),
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

/// Nearest snapshot parameter pair (Euclidean, in parameter units) and its
/// absolute relative errors `[K, G]`.
pub fn lookup_table_baseline(snapshots: &[MaterialParameters], truth: &MaterialParameters) -> Result<(MaterialParameters, [f64; 2]), CalibrationError> {
    let nearest = snapshots
        .iter()
        .min_by(|a, b| {
            let da = (a.k - truth.k).hypot(a.g - truth.g);
            let db = (b.k - truth.k).hypot(b.g - truth.g);
            da.total_cmp(&db)
        })
        .ok_or_else(|| CalibrationError::Config("empty snapshot table".into()))?;
    let err = |a: f64, b: f64| are(a, b).map_err(|e| CalibrationError::Numerical(e.to_string()));
    Ok((*nearest, [err(nearest.k, truth.k)?, err(nearest.g, truth.g)?]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::PlateGeometry;
    use crate::network::{glorot_init, FfnnConfig};

    pub(crate) fn toy_ansatz(seed: u64) -> Ansatz {
        let geom = PlateGeometry::quarter_plate();
        let cfg = geom.ansatz_config(vec![1e5, 6e4], vec![2e5, 1e5], [-0.08, -0.03], [0.01, 0.003]);
        let ffnn = FfnnConfig::new(2, &[8, 8]).unwrap();
        Ansatz::new(ffnn.clone(), cfg, glorot_init(&ffnn, seed)).unwrap()
    }

    fn kbox() -> KappaBox {
        KappaBox::new(MaterialParameters { k: 1e5, g: 6e4 }, MaterialParameters { k: 2e5, g: 1e5 }).unwrap()
    }

    #[test]
    fn sensor_on_dirichlet_plane_is_exact() {
        let a = toy_ansatz(1);
        let s = parameters_to_state(&a, &kbox().center(), &[[0.0, 40.0], [-30.0, 0.0]]).unwrap();
        assert_eq!(s.values.len(), 4);
        assert!(s.values[0].abs() <= 1e-12 * 0.08);
        assert!(s.values[3].abs() <= 1e-12 * 0.03);
        assert!(!s.extrapolated);
        let out = parameters_to_state(&a, &MaterialParameters { k: 3e5, g: 8e4 }, &[[-1.0, 1.0]]).unwrap();
        assert!(out.extrapolated);
    }

    #[test]
    fn state_jacobian_matches_finite_differences() {
        let a = toy_ansatz(2);
        let sensors = [[-50.0, 50.0], [-90.0, 20.0], [-20.0, 80.0]];
        let k0 = MaterialParameters { k: 1.3e5, g: 7.1e4 };
        let (_, jac) = parameters_to_state_jacobian(&a, &k0, &sensors).unwrap();
        for (j, h) in [(0usize, 1.0), (1, 1.0)] {
            let mut kp = k0;
            let mut km = k0;
            if j == 0 {
                kp.k += h;
                km.k -= h;
            } else {
                kp.g += h;
                km.g -= h;
            }
            let up = parameters_to_state(&a, &kp, &sensors).unwrap().values;
            let um = parameters_to_state(&a, &km, &sensors).unwrap().values;
            for (i, row) in jac.iter().enumerate() {
                let fd = (up[i] - um[i]) / (2.0 * h);
                assert!((fd - row[j]).abs() <= 1e-4 * row[j].abs().max(1e-12), "{i},{j}: {fd} vs {}", row[j]);
            }
        }
    }

    #[test]
    fn noiseless_self_generated_data_is_recovered() {
        let a = toy_ansatz(3);
        let truth = MaterialParameters { k: 1.37e5, g: 8.3e4 };
        let sensors: Vec<[f64; 2]> = (0..64).map(|i| [-5.0 - 1.4 * i as f64, 3.0 + 1.5 * i as f64]).collect();
        let u = a.eval_batch(&sensors, &vec![truth.as_array().as_slice(); sensors.len()]);
        let data = DisplacementField::new(sensors, u);
        let res = nls_calibrate(&a, &data, None, &kbox(), &LbfgsConfig::default()).unwrap();
        assert!(are(res.kappa.k, truth.k).unwrap() < 1e-6 && are(res.kappa.g, truth.g).unwrap() < 1e-6, "{res:?}");
        assert!(res.scaled_gradient_norm <= 1e-7);
    }

    #[test]
    fn zero_component_is_weight_error() {
        let data = DisplacementField::new(vec![[-1.0, 1.0], [-2.0, 2.0]], vec![[0.1, 0.0], [0.2, 0.0]]);
        assert!(matches!(WeightMatrix::from_data(&data), Err(CalibrationError::Weights { .. })));
    }

    #[test]
    fn lookup_on_grid_point_is_exact() {
        let grid = [MaterialParameters { k: 1e5, g: 6e4 }, MaterialParameters { k: 1.5e5, g: 8e4 }];
        let (k, err) = lookup_table_baseline(&grid, &grid[1]).unwrap();
        assert_eq!((k, err), (grid[1], [0.0, 0.0]));
        assert!(lookup_table_baseline(&[], &grid[0]).is_err());
    }
}
