use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::ffnn::{forward_generic, forward_with_weights, FfnnConfig, NetworkParameters};
use super::jets::{jet_forward, JetSpec};
use super::NetworkError;
use crate::autodiff::{Dual, Scalar};

/// Bounds and Dirichlet data of the hard-boundary-condition ansatz.
///
/// Each spatial dimension has exactly one axis-aligned Dirichlet boundary at
/// `x_bc[i]` where component `i` of the displacement equals `g_ext[i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnsatzConfig {
    pub x_min: [f64; 2],
    pub x_max: [f64; 2],
    pub kappa_min: Vec<f64>,
    pub kappa_max: Vec<f64>,
    pub u_min: [f64; 2],
    pub u_max: [f64; 2],
    pub x_bc: [f64; 2],
    pub g_ext: [f64; 2],
}

impl AnsatzConfig {
    pub fn validate(&self) -> Result<(), NetworkError> {
        for i in 0..2 {
            if !(self.x_min[i] < self.x_max[i]) {
                return Err(NetworkError::Config(format!("degenerate coordinate range in dimension {i}")));
            }
            if !(self.u_min[i] < self.u_max[i]) {
                return Err(NetworkError::Config(format!("degenerate displacement range in dimension {i}")));
            }
        }
        if self.kappa_min.len() != self.kappa_max.len() {
            return Err(NetworkError::Config("parameter bounds differ in length".into()));
        }
        if let Some(i) = (0..self.kappa_min.len()).find(|&i| !(self.kappa_min[i] < self.kappa_max[i])) {
            return Err(NetworkError::Config(format!("degenerate parameter range in entry {i}")));
        }
        Ok(())
    }

    pub fn n_kappa(&self) -> usize {
        self.kappa_min.len()
    }

    pub fn contains_kappa(&self, kappa: &[f64]) -> bool {
        kappa.iter().zip(self.kappa_min.iter().zip(&self.kappa_max)).all(|(k, (lo, hi))| lo <= k && k <= hi)
    }

    /// Map coordinates and parameters to `[-1, 1]`.
    pub fn normalize_input<S: Scalar>(&self, x: [S; 2], kappa: &[S]) -> Vec<S> {
        let mut out = Vec::with_capacity(2 + kappa.len());
        for i in 0..2 {
            out.push(unit_map(x[i], self.x_min[i], self.x_max[i]));
        }
        for (j, k) in kappa.iter().enumerate() {
            out.push(unit_map(*k, self.kappa_min[j], self.kappa_max[j]));
        }
        out
    }

    pub fn normalize_output<S: Scalar>(&self, u: [S; 2]) -> [S; 2] {
        [unit_map(u[0], self.u_min[0], self.u_max[0]), unit_map(u[1], self.u_min[1], self.u_max[1])]
    }

    pub fn denormalize_output<S: Scalar>(&self, v: [S; 2]) -> [S; 2] {
        let back = |v: S, lo: f64, hi: f64| (v + 1.0) * (0.5 * (hi - lo)) + lo;
        [back(v[0], self.u_min[0], self.u_max[0]), back(v[1], self.u_min[1], self.u_max[1])]
    }

    /// Normalized linear distance to the Dirichlet boundary of each dimension.
    pub fn distance<S: Scalar>(&self, x: [S; 2]) -> [S; 2] {
        [
            (x[0] - self.x_bc[0]) / (self.x_max[0] - self.x_min[0]),
            (x[1] - self.x_bc[1]) / (self.x_max[1] - self.x_min[1]),
        ]
    }

    /// Displacement from the raw network output `f` at coordinates `x`.
    pub fn compose<S: Scalar>(&self, x: [S; 2], f: [S; 2]) -> [S; 2] {
        let g = self.normalize_output([S::cst(self.g_ext[0]), S::cst(self.g_ext[1])]);
        let d = self.distance(x);
        self.denormalize_output([g[0] + d[0] * f[0], g[1] + d[1] * f[1]])
    }

    /// Directional seeds (in normalized input space) for derivatives with
    /// respect to the physical coordinates.
    pub fn spatial_seeds(&self) -> Vec<Vec<f64>> {
        let n = 2 + self.n_kappa();
        (0..2)
            .map(|i| {
                let mut d = vec![0.0; n];
                d[i] = 2.0 / (self.x_max[i] - self.x_min[i]);
                d
            })
            .collect()
    }

    /// Directional seeds for derivatives with respect to the material parameters.
    pub fn kappa_seeds(&self) -> Vec<Vec<f64>> {
        let n = 2 + self.n_kappa();
        (0..self.n_kappa())
            .map(|j| {
                let mut d = vec![0.0; n];
                d[2 + j] = 2.0 / (self.kappa_max[j] - self.kappa_min[j]);
                d
            })
            .collect()
    }

    /// Normalized network inputs for a batch, one column per point.
    pub fn input_batch(&self, xs: &[[f64; 2]], kappas: &[&[f64]]) -> Array2<f64> {
        let n = 2 + self.n_kappa();
        let mut m = Array2::zeros((n, xs.len()));
        for (p, (x, k)) in xs.iter().zip(kappas).enumerate() {
            for (r, v) in self.normalize_input(*x, k).into_iter().enumerate() {
                m[[r, p]] = v;
            }
        }
        m
    }
}

fn unit_map<S: Scalar>(v: S, lo: f64, hi: f64) -> S {
    (v - lo) * (2.0 / (hi - lo)) - 1.0
}

/// Checked distance function for physical coordinates.
pub fn distance_function(x: &[f64; 2], cfg: &AnsatzConfig) -> Result<[f64; 2], NetworkError> {
    if let Some(i) = (0..2).find(|&i| !(cfg.x_max[i] > cfg.x_min[i])) {
        return Err(NetworkError::Config(format!("degenerate coordinate range in dimension {i}")));
    }
    Ok(cfg.distance(*x))
}

/// Displacement together with an out-of-box flag for the parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnsatzOutput {
    pub u: [f64; 2],
    pub extrapolated: bool,
}

/// Ansatz evaluated with differentiable weights, for parameter gradients.
pub fn ansatz_eval_generic<S: Scalar>(ffnn: &FfnnConfig, cfg: &AnsatzConfig, theta: &[S], x: [S; 2], kappa: &[S]) -> [S; 2] {
    let x_hat = cfg.normalize_input(x, kappa);
    let f = forward_generic(ffnn, theta, &x_hat);
    cfg.compose(x, [f[0], f[1]])
}

/// A trained (or training) parametric displacement surrogate.
#[derive(Debug, Clone, PartialEq)]
pub struct Ansatz {
    pub ffnn: FfnnConfig,
    pub config: AnsatzConfig,
    pub params: NetworkParameters,
}

impl Ansatz {
    pub fn new(ffnn: FfnnConfig, config: AnsatzConfig, params: NetworkParameters) -> Result<Self, NetworkError> {
        config.validate()?;
        ffnn.validate(config.n_kappa())?;
        if params.theta.len() != ffnn.n_params() {
            return Err(NetworkError::Shape { expected: ffnn.n_params(), got: params.theta.len() });
        }
        Ok(Self { ffnn, config, params })
    }

    pub fn n_kappa(&self) -> usize {
        self.config.n_kappa()
    }

    /// Displacement at `x` for parameters `kappa`, with scalar inputs of any type.
    pub fn eval_scalar<S: Scalar>(&self, x: [S; 2], kappa: &[S]) -> [S; 2] {
        let x_hat = self.config.normalize_input(x, kappa);
        let f = forward_with_weights(&self.ffnn, &self.params.theta, &x_hat);
        self.config.compose(x, [f[0], f[1]])
    }

    pub fn eval(&self, x: [f64; 2], kappa: &[f64]) -> AnsatzOutput {
        AnsatzOutput { u: self.eval_scalar(x, kappa), extrapolated: !self.config.contains_kappa(kappa) }
    }

    /// Displacement gradient `∂u_i/∂X_J` at `x`.
    pub fn grad_u(&self, x: [f64; 2], kappa: &[f64]) -> [[f64; 2]; 2] {
        let xd = [Dual::<f64, 2>::variable(x[0], 0), Dual::variable(x[1], 1)];
        let kd: Vec<Dual<f64, 2>> = kappa.iter().map(|&k| Dual::cst(k)).collect();
        let u = self.eval_scalar(xd, &kd);
        [u[0].eps, u[1].eps]
    }

    /// Batched displacements through the dense jet engine.
    pub fn eval_batch(&self, xs: &[[f64; 2]], kappas: &[&[f64]]) -> Vec<[f64; 2]> {
        let input = self.config.input_batch(xs, kappas);
        let spec = JetSpec::VALUE;
        let (f, _) = jet_forward(&self.ffnn, &self.params.theta, input.view(), &[], spec, false);
        xs.iter()
            .enumerate()
            .map(|(p, x)| self.config.compose(*x, [f[[0, p]], f[[1, p]]]))
            .collect()
    }

    /// Batched displacements and their derivatives with respect to the
    /// material parameters: returns `(u, du/dκ)` per point.
    pub fn eval_batch_kappa_jacobian(&self, xs: &[[f64; 2]], kappas: &[&[f64]]) -> Vec<([f64; 2], [[f64; 2]; 2])> {
        assert_eq!(self.n_kappa(), 2, "parameter Jacobian requires two material parameters");
        let input = self.config.input_batch(xs, kappas);
        let seeds = self.config.kappa_seeds();
        let spec = JetSpec { n_dirs: 2, second_order: false };
        let (f, _) = jet_forward(&self.ffnn, &self.params.theta, input.view(), &seeds, spec, false);
        let b = xs.len();
        xs.iter()
            .enumerate()
            .map(|(p, x)| {
                let fd = |i: usize| Dual::<f64, 2>::new(f[[i, p]], [f[[i, b + p]], f[[i, 2 * b + p]]]);
                let u = self.config.compose([Dual::cst(x[0]), Dual::cst(x[1])], [fd(0), fd(1)]);
                ([u[0].re, u[1].re], [u[0].eps, u[1].eps])
            })
            .collect()
    }
}
