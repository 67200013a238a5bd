use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::NetworkError;
use crate::autodiff::Scalar;

/// Layer widths of a fully connected tanh network, input first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FfnnConfig {
    pub layer_sizes: Vec<usize>,
}

impl FfnnConfig {
    /// Network for 2 spatial inputs plus `n_kappa` parameters and 2 outputs.
    pub fn new(n_kappa: usize, hidden: &[usize]) -> Result<Self, NetworkError> {
        let mut layer_sizes = vec![2 + n_kappa];
        layer_sizes.extend_from_slice(hidden);
        layer_sizes.push(2);
        let cfg = Self { layer_sizes };
        cfg.validate(n_kappa)?;
        Ok(cfg)
    }

    pub fn validate(&self, n_kappa: usize) -> Result<(), NetworkError> {
        let s = &self.layer_sizes;
        if s.len() < 3 {
            return Err(NetworkError::Config("at least one hidden layer is required".into()));
        }
        if s[0] != 2 + n_kappa {
            return Err(NetworkError::Config(format!(
                "input width {} does not match 2 + {n_kappa} parameters",
                s[0]
            )));
        }
        if *s.last().unwrap() != 2 {
            return Err(NetworkError::Config("output width must be 2".into()));
        }
        if s.contains(&0) {
            return Err(NetworkError::Config("layer widths must be positive".into()));
        }
        Ok(())
    }

    pub fn n_inputs(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn n_layers(&self) -> usize {
        self.layer_sizes.len() - 1
    }

    /// Offsets of `(W, b)` for layer `l` (zero based) in the flat parameter vector.
    pub fn layer_offsets(&self, l: usize) -> (usize, usize) {
        let mut off = 0;
        for k in 0..l {
            off += self.layer_sizes[k + 1] * (self.layer_sizes[k] + 1);
        }
        let (n_in, n_out) = (self.layer_sizes[l], self.layer_sizes[l + 1]);
        (off, off + n_out * n_in)
    }

    pub fn n_params(&self) -> usize {
        self.layer_sizes.windows(2).map(|w| w[1] * (w[0] + 1)).sum()
    }
}

/// Flat parameter vector `θ`: per layer the row-major weight matrix
/// (`n_out x n_in`) followed by the bias vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkParameters {
    pub theta: Vec<f64>,
}

impl NetworkParameters {
    pub fn zeros(cfg: &FfnnConfig) -> Self {
        Self { theta: vec![0.0; cfg.n_params()] }
    }

    pub fn weights<'a>(&'a self, cfg: &FfnnConfig, l: usize) -> &'a [f64] {
        let (w, b) = cfg.layer_offsets(l);
        &self.theta[w..b]
    }

    pub fn biases<'a>(&'a self, cfg: &FfnnConfig, l: usize) -> &'a [f64] {
        let (_, b) = cfg.layer_offsets(l);
        &self.theta[b..b + cfg.layer_sizes[l + 1]]
    }
}

/// Glorot-normal weights, zero biases.
pub fn glorot_init(cfg: &FfnnConfig, seed: u64) -> NetworkParameters {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = NetworkParameters::zeros(cfg);
    for l in 0..cfg.n_layers() {
        let (n_in, n_out) = (cfg.layer_sizes[l], cfg.layer_sizes[l + 1]);
        let std = (2.0 / (n_in + n_out) as f64).sqrt();
        let normal = Normal::new(0.0, std).expect("positive std");
        let (w, b) = cfg.layer_offsets(l);
        for v in &mut params.theta[w..b] {
            *v = normal.sample(&mut rng);
        }
    }
    params
}

/// Forward pass on a normalized input with f64 weights.
pub fn ffnn_forward(cfg: &FfnnConfig, params: &NetworkParameters, x_hat: &[f64]) -> Result<Vec<f64>, NetworkError> {
    if x_hat.len() != cfg.n_inputs() || params.theta.len() != cfg.n_params() {
        return Err(NetworkError::Shape {
            expected: cfg.n_inputs(),
            got: x_hat.len(),
        });
    }
    Ok(forward_with_weights(cfg, &params.theta, x_hat))
}

/// Forward pass with f64 weights and inputs of any scalar type.
pub fn forward_with_weights<S: Scalar>(cfg: &FfnnConfig, theta: &[f64], x_hat: &[S]) -> Vec<S> {
    let mut h: Vec<S> = x_hat.to_vec();
    let last = cfg.n_layers() - 1;
    for l in 0..cfg.n_layers() {
        let (n_in, n_out) = (cfg.layer_sizes[l], cfg.layer_sizes[l + 1]);
        let (w, b) = cfg.layer_offsets(l);
        let mut z = Vec::with_capacity(n_out);
        for i in 0..n_out {
            let row = &theta[w + i * n_in..w + (i + 1) * n_in];
            let mut acc = S::cst(theta[b + i]);
            for (hj, wij) in h.iter().zip(row) {
                acc = acc + *hj * *wij;
            }
            z.push(if l == last { acc } else { acc.tanh() });
        }
        h = z;
    }
    h
}

/// Forward pass where the weights themselves are differentiable.
pub fn forward_generic<S: Scalar>(cfg: &FfnnConfig, theta: &[S], x_hat: &[S]) -> Vec<S> {
    let mut h: Vec<S> = x_hat.to_vec();
    let last = cfg.n_layers() - 1;
    for l in 0..cfg.n_layers() {
        let (n_in, n_out) = (cfg.layer_sizes[l], cfg.layer_sizes[l + 1]);
        let (w, b) = cfg.layer_offsets(l);
        let mut z = Vec::with_capacity(n_out);
        for i in 0..n_out {
            let row = &theta[w + i * n_in..w + (i + 1) * n_in];
            let mut acc = theta[b + i];
            for (hj, wij) in h.iter().zip(row) {
                acc = acc + *hj * *wij;
            }
            z.push(if l == last { acc } else { acc.tanh() });
        }
        h = z;
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_counts_parameters() {
        let cfg = FfnnConfig::new(2, &[8, 8]).unwrap();
        assert_eq!(cfg.n_params(), 4 * 8 + 8 + 8 * 8 + 8 + 8 * 2 + 2);
        assert_eq!(cfg.layer_offsets(1), (40, 40 + 64));
    }

    #[test]
    fn config_validation() {
        assert!(FfnnConfig::new(2, &[]).is_err());
        let bad = FfnnConfig { layer_sizes: vec![3, 8, 2] };
        assert!(bad.validate(2).is_err());
        let bad = FfnnConfig { layer_sizes: vec![4, 8, 3] };
        assert!(bad.validate(2).is_err());
    }

    #[test]
    fn glorot_statistics_and_determinism() {
        let cfg = FfnnConfig::new(2, &[128, 128]).unwrap();
        let p = glorot_init(&cfg, 7);
        let w = p.weights(&cfg, 0);
        let var = w.iter().map(|x| x * x).sum::<f64>() / w.len() as f64;
        let expected = 2.0 / 132.0;
        assert!((var / expected - 1.0).abs() < 0.2, "{var} vs {expected}");
        // hidden-to-hidden layer has many more samples; keep the same band
        let w1 = p.weights(&cfg, 1);
        let var1 = w1.iter().map(|x| x * x).sum::<f64>() / w1.len() as f64;
        assert!((var1 / (2.0 / 256.0) - 1.0).abs() < 0.05);
        for l in 0..cfg.n_layers() {
            assert!(p.biases(&cfg, l).iter().all(|&b| b == 0.0));
        }
        assert_eq!(p, glorot_init(&cfg, 7));
        assert_ne!(p, glorot_init(&cfg, 8));
    }

    #[test]
    fn zero_network_outputs_zero() {
        let cfg = FfnnConfig::new(2, &[5, 3]).unwrap();
        let p = NetworkParameters::zeros(&cfg);
        let y = ffnn_forward(&cfg, &p, &[0.3, -0.9, 1.0, 0.2]).unwrap();
        assert_eq!(y, vec![0.0, 0.0]);
    }

    #[test]
    fn one_hidden_layer_identity_slices() {
        // W1 = [I_2 | 0], W2 = [[2, 0], [0, -3]]
        let cfg = FfnnConfig { layer_sizes: vec![2, 2, 2] };
        let theta = vec![1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 2.0, 0.0, 0.0, -3.0, 0.0, 0.0];
        let p = NetworkParameters { theta };
        let x = [0.4, -0.7];
        let y = ffnn_forward(&cfg, &p, &x).unwrap();
        assert!((y[0] - 2.0 * 0.4f64.tanh()).abs() < 1e-15);
        assert!((y[1] + 3.0 * (-0.7f64).tanh()).abs() < 1e-15);
    }

    #[test]
    fn wrong_input_length_is_rejected() {
        let cfg = FfnnConfig::new(2, &[4]).unwrap();
        let p = NetworkParameters::zeros(&cfg);
        assert!(ffnn_forward(&cfg, &p, &[0.0; 3]).is_err());
    }
}
