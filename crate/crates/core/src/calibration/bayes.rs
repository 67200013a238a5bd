use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::mcmc::{stretch_move_mcmc, CredibleInterval, McmcConfig, PosteriorSample};
use super::nls::WeightMatrix;
use super::CalibrationError;
use crate::field::DisplacementField;
use crate::mechanics::MaterialParameters;
use crate::network::Ansatz;
use crate::training::KappaBox;

/// Independent Gaussian noise with one standard deviation per component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub sigma: [f64; 2],
}

impl NoiseModel {
    pub fn isotropic(sigma: f64) -> Self {
        Self { sigma: [sigma; 2] }
    }

    pub fn validate(&self) -> Result<(), CalibrationError> {
        if self.sigma.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(CalibrationError::Config(format!("noise standard deviations must be positive, got {:?}", self.sigma)));
        }
        Ok(())
    }
}

/// Noise covariance `(WᵀW)⁻¹` implied by the NLS weights.
pub fn covariance_from_weights(w: &WeightMatrix) -> NoiseModel {
    NoiseModel { sigma: [1.0 / w.wx, 1.0 / w.wy] }
}

/// Gaussian log density of stacked residuals (all x, then all y).
pub fn gaussian_log_density(residuals: &[f64], noise: &NoiseModel) -> f64 {
    let n = residuals.len() / 2;
    let quad: f64 = residuals.iter().enumerate().map(|(i, r)| (r / noise.sigma[i / n]).powi(2)).sum();
    let log_det = 2.0 * n as f64 * (noise.sigma[0].ln() + noise.sigma[1].ln());
    -0.5 * quad - 0.5 * (2.0 * n as f64 * (2.0 * PI).ln() + log_det)
}

/// Likelihood of sensor data under the frozen surrogate.
#[derive(Debug, Clone)]
pub struct Likelihood<'a> {
    ansatz: &'a Ansatz,
    sensors: Vec<[f64; 2]>,
    data: Vec<f64>,
    noise: NoiseModel,
}

impl<'a> Likelihood<'a> {
    pub fn new(ansatz: &'a Ansatz, data: &DisplacementField, noise: NoiseModel) -> Result<Self, CalibrationError> {
        noise.validate()?;
        data.validate(1).map_err(|e| CalibrationError::Data(e.to_string()))?;
        if ansatz.n_kappa() != 2 {
            return Err(CalibrationError::Config("likelihood needs a surrogate with two parameter inputs".into()));
        }
        Ok(Self { ansatz, sensors: data.points.clone(), data: data.stacked(), noise })
    }

    pub fn log_likelihood(&self, kappa: &MaterialParameters) -> f64 {
        self.log_likelihood_batch(&[kappa.as_array().to_vec()])[0]
    }

    /// Log likelihood for many parameter pairs in one batched network pass.
    pub fn log_likelihood_batch(&self, kappas: &[Vec<f64>]) -> Vec<f64> {
        let m = self.sensors.len();
        let xs: Vec<[f64; 2]> = kappas.iter().flat_map(|_| self.sensors.iter().copied()).collect();
        let ks: Vec<&[f64]> = kappas.iter().flat_map(|k| std::iter::repeat_n(k.as_slice(), m)).collect();
        let u = self.ansatz.eval_batch(&xs, &ks);
        u.chunks(m)
            .map(|uk| {
                let r: Vec<f64> = uk.iter().map(|v| v[0]).chain(uk.iter().map(|v| v[1])).zip(&self.data).map(|(p, d)| p - d).collect();
                gaussian_log_density(&r, &self.noise)
            })
            .collect()
    }
}

pub fn log_likelihood(ansatz: &Ansatz, data: &DisplacementField, kappa: &MaterialParameters, noise: &NoiseModel) -> Result<f64, CalibrationError> {
    Ok(Likelihood::new(ansatz, data, *noise)?.log_likelihood(kappa))
}

/// Posterior sampling with a uniform prior on the parameter box.
pub fn sample_posterior(likelihood: &Likelihood<'_>, prior: &KappaBox, cfg: &McmcConfig) -> Result<PosteriorSample, CalibrationError> {
    stretch_move_mcmc(
        |batch: &[Vec<f64>]| Ok(likelihood.log_likelihood_batch(batch)),
        &prior.lower.as_array(),
        &prior.upper.as_array(),
        cfg,
    )
}

/// Field with i.i.d. Gaussian noise added to every displacement component.
pub fn add_synthetic_noise(field: &DisplacementField, sigma: f64, seed: u64) -> Result<DisplacementField, CalibrationError> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(CalibrationError::Config(format!("noise level {sigma} must be non-negative")));
    }
    let mut out = field.clone();
    if sigma == 0.0 {
        return Ok(out);
    }
    let normal = Normal::new(0.0, sigma).expect("valid standard deviation");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for u in &mut out.displacements {
        u[0] += normal.sample(&mut rng);
        u[1] += normal.sample(&mut rng);
    }
    out.noise_std = Some([sigma; 2]);
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CoverageConfig {
    pub n_tests: usize,
    pub noise_sigma: f64,
    pub level: f64,
    pub mcmc: McmcConfig,
    pub seed: u64,
}

impl Default for CoverageConfig {
    fn default() -> Self {
        Self { n_tests: 50, noise_sigma: 5e-4, level: 0.95, mcmc: McmcConfig::default(), seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverageCase {
    pub truth: MaterialParameters,
    pub k: CredibleInterval,
    pub g: CredibleInterval,
    pub acceptance_fraction: f64,
}

impl CoverageCase {
    pub fn covered(&self) -> [bool; 2] {
        [self.k.contains(self.truth.k), self.g.contains(self.truth.g)]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub n_tests: usize,
    /// Fraction of successful tests whose interval holds the truth, `[K, G]`.
    pub coverage: [f64; 2],
    /// Mean of posterior mean − truth, `[K, G]`.
    pub mean_bias: [f64; 2],
    pub mean_std: [f64; 2],
    pub cases: Vec<CoverageCase>,
    pub failures: Vec<String>,
}

/// Repeated synthetic calibrations with known truth.
///
/// Truths are drawn uniformly from `truth_box`; `clean_data` produces the
/// noise-free sensor field for a truth and a seed. The likelihood uses the
/// known noise level and the prior is uniform on `prior`.
pub fn coverage_test<G>(ansatz: &Ansatz, prior: &KappaBox, truth_box: &KappaBox, clean_data: G, cfg: &CoverageConfig) -> Result<CoverageReport, CalibrationError>
where
    G: Fn(&MaterialParameters, u64) -> Result<DisplacementField, CalibrationError> + Sync,
{
    if cfg.n_tests == 0 {
        return Err(CalibrationError::Config("coverage needs at least one test".into()));
    }
    cfg.mcmc.validate(2)?;
    let noise = NoiseModel::isotropic(cfg.noise_sigma);
    noise.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let unit = Uniform::new(0.0, 1.0).expect("valid range");
    let truths: Vec<MaterialParameters> = (0..cfg.n_tests).map(|_| truth_box.map_unit([unit.sample(&mut rng), unit.sample(&mut rng)])).collect();
    let results: Vec<Result<CoverageCase, String>> = truths
        .par_iter()
        .enumerate()
        .map(|(i, truth)| {
            let run = || -> Result<CoverageCase, CalibrationError> {
                let seed = cfg.seed.wrapping_mul(1_000_003).wrapping_add(i as u64);
                let data = add_synthetic_noise(&clean_data(truth, seed)?, cfg.noise_sigma, seed ^ 0x5eed)?;
                let lik = Likelihood::new(ansatz, &data, noise)?;
                let post = sample_posterior(&lik, prior, &McmcConfig { seed, ..cfg.mcmc })?;
                let s = post.summaries(cfg.level)?;
                Ok(CoverageCase { truth: *truth, k: s[0], g: s[1], acceptance_fraction: post.acceptance_fraction })
            };
            run().map_err(|e| format!("test {i}: {e}"))
        })
        .collect();
    let mut cases = Vec::new();
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(c) => cases.push(c),
            Err(e) => failures.push(e),
        }
    }
    if cases.is_empty() {
        return Err(CalibrationError::Numerical(format!("all coverage tests failed: {failures:?}")));
    }
    let n = cases.len() as f64;
    let frac = |j: usize| cases.iter().filter(|c| c.covered()[j]).count() as f64 / n;
    let avg = |f: &dyn Fn(&CoverageCase) -> f64| cases.iter().map(f).sum::<f64>() / n;
    Ok(CoverageReport {
        n_tests: cfg.n_tests,
        coverage: [frac(0), frac(1)],
        mean_bias: [avg(&|c| c.k.mean - c.truth.k), avg(&|c| c.g.mean - c.truth.g)],
        mean_std: [avg(&|c| c.k.std), avg(&|c| c.g.std)],
        cases,
        failures,
    })
}
