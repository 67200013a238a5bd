//! Affine-invariant ensemble sampler with the stretch move, and posterior
//! summaries.

use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::CalibrationError;
use crate::metrics::{mean, sample_std};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct McmcConfig {
    pub n_walkers: usize,
    /// Recorded steps after burn-in.
    pub n_steps: usize,
    pub n_burnin: usize,
    pub stretch: f64,
    pub seed: u64,
}

impl Default for McmcConfig {
    fn default() -> Self {
        Self { n_walkers: 100, n_steps: 200, n_burnin: 100, stretch: 4.0, seed: 0 }
    }
}

impl McmcConfig {
    pub fn validate(&self, dim: usize) -> Result<(), CalibrationError> {
        if self.n_walkers < 2 * dim || self.n_walkers % 2 != 0 {
            return Err(CalibrationError::Config(format!("need an even number of at least {} walkers, got {}", 2 * dim, self.n_walkers)));
        }
        if !(self.stretch > 1.0) || self.n_steps == 0 {
            return Err(CalibrationError::Config("stretch scale must exceed 1 and at least one step is required".into()));
        }
        Ok(())
    }
}

/// Post-burn-in ensemble draws, stored step-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorSample {
    pub dim: usize,
    pub n_walkers: usize,
    pub n_steps: usize,
    draws: Vec<f64>,
    log_prob: Vec<f64>,
    pub acceptance_fraction: f64,
    /// Log-density evaluations, including burn-in and initialization.
    pub evaluations: usize,
}

impl PosteriorSample {
    pub fn len(&self) -> usize {
        self.n_walkers * self.n_steps
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn draw(&self, step: usize, walker: usize) -> (&[f64], f64) {
        let i = step * self.n_walkers + walker;
        (&self.draws[i * self.dim..(i + 1) * self.dim], self.log_prob[i])
    }

    /// All draws of parameter `j`.
    pub fn parameter(&self, j: usize) -> Vec<f64> {
        self.draws.iter().skip(j).step_by(self.dim).copied().collect()
    }

    /// Draw with the highest log density.
    pub fn best_draw(&self) -> (Vec<f64>, f64) {
        let (i, lp) = self.log_prob.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).expect("non-empty sample");
        (self.draws[i * self.dim..(i + 1) * self.dim].to_vec(), *lp)
    }

    pub fn summaries(&self, level: f64) -> Result<Vec<CredibleInterval>, CalibrationError> {
        (0..self.dim).map(|j| credible_interval(&self.parameter(j), level)).collect()
    }

    /// CSV with one row per draw: `walker,step,<names...>,logp`.
    pub fn write_csv(&self, path: &Path, names: &[&str]) -> Result<(), CalibrationError> {
        assert_eq!(names.len(), self.dim);
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(w, "walker,step,{},logp", names.join(","))?;
        for step in 0..self.n_steps {
            for walker in 0..self.n_walkers {
                let (x, lp) = self.draw(step, walker);
                let vals: Vec<String> = x.iter().map(|v| v.to_string()).collect();
                writeln!(w, "{walker},{step},{},{lp}", vals.join(","))?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

fn inside(x: &[f64], lower: &[f64], upper: &[f64]) -> bool {
    x.iter().zip(lower.iter().zip(upper)).all(|(v, (l, u))| l <= v && v <= u)
}

/// Stretch-move ensemble sampling of `log_density` under a uniform prior on
/// the box `[lower, upper]`. The density is only called on points inside
/// the box, in batches (one half-ensemble at a time).
pub fn stretch_move_mcmc<F>(mut log_density: F, lower: &[f64], upper: &[f64], cfg: &McmcConfig) -> Result<PosteriorSample, CalibrationError>
where
    F: FnMut(&[Vec<f64>]) -> Result<Vec<f64>, CalibrationError>,
{
    let dim = lower.len();
    cfg.validate(dim)?;
    if upper.len() != dim || lower.iter().zip(upper).any(|(l, u)| !(l < u)) {
        return Err(CalibrationError::Config("invalid prior box".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let nw = cfg.n_walkers;
    let mut walkers: Vec<Vec<f64>> = (0..nw)
        .map(|_| lower.iter().zip(upper).map(|(l, u)| l + rng.random::<f64>() * (u - l)).collect())
        .collect();
    let mut evaluations = nw;
    let mut lp = log_density(&walkers)?;
    if lp.iter().all(|v| *v == f64::NEG_INFINITY || v.is_nan()) {
        return Err(CalibrationError::Config("every walker starts at zero posterior density".into()));
    }
    lp.iter_mut().filter(|v| v.is_nan()).for_each(|v| *v = f64::NEG_INFINITY);

    let half = nw / 2;
    let a = cfg.stretch;
    let total = cfg.n_burnin + cfg.n_steps;
    let mut draws = Vec::with_capacity(cfg.n_steps * nw * dim);
    let mut log_prob = Vec::with_capacity(cfg.n_steps * nw);
    let mut accepted = 0usize;
    for step in 0..total {
        for h in 0..2 {
            let (active, partners) = if h == 0 { (0..half, half..nw) } else { (half..nw, 0..half) };
            let mut proposals = Vec::with_capacity(half);
            let mut zs = Vec::with_capacity(half);
            for k in active.clone() {
                let j = rng.random_range(partners.clone());
                let z = ((a - 1.0) * rng.random::<f64>() + 1.0).powi(2) / a;
                proposals.push(walkers[j].iter().zip(&walkers[k]).map(|(xj, xk)| xj + z * (xk - xj)).collect::<Vec<f64>>());
                zs.push(z);
            }
            let in_box: Vec<usize> = (0..half).filter(|&i| inside(&proposals[i], lower, upper)).collect();
            let batch: Vec<Vec<f64>> = in_box.iter().map(|&i| proposals[i].clone()).collect();
            let mut lp_new = vec![f64::NEG_INFINITY; half];
            if !batch.is_empty() {
                evaluations += batch.len();
                for (&i, v) in in_box.iter().zip(log_density(&batch)?) {
                    lp_new[i] = if v.is_nan() { f64::NEG_INFINITY } else { v };
                }
            }
            for (i, k) in active.enumerate() {
                let log_ratio = (dim as f64 - 1.0) * zs[i].ln() + lp_new[i] - lp[k];
                let u: f64 = rng.random();
                if lp_new[i] > f64::NEG_INFINITY && u.ln() < log_ratio {
                    walkers[k] = std::mem::take(&mut proposals[i]);
                    lp[k] = lp_new[i];
                    if step >= cfg.n_burnin {
                        accepted += 1;
                    }
                }
            }
        }
        if step >= cfg.n_burnin {
            for (w, l) in walkers.iter().zip(&lp) {
                draws.extend_from_slice(w);
                log_prob.push(*l);
            }
        }
    }
    let acceptance_fraction = accepted as f64 / (cfg.n_steps * nw) as f64;
    if !(0.2..=0.5).contains(&acceptance_fraction) {
        log::warn!("acceptance fraction {acceptance_fraction:.3} outside the usual [0.2, 0.5] range");
    }
    Ok(PosteriorSample { dim, n_walkers: nw, n_steps: cfg.n_steps, draws, log_prob, acceptance_fraction, evaluations })
}

/// Gaussian-approximation credible interval plus empirical percentiles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CredibleInterval {
    pub level: f64,
    pub mean: f64,
    pub std: f64,
    pub lower: f64,
    pub upper: f64,
    pub percentile_lower: f64,
    pub percentile_upper: f64,
}

impl CredibleInterval {
    pub fn contains(&self, v: f64) -> bool {
        self.lower <= v && v <= self.upper
    }
}

pub const MIN_DRAWS: usize = 100;

fn percentile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    if i + 1 < sorted.len() {
        sorted[i] + frac * (sorted[i + 1] - sorted[i])
    } else {
        sorted[i]
    }
}

pub fn credible_interval(samples: &[f64], level: f64) -> Result<CredibleInterval, CalibrationError> {
    if samples.len() < MIN_DRAWS {
        return Err(CalibrationError::Config(format!("need at least {MIN_DRAWS} draws, got {}", samples.len())));
    }
    if !(0.0 < level && level < 1.0) {
        return Err(CalibrationError::Config(format!("credibility level {level} outside (0, 1)")));
    }
    let m = mean(samples);
    let s = sample_std(samples).map_err(|e| CalibrationError::Numerical(e.to_string()))?;
    let z = Normal::standard().inverse_cdf(0.5 + 0.5 * level);
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let tail = 0.5 * (1.0 - level);
    Ok(CredibleInterval {
        level,
        mean: m,
        std: s,
        lower: m - z * s,
        upper: m + z * s,
        percentile_lower: percentile(&sorted, tail),
        percentile_upper: percentile(&sorted, 1.0 - tail),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

/// Equal-width histogram over the sample range.
pub fn histogram(samples: &[f64], n_bins: usize) -> Histogram {
    assert!(n_bins > 0 && !samples.is_empty());
    let lo = samples.iter().copied().fold(f64::INFINITY, f64::min);
    let mut hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi == lo {
        hi = lo + 1.0;
    }
    let width = (hi - lo) / n_bins as f64;
    let mut counts = vec![0; n_bins];
    for v in samples {
        counts[(((v - lo) / width) as usize).min(n_bins - 1)] += 1;
    }
    Histogram { edges: (0..=n_bins).map(|i| lo + i as f64 * width).collect(), counts }
}
