use std::path::Path;

use elastocal::calibration::McmcConfig;
use elastocal::mechanics::MaterialParameters;
use elastocal::training::{LbfgsConfig, TrainingConfig};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Complete run description; every command writes the resolved copy next to
/// its outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub training: TrainingConfig,
    #[serde(default)]
    pub validation: ValidationSettings,
    #[serde(default)]
    pub calibration: CalibrationSettings,
    #[serde(default)]
    pub ablation: AblationSettings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ValidationSettings {
    pub n_kappa: usize,
    pub n_points: usize,
    pub seed: u64,
}

impl Default for ValidationSettings {
    fn default() -> Self {
        Self { n_kappa: 10, n_points: 1024, seed: 99 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CalibrationSettings {
    /// Known measurement noise. Without it, MCMC uses the covariance implied
    /// by the NLS weights.
    pub noise_sigma: Option<f64>,
    pub n_sensors: usize,
    pub optimizer: LbfgsConfig,
    pub mcmc: McmcConfig,
    pub level: f64,
    pub histogram_bins: usize,
    pub coverage_tests: usize,
    pub seed: u64,
}

impl Default for CalibrationSettings {
    fn default() -> Self {
        Self {
            noise_sigma: Some(5e-4),
            n_sensors: 128,
            optimizer: LbfgsConfig { gradient_tolerance: 1e-10, max_iterations: 200, ..LbfgsConfig::default() },
            mcmc: McmcConfig::default(),
            level: 0.95,
            histogram_bins: 40,
            coverage_tests: 50,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AblationSettings {
    pub kappa: MaterialParameters,
    pub n_pde: usize,
    pub n_bc: usize,
    pub n_validation: usize,
    pub optimizer: LbfgsConfig,
}

impl Default for AblationSettings {
    fn default() -> Self {
        Self {
            kappa: MaterialParameters { k: 175000.0, g: 80769.0 },
            n_pde: 8192,
            n_bc: 256,
            n_validation: 2048,
            optimizer: LbfgsConfig { history: 50, max_iterations: 3000, ..LbfgsConfig::default() },
        }
    }
}

impl RunConfig {
    pub fn linear_desk() -> Self {
        Self {
            training: TrainingConfig::linear_desk(),
            validation: ValidationSettings::default(),
            calibration: CalibrationSettings::default(),
            ablation: AblationSettings::default(),
        }
    }

    pub fn load(path: Option<&Path>, seed: Option<u64>) -> Result<Self, CliError> {
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
                serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?
            }
            None => Self::linear_desk(),
        };
        if let Some(s) = seed {
            cfg.training.seed = s;
            cfg.calibration.seed = s;
            cfg.calibration.mcmc.seed = s;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.training.validate()?;
        let c = &self.calibration;
        if let Some(s) = c.noise_sigma {
            if !(s > 0.0 && s.is_finite()) {
                return Err(CliError::Config(format!("noise_sigma must be positive, got {s}")));
            }
        }
        if c.n_sensors == 0 || c.histogram_bins == 0 || c.coverage_tests == 0 || !(c.level > 0.0 && c.level < 1.0) {
            return Err(CliError::Config("calibration counts must be positive and the level in (0, 1)".into()));
        }
        c.optimizer.validate()?;
        c.mcmc.validate(2)?;
        if self.validation.n_kappa == 0 || self.validation.n_points == 0 {
            return Err(CliError::Config("validation counts must be positive".into()));
        }
        Ok(())
    }

    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(self).map_err(|e| CliError::Numerical(e.to_string()))?;
        std::fs::write(dir.join("config.json"), text).map_err(|e| CliError::Io(e.to_string()))
    }
}
