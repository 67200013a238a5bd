use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Ansatz, AnsatzConfig, FfnnConfig, NetworkError, NetworkParameters};

pub const CHECKPOINT_VERSION: u32 = 1;

/// JSON container for a trained ansatz. The parameter training box is part
/// of [`AnsatzConfig`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub version: u32,
    /// Free-form problem label, e.g. the constitutive model name.
    pub problem: String,
    pub ffnn: FfnnConfig,
    pub ansatz: AnsatzConfig,
    pub theta: Vec<f64>,
}

impl Checkpoint {
    pub fn from_ansatz(ansatz: &Ansatz, problem: &str) -> Self {
        Self {
            version: CHECKPOINT_VERSION,
            problem: problem.to_owned(),
            ffnn: ansatz.ffnn.clone(),
            ansatz: ansatz.config.clone(),
            theta: ansatz.params.theta.clone(),
        }
    }

    pub fn into_ansatz(self) -> Result<Ansatz, NetworkError> {
        Ansatz::new(self.ffnn, self.ansatz, NetworkParameters { theta: self.theta })
    }

    pub fn save(&self, path: &Path) -> Result<(), NetworkError> {
        let text = serde_json::to_string(self).map_err(|e| NetworkError::Format(e.to_string()))?;
        fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, NetworkError> {
        let text = fs::read_to_string(path)?;
        let ck: Self = serde_json::from_str(&text).map_err(|e| NetworkError::Format(e.to_string()))?;
        if ck.version != CHECKPOINT_VERSION {
            return Err(NetworkError::Format(format!("unsupported checkpoint version {}", ck.version)));
        }
        Ok(ck)
    }
}
