//! Offline stage: training-set construction, the composite physics loss,
//! L-BFGS minimization and validation against reference solutions.

mod lbfgs;
mod loss;
mod pipeline;
mod set;
mod sobol;

pub use lbfgs::{lbfgs_minimize, lbfgs_minimize_box, lbfgs_minimize_observed, Bounds, IterationInfo, LbfgsConfig, LbfgsTrace, Termination};
pub use loss::{loss, reference_loss_gradient, LossTerm, LossTerms, LossWeights, PhysicsLoss};
pub use pipeline::{
    ansatz_bounds, append_history_row, bc_ablation, predict, train, training_snapshots, validate, validation_kappas, write_history_csv, AblationReport, LossRecord,
    TrainingConfig, TrainingOutcome, TrainingProblem,
};
pub use set::{
    build_training_set, sample_kappas, CollocationPoint, DataPoint, KappaBox, NeumannPoint, SampleCounts, TrainingSet,
};
pub use sobol::{sobol_sample, SobolSequence, MAX_DIM as SOBOL_MAX_DIM};

use thiserror::Error;

use crate::mechanics::MechanicsError;

#[derive(Debug, Error)]
pub enum TrainingError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("missing reference data: {0}")]
    MissingData(String),
    #[error("{term} residual at point {index}: {source}")]
    Loss {
        term: LossTerm,
        index: usize,
        #[source]
        source: MechanicsError,
    },
    #[error("reference solution: {0}")]
    Reference(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}
