use std::cell::RefCell;
use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::lbfgs::{lbfgs_minimize_observed, IterationInfo, LbfgsConfig, LbfgsTrace};
use super::loss::{kappa_input, LossTerms, LossWeights, PhysicsLoss};
use super::set::{build_training_set, sample_kappas, KappaBox, SampleCounts, TrainingSet};
use super::TrainingError;
use crate::fem::{sample_field, ReferenceSolver};
use crate::field::DisplacementField;
use crate::geometry::PlateGeometry;
use crate::mechanics::{BodyState, MaterialModel, MaterialParameters};
use crate::metrics::{mae, rl2, ErrorReport};
use crate::network::{glorot_init, Ansatz, AnsatzConfig, FfnnConfig, NetworkParameters};

/// Everything needed to reproduce one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingConfig {
    pub model: MaterialModel,
    pub geometry: PlateGeometry,
    pub kappa_box: KappaBox,
    /// Train a non-parametric network for this single parameter pair.
    #[serde(default)]
    pub fixed_kappa: Option<MaterialParameters>,
    #[serde(default = "default_true")]
    pub symmetry_shear: bool,
    #[serde(default)]
    pub counts: SampleCounts,
    #[serde(default)]
    pub weights: LossWeights,
    #[serde(default = "default_hidden")]
    pub hidden: Vec<usize>,
    #[serde(default)]
    pub optimizer: LbfgsConfig,
    /// Target element size of reference meshes in mm.
    #[serde(default = "default_mesh_size")]
    pub mesh_size: f64,
    /// Relative widening of the displacement range seen at the box corners.
    #[serde(default = "default_margin")]
    pub displacement_margin: f64,
    #[serde(default)]
    pub body: BodyState,
    #[serde(default)]
    pub seed: u64,
}

fn default_true() -> bool {
    true
}

fn default_hidden() -> Vec<usize> {
    vec![32; 4]
}

fn default_mesh_size() -> f64 {
    2.0
}

fn default_margin() -> f64 {
    0.1
}

impl TrainingConfig {
    /// Quarter plate with hole, linear elasticity, K ∈ [1e5, 2e5], G ∈ [6e4, 1e5].
    pub fn linear_desk() -> Self {
        Self {
            model: MaterialModel::LinearElasticPlaneStress,
            geometry: PlateGeometry::quarter_plate(),
            kappa_box: KappaBox { lower: MaterialParameters { k: 1e5, g: 6e4 }, upper: MaterialParameters { k: 2e5, g: 1e5 } },
            fixed_kappa: None,
            symmetry_shear: true,
            counts: SampleCounts::default(),
            // traction residuals are O(L) larger than divergence residuals; this rebalances their curvature
            weights: LossWeights { pde: 1.0, neumann: 1e-3, data: 1e4 },
            hidden: default_hidden(),
            optimizer: LbfgsConfig { history: 50, max_iterations: 6000, ..LbfgsConfig::default() },
            mesh_size: default_mesh_size(),
            displacement_margin: default_margin(),
            body: BodyState::default(),
            seed: 0,
        }
    }

    /// Square Neo-Hookean plate under uniform traction, physics only.
    pub fn hyperelastic_desk() -> Self {
        Self {
            model: MaterialModel::NeoHookeanPlaneStrain,
            geometry: PlateGeometry::square(100.0, [-100.0, 0.0]),
            kappa_box: KappaBox { lower: MaterialParameters { k: 4000.0, g: 500.0 }, upper: MaterialParameters { k: 8000.0, g: 1500.0 } },
            counts: SampleCounts { n_kappa_pde: 64, n_pde: 32, n_bc: 32, n_kappa_data: 0, n_data: 0 },
            weights: LossWeights { pde: 1.0, neumann: 1e-3, data: 0.0 },
            optimizer: LbfgsConfig { history: 50, max_iterations: 1000, ..LbfgsConfig::default() },
            mesh_size: 5.0,
            ..Self::linear_desk()
        }
    }

    pub fn validate(&self) -> Result<(), TrainingError> {
        self.geometry.validate().map_err(TrainingError::Config)?;
        self.kappa_box.validate()?;
        self.weights.validate()?;
        self.optimizer.validate()?;
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return Err(TrainingError::Config("hidden layers must be non-empty and positive".into()));
        }
        if !(self.mesh_size > 0.0) || !(self.displacement_margin >= 0.0) {
            return Err(TrainingError::Config("mesh size must be positive and the margin non-negative".into()));
        }
        if self.weights.data > 0.0 && !self.counts.has_data() {
            return Err(TrainingError::Config("data weight is positive but no data is requested".into()));
        }
        if let Some(k) = &self.fixed_kappa {
            MaterialParameters::new(k.k, k.g).map_err(|e| TrainingError::Config(e.to_string()))?;
        }
        Ok(())
    }

    pub fn reference_solver(&self) -> Result<ReferenceSolver, TrainingError> {
        ReferenceSolver::new(self.geometry, self.model, self.mesh_size).map_err(|e| TrainingError::Reference(e.to_string()))
    }

    /// Parameter samples of the physics terms.
    pub fn physics_kappas(&self) -> Vec<MaterialParameters> {
        match self.fixed_kappa {
            Some(k) => vec![k; self.counts.n_kappa_pde],
            None => sample_kappas(&self.kappa_box, self.counts.n_kappa_pde, 0),
        }
    }

    /// Parameter samples of the data term.
    pub fn data_kappas(&self) -> Vec<MaterialParameters> {
        match self.fixed_kappa {
            Some(k) => vec![k; self.counts.n_kappa_data],
            None => sample_kappas(&self.kappa_box, self.counts.n_kappa_data, 0),
        }
    }

    fn parameter_corners(&self) -> Vec<MaterialParameters> {
        match self.fixed_kappa {
            Some(k) => vec![k],
            None => self.kappa_box.corners().to_vec(),
        }
    }

    pub fn ffnn(&self) -> Result<FfnnConfig, TrainingError> {
        let n_kappa = if self.fixed_kappa.is_some() { 0 } else { 2 };
        FfnnConfig::new(n_kappa, &self.hidden).map_err(|e| TrainingError::Config(e.to_string()))
    }
}

/// Ansatz bounds with the displacement range taken from reference solutions
/// at the corners of the parameter box, widened by the configured margin.
pub fn ansatz_bounds(cfg: &TrainingConfig, solver: &ReferenceSolver) -> Result<AnsatzConfig, TrainingError> {
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for kappa in cfg.parameter_corners() {
        let field = solver.solve(&kappa).map_err(|e| TrainingError::Reference(e.to_string()))?;
        for u in &field.displacements {
            for i in 0..2 {
                lo[i] = lo[i].min(u[i]);
                hi[i] = hi[i].max(u[i]);
            }
        }
    }
    for i in 0..2 {
        let pad = cfg.displacement_margin * (hi[i] - lo[i]).max(f64::EPSILON);
        lo[i] -= pad;
        hi[i] += pad;
    }
    let (kmin, kmax) = match cfg.fixed_kappa {
        Some(_) => (Vec::new(), Vec::new()),
        None => (cfg.kappa_box.lower.as_array().to_vec(), cfg.kappa_box.upper.as_array().to_vec()),
    };
    Ok(cfg.geometry.ansatz_config(kmin, kmax, lo, hi))
}

fn sub_seed(seed: u64, stream: u64, index: usize) -> u64 {
    ChaCha8Rng::seed_from_u64(seed ^ stream.rotate_left(32)).random::<u64>().wrapping_add(index as u64)
}

/// Reference snapshots for the data term, one random node subset per sample.
pub fn training_snapshots(cfg: &TrainingConfig, solver: &ReferenceSolver) -> Result<Vec<(MaterialParameters, DisplacementField)>, TrainingError> {
    if !cfg.counts.has_data() {
        return Ok(Vec::new());
    }
    cfg.data_kappas()
        .iter()
        .enumerate()
        .map(|(i, k)| {
            let field = solver.sample(k, cfg.counts.n_data, sub_seed(cfg.seed, 1, i)).map_err(|e| TrainingError::Reference(e.to_string()))?;
            Ok((*k, field))
        })
        .collect()
}

/// Training set, loss and ansatz bounds of a configuration.
#[derive(Debug, Clone)]
pub struct TrainingProblem {
    pub ffnn: FfnnConfig,
    pub ansatz: AnsatzConfig,
    pub loss: PhysicsLoss,
}

impl TrainingProblem {
    pub fn new(cfg: &TrainingConfig, solver: &ReferenceSolver) -> Result<Self, TrainingError> {
        cfg.validate()?;
        let ansatz = ansatz_bounds(cfg, solver)?;
        let snapshots = training_snapshots(cfg, solver)?;
        let set = build_training_set(&cfg.geometry, &cfg.physics_kappas(), &cfg.counts, cfg.symmetry_shear, &snapshots)?;
        Self::from_set(cfg, ansatz, set)
    }

    pub fn from_set(cfg: &TrainingConfig, ansatz: AnsatzConfig, set: TrainingSet) -> Result<Self, TrainingError> {
        let ffnn = cfg.ffnn()?;
        let loss = PhysicsLoss::new(ffnn.clone(), ansatz.clone(), cfg.model, &cfg.body, cfg.weights, set)?;
        Ok(Self { ffnn, ansatz, loss })
    }

    pub fn initial_parameters(&self, seed: u64) -> NetworkParameters {
        glorot_init(&self.ffnn, seed)
    }
}

/// One row of the training log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossRecord {
    pub iteration: usize,
    pub evaluations: usize,
    pub total: f64,
    pub pde: f64,
    pub neumann: f64,
    pub data: f64,
    pub gradient_norm: f64,
}

#[derive(Debug, Clone)]
pub struct TrainingOutcome {
    pub ansatz: Ansatz,
    pub trace: LbfgsTrace,
    pub history: Vec<LossRecord>,
    pub final_terms: LossTerms,
}

/// Minimize the loss from `init` (or a fresh initialization).
pub fn train(
    problem: &TrainingProblem,
    optimizer: &LbfgsConfig,
    init: NetworkParameters,
    on_record: &mut dyn FnMut(&LossRecord),
) -> Result<TrainingOutcome, TrainingError> {
    if init.theta.len() != problem.ffnn.n_params() {
        return Err(TrainingError::Config(format!("expected {} parameters, got {}", problem.ffnn.n_params(), init.theta.len())));
    }
    // recent evaluations, to attach the term breakdown to accepted steps
    let recent: RefCell<Vec<LossTerms>> = RefCell::new(Vec::new());
    let mut history = Vec::new();
    let objective = |theta: &[f64]| -> Result<(f64, Vec<f64>), TrainingError> {
        let (terms, grad) = problem.loss.evaluate_with_gradient(theta)?;
        let mut r = recent.borrow_mut();
        if r.len() >= 64 {
            r.remove(0);
        }
        r.push(terms);
        Ok((terms.total, grad))
    };
    let mut observer = |info: &IterationInfo| {
        let terms = recent.borrow().iter().rev().find(|t| t.total == info.value).copied().unwrap_or_default();
        let rec = LossRecord {
            iteration: info.iteration,
            evaluations: info.evaluations,
            total: info.value,
            pde: terms.pde,
            neumann: terms.neumann,
            data: terms.data,
            gradient_norm: info.gradient_norm,
        };
        on_record(&rec);
        history.push(rec);
        recent.borrow_mut().clear();
    };
    let (theta, trace) = lbfgs_minimize_observed(objective, &init.theta, optimizer, None, &mut observer)?;
    let final_terms = problem.loss.evaluate(&theta)?;
    let ansatz = Ansatz::new(problem.ffnn.clone(), problem.ansatz.clone(), NetworkParameters { theta })
        .map_err(|e| TrainingError::Config(e.to_string()))?;
    Ok(TrainingOutcome { ansatz, trace, history, final_terms })
}

/// Write the training log as CSV.
pub fn write_history_csv(history: &[LossRecord], path: &Path) -> std::io::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for rec in history {
        w.serialize(rec)?;
    }
    w.flush()
}

/// Append a single log row to an open CSV stream (header on the first row).
pub fn append_history_row<W: Write>(writer: &mut csv::Writer<W>, rec: &LossRecord) -> std::io::Result<()> {
    writer.serialize(rec)?;
    writer.flush()
}

/// Held-out parameter samples drawn uniformly from a box.
pub fn validation_kappas(kappa_box: &KappaBox, n: usize, seed: u64) -> Vec<MaterialParameters> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| kappa_box.map_unit([rng.random::<f64>(), rng.random::<f64>()])).collect()
}

/// Surrogate predictions for one parameter pair at a set of points.
pub fn predict(ansatz: &Ansatz, points: &[[f64; 2]], kappa: &MaterialParameters) -> Vec<[f64; 2]> {
    let k = kappa_input(&ansatz.config, kappa);
    let ks: Vec<&[f64]> = vec![k.as_slice(); points.len()];
    ansatz.eval_batch(points, &ks)
}

/// MAE and rL² of the surrogate against reference fields, pooled over all
/// cases, with `n_points` random nodes per case.
pub fn validate(ansatz: &Ansatz, references: &[(MaterialParameters, DisplacementField)], n_points: usize, seed: u64) -> Result<ErrorReport, TrainingError> {
    let mut pred = Vec::new();
    let mut truth = Vec::new();
    for (i, (kappa, field)) in references.iter().enumerate() {
        let sample = sample_field(field, n_points.min(field.len()), sub_seed(seed, 2, i)).map_err(|e| TrainingError::Reference(e.to_string()))?;
        for (u, r) in predict(ansatz, &sample.points, kappa).iter().zip(&sample.displacements) {
            pred.extend_from_slice(u);
            truth.extend_from_slice(r);
        }
    }
    let mae = mae(&pred, &truth).map_err(|e| TrainingError::Numerical(e.to_string()))?;
    let rl2 = rl2(&pred, &truth).map_err(|e| TrainingError::Numerical(e.to_string()))?;
    Ok(ErrorReport { mae, rl2, are_k: None, are_g: None })
}

/// Accuracy of fixed-parameter networks trained with and without the
/// zero-shear conditions on the symmetry planes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub kappa: MaterialParameters,
    pub with_symmetry: ErrorReport,
    pub without_symmetry: ErrorReport,
    /// `rL²(without) / rL²(with)`.
    pub rl2_ratio: f64,
    pub final_loss: [f64; 2],
}

/// Train two physics-only networks at `kappa` that differ only in the
/// symmetry shear segments and compare both with the reference solution.
pub fn bc_ablation(
    base: &TrainingConfig,
    kappa: MaterialParameters,
    n_pde: usize,
    n_bc: usize,
    optimizer: &LbfgsConfig,
    n_validation: usize,
) -> Result<AblationReport, TrainingError> {
    let mut cfg = base.clone();
    cfg.fixed_kappa = Some(kappa);
    cfg.counts = SampleCounts { n_kappa_pde: 1, n_pde, n_bc, n_kappa_data: 0, n_data: 0 };
    cfg.weights.data = 0.0;
    cfg.optimizer = optimizer.clone();
    let solver = cfg.reference_solver()?;
    let reference = [(kappa, solver.solve(&kappa).map_err(|e| TrainingError::Reference(e.to_string()))?)];
    let mut reports = Vec::with_capacity(2);
    let mut losses = [0.0; 2];
    for (i, symmetry) in [true, false].into_iter().enumerate() {
        cfg.symmetry_shear = symmetry;
        let problem = TrainingProblem::new(&cfg, &solver)?;
        let out = train(&problem, optimizer, problem.initial_parameters(cfg.seed), &mut |_| {})?;
        log::info!("symmetry shear {symmetry}: final loss {:.4e}", out.final_terms.total);
        losses[i] = out.final_terms.total;
        reports.push(validate(&out.ansatz, &reference, n_validation, cfg.seed)?);
    }
    let without = reports.pop().expect("two runs");
    let with = reports.pop().expect("two runs");
    Ok(AblationReport { kappa, rl2_ratio: without.rl2 / with.rl2, with_symmetry: with, without_symmetry: without, final_loss: losses })
}
