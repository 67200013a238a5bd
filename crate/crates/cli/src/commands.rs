use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use elastocal::calibration::{
    add_synthetic_noise, covariance_from_weights, coverage_test, histogram, nls_calibrate, sample_posterior, CoverageConfig, Likelihood,
    NoiseModel, WeightMatrix,
};
use elastocal::fem::{neo_hookean_uniaxial_homogeneous, ReferenceSolver};
use elastocal::field::DisplacementField;
use elastocal::mechanics::{MaterialModel, MaterialParameters};
use elastocal::network::{Ansatz, Checkpoint};
use elastocal::training::{
    append_history_row, bc_ablation, train, validate, validation_kappas, KappaBox, LossRecord, TrainingProblem,
};
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::CliError;

pub fn prepare_out(out: &Path, cfg: &RunConfig) -> Result<(), CliError> {
    fs::create_dir_all(out)?;
    cfg.write(out)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}

fn load_ansatz(checkpoint: &Path) -> Result<Ansatz, CliError> {
    Ok(Checkpoint::load(checkpoint)?.into_ansatz()?)
}

/// Parameter box the surrogate was trained on.
fn trained_box(ansatz: &Ansatz) -> Result<KappaBox, CliError> {
    let c = &ansatz.config;
    if c.n_kappa() != 2 {
        return Err(CliError::Config("calibration needs a parametric checkpoint".into()));
    }
    Ok(KappaBox::new(MaterialParameters { k: c.kappa_min[0], g: c.kappa_min[1] }, MaterialParameters { k: c.kappa_max[0], g: c.kappa_max[1] })?)
}

#[derive(Serialize)]
struct KappaRow {
    index: usize,
    k: f64,
    g: f64,
}

#[derive(Serialize)]
struct OracleRow {
    k: f64,
    g: f64,
    traction: f64,
    lambda1: f64,
    lambda2: f64,
}

pub fn generate_data(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let t = &cfg.training;
    let solver = t.reference_solver()?;
    solver.mesh().write(&out.join("mesh.txt"))?;
    match t.model {
        MaterialModel::LinearElasticPlaneStress => {
            let mut index = csv::Writer::from_path(out.join("kappas.csv"))?;
            for (i, kappa) in t.data_kappas().iter().enumerate() {
                let full = solver.solve(kappa)?;
                full.write_csv(&out.join(format!("solution_{i:03}.csv")))?;
                if t.counts.n_data > 0 {
                    elastocal::fem::sample_field(&full, t.counts.n_data, t.seed.wrapping_add(i as u64))?
                        .write_csv(&out.join(format!("snapshot_{i:03}.csv")))?;
                }
                index.serialize(KappaRow { index: i, k: kappa.k, g: kappa.g })?;
            }
            index.flush()?;
        }
        MaterialModel::NeoHookeanPlaneStrain => {
            let mut w = csv::Writer::from_path(out.join("homogeneous_oracle.csv"))?;
            let load = -t.geometry.left_traction[0];
            for kappa in t.kappa_box.corners().iter().chain(std::iter::once(&t.kappa_box.center())) {
                for step in 1..=10 {
                    let traction = load * step as f64 / 10.0;
                    let (lambda1, lambda2) = neo_hookean_uniaxial_homogeneous(kappa, traction)?;
                    w.serialize(OracleRow { k: kappa.k, g: kappa.g, traction, lambda1, lambda2 })?;
                }
            }
            w.flush()?;
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct TrainReport {
    iterations: usize,
    evaluations: usize,
    termination: String,
    final_pde: f64,
    final_neumann: f64,
    final_data: f64,
    final_total: f64,
    wall_time_s: f64,
}

pub fn train_cmd(cfg: &RunConfig, out: &Path, resume: Option<&Path>) -> Result<PathBuf, CliError> {
    let t = &cfg.training;
    let solver = t.reference_solver()?;
    let problem = TrainingProblem::new(t, &solver)?;
    let init = match resume {
        Some(path) => {
            let ck = Checkpoint::load(path)?;
            if ck.ffnn != problem.ffnn || ck.ansatz != problem.ansatz {
                return Err(CliError::Config(format!("checkpoint {} does not match the configured network", path.display())));
            }
            ck.into_ansatz()?.params
        }
        None => problem.initial_parameters(t.seed),
    };
    let start = Instant::now();
    let mut log = csv::Writer::from_path(out.join("loss_history.csv"))?;
    let mut io_error = None;
    let outcome = train(&problem, &t.optimizer, init, &mut |rec: &LossRecord| {
        if io_error.is_none() {
            io_error = append_history_row(&mut log, rec).err();
        }
        if rec.iteration % 100 == 0 {
            log::info!("iteration {} loss {:.4e} |g| {:.3e}", rec.iteration, rec.total, rec.gradient_norm);
        }
    })?;
    if let Some(e) = io_error {
        return Err(e.into());
    }
    let path = out.join("checkpoint.json");
    Checkpoint::from_ansatz(&outcome.ansatz, t.model.name()).save(&path)?;
    let f = outcome.final_terms;
    write_json(
        &out.join("train_report.json"),
        &TrainReport {
            iterations: outcome.trace.iterations(),
            evaluations: outcome.trace.evaluations,
            termination: format!("{:?}", outcome.trace.termination),
            final_pde: f.pde,
            final_neumann: f.neumann,
            final_data: f.data,
            final_total: f.total,
            wall_time_s: start.elapsed().as_secs_f64(),
        },
    )?;
    Ok(path)
}

pub fn validate_cmd(cfg: &RunConfig, checkpoint: &Path, out: &Path) -> Result<(), CliError> {
    let ansatz = load_ansatz(checkpoint)?;
    let t = &cfg.training;
    let solver = t.reference_solver()?;
    let kappas = match t.fixed_kappa {
        Some(k) => vec![k],
        None => validation_kappas(&t.kappa_box, cfg.validation.n_kappa, cfg.validation.seed),
    };
    let references = kappas.iter().map(|k| Ok((*k, solver.solve(k)?))).collect::<Result<Vec<_>, CliError>>()?;
    let report = validate(&ansatz, &references, cfg.validation.n_points, cfg.validation.seed)?;
    write_json(&out.join("validation.json"), &report)
}

pub fn calibrate_nls(cfg: &RunConfig, checkpoint: &Path, data: &Path, out: &Path) -> Result<(), CliError> {
    let ansatz = load_ansatz(checkpoint)?;
    let field = DisplacementField::read_csv(data)?;
    let result = nls_calibrate(&ansatz, &field, None, &trained_box(&ansatz)?, &cfg.calibration.optimizer)?;
    write_json(&out.join("nls_report.json"), &result)
}

#[derive(Serialize)]
struct HistogramRow {
    lower: f64,
    upper: f64,
    count: usize,
}

#[derive(Serialize)]
struct McmcReport {
    noise: NoiseModel,
    k: elastocal::calibration::CredibleInterval,
    g: elastocal::calibration::CredibleInterval,
    map_estimate: MaterialParameters,
    acceptance_fraction: f64,
    evaluations: usize,
    wall_time_s: f64,
}

pub fn calibrate_mcmc(cfg: &RunConfig, checkpoint: &Path, data: &Path, out: &Path) -> Result<(), CliError> {
    let start = Instant::now();
    let ansatz = load_ansatz(checkpoint)?;
    let field = DisplacementField::read_csv(data)?;
    let noise = match cfg.calibration.noise_sigma {
        Some(s) => NoiseModel::isotropic(s),
        None => covariance_from_weights(&WeightMatrix::from_data(&field)?),
    };
    let likelihood = Likelihood::new(&ansatz, &field, noise)?;
    let posterior = sample_posterior(&likelihood, &trained_box(&ansatz)?, &cfg.calibration.mcmc)?;
    posterior.write_csv(&out.join("posterior.csv"), &["K", "G"])?;
    for (j, name) in ["K", "G"].iter().enumerate() {
        let h = histogram(&posterior.parameter(j), cfg.calibration.histogram_bins);
        let mut w = csv::Writer::from_path(out.join(format!("histogram_{name}.csv")))?;
        for (i, count) in h.counts.iter().enumerate() {
            w.serialize(HistogramRow { lower: h.edges[i], upper: h.edges[i + 1], count: *count })?;
        }
        w.flush()?;
    }
    let s = posterior.summaries(cfg.calibration.level)?;
    let (best, _) = posterior.best_draw();
    write_json(
        &out.join("mcmc_report.json"),
        &McmcReport {
            noise,
            k: s[0],
            g: s[1],
            map_estimate: MaterialParameters { k: best[0], g: best[1] },
            acceptance_fraction: posterior.acceptance_fraction,
            evaluations: posterior.evaluations,
            wall_time_s: start.elapsed().as_secs_f64(),
        },
    )
}

/// Noise-free sensor readings of the reference solution at a random node set.
fn clean_data(solver: &ReferenceSolver, n: usize) -> impl Fn(&MaterialParameters, u64) -> Result<DisplacementField, elastocal::calibration::CalibrationError> + Sync + '_ {
    move |kappa, seed| {
        solver.sample(kappa, n, seed).map_err(|e| elastocal::calibration::CalibrationError::Numerical(e.to_string()))
    }
}

pub fn coverage(cfg: &RunConfig, checkpoint: &Path, out: &Path) -> Result<(), CliError> {
    let ansatz = load_ansatz(checkpoint)?;
    let prior = trained_box(&ansatz)?;
    let solver = cfg.training.reference_solver()?;
    let c = &cfg.calibration;
    let cov = CoverageConfig {
        n_tests: c.coverage_tests,
        noise_sigma: c.noise_sigma.unwrap_or(5e-4),
        level: c.level,
        mcmc: c.mcmc,
        seed: c.seed,
    };
    let report = coverage_test(&ansatz, &prior, &prior, clean_data(&solver, c.n_sensors), &cov)?;
    write_json(&out.join("coverage.json"), &report)
}

pub fn bc_ablation_cmd(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let a = &cfg.ablation;
    let report = bc_ablation(&cfg.training, a.kappa, a.n_pde, a.n_bc, &a.optimizer, a.n_validation)?;
    write_json(&out.join("ablation.json"), &report)
}

/// Noisy synthetic measurement for a known parameter pair.
pub fn synthesize(cfg: &RunConfig, kappa: MaterialParameters, out: &Path) -> Result<(), CliError> {
    let solver = cfg.training.reference_solver()?;
    let c = &cfg.calibration;
    let clean = solver.sample(&kappa, c.n_sensors, c.seed)?;
    let noisy = add_synthetic_noise(&clean, c.noise_sigma.unwrap_or(0.0), c.seed ^ 0x5eed)?;
    noisy.write_csv(&out.join("measurement.csv"))?;
    Ok(())
}
