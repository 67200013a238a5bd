use elastocal::calibration::{
    add_synthetic_noise, histogram, nls_calibrate, sample_posterior, Likelihood, McmcConfig, NoiseModel,
};
use elastocal::mechanics::MaterialParameters;
use elastocal::network::Checkpoint;
use elastocal::training::{predict, train, validate, LbfgsConfig, SampleCounts, TrainingConfig, TrainingProblem};

fn small_config() -> TrainingConfig {
    TrainingConfig {
        hidden: vec![8, 8],
        counts: SampleCounts { n_kappa_pde: 8, n_pde: 16, n_bc: 4, n_kappa_data: 4, n_data: 32 },
        optimizer: LbfgsConfig { max_iterations: 200, ..LbfgsConfig::default() },
        mesh_size: 8.0,
        ..TrainingConfig::linear_desk()
    }
}

#[test]
fn train_checkpoint_calibrate_and_sample() {
    let cfg = small_config();
    let solver = cfg.reference_solver().unwrap();
    let problem = TrainingProblem::new(&cfg, &solver).unwrap();
    let out = train(&problem, &cfg.optimizer, problem.initial_parameters(cfg.seed), &mut |_| {}).unwrap();
    let values = &out.trace.values;
    assert!(values.windows(2).all(|w| w[1] <= w[0]));
    assert!(values.last().unwrap() < &(0.1 * values[0]), "{} -> {}", values[0], values.last().unwrap());
    assert_eq!(out.history.len(), values.len());

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ck.json");
    Checkpoint::from_ansatz(&out.ansatz, cfg.model.name()).save(&path).unwrap();
    let ansatz = Checkpoint::load(&path).unwrap().into_ansatz().unwrap();
    let center = cfg.kappa_box.center();
    let probe = [[-50.0, 50.0], [-99.0, 1.0]];
    assert_eq!(predict(&ansatz, &probe, &center), predict(&out.ansatz, &probe, &center));

    let reference = [(center, solver.solve(&center).unwrap())];
    let report = validate(&ansatz, &reference, 64, 1).unwrap();
    assert!(report.rl2.is_finite() && report.rl2 > 0.0);

    // self-generated data: the estimate must come back to the truth
    let truth = MaterialParameters { k: 1.3e5, g: 8.8e4 };
    let sensors = solver.sample(&truth, 64, 3).unwrap().points;
    let clean = elastocal::field::DisplacementField::new(sensors.clone(), predict(&ansatz, &sensors, &truth));
    let opt = LbfgsConfig { gradient_tolerance: 1e-10, max_iterations: 200, ..LbfgsConfig::default() };
    let nls = nls_calibrate(&ansatz, &clean, None, &cfg.kappa_box, &opt).unwrap();
    assert!((nls.kappa.k - truth.k).abs() < 1e-3 * truth.k, "{:?}", nls.kappa);
    assert!((nls.kappa.g - truth.g).abs() < 1e-3 * truth.g, "{:?}", nls.kappa);

    let noisy = add_synthetic_noise(&clean, 5e-4, 4).unwrap();
    let likelihood = Likelihood::new(&ansatz, &noisy, NoiseModel::isotropic(5e-4)).unwrap();
    let mcmc = McmcConfig { n_walkers: 16, n_steps: 60, n_burnin: 40, stretch: 4.0, seed: 2 };
    let post = sample_posterior(&likelihood, &cfg.kappa_box, &mcmc).unwrap();
    assert_eq!(post.len(), 16 * 60);
    assert!(post.acceptance_fraction > 0.0 && post.acceptance_fraction < 1.0);
    let k = post.parameter(0);
    assert!(k.iter().all(|v| cfg.kappa_box.lower.k <= *v && *v <= cfg.kappa_box.upper.k));
    assert_eq!(histogram(&k, 10).counts.iter().sum::<usize>(), k.len());
}
