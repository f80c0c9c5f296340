use phaselift::experiments::{
    mean_bool, median, run_experiment, run_stability, ExperimentConfig, ExperimentKind, NoiseKind, NoiseSpec,
};

fn quiet(_: &str) {}

#[test]
fn reruns_are_bitwise_identical() {
    let mut c = ExperimentConfig::new(ExperimentKind::CertSweep);
    c.n_values = vec![3, 5];
    c.ratio_values = vec![2.0, 8.0];
    c.trials = 4;
    c.base_seed = 99;
    let a = run_experiment(&c, Some(1), &quiet).unwrap().to_csv();
    let b = run_experiment(&c, Some(2), &quiet).unwrap().to_csv();
    assert_eq!(a, b);
    c.base_seed = 100;
    assert_ne!(a, run_experiment(&c, Some(1), &quiet).unwrap().to_csv());
}

#[test]
fn transition_rate_rises_with_oversampling() {
    let mut c = ExperimentConfig::new(ExperimentKind::Transition);
    c.n_values = vec![6];
    c.ratio_values = vec![1.0, 2.0, 4.0, 8.0];
    c.trials = 12;
    c.base_seed = 1;
    let t = run_experiment(&c, None, &quiet).unwrap();
    let rate = t.agg.f64s("success_rate");
    let ok = t.raw.bools("success");
    for (i, chunk) in ok.chunks(12).enumerate() {
        assert!((rate[i] - mean_bool(chunk)).abs() < 1e-12);
    }
    let inversions: f64 = rate.windows(2).map(|w| (w[0] - w[1]).max(0.0)).sum();
    assert!(inversions <= 0.1, "{rate:?}");
    assert!(rate[0] <= 0.1 && rate[3] >= 0.9, "{rate:?}");
}

#[test]
fn gaussian_noise_constant_is_moderate() {
    let mut c = ExperimentConfig::new(ExperimentKind::Stability);
    c.n_values = vec![8];
    c.ratio_values = vec![12.0];
    c.trials = 8;
    c.base_seed = 2;
    c.noise = Some(NoiseSpec {
        kind: NoiseKind::Gaussian,
        levels: vec![0.1],
        relative_to_mean_b: true,
    });
    let t = run_stability(&c, &quiet).unwrap();
    let c0 = median(&t.raw.f64s("c0_ratio"));
    assert!(c0.is_finite() && c0 <= 10.0, "{c0}");
    assert!(t.agg.f64s("fitted_c0")[0] >= c0);
}

#[test]
fn complex_transition_recovers() {
    let mut c = ExperimentConfig::new(ExperimentKind::Transition);
    c.model = phaselift::Model::ComplexGaussian;
    c.n_values = vec![4];
    c.ratio_values = vec![10.0];
    c.trials = 5;
    let t = run_experiment(&c, None, &quiet).unwrap();
    assert_eq!(t.agg.f64s("success_rate")[0], 1.0, "{}", t.to_csv());
}
