use switchdiff::config::preset;
use switchdiff::harness::simulate_experiment;
use switchdiff::metrics::rms_error;
use switchdiff::signals::{NoiseKind, NoiseSpec};

fn short_sd(noise: NoiseSpec) -> switchdiff::trajectory::Trajectory {
    let mut cfg = preset("sd-paper-1").unwrap();
    cfg.plan.t_end = 0.3;
    cfg.plan.dt = 1e-5;
    cfg.plan.record_stride = 10;
    cfg.metrics.steady_window = (0.15, 0.3);
    cfg.metrics.chatter_window = (0.15, 0.3);
    cfg.noise = noise;
    simulate_experiment(&cfg).unwrap()
}

#[test]
fn seeded_noise_is_reproducible_and_seed_dependent() {
    let spec = |seed| NoiseSpec {
        kind: NoiseKind::Gaussian,
        magnitude: 1e-3,
        seed,
    };
    let a = short_sd(spec(7));
    let b = short_sd(spec(7));
    let c = short_sd(spec(8));
    assert_eq!(a, b);
    assert_ne!(
        a.column("sd.sigma1").unwrap(),
        c.column("sd.sigma1").unwrap()
    );
}

#[test]
fn noise_degrades_first_derivative_gracefully() {
    let clean = short_sd(NoiseSpec::none());
    let noisy = short_sd(NoiseSpec {
        kind: NoiseKind::Uniform,
        magnitude: 1e-4,
        seed: 1,
    });
    let w = (0.15, 0.3);
    let r_clean = rms_error(&clean, "sd.sigma1", "true.d1", w).unwrap();
    let r_noisy = rms_error(&noisy, "sd.sigma1", "true.d1", w).unwrap();
    assert!(r_noisy >= r_clean);
    assert!(r_noisy.is_finite() && r_noisy < 1.0, "{r_noisy}");
}
