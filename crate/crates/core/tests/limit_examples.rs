use rwm_meanfield::chain::InitialDistribution;
use rwm_meanfield::closed_forms::{gamma_coef, gee_coef, MomentPair, ScalingParams};
use rwm_meanfield::gaussian_ode::integrate_moment_ode;
use rwm_meanfield::limit::{
    martingale_defect, run_ensemble, taper_radius, EnsembleConfig, EnsembleRun, TaperKind, TestFunction,
};
use rwm_meanfield::potentials::Potential;

fn config(particles: usize, dt: f64, horizon: f64, seed: u64, init: InitialDistribution) -> EnsembleConfig {
    EnsembleConfig { n_particles: particles, dt, horizon, l: 2.38, seed, init, stratified_init: false }
}

fn sup_moment_gap(x: &EnsembleRun, y: &EnsembleRun) -> f64 {
    assert_eq!(x.history.len(), y.history.len());
    x.history.iter().zip(&y.history).map(|(p, q)| (p.a - q.a).abs().max((p.b - q.b).abs())).fold(0.0, f64::max)
}

#[test]
fn stationary_start_stays_at_fixed_point() {
    let p = Potential::gaussian(1.0).unwrap();
    let cfg = config(100_000, 1e-3, 5.0, 1, InitialDistribution::IidNormal { mean: 0.0, sd: 1.0 });
    let run = run_ensemble(&cfg, &p, &[]).unwrap();
    let worst = run.history.iter().map(|m| (m.a - 1.0).abs()).fold(0.0, f64::max);
    assert!(worst <= 0.05, "sup |a - 1| = {worst}");
}

#[test]
fn wide_gaussian_start_follows_moment_ode() {
    let p = Potential::gaussian(1.0).unwrap();
    let cfg = EnsembleConfig {
        stratified_init: true,
        ..config(100_000, 1e-3, 5.0, 1, InitialDistribution::IidNormal { mean: 0.0, sd: 2.0 })
    };
    let run = run_ensemble(&cfg, &p, &[]).unwrap();
    let ode = integrate_moment_ode(4.0, 2.38, 5.0, 1e-3).unwrap();
    let worst = run.history.iter().map(|m| (m.a - ode.value_at(m.t).unwrap()).abs()).fold(0.0, f64::max);
    assert!(worst <= 0.03, "sup |a - m| = {worst}");
}

#[test]
fn logcosh_moment_curves_self_average() {
    let p = Potential::logcosh();
    let init = InitialDistribution::Point { x0: 2.0 };
    let a = run_ensemble(&config(100_000, 1e-3, 5.0, 1, init.clone()), &p, &[]).unwrap();
    let b = run_ensemble(&config(100_000, 1e-3, 5.0, 2, init), &p, &[]).unwrap();
    let gap = sup_moment_gap(&a, &b);
    assert!(gap <= 0.02, "two-seed sup gap {gap}");
}

#[test]
fn seed_disagreement_halves_with_four_times_the_particles() {
    let p = Potential::logcosh();
    let init = InitialDistribution::Point { x0: 2.0 };
    let mean_gap = |particles: usize| {
        let gaps: Vec<f64> = (0..3u64)
            .map(|k| {
                let x = run_ensemble(&config(particles, 0.01, 5.0, 2 * k + 1, init.clone()), &p, &[]).unwrap();
                let y = run_ensemble(&config(particles, 0.01, 5.0, 2 * k + 2, init.clone()), &p, &[]).unwrap();
                sup_moment_gap(&x, &y)
            })
            .collect();
        gaps.iter().sum::<f64>() / gaps.len() as f64
    };
    let small = mean_gap(25_000);
    let large = mean_gap(100_000);
    let ratio = large / small;
    // The sup of the fluctuation scales like N^{-1/2}; three seed pairs leave ~20% noise.
    assert!((0.3..=0.75).contains(&ratio), "gap {small} -> {large}, ratio {ratio}");
}

#[test]
fn frozen_coefficient_scheme_is_first_order_in_dt() {
    // Mean of the Euler step for V = x²/2 with frozen coefficients:
    // E[x'²] = (1 - 𝒢h)² m + Γh.
    let s = ScalingParams::new(2.38).unwrap();
    let ode = integrate_moment_ode(4.0, 2.38, 2.0, 1e-4).unwrap();
    let error = |h: f64| {
        let steps = (2.0 / h).round() as usize;
        let mut m = 4.0;
        let mut worst = 0.0f64;
        for k in 0..steps {
            let p = MomentPair::new(m, 1.0).unwrap();
            let (g, ge) = (gamma_coef(p, s), gee_coef(p, s));
            m = (1.0 - ge * h).powi(2) * m + g * h;
            worst = worst.max((m - ode.value_at((k + 1) as f64 * h).unwrap()).abs());
        }
        worst
    };
    let (e1, e2, e3) = (error(0.01), error(0.005), error(0.0025));
    for r in [e1 / e2, e2 / e3] {
        assert!((1.8..=2.2).contains(&r), "errors {e1} {e2} {e3}");
    }
    assert!(error(1e-3) < 2e-3);
}

#[test]
fn stationary_martingale_defect_is_small() {
    let p = Potential::gaussian(1.0).unwrap();
    let dt = 1e-3;
    let cfg = config(100_000, dt, 2.0, 1, InitialDistribution::Stationary { burnin: 0 });
    let times: Vec<f64> = (0..=20).map(|i| 0.1 * f64::from(i)).collect();
    let run = run_ensemble(&cfg, &p, &times).unwrap();
    let radius = taper_radius(&run.snapshots[0].particles, 0.999).unwrap();
    let phi = TestFunction::Taper { kind: TaperKind::Square, radius };
    let s = ScalingParams::new(2.38).unwrap();
    for (a, b) in [(0.0, 1.0), (0.0, 2.0), (1.0, 2.0)] {
        let d = martingale_defect(&run, &p, s, phi, a, b).unwrap();
        assert!(d.defect.abs() <= 3.0 * (d.se + 5.0 * dt), "[{a},{b}] defect {} se {}", d.defect, d.se);
    }
}

#[test]
fn ensemble_does_not_depend_on_thread_count() {
    let p = Potential::perturbed_gaussian(0.3).unwrap();
    let cfg = config(10_000, 0.01, 0.5, 1, InitialDistribution::IidUniform { lo: -2.0, hi: 2.0 });
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| run_ensemble(&cfg, &p, &[0.0, 0.25, 0.5]).unwrap())
    };
    let (x, y) = (run(1), run(3));
    assert_eq!(x.history, y.history);
    assert_eq!(x.snapshots, y.snapshots);
}
