//! Monte Carlo checks of coverage and plug-in standard errors.

use vendorest::harness::{run_coverage, EstimatorKind, EstimatorSpec, ExperimentConfig, SeMethod};
use vendorest::simulator::{GenerativeModel, Scenario, ScenarioCell};

fn cell(id: &str, lambda0: f64, lambda1: f64, markets: Option<f64>) -> ScenarioCell {
    ScenarioCell {
        id: id.into(),
        lambda0,
        lambda1,
        markets,
    }
}

fn model1_scenario(replicates: u64, seed: u64) -> Scenario {
    Scenario {
        cells: vec![cell("a", 800.0, 1.0, None), cell("b", 700.0, 1.0, None), cell("c", 500.0, 1.0, None)],
        p: 0.3,
        epsilon0: None,
        epsilon1: None,
        n1: 1000,
        replicates,
        seed,
    }
}

fn model3_scenario(replicates: u64, seed: u64) -> Scenario {
    Scenario {
        cells: vec![
            cell("a", 2000.0, 400.0, Some(400.0)),
            cell("b", 1500.0, 300.0, Some(300.0)),
            cell("c", 1500.0, 300.0, Some(300.0)),
        ],
        p: 0.3,
        epsilon0: None,
        epsilon1: None,
        n1: 5000,
        replicates,
        seed,
    }
}

fn three_estimators(se: SeMethod) -> Vec<EstimatorSpec> {
    vec![
        EstimatorSpec::new(EstimatorKind::Ratio, &[], se),
        EstimatorSpec::new(EstimatorKind::Subregion, &["a"], se),
        EstimatorSpec::new(EstimatorKind::Subtotal, &["a"], se),
    ]
}

#[test]
fn model1_coverage_is_nominal() {
    let cfg = ExperimentConfig {
        model: GenerativeModel::Model1,
        scenario: model1_scenario(2000, 101),
        estimators: three_estimators(SeMethod::Poisson),
        level: 0.95,
    };
    let r = run_coverage(&cfg).unwrap();
    for e in &r.estimators {
        assert!((0.93..=0.97).contains(&e.coverage), "{}: {}", e.label, e.coverage);
        assert_eq!(e.degenerate, 0);
    }
}

#[test]
fn model1_se_matches_empirical_sd() {
    let cfg = ExperimentConfig {
        model: GenerativeModel::Model1,
        scenario: model1_scenario(10_000, 202),
        estimators: three_estimators(SeMethod::Poisson),
        level: 0.95,
    };
    let r = run_coverage(&cfg).unwrap();
    for e in &r.estimators {
        assert!(e.relative_se_error.abs() < 0.05, "{}: {}", e.label, e.relative_se_error);
    }
}

#[test]
fn model2_weighted_se_matches_empirical_sd() {
    let mut s = model1_scenario(10_000, 303);
    s.epsilon0 = Some(vec![-0.15, 0.0, 0.1]);
    s.epsilon1 = Some(vec![0.1, -0.1, 0.0]);
    let w0 = vec![1.0 / 0.15, 1.0 / 0.3, 1.0 / 0.4];
    let w1 = vec![1.0 / 0.4, 1.0 / 0.2, 1.0 / 0.3];
    let cfg = ExperimentConfig {
        model: GenerativeModel::Model2,
        scenario: s,
        estimators: vec![
            EstimatorSpec::weighted(EstimatorKind::Ratio, &[], w0.clone(), w1.clone()),
            EstimatorSpec::weighted(EstimatorKind::Subregion, &["a"], w0.clone(), w1.clone()),
            EstimatorSpec::weighted(EstimatorKind::Subtotal, &["a"], w0, w1),
        ],
        level: 0.95,
    };
    let r = run_coverage(&cfg).unwrap();
    for e in &r.estimators {
        assert!(e.relative_se_error.abs() < 0.05, "{}: {}", e.label, e.relative_se_error);
        // Consistency: mean within a few Monte Carlo standard errors of the truth.
        let mc = e.empirical_sd / (e.replicates as f64).sqrt();
        assert!((e.mean_estimate - e.truth).abs() < 4.0 * mc + 0.01 * e.truth, "{}: {} vs {}", e.label, e.mean_estimate, e.truth);
    }
}

#[test]
fn model2_halved_response_halves_counts() {
    use vendorest::rng::RngStream;
    let mut s = model1_scenario(100, 1);
    s.epsilon0 = Some(vec![-0.15; 3]);
    let stream = RngStream::new(9);
    let reps = 20_000;
    let total: u64 = (0..reps)
        .map(|r| s.simulate(GenerativeModel::Model2, &stream, r).unwrap().n0.iter().sum::<u64>())
        .sum();
    let mean = total as f64 / reps as f64;
    // Full response gives 600 on average.
    assert!((mean - 300.0).abs() < 4.0 * (300.0f64 / reps as f64).sqrt(), "{mean}");
}

#[test]
fn model3_overdispersed_coverage_and_poisson_undercoverage() {
    let mut estimators = three_estimators(SeMethod::Overdispersed);
    estimators.extend(three_estimators(SeMethod::Poisson));
    let cfg = ExperimentConfig {
        model: GenerativeModel::Model3,
        scenario: model3_scenario(2000, 404),
        estimators,
        level: 0.95,
    };
    let r = run_coverage(&cfg).unwrap();
    for e in &r.estimators[..3] {
        assert!((0.92..=0.97).contains(&e.coverage), "{}: {}", e.label, e.coverage);
    }
    for e in &r.estimators[3..] {
        assert!(e.coverage < 0.90, "{}: {}", e.label, e.coverage);
    }
}

#[test]
fn model3_se_matches_empirical_sd() {
    let cfg = ExperimentConfig {
        model: GenerativeModel::Model3,
        scenario: model3_scenario(10_000, 505),
        estimators: three_estimators(SeMethod::Overdispersed),
        level: 0.95,
    };
    let r = run_coverage(&cfg).unwrap();
    for e in &r.estimators {
        assert!(e.relative_se_error.abs() < 0.07, "{}: {}", e.label, e.relative_se_error);
    }
}

#[test]
fn relative_bias_shrinks_with_scale() {
    let bias_at = |scale: f64, seed: u64| {
        let mut s = model1_scenario(4000, seed);
        for c in &mut s.cells {
            c.lambda0 *= scale;
        }
        s.n1 = (1000.0 * scale) as u64;
        let cfg = ExperimentConfig {
            model: GenerativeModel::Model1,
            scenario: s,
            estimators: vec![EstimatorSpec::new(EstimatorKind::Ratio, &[], SeMethod::Poisson)],
            level: 0.95,
        };
        run_coverage(&cfg).unwrap().estimators[0].relative_bias
    };
    let small = bias_at(0.1, 7);
    let large = bias_at(2.5, 8);
    // E[1/n1] > 1/E[n1] makes the ratio biased upward at small scale.
    assert!(small > 0.0 && large.abs() < small, "{small} {large}");
}

fn moments(xs: &[f64]) -> (f64, f64, f64) {
    // Mean, variance and the standard error of the variance estimate.
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let m4 = xs.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / n;
    (mean, var, ((m4 - var * var) / n).sqrt())
}

#[test]
fn model1_uncredentialed_total_is_equidispersed() {
    use vendorest::rng::RngStream;
    use vendorest::simulator::{simulate_model1, IntensityModel};
    let intensity = IntensityModel::new(vec![800.0, 700.0, 500.0], vec![1.0; 3]).unwrap();
    let stream = RngStream::new(606);
    let reps = 100_000u64;
    let xs: Vec<f64> = (0..reps)
        .map(|r| simulate_model1(&intensity, 0.3, 1000, &stream, r).unwrap().n0.iter().sum::<u64>() as f64)
        .collect();
    let (mean, var, se_var) = moments(&xs);
    let se_mean = (var / reps as f64).sqrt();
    assert!((mean - 600.0).abs() < 3.0 * se_mean, "mean {mean}");
    assert!((var - 600.0).abs() < 3.0 * se_var, "variance {var} ± {se_var}");
}

#[test]
fn thinning_matches_direct_poisson() {
    use vendorest::rng::RngStream;
    use vendorest::simulator::{simulate_model1, simulate_model1_thinned, IntensityModel};
    let intensity = IntensityModel::new(vec![400.0, 250.0], vec![1.0, 2.0]).unwrap();
    let stream = RngStream::new(707);
    let reps = 100_000u64;
    let (mut a0, mut b0, mut a1, mut b1) = (vec![], vec![], vec![], vec![]);
    for r in 0..reps {
        let d = simulate_model1(&intensity, 0.25, 600, &stream, r).unwrap();
        let t = simulate_model1_thinned(&intensity, 0.25, 600, &stream, r).unwrap();
        a0.push(d.n0[0] as f64);
        b0.push(t.n0[0] as f64);
        a1.push(d.n1[1] as f64);
        b1.push(t.n1[1] as f64);
    }
    for (a, b) in [(a0, b0), (a1, b1)] {
        let (ma, va, sva) = moments(&a);
        let (mb, vb, svb) = moments(&b);
        let se_m = ((va + vb) / reps as f64).sqrt();
        assert!((ma - mb).abs() < 4.0 * se_m, "means {ma} {mb}");
        let se_v = (sva * sva + svb * svb).sqrt();
        assert!((va - vb).abs() < 4.0 * se_v, "variances {va} {vb}");
    }
}

#[test]
fn model3_credentialed_total_has_inflated_variance() {
    use vendorest::overdispersed::u1;
    use vendorest::rng::RngStream;
    let s = model3_scenario(100, 1);
    let stream = RngStream::new(808);
    let reps = 100_000u64;
    let xs: Vec<f64> = (0..reps)
        .map(|r| {
            let c = s.simulate(GenerativeModel::Model3, &stream, r).unwrap();
            c.n1.iter().sum::<u64>() as f64
        })
        .collect();
    let (mean, var, se_var) = moments(&xs);
    let (p, n) = (0.3, 5000.0);
    let expected = u1(5000, 1000.0).unwrap() * p * (1.0 - p) * n;
    assert!((mean - p * n).abs() < 3.0 * (var / reps as f64).sqrt(), "mean {mean}");
    assert!((var - expected).abs() < 3.0 * se_var, "variance {var} vs {expected} ± {se_var}");
}

#[test]
fn model3_dispersion_grows_with_vendors_per_market() {
    use vendorest::rng::RngStream;
    let stream = RngStream::new(909);
    let index = |markets: f64| {
        let mut s = model3_scenario(100, 1);
        for c in &mut s.cells {
            c.markets = Some(c.lambda0 / markets);
        }
        let xs: Vec<f64> = (0..20_000)
            .map(|r| s.simulate(GenerativeModel::Model3, &stream, r).unwrap().n0[0] as f64)
            .collect();
        let (m, v, _) = moments(&xs);
        v / m
    };
    let d: Vec<f64> = [1.5, 3.0, 6.0, 12.0].into_iter().map(index).collect();
    assert!(d.windows(2).all(|w| w[0] < w[1]), "{d:?}");
}
