//! Calibration and concentration checks for the hierarchical fit.

use rayon::prelude::*;
use vendorest::hierarchical::{fit, simulate_model4, summarize, FitConfig, FitData, HierModel, HyperPrior};
use vendorest::rng::RngStream;

fn calibration_prior() -> HyperPrior {
    HyperPrior {
        mu_p: ((0.3f64 / 0.7).ln(), 0.3),
        mu_0: (300f64.ln(), 0.3),
        sigma_p: 0.3,
        sigma_0: 0.3,
        sigma_1: 0.3,
    }
}

#[test]
fn credible_intervals_cover_true_total() {
    let prior = calibration_prior();
    let root = RngStream::new(2718);
    let fits = 100u64;
    let covered: Vec<bool> = (0..fits)
        .into_par_iter()
        .map(|i| {
            let mut rng = root.child(i).substream(0, 0, 0);
            let (data, truth) = simulate_model4(&prior, 6, 1000, &mut rng).unwrap();
            let cfg = FitConfig {
                chains: 4,
                warmup: 1000,
                iters: 1000,
                seed: 1000 + i,
                prior: Some(prior),
                ..FitConfig::default()
            };
            let draws = fit(HierModel::Model4, &data, &cfg).unwrap();
            let s = summarize(&draws, 0.90).unwrap();
            let t = truth.total(1000);
            s.lower <= t && t <= s.upper
        })
        .collect();
    let rate = covered.iter().filter(|c| **c).count() as f64 / fits as f64;
    println!("90% interval coverage over {fits} fits: {rate}");
    assert!((0.83..=0.97).contains(&rate), "{rate}");
}

#[test]
fn single_cell_concentrates_near_ratio_estimate() {
    // K = 1 with large counts: Λ0 ≈ n0 / p̂.
    let data = FitData::new(vec![30_000], vec![20_000], 50_000);
    let cfg = FitConfig {
        chains: 2,
        warmup: 1000,
        iters: 1000,
        seed: 3,
        ..FitConfig::default()
    };
    let draws = fit(HierModel::Model4, &data, &cfg).unwrap();
    let s = summarize(&draws, 0.95).unwrap();
    let ratio = 30_000.0 / 0.4 + 50_000.0;
    assert!((s.mean / ratio - 1.0).abs() < 0.01, "{} vs {ratio}", s.mean);
    assert!(s.upper - s.lower < 0.05 * ratio);
}

#[test]
fn model5_fit_runs() {
    let data = FitData::new(vec![60, 45, 80], vec![30, 20, 25], 500).with_rho(vec![3.0, 3.0, 3.0]);
    let cfg = FitConfig {
        chains: 2,
        warmup: 500,
        iters: 500,
        seed: 4,
        ..FitConfig::default()
    };
    let draws = fit(HierModel::Model5, &data, &cfg).unwrap();
    let s = summarize(&draws, 0.95).unwrap();
    assert!(s.mean.is_finite() && s.lower < s.upper);
    assert!(draws.acceptance.iter().all(|a| *a > 0.05 && *a < 0.95), "{:?}", draws.acceptance);
}

#[test]
fn draws_respect_selection_bound_and_chain_order() {
    let data = FitData::new(vec![40, 25, 60, 10], vec![12, 9, 20, 4], 300);
    let cfg = FitConfig {
        chains: 3,
        warmup: 400,
        iters: 400,
        seed: 21,
        ..FitConfig::default()
    };
    let draws = fit(HierModel::Model4, &data, &cfg).unwrap();
    for row in 0..draws.len() {
        let h = draws.params(row);
        let s: f64 = h.p().iter().zip(h.r(HierModel::Model4)).map(|(p, r)| p * r).sum();
        assert!(s <= 1.0 + 1e-12, "row {row}: {s}");
    }
    // Pooled summaries do not depend on the order chains are concatenated in.
    let a = summarize(&draws, 0.9).unwrap();
    let mut reordered = draws.clone();
    let per = draws.len() / 3;
    reordered.total = draws.total[per..].iter().chain(&draws.total[..per]).copied().collect();
    let b = summarize(&reordered, 0.9).unwrap();
    assert!((a.mean - b.mean).abs() < 1e-9 * a.mean);
    assert_eq!((a.lower, a.upper), (b.lower, b.upper));
}

/// Simulation-based calibration: the rank of each true value among thinned
/// posterior draws is uniform when the sampler targets the right posterior.
#[test]
fn sbc_ranks_are_uniform() {
    let prior = calibration_prior();
    let root = RngStream::new(31_415);
    let reps = 200u64;
    let kept = 99usize;
    let ranks: Vec<[usize; 2]> = (0..reps)
        .into_par_iter()
        .map(|i| {
            let mut rng = root.child(i).substream(0, 0, 0);
            let (data, truth) = simulate_model4(&prior, 6, 1000, &mut rng).unwrap();
            let cfg = FitConfig {
                chains: 3,
                warmup: 600,
                iters: 990,
                thin: 30,
                seed: 5000 + i,
                prior: Some(prior),
                ..FitConfig::default()
            };
            let draws = fit(HierModel::Model4, &data, &cfg).unwrap();
            assert_eq!(draws.len(), kept);
            let t = truth.total(1000);
            let total_rank = draws.total.iter().filter(|&&x| x < t).count();
            let mu_rank = (0..draws.len()).filter(|&r| draws.params(r).mu_p < truth.mu_p).count();
            [total_rank, mu_rank]
        })
        .collect();
    // 10 bins of 10 ranks each over 0..=99; chi-square with 9 df, 1% critical value.
    const CRITICAL: f64 = 21.666;
    for (j, name) in ["total", "mu_p"].iter().enumerate() {
        let mut bins = [0f64; 10];
        for r in &ranks {
            bins[(r[j] / 10).min(9)] += 1.0;
        }
        let expected = reps as f64 / 10.0;
        let chi2: f64 = bins.iter().map(|b| (b - expected).powi(2) / expected).sum();
        println!("SBC {name}: bins {bins:?}, chi-square {chi2:.2}");
        assert!(chi2 < CRITICAL, "{name}: chi-square {chi2}");
    }
}
