//! Statistical checks of the generator and the estimators.

use std::collections::HashMap;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use lexzipf::analytic::{analytic_blocks, block_slope_exponent, length_classes, word_length_pmf};
use lexzipf::corpus::{compare_model_to_corpus, CompareConfig};
use lexzipf::estimator::{
    blocks_from_length_counts, count_tokens, fit_exponent_blocks, fit_exponent_mle, fit_exponent_ols, rank_frequency,
    BlockWindow, FitMethod, MleUpper,
};
use lexzipf::generator::{
    generate_filtered_tokens_with, run_symbol_stream, GenerationConfig, LengthHistogram, SamplingMode, TypeId,
};
use lexzipf::table::{Provenance, RankFrequencyTable};
use lexzipf::{ModelParams, SurvivalProfile};

const SLF_PROFILE: &str = "table:k3=10,default=gamma:C=0.03,g=0.6";

/// Pearson statistic over lengths 1..=20 plus one bin for longer words,
/// against `expected(len)` (a pmf over lengths >= 1).
fn length_chi_square(hist: &LengthHistogram, expected: impl Fn(u32) -> f64) -> f64 {
    let n = hist.total() as f64;
    let mut stat = 0.0;
    let mut head_p = 0.0;
    let mut head_obs = 0;
    for len in 1..=20 {
        let p = expected(len);
        let obs = hist.get(len);
        stat += (obs as f64 - n * p).powi(2) / (n * p);
        head_p += p;
        head_obs += obs;
    }
    let tail_obs = (hist.total() - head_obs) as f64;
    let tail_p = 1.0 - head_p;
    stat + (tail_obs - n * tail_p).powi(2) / (n * tail_p)
}

fn p_value(stat: f64, df: f64) -> f64 {
    ChiSquared::new(df).unwrap().sf(stat)
}

#[test]
fn raw_stream_word_lengths_are_geometric() {
    for q in [0.18, 0.3] {
        let params = ModelParams::new(26, q).unwrap();
        let config = GenerationConfig::symbols(params.clone(), 1_000_000, 5);
        let report = run_symbol_stream(&config, |_| {}).unwrap();
        assert!(report.words >= 100_000);
        // Nonempty runs of letters: (1-q)^l q conditioned on l >= 1.
        let stat = length_chi_square(&report.length_histogram, |l| word_length_pmf(&params, l) / (1.0 - q));
        let p = p_value(stat, 20.0);
        assert!(p > 1e-3, "q={q}: chi2={stat:.2} p={p:.2e}");
    }
}

#[test]
fn token_lengths_follow_the_renormalized_law() {
    let params = ModelParams::new(26, 0.18).unwrap();
    let profile = SurvivalProfile::unfiltered(1, 40).unwrap();
    let z: f64 = (1..=40).map(|k| word_length_pmf(&params, k)).sum();
    for mode in [SamplingMode::Renormalized, SamplingMode::Rejection] {
        let config = GenerationConfig::tokens(params.clone(), profile.clone(), 200_000, 9).with_mode(mode);
        let report = generate_filtered_tokens_with(&config, |_| {}).unwrap();
        let stat = length_chi_square(&report.length_histogram, |l| word_length_pmf(&params, l) / z);
        let p = p_value(stat, 20.0);
        assert!(p > 1e-3, "{mode}: chi2={stat:.2} p={p:.2e}");
    }
}

#[test]
fn blank_count_is_within_three_sigma_of_nq() {
    let n = 1_000_000u64;
    for (q, seed) in [(0.18, 1), (0.5, 2), (0.05, 3)] {
        let params = ModelParams::new(26, q).unwrap();
        let report = run_symbol_stream(&GenerationConfig::symbols(params, n, seed), |_| {}).unwrap();
        let mean = n as f64 * q;
        let sigma = (n as f64 * q * (1.0 - q)).sqrt();
        assert!(
            (report.blanks as f64 - mean).abs() <= 3.0 * sigma,
            "q={q}: {} vs {mean}",
            report.blanks
        );
        assert_eq!(report.symbols, n);
    }
}

#[test]
fn single_class_profile_has_exactly_its_types() {
    let params = ModelParams::new(26, 0.18).unwrap();
    let profile = SurvivalProfile::parse("table:k3=10", 1, 40).unwrap();
    let config = GenerationConfig::tokens(params, profile, 100_000, 3);
    let mut tokens = Vec::new();
    generate_filtered_tokens_with(&config, |t| tokens.push(t.clone())).unwrap();
    let counts = count_tokens(tokens);
    assert_eq!(counts.len(), 10);
    assert!(counts.keys().all(|t: &TypeId| t.length == 3));
}

fn power_law_sample(alpha: f64, n: usize, tokens: usize, seed: u64) -> RankFrequencyTable {
    let weights: Vec<f64> = (1..=n).map(|r| (r as f64).powf(-alpha)).collect();
    let dist = WeightedIndex::new(&weights).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let counts = count_tokens((0..tokens).map(|_| dist.sample(&mut rng)));
    rank_frequency(&counts, tokens as u64, Provenance::Simulated).unwrap()
}

#[test]
fn likelihood_fit_tightens_with_sample_size() {
    let alpha = 1.2;
    let mut last_err = f64::INFINITY;
    let mut last_se = f64::INFINITY;
    for n in [10_000, 100_000, 1_000_000] {
        // Average over a few seeds so the comparison is not one draw.
        let fits: Vec<_> = (0..3)
            .map(|s| fit_exponent_mle(&power_law_sample(alpha, 10_000, n, 100 + s), 1, MleUpper::TableEnd).unwrap())
            .collect();
        let err = fits.iter().map(|f| (f.alpha_hat - alpha).abs()).sum::<f64>() / 3.0;
        let se = fits.iter().map(|f| f.stderr).sum::<f64>() / 3.0;
        assert!(err < last_err && se < last_se, "N={n}: err {err} se {se}");
        last_err = err;
        last_se = se;
    }
    assert!(last_err < 0.01);
}

#[test]
fn likelihood_and_regression_agree_on_a_power_law_tail() {
    let t = power_law_sample(1.2, 10_000, 1_000_000, 77);
    let r_max = t.last_rank_with_count(5);
    let ols = fit_exponent_ols(&t, 10, Some(r_max)).unwrap();
    let mle = fit_exponent_mle(&t, 10, MleUpper::TableEnd).unwrap();
    assert!((ols.alpha_hat - 1.2).abs() < 0.05, "{}", ols.alpha_hat);
    assert!((mle.alpha_hat - 1.2).abs() < 0.01, "{}", mle.alpha_hat);
}

#[test]
fn analytic_staircase_corners_follow_the_block_slope() {
    for m in [2u32, 26, 33] {
        for q in [0.1, 0.18, 0.5] {
            for gamma in [0.4, 0.6, 1.0] {
                let params = ModelParams::new(m, q).unwrap();
                let profile = SurvivalProfile::gamma(1.0, gamma, 1, 30).unwrap();
                let blocks = analytic_blocks(&params, &profile).unwrap();
                // Past the lengths where flooring distorts the counts.
                let window = BlockWindow {
                    r_min: 1.0,
                    lengths: (15, 30),
                    ..BlockWindow::default()
                };
                let fit = fit_exponent_blocks(&blocks, window).unwrap();
                let target = block_slope_exponent(&params, gamma);
                assert!(
                    (fit.alpha_hat - target).abs() < 0.05,
                    "m={m} q={q} g={gamma}: {} vs {target}",
                    fit.alpha_hat
                );
            }
        }
    }
}

#[test]
fn simulated_filtered_corpus_matches_its_model() {
    let params = ModelParams::new(26, 0.18).unwrap();
    let profile = SurvivalProfile::parse(SLF_PROFILE, 1, 40).unwrap();
    let n = 1_000_000;
    let config = GenerationConfig::tokens(params.clone(), profile.clone(), n, 42);
    let mut counts: HashMap<TypeId, u64> = HashMap::new();
    let report = generate_filtered_tokens_with(&config, |t| *counts.entry(t.clone()).or_insert(0) += 1).unwrap();
    let table = rank_frequency(&counts, n, Provenance::Simulated).unwrap();

    // Flat head: the ten length-3 types, then a drop.
    let ranked = lexzipf::estimator::ranked_types(&counts);
    assert!(ranked[..10].iter().all(|(t, _)| t.length == 3));
    assert!(ranked[10..].iter().all(|(t, _)| t.length != 3));

    let classes = length_classes(&profile, &params).unwrap();
    let blocks = blocks_from_length_counts(&classes, &report.length_histogram.counts, Provenance::Simulated).unwrap();
    let cmp = compare_model_to_corpus(&table, Some(&blocks), &params, &profile, &CompareConfig::default()).unwrap();
    assert_eq!(cmp.gap_method, FitMethod::OlsBlocks);
    assert!(
        cmp.exponent_gap <= cmp.combined_stderr * 3.0,
        "gap {} vs stderr {}",
        cmp.exponent_gap,
        cmp.combined_stderr
    );
    assert!((cmp.empirical.head_10.mass - cmp.model.head_10.mass).abs() < 0.01);
}
