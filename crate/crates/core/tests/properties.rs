use std::collections::HashMap;

use num_bigint::BigUint;
use proptest::prelude::*;

use lexzipf::analytic::analytic_blocks;
use lexzipf::corpus::{ingest_bytes_parallel, ingest_reader, TokenPattern, TokenizationConfig};
use lexzipf::estimator::{fit_exponent_mle, fit_exponent_ols, head_mass, rank_frequency, ranked_types, MleUpper};
use lexzipf::generator::{generate_filtered_tokens, GenerationConfig};
use lexzipf::table::{Provenance, RankFrequencyTable};
use lexzipf::{ModelParams, SurvivalProfile};

fn count_map() -> impl Strategy<Value = HashMap<String, u64>> {
    prop::collection::hash_map("[a-e]{1,4}", 1u64..500, 1..60)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rank_tables_are_well_formed(counts in count_map()) {
        let total = counts.values().sum();
        let t = rank_frequency(&counts, total, Provenance::Empirical).unwrap();
        prop_assert_eq!(t.len(), counts.len());
        let f = t.frequencies();
        prop_assert!(f.windows(2).all(|w| w[0] >= w[1]));
        prop_assert!((f.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let ranks: Vec<u64> = t.iter().map(|e| e.rank).collect();
        prop_assert_eq!(ranks, (1..=counts.len() as u64).collect::<Vec<_>>());
    }

    #[test]
    fn ranking_ignores_insertion_order(counts in count_map(), seed in any::<u64>()) {
        let mut entries: Vec<(String, u64)> = counts.clone().into_iter().collect();
        // Deterministic shuffle from the seed.
        let mut s = seed | 1;
        for i in (1..entries.len()).rev() {
            s ^= s << 13; s ^= s >> 7; s ^= s << 17;
            entries.swap(i, (s % (i as u64 + 1)) as usize);
        }
        let reordered: HashMap<String, u64> = entries.into_iter().collect();
        let a: Vec<_> = ranked_types(&counts).into_iter().map(|(k, c)| (k.clone(), c)).collect();
        let b: Vec<_> = ranked_types(&reordered).into_iter().map(|(k, c)| (k.clone(), c)).collect();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn head_mass_grows_with_top_n(counts in count_map()) {
        let total = counts.values().sum();
        let t = rank_frequency(&counts, total, Provenance::Empirical).unwrap();
        let mut last = 0.0;
        for n in 1..=t.len() as u64 {
            let m = head_mass(&t, n).unwrap().mass;
            prop_assert!(m >= last && m <= 1.0 + 1e-12);
            last = m;
        }
    }

    #[test]
    fn regression_recovers_exact_power_laws(
        a in prop::sample::select(vec![0.5, 1.0, 1.5, 2.0]),
        r_min in 1u64..200,
        decades in 2.0f64..3.0,
    ) {
        let r_max = (r_min as f64 * 10f64.powf(decades)).ceil() as u64;
        let t = RankFrequencyTable::from_frequencies(
            (1..=r_max).map(|r| (r as f64).powf(-a)).collect(),
            Provenance::Analytic,
        ).unwrap();
        let fit = fit_exponent_ols(&t, r_min, Some(r_max)).unwrap();
        prop_assert!((fit.alpha_hat - a).abs() < 1e-6, "{} vs {}", fit.alpha_hat, a);
    }

    #[test]
    fn fits_are_scale_invariant(base in prop::collection::vec(1u64..2000, 150..400), factor in 2u64..50) {
        let mut sorted = base;
        sorted.sort_unstable_by(|a, b| b.cmp(a));
        let scaled: Vec<u64> = sorted.iter().map(|c| c * factor).collect();
        let t1 = RankFrequencyTable::from_sorted_counts(sorted, Provenance::Empirical).unwrap();
        let t2 = RankFrequencyTable::from_sorted_counts(scaled, Provenance::Empirical).unwrap();
        let o1 = fit_exponent_ols(&t1, 1, None).unwrap();
        let o2 = fit_exponent_ols(&t2, 1, None).unwrap();
        prop_assert!((o1.alpha_hat - o2.alpha_hat).abs() < 1e-12);
        let m1 = fit_exponent_mle(&t1, 1, MleUpper::TableEnd).unwrap();
        let m2 = fit_exponent_mle(&t2, 1, MleUpper::TableEnd).unwrap();
        prop_assert!((m1.alpha_hat - m2.alpha_hat).abs() < 1e-9, "{} vs {}", m1.alpha_hat, m2.alpha_hat);
    }

    #[test]
    fn tokenization_is_deterministic_and_chunk_free(
        text in "[a-zA-Z .,'\u{e9}\u{3b1}\t\n]{0,400}",
        pieces in 1usize..20,
        letters in any::<bool>(),
    ) {
        let config = TokenizationConfig {
            token_pattern: if letters { TokenPattern::LetterBlocks } else { TokenPattern::WhitespaceBlocks },
            ..Default::default()
        };
        let a = ingest_reader(text.as_bytes(), &config).unwrap();
        let b = ingest_reader(text.as_bytes(), &config).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(&ingest_bytes_parallel(text.as_bytes(), &config, pieces), &a);
    }

    #[test]
    fn longer_minimum_never_adds_types(text in "[a-f ]{0,300}", min in 1usize..5) {
        let short = TokenizationConfig { min_token_length: min, ..Default::default() };
        let long = TokenizationConfig { min_token_length: min + 1, ..Default::default() };
        let a = ingest_reader(text.as_bytes(), &short).unwrap();
        let b = ingest_reader(text.as_bytes(), &long).unwrap();
        prop_assert!(b.distinct() <= a.distinct());
    }

    #[test]
    fn analytic_blocks_tile_the_ranks(
        m in 2u32..30,
        q in 0.05f64..0.9,
        gamma in 0.2f64..1.0,
        k_max in 2u32..25,
    ) {
        let params = ModelParams::new(m, q).unwrap();
        let profile = SurvivalProfile::gamma(1.0, gamma, 1, k_max).unwrap();
        let blocks = analytic_blocks(&params, &profile).unwrap();
        let mut next = BigUint::from(1u32);
        for b in &blocks.blocks {
            prop_assert_eq!(&b.first_rank, &next);
            next += &b.width;
            prop_assert_eq!(&b.last_rank, &(&next - 1u32));
        }
        prop_assert!(blocks.blocks.windows(2).all(|w| w[0].frequency >= w[1].frequency));
        prop_assert!((blocks.mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn generation_is_reproducible(seed in any::<u64>(), chunk in 1u64..300) {
        let params = ModelParams::new(5, 0.3).unwrap();
        let profile = SurvivalProfile::unfiltered(1, 6).unwrap();
        let config = GenerationConfig::tokens(params, profile, 500, seed).with_chunks(chunk);
        let (a, ra) = generate_filtered_tokens(&config).unwrap();
        let (b, rb) = generate_filtered_tokens(&config).unwrap();
        prop_assert_eq!(a, b);
        prop_assert_eq!(ra, rb);
    }
}
