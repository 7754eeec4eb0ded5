use serde::{Deserialize, Serialize};

use super::powersum::power_sums;
use super::{FitError, FitMethod, FitResult};
use crate::table::RankFrequencyTable;

pub const MAX_MLE_ITERATIONS: u32 = 200;
/// Fewest tail tokens accepted by [`fit_exponent_mle`].
pub const MIN_TAIL_TOKENS: u64 = 100;
const MAX_ALPHA: f64 = 50.0;

/// Upper end of the support assumed by the likelihood.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MleUpper {
    /// Normalize over `r_min..=n` with `n` the table length.
    TableEnd,
    /// Normalize over `r_min..` (Hurwitz zeta); needs `alpha > 1`.
    Unbounded,
    /// Normalize over `r_min..=r_max`; ranks beyond are ignored.
    Fixed(u64),
}

/// Discrete power-law maximum likelihood over the tail `r >= r_min`.
///
/// Each token is an observation of its type's rank. The score equation
/// `sum ln(r) r^-a / sum r^-a = mean observed ln r` is solved by bisection;
/// its left side is strictly decreasing in `a`. The standard error comes
/// from the observed information and `gof` is the Kolmogorov-Smirnov
/// distance between the fitted and observed rank distributions.
pub fn fit_exponent_mle(table: &RankFrequencyTable, r_min: u64, upper: MleUpper) -> Result<FitResult, FitError> {
    let counts = table.counts().ok_or(FitError::MissingCounts)?;
    let len = counts.len() as u64;
    let (data_end, support_end) = match upper {
        MleUpper::TableEnd => (len, Some(len)),
        MleUpper::Unbounded => (len, None),
        MleUpper::Fixed(r) => (r.min(len), Some(r)),
    };
    if r_min == 0 || r_min > data_end || support_end.is_some_and(|e| e < r_min) {
        return Err(FitError::InvalidWindow {
            r_min,
            r_max: support_end.unwrap_or(u64::MAX),
            len,
        });
    }
    let tail = &counts[(r_min - 1) as usize..data_end as usize];
    let tokens: u64 = tail.iter().sum();
    let distinct = tail.iter().filter(|&&c| c > 0).count();
    if tokens < MIN_TAIL_TOKENS || distinct < 2 {
        return Err(FitError::TailTooThin {
            r_min,
            tokens,
            ranks: data_end - r_min + 1,
        });
    }
    let mean_ln = (r_min..)
        .zip(tail)
        .map(|(r, &c)| c as f64 * (r as f64).ln())
        .sum::<f64>()
        / tokens as f64;

    let ratio = |a: f64| {
        let (s0, s1) = power_sums(a, r_min, support_end);
        s1 / s0
    };
    let score = |a: f64| ratio(a) - mean_ln;

    let mut lo = if support_end.is_some() { 0.0 } else { 1.0 + 1e-9 };
    let mut degenerate = false;
    let alpha = if score(lo) <= 1e-12 * mean_ln.abs().max(1.0) {
        // Observed ranks sit no lower than a flat law would put them.
        degenerate = true;
        lo
    } else {
        let mut hi = 2.0;
        while score(hi) > 0.0 {
            lo = hi;
            hi *= 2.0;
            if hi > MAX_ALPHA {
                return Err(FitError::NoConvergence { iterations: 0 });
            }
        }
        let mut iterations = 0;
        while hi - lo > 1e-10 {
            iterations += 1;
            if iterations > MAX_MLE_ITERATIONS {
                return Err(FitError::NoConvergence { iterations });
            }
            let mid = 0.5 * (lo + hi);
            if score(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };

    // Observed information per token is the variance of ln r under the fit,
    // which is minus the derivative of the ratio.
    let h = 1e-5;
    let lower_ok = support_end.is_some() || alpha - h > 1.0;
    let variance = if lower_ok {
        -(ratio(alpha + h) - ratio(alpha - h)) / (2.0 * h)
    } else {
        -(ratio(alpha + h) - ratio(alpha)) / h
    };
    let stderr = if variance > 0.0 {
        1.0 / (tokens as f64 * variance).sqrt()
    } else {
        f64::INFINITY
    };

    let gof = ks_distance(tail, r_min, tokens, alpha, support_end);
    Ok(FitResult {
        alpha_hat: alpha,
        method: FitMethod::Mle,
        r_min,
        r_max: support_end,
        stderr,
        gof,
        points: distinct as u64,
        degenerate,
        lengths: None,
    })
}

fn ks_distance(tail: &[u64], r_min: u64, tokens: u64, alpha: f64, support_end: Option<u64>) -> f64 {
    let (z, _) = power_sums(alpha, r_min, support_end);
    let mut model = 0.0;
    let mut seen = 0u64;
    let mut d: f64 = 0.0;
    for (r, &c) in (r_min..).zip(tail) {
        model += (r as f64).powf(-alpha) / z;
        seen += c;
        d = d.max((seen as f64 / tokens as f64 - model).abs());
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::table::Provenance;
    use rand::distr::weighted::WeightedIndex;
    use rand::distr::Distribution;
    use rand::SeedableRng;

    fn sampled(alpha: f64, n: usize, tokens: usize, seed: u64) -> RankFrequencyTable {
        let weights: Vec<f64> = (1..=n).map(|r| (r as f64).powf(-alpha)).collect();
        let dist = WeightedIndex::new(&weights).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut counts = vec![0u64; n];
        for _ in 0..tokens {
            counts[dist.sample(&mut rng)] += 1;
        }
        counts.sort_unstable_by(|a, b| b.cmp(a));
        RankFrequencyTable::from_sorted_counts(counts, Provenance::Simulated).unwrap()
    }

    #[test]
    fn recovers_sampled_exponent() {
        let t = sampled(1.2, 10_000, 1_000_000, 11);
        let fit = fit_exponent_mle(&t, 1, MleUpper::TableEnd).unwrap();
        assert!((fit.alpha_hat - 1.2).abs() < 0.01, "{}", fit.alpha_hat);
        assert!(fit.stderr > 0.0 && fit.stderr < 0.01);
        assert!(fit.gof < 0.01);
    }

    #[test]
    fn exact_expected_counts_recover_alpha() {
        // Counts proportional to r^-a: the score equation is solved exactly
        // up to rounding of the counts.
        for alpha in [0.8, 1.0, 1.5, 2.0] {
            let n = 2000u64;
            let counts: Vec<u64> = (1..=n)
                .map(|r| (1e12 * (r as f64).powf(-alpha)).round() as u64)
                .collect();
            let t = RankFrequencyTable::from_sorted_counts(counts, Provenance::Analytic).unwrap();
            let fit = fit_exponent_mle(&t, 1, MleUpper::TableEnd).unwrap();
            assert!((fit.alpha_hat - alpha).abs() < 1e-6, "{alpha}: {}", fit.alpha_hat);
        }
    }

    #[test]
    fn unbounded_support_needs_alpha_above_one() {
        let counts: Vec<u64> = (1..=5000u64)
            .map(|r| (1e12 * (r as f64).powf(-2.0)).round() as u64)
            .collect();
        let t = RankFrequencyTable::from_sorted_counts(counts, Provenance::Analytic).unwrap();
        let fit = fit_exponent_mle(&t, 1, MleUpper::Unbounded).unwrap();
        // The table stops at 5000, so the unbounded law sees a slightly
        // steeper tail than the one that made the counts.
        assert!(fit.alpha_hat > 2.0 && fit.alpha_hat < 2.005, "{}", fit.alpha_hat);
        assert_eq!(fit.r_max, None);
        assert!(fit.alpha_hat > 1.0);
    }

    #[test]
    fn rejects_bad_input() {
        let f = RankFrequencyTable::from_frequencies(vec![0.5, 0.5], Provenance::Analytic).unwrap();
        assert_eq!(
            fit_exponent_mle(&f, 1, MleUpper::TableEnd),
            Err(FitError::MissingCounts)
        );
        let thin = RankFrequencyTable::from_sorted_counts(vec![50, 20, 10], Provenance::Empirical).unwrap();
        assert!(matches!(
            fit_exponent_mle(&thin, 1, MleUpper::TableEnd),
            Err(FitError::TailTooThin { .. })
        ));
        assert!(matches!(
            fit_exponent_mle(&thin, 4, MleUpper::TableEnd),
            Err(FitError::InvalidWindow { .. })
        ));
        assert!(matches!(
            fit_exponent_mle(&thin, 0, MleUpper::TableEnd),
            Err(FitError::InvalidWindow { .. })
        ));
    }

    #[test]
    fn flat_counts_are_degenerate() {
        let t = RankFrequencyTable::from_sorted_counts(vec![100; 50], Provenance::Empirical).unwrap();
        let fit = fit_exponent_mle(&t, 1, MleUpper::TableEnd).unwrap();
        assert!(fit.degenerate);
        assert_eq!(fit.alpha_hat, 0.0);
    }
}
