//! Rank-frequency tables from token streams and Zipf exponent estimation.
//!
//! Two estimators are provided and every result records which one produced
//! it and over which rank window:
//!
//! - least squares on `ln p(r)` against `ln r`, either one point per rank
//!   ([`fit_exponent_ols`]) or one point per length block
//!   ([`fit_exponent_blocks`]) when the block structure is known;
//! - discrete power-law maximum likelihood on the tail ([`fit_exponent_mle`]).

mod mle;
mod ols;
pub mod powersum;

use std::collections::{BTreeMap, HashMap};
use std::hash::Hash;

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analytic::LengthClass;
use crate::table::{big_to_f64, BlockTable, PendingBlock, Provenance, RankFrequencyTable, TableError};

pub use mle::{fit_exponent_mle, MleUpper, MAX_MLE_ITERATIONS};
pub use ols::{fit_exponent_blocks, fit_exponent_ols, BlockWindow, MIN_BLOCK_POINTS, MIN_WINDOW_POINTS};

/// Default lower rank of fit windows.
pub const DEFAULT_R_MIN: u64 = 50;
/// Default fit windows end at the last rank with at least this many tokens.
pub const DEFAULT_MIN_TAIL_COUNT: u64 = 5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FitError {
    #[error("no tokens to rank")]
    EmptyInput,
    #[error("stated total {stated} differs from the sum of counts {actual}")]
    TotalMismatch { stated: u64, actual: u64 },
    #[error("invalid fit window [{r_min}, {r_max}] for a table of {len} ranks")]
    InvalidWindow { r_min: u64, r_max: u64, len: u64 },
    #[error("fit window holds {points} points, at least {needed} are needed")]
    WindowTooSmall { points: usize, needed: usize },
    #[error("tail beyond rank {r_min} is too thin to fit ({tokens} tokens over {ranks} ranks)")]
    TailTooThin { r_min: u64, tokens: u64, ranks: u64 },
    #[error("root finding did not converge after {iterations} iterations")]
    NoConvergence { iterations: u32 },
    #[error("maximum likelihood needs token counts")]
    MissingCounts,
    #[error("top {top_n} requested from a table of {len} ranks")]
    TopNTooLarge { top_n: u64, len: u64 },
    #[error(transparent)]
    Table(#[from] TableError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitMethod {
    /// Least squares, one point per rank.
    Ols,
    /// Least squares, one point per length block at its rank midpoint.
    OlsBlocks,
    /// Discrete power-law maximum likelihood.
    Mle,
}

/// A fitted Zipf exponent with the window and method that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub alpha_hat: f64,
    pub method: FitMethod,
    pub r_min: u64,
    /// `None` for an unbounded tail.
    pub r_max: Option<u64>,
    pub stderr: f64,
    /// R² for least squares, Kolmogorov-Smirnov distance for likelihood.
    pub gof: f64,
    /// Points (ranks or blocks) entering the fit.
    pub points: u64,
    /// Set when every frequency in the window is equal; the slope is then 0.
    #[serde(default)]
    pub degenerate: bool,
    /// Length range of the blocks used, for block fits.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lengths: Option<(u32, u32)>,
}

/// Share of all tokens held by the `top_n` most frequent types.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeadReport {
    pub top_n: u64,
    pub mass: f64,
}

pub type FrequencyMap<K> = HashMap<K, u64>;

/// Exact occurrence counts per distinct token.
pub fn count_tokens<K, I>(tokens: I) -> FrequencyMap<K>
where
    K: Hash + Eq,
    I: IntoIterator<Item = K>,
{
    let mut counts = FrequencyMap::new();
    for t in tokens {
        *counts.entry(t).or_insert(0) += 1;
    }
    counts
}

/// Adds `other` into `into`. Associative and order-independent.
pub fn merge_counts<K: Hash + Eq>(into: &mut FrequencyMap<K>, other: FrequencyMap<K>) {
    for (k, c) in other {
        *into.entry(k).or_insert(0) += c;
    }
}

/// Types sorted by decreasing count, ties in increasing key order.
pub fn ranked_types<K: Ord>(counts: &FrequencyMap<K>) -> Vec<(&K, u64)> {
    let mut ranked: Vec<(&K, u64)> = counts.iter().filter(|(_, &c)| c > 0).map(|(k, &c)| (k, c)).collect();
    ranked.sort_unstable_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    ranked
}

/// Rank-frequency table of observed counts; `total` must equal their sum.
pub fn rank_frequency<K: Ord>(
    counts: &FrequencyMap<K>,
    total: u64,
    provenance: Provenance,
) -> Result<RankFrequencyTable, FitError> {
    let actual: u64 = counts.values().sum();
    if actual == 0 {
        return Err(FitError::EmptyInput);
    }
    if actual != total {
        return Err(FitError::TotalMismatch { stated: total, actual });
    }
    let sorted = ranked_types(counts).into_iter().map(|(_, c)| c).collect();
    Ok(RankFrequencyTable::from_sorted_counts(sorted, provenance)?)
}

pub fn head_mass(table: &RankFrequencyTable, top_n: u64) -> Result<HeadReport, FitError> {
    if top_n == 0 || top_n > table.len() as u64 {
        return Err(FitError::TopNTooLarge {
            top_n,
            len: table.len() as u64,
        });
    }
    let mass = table.frequencies()[..top_n as usize].iter().sum();
    Ok(HeadReport { top_n, mass })
}

/// Integer rank bounds of logarithmic bin `i`: ranks `r` with
/// `10^(i/b) <= r < 10^((i+1)/b)`.
fn bin_bounds(i: u32, bins_per_decade: u32) -> (u64, u64) {
    let edge = |j: u32| {
        let e = 10f64.powf(j as f64 / bins_per_decade as f64);
        (e - 1e-9 * e).ceil() as u64
    };
    (edge(i), edge(i + 1).saturating_sub(1))
}

/// Log-binned curve for log-log plots: per bin, the geometric mean of the
/// ranks it covers and the arithmetic mean of their frequencies. Empty bins
/// are omitted.
pub fn log_binned_curve(table: &RankFrequencyTable, bins_per_decade: u32) -> Vec<(f64, f64)> {
    let b = bins_per_decade.max(1);
    let n = table.len() as u64;
    let freqs = table.frequencies();
    let mut out = Vec::new();
    for i in 0.. {
        let (lo, hi) = bin_bounds(i, b);
        if lo > n {
            break;
        }
        let hi = hi.min(n);
        if hi < lo {
            continue;
        }
        let width = (hi - lo + 1) as f64;
        let mean_f = freqs[(lo - 1) as usize..hi as usize].iter().sum::<f64>() / width;
        let mid = (powersum::sum_ln(lo, hi) / width).exp();
        out.push((mid, mean_f));
    }
    out
}

/// [`log_binned_curve`] for a block-compressed table, without expansion,
/// optionally stopping at rank `upto`. Rank bounds are carried as floats so
/// tables beyond `u64` ranks work.
pub fn log_binned_blocks(blocks: &BlockTable, bins_per_decade: u32, upto: Option<f64>) -> Vec<(f64, f64)> {
    let b = bins_per_decade.max(1) as f64;
    let n = big_to_f64(&blocks.total_types()).min(upto.unwrap_or(f64::INFINITY));
    let edge = |j: u32| {
        let e = 10f64.powf(j as f64 / b);
        (e - 1e-9 * e).ceil()
    };
    let mut out = Vec::new();
    for i in 0.. {
        let lo = edge(i);
        if lo > n || !lo.is_finite() {
            break;
        }
        let hi = (edge(i + 1) - 1.0).min(n);
        if hi < lo {
            continue;
        }
        if let Some(mean_f) = blocks.mean_frequency(lo, hi) {
            out.push((powersum::mean_ln(lo, hi).exp(), mean_f));
        }
    }
    out
}

/// Empirical block table from per-length token counts: each class becomes a
/// block of width `T_k` whose per-type frequency is `tokens_k / (N T_k)`.
pub fn blocks_from_length_counts(
    classes: &[LengthClass],
    length_counts: &BTreeMap<u32, u64>,
    provenance: Provenance,
) -> Result<BlockTable, FitError> {
    let total: u64 = length_counts.values().sum();
    if total == 0 {
        return Err(FitError::EmptyInput);
    }
    let pending = classes
        .iter()
        .filter(|c| c.types > BigUint::ZERO)
        .map(|c| {
            let tokens = length_counts.get(&c.k).copied().unwrap_or(0);
            PendingBlock {
                k: c.k,
                width: c.types.clone(),
                width_real: c.types_real,
                frequency: tokens as f64 / (total as f64 * big_to_f64(&c.types)),
                tokens: Some(tokens),
            }
        })
        .collect();
    Ok(BlockTable::assemble(pending, provenance, 1.0, 0.0, 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counting() {
        let c = count_tokens(["a", "b", "a"]);
        assert_eq!(c.len(), 2);
        assert_eq!(c["a"], 2);
        assert_eq!(c["b"], 1);
        assert!(count_tokens(Vec::<String>::new()).is_empty());
    }

    #[test]
    fn merging_is_order_independent() {
        let a = count_tokens(["x", "y", "x"]);
        let b = count_tokens(["y", "z"]);
        let mut ab = a.clone();
        merge_counts(&mut ab, b.clone());
        let mut ba = b;
        merge_counts(&mut ba, a);
        assert_eq!(ab, ba);
        assert_eq!(ab["y"], 2);
    }

    #[test]
    fn ranking_and_ties() {
        let c = count_tokens(["a", "b", "a"]);
        let t = rank_frequency(&c, 3, Provenance::Empirical).unwrap();
        assert_eq!(t.frequencies(), &[2.0 / 3.0, 1.0 / 3.0]);
        let eq = count_tokens(["d", "c", "b", "a"]);
        let keys: Vec<&&str> = ranked_types(&eq).into_iter().map(|(k, _)| k).collect();
        assert_eq!(keys, vec![&"a", &"b", &"c", &"d"]);
        assert_eq!(
            rank_frequency(&FrequencyMap::<String>::new(), 0, Provenance::Empirical),
            Err(FitError::EmptyInput)
        );
        assert!(matches!(
            rank_frequency(&c, 4, Provenance::Empirical),
            Err(FitError::TotalMismatch { .. })
        ));
    }

    #[test]
    fn head_mass_values() {
        let uniform = RankFrequencyTable::from_frequencies(vec![0.1; 10], Provenance::Analytic).unwrap();
        assert!((head_mass(&uniform, 10).unwrap().mass - 1.0).abs() < 1e-12);
        assert!(head_mass(&uniform, 11).is_err());

        let n = 10_000;
        let h: f64 = (1..=n).map(|r| 1.0 / r as f64).sum();
        let zipf =
            RankFrequencyTable::from_frequencies((1..=n).map(|r| 1.0 / r as f64 / h).collect(), Provenance::Analytic)
                .unwrap();
        let h10: f64 = (1..=10).map(|r| 1.0 / r as f64).sum();
        let m = head_mass(&zipf, 10).unwrap().mass;
        assert!((m - h10 / h).abs() < 1e-12);
        assert!((m - 0.29925).abs() < 1e-4);
    }

    #[test]
    fn binned_curve_of_exact_power_law_is_straight() {
        let n = 10_000;
        let t = RankFrequencyTable::from_frequencies((1..=n).map(|r| 1.0 / r as f64).collect(), Provenance::Analytic)
            .unwrap();
        let pts = log_binned_curve(&t, 5);
        assert_eq!(pts.len(), 21);
        let (xs, ys): (Vec<f64>, Vec<f64>) = pts.iter().map(|(x, y)| (x.ln(), y.ln())).unzip();
        let slope = ols::slope_only(&xs, &ys);
        assert!((slope + 1.0).abs() < 1e-3, "{slope}");

        let single = RankFrequencyTable::from_frequencies(vec![1.0], Provenance::Analytic).unwrap();
        assert_eq!(log_binned_curve(&single, 5), vec![(1.0, 1.0)]);
    }

    #[test]
    fn bins_cover_each_rank_once() {
        let mut next = 1;
        for i in 0..40 {
            let (lo, hi) = bin_bounds(i, 7);
            if hi >= lo {
                assert_eq!(lo, next);
                next = hi + 1;
            }
        }
    }
}
