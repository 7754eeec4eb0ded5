//! Rank-frequency tables, expanded and block-compressed.

use num_bigint::BigUint;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default cap on the number of entries an expanded table may hold.
pub const DEFAULT_EXPANSION_CAP: u64 = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Analytic,
    Simulated,
    Empirical,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TableError {
    #[error("table is empty")]
    Empty,
    #[error("frequencies increase at rank {rank}")]
    NotMonotone { rank: u64 },
    #[error("invalid frequency {value} at rank {rank}")]
    BadFrequency { rank: u64, value: f64 },
    #[error("table would hold {entries} entries, above the cap of {cap}; use the block-compressed form")]
    CapExceeded { entries: String, cap: u64 },
    #[error("rank {rank} is outside the table (1..={len})")]
    RankOutOfRange { rank: u64, len: u64 },
}

/// One row of a rank-frequency table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankEntry {
    pub rank: u64,
    pub count: Option<u64>,
    pub frequency: f64,
}

/// Ranks `1..=n` with non-increasing frequencies. Rank is implied by the
/// position: entry `i` holds rank `i + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct RankFrequencyTable {
    frequencies: Vec<f64>,
    counts: Option<Vec<u64>>,
    total_count: Option<u64>,
    total_mass: f64,
    provenance: Provenance,
}

impl RankFrequencyTable {
    /// Builds a table from counts already sorted in non-increasing order.
    pub fn from_sorted_counts(counts: Vec<u64>, provenance: Provenance) -> Result<Self, TableError> {
        if counts.is_empty() {
            return Err(TableError::Empty);
        }
        if let Some(i) = counts.windows(2).position(|w| w[1] > w[0]) {
            return Err(TableError::NotMonotone { rank: i as u64 + 2 });
        }
        let total: u64 = counts.iter().sum();
        if total == 0 {
            return Err(TableError::Empty);
        }
        let frequencies: Vec<f64> = counts.iter().map(|&c| c as f64 / total as f64).collect();
        let total_mass = frequencies.iter().sum();
        Ok(Self {
            frequencies,
            counts: Some(counts),
            total_count: Some(total),
            total_mass,
            provenance,
        })
    }

    /// Builds a table from non-increasing probabilities.
    pub fn from_frequencies(frequencies: Vec<f64>, provenance: Provenance) -> Result<Self, TableError> {
        if frequencies.is_empty() {
            return Err(TableError::Empty);
        }
        for (i, &f) in frequencies.iter().enumerate() {
            if !(f.is_finite() && f > 0.0) {
                return Err(TableError::BadFrequency {
                    rank: i as u64 + 1,
                    value: f,
                });
            }
        }
        if let Some(i) = frequencies.windows(2).position(|w| w[1] > w[0]) {
            return Err(TableError::NotMonotone { rank: i as u64 + 2 });
        }
        let total_mass = frequencies.iter().sum();
        Ok(Self {
            frequencies,
            counts: None,
            total_count: None,
            total_mass,
            provenance,
        })
    }

    pub fn len(&self) -> usize {
        self.frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    pub fn total_count(&self) -> Option<u64> {
        self.total_count
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    pub fn counts(&self) -> Option<&[u64]> {
        self.counts.as_deref()
    }

    pub fn frequency(&self, rank: u64) -> Result<f64, TableError> {
        self.check_rank(rank)?;
        Ok(self.frequencies[rank as usize - 1])
    }

    pub fn count(&self, rank: u64) -> Result<Option<u64>, TableError> {
        self.check_rank(rank)?;
        Ok(self.counts.as_ref().map(|c| c[rank as usize - 1]))
    }

    fn check_rank(&self, rank: u64) -> Result<(), TableError> {
        if rank == 0 || rank > self.len() as u64 {
            Err(TableError::RankOutOfRange {
                rank,
                len: self.len() as u64,
            })
        } else {
            Ok(())
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = RankEntry> + '_ {
        self.frequencies
            .iter()
            .enumerate()
            .map(move |(i, &frequency)| RankEntry {
                rank: i as u64 + 1,
                count: self.counts.as_ref().map(|c| c[i]),
                frequency,
            })
    }

    /// Highest rank whose count is at least `min_count`; the table length
    /// when counts are unknown.
    pub fn last_rank_with_count(&self, min_count: u64) -> u64 {
        match &self.counts {
            Some(c) => c.iter().rposition(|&x| x >= min_count).map_or(0, |i| i as u64 + 1),
            None => self.len() as u64,
        }
    }

    /// Multiplies every count by `factor`; frequencies are recomputed.
    pub fn scaled_counts(&self, factor: u64) -> Option<Self> {
        let counts = self.counts.as_ref()?.iter().map(|&c| c * factor).collect();
        Self::from_sorted_counts(counts, self.provenance).ok()
    }
}

/// A run of consecutive ranks sharing one frequency: all surviving types of
/// a single length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankBlock {
    /// Word length of the class.
    pub k: u32,
    /// Number of types in the block (the floored `T_k`).
    #[serde(with = "biguint_string")]
    pub width: BigUint,
    /// Real-valued `T_k` before flooring.
    pub width_real: f64,
    /// Per-type frequency inside the block.
    pub frequency: f64,
    #[serde(with = "biguint_string")]
    pub first_rank: BigUint,
    #[serde(with = "biguint_string")]
    pub last_rank: BigUint,
    /// Observed tokens of this length, for simulated blocks.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tokens: Option<u64>,
}

impl RankBlock {
    /// Arithmetic midpoint of the block's rank range.
    pub fn rank_midpoint(&self) -> f64 {
        let lo = big_to_f64(&self.first_rank);
        let hi = big_to_f64(&self.last_rank);
        0.5 * (lo + hi)
    }

    /// Total probability mass held by the block.
    pub fn mass(&self) -> f64 {
        big_to_f64(&self.width) * self.frequency
    }
}

/// Piecewise-constant rank-frequency curve stored as blocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockTable {
    pub blocks: Vec<RankBlock>,
    pub provenance: Provenance,
    /// Normalization constant `Z` dividing the raw length law.
    pub normalization: f64,
    /// Mass of lengths above `k_max` under the raw length law.
    pub truncated_tail_mass: f64,
    /// Raw length-law mass outside the table (tail, short and empty classes).
    pub excluded_mass: f64,
}

/// A block to be placed: `(k, width, width_real, frequency, tokens)`.
pub(crate) struct PendingBlock {
    pub k: u32,
    pub width: BigUint,
    pub width_real: f64,
    pub frequency: f64,
    pub tokens: Option<u64>,
}

impl BlockTable {
    /// Orders blocks by decreasing frequency, shorter length first on ties,
    /// and assigns rank ranges.
    pub(crate) fn assemble(
        mut pending: Vec<PendingBlock>,
        provenance: Provenance,
        normalization: f64,
        truncated_tail_mass: f64,
        excluded_mass: f64,
    ) -> Self {
        pending.retain(|b| !b.width.is_zero());
        pending.sort_by(|a, b| b.frequency.total_cmp(&a.frequency).then(a.k.cmp(&b.k)));
        let mut next = BigUint::from(1u32);
        let blocks = pending
            .into_iter()
            .map(|b| {
                let first_rank = next.clone();
                next += &b.width;
                let last_rank = &next - 1u32;
                RankBlock {
                    k: b.k,
                    width: b.width,
                    width_real: b.width_real,
                    frequency: b.frequency,
                    first_rank,
                    last_rank,
                    tokens: b.tokens,
                }
            })
            .collect();
        Self {
            blocks,
            provenance,
            normalization,
            truncated_tail_mass,
            excluded_mass,
        }
    }

    pub fn total_types(&self) -> BigUint {
        self.blocks.iter().map(|b| &b.width).sum()
    }

    pub fn mass(&self) -> f64 {
        self.blocks.iter().map(RankBlock::mass).sum()
    }

    /// Expands into one entry per rank, refusing tables above `cap` entries.
    pub fn expand(&self, cap: u64) -> Result<RankFrequencyTable, TableError> {
        let total = self.total_types();
        let n = match total.to_u64() {
            Some(n) if n <= cap => n,
            _ => {
                return Err(TableError::CapExceeded {
                    entries: total.to_string(),
                    cap,
                })
            }
        };
        let mut frequencies = Vec::with_capacity(n as usize);
        for b in &self.blocks {
            let w = b.width.to_u64().expect("bounded by total");
            frequencies.extend(std::iter::repeat_n(b.frequency, w as usize));
        }
        RankFrequencyTable::from_frequencies(frequencies, self.provenance)
    }

    /// The first `n` ranks (fewer if the table is shorter) as a table.
    pub fn expand_prefix(&self, n: u64) -> Result<RankFrequencyTable, TableError> {
        let mut frequencies = Vec::with_capacity(n.min(DEFAULT_EXPANSION_CAP) as usize);
        let mut left = n;
        for b in &self.blocks {
            if left == 0 {
                break;
            }
            let take = b.width.to_u64().map_or(left, |w| w.min(left));
            frequencies.extend(std::iter::repeat_n(b.frequency, take as usize));
            left -= take;
        }
        RankFrequencyTable::from_frequencies(frequencies, self.provenance)
    }

    /// Sum of the top `top_n` frequencies without expanding the table.
    pub fn head_mass(&self, top_n: u64) -> f64 {
        let mut left = top_n as f64;
        let mut mass = 0.0;
        for b in &self.blocks {
            if left <= 0.0 {
                break;
            }
            let take = big_to_f64(&b.width).min(left);
            mass += take * b.frequency;
            left -= take;
        }
        mass
    }

    /// Mean frequency of the ranks in `[lo, hi]` (inclusive, `lo >= 1`);
    /// `None` when the interval misses the table.
    pub fn mean_frequency(&self, lo: f64, hi: f64) -> Option<f64> {
        let mut ranks = 0.0;
        let mut mass = 0.0;
        for b in &self.blocks {
            let a = big_to_f64(&b.first_rank).max(lo);
            let z = big_to_f64(&b.last_rank).min(hi);
            if z >= a {
                let w = z - a + 1.0;
                ranks += w;
                mass += w * b.frequency;
            }
        }
        (ranks > 0.0).then(|| mass / ranks)
    }
}

pub(crate) fn big_to_f64(x: &BigUint) -> f64 {
    x.to_f64().unwrap_or(f64::INFINITY)
}

mod biguint_string {
    use num_bigint::BigUint;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &BigUint, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&x.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigUint, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pending(k: u32, width: u64, frequency: f64) -> PendingBlock {
        PendingBlock {
            k,
            width: BigUint::from(width),
            width_real: width as f64,
            frequency,
            tokens: None,
        }
    }

    #[test]
    fn counts_must_be_sorted() {
        assert_eq!(
            RankFrequencyTable::from_sorted_counts(vec![3, 1, 2], Provenance::Empirical),
            Err(TableError::NotMonotone { rank: 3 })
        );
        assert_eq!(
            RankFrequencyTable::from_sorted_counts(vec![], Provenance::Empirical),
            Err(TableError::Empty)
        );
    }

    #[test]
    fn blocks_are_ordered_by_frequency_then_length() {
        let t = BlockTable::assemble(
            vec![
                pending(4, 2, 0.1),
                pending(2, 3, 0.2),
                pending(3, 1, 0.1),
                pending(5, 0, 0.9),
            ],
            Provenance::Analytic,
            1.0,
            0.0,
            0.0,
        );
        let order: Vec<u32> = t.blocks.iter().map(|b| b.k).collect();
        assert_eq!(order, vec![2, 3, 4]);
        assert_eq!(t.blocks[2].first_rank, BigUint::from(5u32));
        assert_eq!(t.blocks[2].last_rank, BigUint::from(6u32));
        assert_eq!(t.total_types(), BigUint::from(6u32));
    }

    #[test]
    fn expansion_respects_cap() {
        let t = BlockTable::assemble(vec![pending(1, 5, 0.2)], Provenance::Analytic, 1.0, 0.0, 0.0);
        assert_eq!(t.expand(10).unwrap().frequencies(), &[0.2; 5]);
        assert!(matches!(t.expand(4), Err(TableError::CapExceeded { .. })));
    }

    #[test]
    fn head_mass_and_mean_frequency_cross_blocks() {
        let t = BlockTable::assemble(
            vec![pending(1, 2, 0.3), pending(2, 4, 0.1)],
            Provenance::Analytic,
            1.0,
            0.0,
            0.0,
        );
        assert!((t.head_mass(3) - 0.7).abs() < 1e-15);
        assert!((t.head_mass(100) - 1.0).abs() < 1e-15);
        assert!((t.mean_frequency(2.0, 3.0).unwrap() - 0.2).abs() < 1e-15);
        assert!(t.mean_frequency(7.0, 9.0).is_none());
    }
}
