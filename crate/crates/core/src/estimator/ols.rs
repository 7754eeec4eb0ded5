use super::{FitError, FitMethod, FitResult};
use crate::table::{big_to_f64, BlockTable, RankFrequencyTable};

/// Fewest ranks accepted by [`fit_exponent_ols`].
pub const MIN_WINDOW_POINTS: usize = 10;
/// Fewest blocks accepted by [`fit_exponent_blocks`].
pub const MIN_BLOCK_POINTS: usize = 3;

struct Line {
    slope: f64,
    stderr: f64,
    r2: f64,
    flat: bool,
}

fn regress(xs: &[f64], ys: &[f64]) -> Line {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    // Relative to the magnitude of y, a flat window has no variance at all.
    let flat = syy <= 1e-24 * (my * my).max(1.0) * n;
    if flat {
        return Line {
            slope: 0.0,
            stderr: 0.0,
            r2: 1.0,
            flat,
        };
    }
    let slope = sxy / sxx;
    let ssr = (syy - slope * sxy).max(0.0);
    let stderr = if xs.len() > 2 {
        (ssr / (n - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Line {
        slope,
        stderr,
        r2: 1.0 - ssr / syy,
        flat,
    }
}

#[cfg(test)]
pub(super) fn slope_only(xs: &[f64], ys: &[f64]) -> f64 {
    regress(xs, ys).slope
}

/// Least-squares fit of `ln p(r) = c - alpha ln r` over ranks
/// `r_min..=r_max` (both 1-based, inclusive). Zero-frequency ranks are
/// skipped. `r_max = None` means the last rank.
pub fn fit_exponent_ols(table: &RankFrequencyTable, r_min: u64, r_max: Option<u64>) -> Result<FitResult, FitError> {
    let len = table.len() as u64;
    let r_max = r_max.unwrap_or(len);
    if r_min == 0 || r_max < r_min || r_max > len {
        return Err(FitError::InvalidWindow { r_min, r_max, len });
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = (r_min..=r_max)
        .zip(&table.frequencies()[(r_min - 1) as usize..r_max as usize])
        .filter(|(_, &f)| f > 0.0)
        .map(|(r, &f)| ((r as f64).ln(), f.ln()))
        .unzip();
    if xs.len() < MIN_WINDOW_POINTS {
        return Err(FitError::WindowTooSmall {
            points: xs.len(),
            needed: MIN_WINDOW_POINTS,
        });
    }
    let line = regress(&xs, &ys);
    Ok(FitResult {
        alpha_hat: -line.slope,
        method: FitMethod::Ols,
        r_min,
        r_max: Some(r_max),
        stderr: line.stderr,
        gof: line.r2,
        points: xs.len() as u64,
        degenerate: line.flat,
        lengths: None,
    })
}

/// Which blocks enter [`fit_exponent_blocks`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockWindow {
    /// Blocks whose rank midpoint is below this are skipped.
    pub r_min: f64,
    /// Blocks whose rank midpoint is above this are skipped.
    pub r_max: f64,
    /// Simulated blocks with fewer observed tokens are skipped.
    pub min_tokens: u64,
    /// Only blocks of word length in this range are used.
    pub lengths: (u32, u32),
}

impl Default for BlockWindow {
    fn default() -> Self {
        Self {
            r_min: super::DEFAULT_R_MIN as f64,
            r_max: f64::INFINITY,
            min_tokens: super::DEFAULT_MIN_TAIL_COUNT,
            lengths: (0, u32::MAX),
        }
    }
}

/// Least-squares fit over blocks, one point per block at
/// `(ln midpoint rank, ln frequency)`. On a staircase this recovers the
/// slope of the step corners, which per-rank regression does not.
pub fn fit_exponent_blocks(blocks: &BlockTable, window: BlockWindow) -> Result<FitResult, FitError> {
    if window.r_min < 1.0 || window.r_max < window.r_min {
        return Err(FitError::InvalidWindow {
            r_min: window.r_min as u64,
            r_max: window.r_max.min(u64::MAX as f64) as u64,
            len: big_to_f64(&blocks.total_types()).min(u64::MAX as f64) as u64,
        });
    }
    let used: Vec<_> = blocks
        .blocks
        .iter()
        .filter(|b| {
            let mid = b.rank_midpoint();
            mid >= window.r_min
                && mid <= window.r_max
                && (window.lengths.0..=window.lengths.1).contains(&b.k)
                && b.frequency > 0.0
                && b.tokens.is_none_or(|t| t >= window.min_tokens)
        })
        .collect();
    if used.len() < MIN_BLOCK_POINTS {
        return Err(FitError::WindowTooSmall {
            points: used.len(),
            needed: MIN_BLOCK_POINTS,
        });
    }
    let xs: Vec<f64> = used.iter().map(|b| b.rank_midpoint().ln()).collect();
    let ys: Vec<f64> = used.iter().map(|b| b.frequency.ln()).collect();
    let line = regress(&xs, &ys);
    let lo = used.iter().map(|b| b.k).min().expect("non-empty");
    let hi = used.iter().map(|b| b.k).max().expect("non-empty");
    let first = used
        .iter()
        .map(|b| big_to_f64(&b.first_rank))
        .fold(f64::INFINITY, f64::min);
    let last = used.iter().map(|b| big_to_f64(&b.last_rank)).fold(0.0, f64::max);
    Ok(FitResult {
        alpha_hat: -line.slope,
        method: FitMethod::OlsBlocks,
        r_min: first.min(u64::MAX as f64) as u64,
        // Ranks past u64 are reported as open-ended.
        r_max: (last < u64::MAX as f64).then_some(last as u64),
        stderr: line.stderr,
        gof: line.r2,
        points: used.len() as u64,
        degenerate: line.flat,
        lengths: Some((lo, hi)),
    })
}
