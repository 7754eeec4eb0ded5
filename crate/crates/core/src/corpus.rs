//! Plain-text corpora: tokenization, counting and comparison with the model.
//!
//! Tokenization rule, applied to decoded text:
//!
//! - `WhitespaceBlocks`: tokens are maximal runs of characters that are not
//!   `char::is_whitespace`. With `strip_punctuation`, every character that
//!   is not `char::is_alphanumeric` is then removed from the token.
//! - `LetterBlocks`: tokens are maximal runs of `char::is_alphabetic`.
//!
//! Tokens are then lowercased with `str::to_lowercase` when `lowercase` is
//! set, and kept only if they have at least `min_token_length` characters.
//! Empty tokens are never counted. Invalid UTF-8 is replaced by U+FFFD
//! exactly as `String::from_utf8_lossy` does (one replacement per maximal
//! invalid subpart), and the replacements are counted.

use std::fs::File;
use std::io::{self, Read};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analytic::{self, AnalyticError};
use crate::estimator::{
    self, fit_exponent_blocks, fit_exponent_mle, fit_exponent_ols, BlockWindow, FitError, FitMethod, FitResult,
    FrequencyMap, HeadReport, MleUpper,
};
use crate::params::ModelParams;
use crate::profile::SurvivalProfile;
use crate::table::{BlockTable, Provenance, RankFrequencyTable};

/// Bytes read per step when streaming.
pub const READ_CHUNK: usize = 64 * 1024;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("reading {path}: {source}")]
    IoFailure {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("no tokens found in the corpus")]
    EmptyCorpus,
    #[error("letter blocks need a minimum token length of at least 1")]
    InvalidConfig,
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error(transparent)]
    Analytic(#[from] AnalyticError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TokenPattern {
    #[default]
    WhitespaceBlocks,
    LetterBlocks,
}

impl std::str::FromStr for TokenPattern {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "whitespace_blocks" | "whitespace" => Ok(Self::WhitespaceBlocks),
            "letter_blocks" | "letters" => Ok(Self::LetterBlocks),
            _ => Err(format!("unknown token pattern '{s}'")),
        }
    }
}

impl std::fmt::Display for TokenPattern {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::WhitespaceBlocks => "whitespace_blocks",
            Self::LetterBlocks => "letter_blocks",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenizationConfig {
    pub lowercase: bool,
    pub strip_punctuation: bool,
    pub token_pattern: TokenPattern,
    pub min_token_length: usize,
}

impl Default for TokenizationConfig {
    fn default() -> Self {
        Self {
            lowercase: true,
            strip_punctuation: true,
            token_pattern: TokenPattern::WhitespaceBlocks,
            min_token_length: 1,
        }
    }
}

impl TokenizationConfig {
    pub fn validate(&self) -> Result<(), CorpusError> {
        if self.token_pattern == TokenPattern::LetterBlocks && self.min_token_length == 0 {
            return Err(CorpusError::InvalidConfig);
        }
        Ok(())
    }

    fn finish(&self, raw: &str) -> Option<String> {
        let mut tok = if self.strip_punctuation && self.token_pattern == TokenPattern::WhitespaceBlocks {
            raw.chars().filter(|c| c.is_alphanumeric()).collect()
        } else {
            raw.to_owned()
        };
        if self.lowercase {
            tok = tok.to_lowercase();
        }
        let len = tok.chars().count();
        (len > 0 && len >= self.min_token_length).then_some(tok)
    }

    /// Tokens of `text` in order.
    pub fn tokenize<'a>(&'a self, text: &'a str) -> impl Iterator<Item = String> + 'a {
        let split: Box<dyn Iterator<Item = &str>> = match self.token_pattern {
            TokenPattern::WhitespaceBlocks => Box::new(text.split(char::is_whitespace)),
            TokenPattern::LetterBlocks => Box::new(text.split(|c: char| !c.is_alphabetic())),
        };
        split.filter(|s| !s.is_empty()).filter_map(|s| self.finish(s))
    }
}

/// Counts gathered from one or more sources.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Ingested {
    pub counts: FrequencyMap<String>,
    pub total: u64,
    pub bytes: u64,
    /// Invalid UTF-8 sequences replaced during decoding.
    pub replacements: u64,
}

impl Ingested {
    pub fn merge(&mut self, other: Ingested) {
        estimator::merge_counts(&mut self.counts, other.counts);
        self.total += other.total;
        self.bytes += other.bytes;
        self.replacements += other.replacements;
    }

    pub fn distinct(&self) -> usize {
        self.counts.len()
    }

    /// Mean token length in characters, weighted by occurrence.
    pub fn mean_token_length(&self) -> Option<f64> {
        if self.total == 0 {
            return None;
        }
        let chars: u64 = self.counts.iter().map(|(t, c)| t.chars().count() as u64 * c).sum();
        Some(chars as f64 / self.total as f64)
    }

    /// Blank probability whose geometric length law has this corpus's mean
    /// word length, `q = 1 / (1 + mean)`.
    pub fn calibrated_blank(&self) -> Option<f64> {
        self.mean_token_length().map(ModelParams::blank_for_mean_length)
    }

    pub fn table(&self) -> Result<RankFrequencyTable, CorpusError> {
        if self.total == 0 {
            return Err(CorpusError::EmptyCorpus);
        }
        Ok(estimator::rank_frequency(
            &self.counts,
            self.total,
            Provenance::Empirical,
        )?)
    }

    /// Decodes and counts one segment that ends on a token boundary.
    fn absorb(&mut self, bytes: &[u8], config: &TokenizationConfig) {
        self.bytes += bytes.len() as u64;
        let mut text = String::with_capacity(bytes.len());
        for chunk in bytes.utf8_chunks() {
            text.push_str(chunk.valid());
            if !chunk.invalid().is_empty() {
                text.push(char::REPLACEMENT_CHARACTER);
                self.replacements += 1;
            }
        }
        for tok in config.tokenize(&text) {
            *self.counts.entry(tok).or_insert(0) += 1;
            self.total += 1;
        }
    }
}

/// Position just past the last ASCII whitespace byte. Such bytes never occur
/// inside a multi-byte UTF-8 sequence and always end a token, so cutting
/// there splits neither characters nor tokens.
fn safe_cut(buf: &[u8]) -> Option<usize> {
    buf.iter().rposition(u8::is_ascii_whitespace).map(|i| i + 1)
}

/// Streams `source` in fixed-size reads, carrying the partial last token
/// into the next read. An empty result is not an error here.
pub fn ingest_reader<R: Read>(mut source: R, config: &TokenizationConfig) -> io::Result<Ingested> {
    let mut out = Ingested::default();
    let mut buf = Vec::with_capacity(2 * READ_CHUNK);
    let mut chunk = vec![0u8; READ_CHUNK];
    loop {
        let n = match source.read(&mut chunk) {
            Ok(0) => break,
            Ok(n) => n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => continue,
            Err(e) => return Err(e),
        };
        buf.extend_from_slice(&chunk[..n]);
        if let Some(cut) = safe_cut(&buf) {
            out.absorb(&buf[..cut], config);
            buf.drain(..cut);
        }
    }
    out.absorb(&buf, config);
    Ok(out)
}

/// Counts tokens of one byte stream; fails if it holds none.
pub fn ingest_text<R: Read>(source: R, config: &TokenizationConfig) -> Result<Ingested, CorpusError> {
    config.validate()?;
    let out = ingest_reader(source, config).map_err(|source| CorpusError::IoFailure {
        path: "<stream>".into(),
        source,
    })?;
    if out.total == 0 {
        return Err(CorpusError::EmptyCorpus);
    }
    Ok(out)
}

/// Counts an in-memory buffer by splitting it into about `pieces` segments
/// at safe cuts and counting them in parallel. Equal to sequential counting.
pub fn ingest_bytes_parallel(bytes: &[u8], config: &TokenizationConfig, pieces: usize) -> Ingested {
    let pieces = pieces.max(1);
    let step = bytes.len().div_ceil(pieces).max(1);
    let mut bounds = vec![0];
    let mut start = 0;
    while start < bytes.len() {
        let target = (start + step).min(bytes.len());
        let end = if target == bytes.len() {
            target
        } else {
            // Extend to the next safe cut at or after the target.
            bytes[target..]
                .iter()
                .position(u8::is_ascii_whitespace)
                .map_or(bytes.len(), |i| target + i + 1)
        };
        bounds.push(end);
        start = end;
    }
    bounds
        .par_windows(2)
        .map(|w| {
            let mut part = Ingested::default();
            part.absorb(&bytes[w[0]..w[1]], config);
            part
        })
        .reduce(Ingested::default, |mut a, b| {
            a.merge(b);
            a
        })
}

/// Streams each file and merges the counts; files are read in parallel.
pub fn ingest_files<P: AsRef<Path> + Sync>(paths: &[P], config: &TokenizationConfig) -> Result<Ingested, CorpusError> {
    config.validate()?;
    let parts: Vec<Ingested> = paths
        .par_iter()
        .map(|p| {
            let p = p.as_ref();
            let io_err = |source| CorpusError::IoFailure {
                path: p.display().to_string(),
                source,
            };
            let file = File::open(p).map_err(io_err)?;
            ingest_reader(io::BufReader::with_capacity(READ_CHUNK, file), config).map_err(io_err)
        })
        .collect::<Result<_, _>>()?;
    let mut out = Ingested::default();
    for part in parts {
        out.merge(part);
    }
    if out.total == 0 {
        return Err(CorpusError::EmptyCorpus);
    }
    Ok(out)
}

/// Paths in a stable order, so manifests do not depend on argument order.
pub fn sorted_paths<P: AsRef<Path>>(paths: &[P]) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = paths.iter().map(|p| p.as_ref().to_path_buf()).collect();
    v.sort();
    v
}

/// Settings for [`compare_model_to_corpus`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompareConfig {
    pub r_min: u64,
    /// Defaults to the last rank with at least `min_tail_count` tokens, or
    /// the table end for tables without counts.
    pub r_max: Option<u64>,
    pub min_tail_count: u64,
    pub bins_per_decade: u32,
    pub mle_upper: MleUpper,
}

impl Default for CompareConfig {
    fn default() -> Self {
        Self {
            r_min: estimator::DEFAULT_R_MIN,
            r_max: None,
            min_tail_count: estimator::DEFAULT_MIN_TAIL_COUNT,
            bins_per_decade: 5,
            mle_upper: MleUpper::TableEnd,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SideReport {
    pub ols: FitResult,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ols_blocks: Option<FitResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mle: Option<FitResult>,
    /// Why the likelihood fit is absent, when it is.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mle_skipped: Option<String>,
    pub head_10: HeadReport,
    pub head_20: HeadReport,
    pub binned: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub m: u32,
    pub q: f64,
    pub profile: String,
    /// `(1/g)(1 - ln(1-q)/ln m)` for growth rate `g` of the profile.
    pub theoretical_exponent: Option<f64>,
    /// Slope through the corners of the analytic staircase,
    /// `1 - ln(1-q)/(g ln m)`.
    pub block_slope_exponent: Option<f64>,
    pub empirical: SideReport,
    pub model: SideReport,
    /// Method of the fits compared in `exponent_gap`.
    pub gap_method: FitMethod,
    /// `|empirical - model|` for fits of the same method and window.
    pub exponent_gap: f64,
    /// Root sum of squares of the two standard errors entering the gap.
    pub combined_stderr: f64,
    /// `|empirical - theoretical_exponent|`.
    pub theory_gap: Option<f64>,
}

fn head(table: &RankFrequencyTable, n: u64) -> Result<HeadReport, FitError> {
    estimator::head_mass(table, n.min(table.len() as u64))
}

fn block_head(blocks: &BlockTable, n: u64) -> HeadReport {
    HeadReport {
        top_n: n,
        mass: blocks.head_mass(n),
    }
}

/// Fits the empirical table and the model over the same rank window and
/// reports both, with the theoretical exponents and overlay curves.
///
/// `empirical_blocks`, when the empirical table came from the generator,
/// holds its per-length blocks; the headline gap then compares block fits.
pub fn compare_model_to_corpus(
    empirical: &RankFrequencyTable,
    empirical_blocks: Option<&BlockTable>,
    params: &ModelParams,
    profile: &SurvivalProfile,
    config: &CompareConfig,
) -> Result<ComparisonReport, CorpusError> {
    if empirical.is_empty() {
        return Err(CorpusError::EmptyCorpus);
    }
    let n = empirical.len() as u64;
    let r_max = config.r_max.unwrap_or_else(|| {
        if empirical.counts().is_some() {
            empirical.last_rank_with_count(config.min_tail_count).max(1)
        } else {
            n
        }
    });
    // Block fits are limited by observed tokens per length, not by rank.
    let window = BlockWindow {
        r_min: config.r_min as f64,
        min_tokens: config.min_tail_count,
        ..BlockWindow::default()
    };

    let emp_ols = fit_exponent_ols(empirical, config.r_min, Some(r_max))?;
    let emp_blocks = empirical_blocks.map(|b| fit_exponent_blocks(b, window)).transpose()?;
    let (emp_mle, emp_mle_skipped) = match fit_exponent_mle(empirical, config.r_min, config.mle_upper) {
        Ok(f) => (Some(f), None),
        Err(e) => (None, Some(e.to_string())),
    };

    let blocks = analytic::analytic_blocks(params, profile)?;
    let model_prefix = blocks.expand_prefix(r_max).map_err(FitError::from)?;
    let model_ols = fit_exponent_ols(&model_prefix, config.r_min, Some(r_max))?;
    // Same lengths on both sides when the empirical side has blocks.
    let model_window = BlockWindow {
        lengths: emp_blocks.as_ref().and_then(|f| f.lengths).unwrap_or(window.lengths),
        ..window
    };
    let model_blocks = fit_exponent_blocks(&blocks, model_window).ok();

    let empirical_side = SideReport {
        ols: emp_ols,
        ols_blocks: emp_blocks,
        mle: emp_mle,
        mle_skipped: emp_mle_skipped,
        head_10: head(empirical, 10)?,
        head_20: head(empirical, 20)?,
        binned: estimator::log_binned_curve(empirical, config.bins_per_decade),
    };
    let model_side = SideReport {
        ols: model_ols,
        ols_blocks: model_blocks,
        mle: None,
        mle_skipped: Some("analytic tables carry no counts".into()),
        head_10: block_head(&blocks, 10.min(n)),
        head_20: block_head(&blocks, 20.min(n)),
        binned: estimator::log_binned_blocks(&blocks, config.bins_per_decade, Some(n as f64)),
    };

    let (gap_method, e, m) = match (&empirical_side.ols_blocks, &model_side.ols_blocks) {
        (Some(e), Some(m)) => (FitMethod::OlsBlocks, e, m),
        _ => (FitMethod::Ols, &empirical_side.ols, &model_side.ols),
    };
    let exponent_gap = (e.alpha_hat - m.alpha_hat).abs();
    let combined_stderr = e.stderr.hypot(m.stderr);
    let growth = profile.growth_rate();
    let theoretical_exponent = growth.map(|g| analytic::theoretical_exponent(params, g));
    let theory_gap = theoretical_exponent.map(|t| (e.alpha_hat - t).abs());

    Ok(ComparisonReport {
        m: params.m(),
        q: params.q(),
        profile: profile.kind().to_string(),
        theoretical_exponent,
        block_slope_exponent: growth.map(|g| analytic::block_slope_exponent(params, g)),
        empirical: empirical_side,
        model: model_side,
        gap_method,
        exponent_gap,
        combined_stderr,
        theory_gap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn count(text: &str, config: &TokenizationConfig) -> Ingested {
        ingest_text(text.as_bytes(), config).unwrap()
    }

    #[test]
    fn case_and_punctuation() {
        let got = count("The the THE.", &TokenizationConfig::default());
        assert_eq!(got.total, 3);
        assert_eq!(got.counts.len(), 1);
        assert_eq!(got.counts["the"], 3);
    }

    #[test]
    fn repeated_blanks_make_no_empty_tokens() {
        let got = count("a b  c", &TokenizationConfig::default());
        assert_eq!(got.total, 3);
        for t in ["a", "b", "c"] {
            assert_eq!(got.counts[t], 1);
        }
    }

    #[test]
    fn patterns_and_lengths() {
        let letters = TokenizationConfig {
            token_pattern: TokenPattern::LetterBlocks,
            ..Default::default()
        };
        let got = count("don't stop-me now2", &letters);
        let mut keys: Vec<_> = got.counts.keys().cloned().collect();
        keys.sort();
        assert_eq!(keys, ["don", "me", "now", "stop", "t"]);

        let keep = TokenizationConfig {
            strip_punctuation: false,
            lowercase: false,
            ..Default::default()
        };
        let got = count("Hi, hi", &keep);
        assert_eq!(got.counts["Hi,"], 1);
        assert_eq!(got.counts["hi"], 1);

        let long = TokenizationConfig {
            min_token_length: 3,
            ..Default::default()
        };
        assert_eq!(count("a bb ccc dddd", &long).total, 2);

        let bad = TokenizationConfig {
            token_pattern: TokenPattern::LetterBlocks,
            min_token_length: 0,
            ..Default::default()
        };
        assert!(matches!(ingest_text(&b"x"[..], &bad), Err(CorpusError::InvalidConfig)));
    }

    #[test]
    fn empty_and_punctuation_only_inputs() {
        let c = TokenizationConfig::default();
        assert!(matches!(ingest_text(&b""[..], &c), Err(CorpusError::EmptyCorpus)));
        assert!(matches!(
            ingest_text(&b" ... !! "[..], &c),
            Err(CorpusError::EmptyCorpus)
        ));
    }

    #[test]
    fn invalid_utf8_is_replaced_and_counted() {
        let c = TokenizationConfig::default();
        let raw = &b"ok \xff\xfebad caf\xc3\xa9 \xe2\x82"[..];
        let got = ingest_text(raw, &c).unwrap();
        // Two lone invalid bytes, then one truncated three-byte sequence.
        assert_eq!(got.replacements, 3);
        assert_eq!(String::from_utf8_lossy(raw).matches('\u{fffd}').count(), 3);
        assert_eq!(got.counts["bad"], 1);
        assert_eq!(got.counts["café"], 1);
    }

    /// Reader returning a few bytes at a time, to exercise carry-over.
    struct Dribble<'a>(&'a [u8], usize);

    impl Read for Dribble<'_> {
        fn read(&mut self, out: &mut [u8]) -> io::Result<usize> {
            let n = self.1.min(self.0.len()).min(out.len());
            out[..n].copy_from_slice(&self.0[..n]);
            self.0 = &self.0[n..];
            Ok(n)
        }
    }

    #[test]
    fn chunking_does_not_change_counts() {
        let text = "Zipf's law, über alles; naïve café\tnaïve\nCAFÉ  end ".repeat(50);
        let c = TokenizationConfig::default();
        let whole = count(&text, &c);
        for step in [1, 2, 3, 7, 64] {
            let got = ingest_reader(Dribble(text.as_bytes(), step), &c).unwrap();
            assert_eq!(got, whole, "step {step}");
        }
        for pieces in [1, 2, 5, 33, 1000] {
            assert_eq!(
                ingest_bytes_parallel(text.as_bytes(), &c, pieces),
                whole,
                "pieces {pieces}"
            );
        }
    }

    #[test]
    fn calibration() {
        let got = count("ab abcd", &TokenizationConfig::default());
        assert_eq!(got.mean_token_length(), Some(3.0));
        assert_eq!(got.calibrated_blank(), Some(0.25));
    }

    #[test]
    fn self_comparison() {
        let params = ModelParams::new(26, 0.18).unwrap();
        let profile = SurvivalProfile::gamma(1.0, 0.6, 1, 12).unwrap();
        let table = analytic::analytic_rank_frequency(&params, &profile, 10_000_000);
        // Table too large at k_max = 12; compare over a prefix.
        assert!(table.is_err());
        let blocks = analytic::analytic_blocks(&params, &profile).unwrap();
        let prefix = blocks.expand_prefix(200_000).unwrap();
        let report = compare_model_to_corpus(&prefix, None, &params, &profile, &CompareConfig::default()).unwrap();
        assert_eq!(report.gap_method, FitMethod::Ols);
        assert!(report.exponent_gap < 1e-12);
        assert!((report.empirical.head_10.mass - report.model.head_10.mass).abs() < 1e-9);
        assert!((report.empirical.head_20.mass - report.model.head_20.mass).abs() < 1e-9);
        assert!(report.empirical.mle.is_none());
        assert!(report.theoretical_exponent.is_some());
    }
}
