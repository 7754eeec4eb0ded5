//! Parameters of the combinatorial word generator.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance on `q + sum(p_j) = 1` for explicit symbol probabilities.
pub const PROBABILITY_SUM_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParamsError {
    #[error("alphabet size must be at least 2, got {0}")]
    AlphabetTooSmall(u32),
    #[error("blank probability must lie in (0, 1), got {0}")]
    BlankOutOfRange(f64),
    #[error("expected {expected} symbol probabilities, got {got}")]
    SymbolCountMismatch { expected: usize, got: usize },
    #[error("symbol probability {index} is not positive: {value}")]
    NonPositiveSymbol { index: usize, value: f64 },
    #[error("blank probability plus symbol probabilities sums to {0}, not 1")]
    NotNormalized(f64),
}

/// Alphabet size `m`, blank probability `q` and optional per-symbol
/// probabilities. Without explicit probabilities every letter has
/// probability `(1 - q) / m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    m: u32,
    q: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    symbol_probs: Option<Vec<f64>>,
}

impl ModelParams {
    pub fn new(m: u32, q: f64) -> Result<Self, ParamsError> {
        if m < 2 {
            return Err(ParamsError::AlphabetTooSmall(m));
        }
        if !(q > 0.0 && q < 1.0) {
            return Err(ParamsError::BlankOutOfRange(q));
        }
        Ok(Self {
            m,
            q,
            symbol_probs: None,
        })
    }

    pub fn with_symbol_probs(m: u32, q: f64, probs: Vec<f64>) -> Result<Self, ParamsError> {
        let mut params = Self::new(m, q)?;
        if probs.len() != m as usize {
            return Err(ParamsError::SymbolCountMismatch {
                expected: m as usize,
                got: probs.len(),
            });
        }
        if let Some((index, &value)) = probs.iter().enumerate().find(|(_, p)| p.is_nan() || **p <= 0.0) {
            return Err(ParamsError::NonPositiveSymbol { index, value });
        }
        let total = q + probs.iter().sum::<f64>();
        if (total - 1.0).abs() > PROBABILITY_SUM_TOLERANCE {
            return Err(ParamsError::NotNormalized(total));
        }
        params.symbol_probs = Some(probs);
        Ok(params)
    }

    /// Re-checks invariants; useful after deserialization.
    pub fn validate(&self) -> Result<(), ParamsError> {
        match &self.symbol_probs {
            Some(p) => Self::with_symbol_probs(self.m, self.q, p.clone()).map(|_| ()),
            None => Self::new(self.m, self.q).map(|_| ()),
        }
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn symbol_probs(&self) -> Option<&[f64]> {
        self.symbol_probs.as_deref()
    }

    /// Probability of letter `j` (0-based).
    pub fn symbol_prob(&self, j: usize) -> f64 {
        match &self.symbol_probs {
            Some(p) => p[j],
            None => (1.0 - self.q) / self.m as f64,
        }
    }

    pub fn is_uniform(&self) -> bool {
        self.symbol_probs.is_none()
    }

    /// Blank probability matching a mean word length under the geometric
    /// law conditioned on nonempty words, `q = 1 / (1 + mean)`.
    pub fn blank_for_mean_length(mean_length: f64) -> f64 {
        1.0 / (1.0 + mean_length)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_params() {
        assert_eq!(ModelParams::new(1, 0.5), Err(ParamsError::AlphabetTooSmall(1)));
        assert!(matches!(ModelParams::new(3, 0.0), Err(ParamsError::BlankOutOfRange(_))));
        assert!(matches!(ModelParams::new(3, 1.0), Err(ParamsError::BlankOutOfRange(_))));
        assert!(matches!(
            ModelParams::new(3, f64::NAN),
            Err(ParamsError::BlankOutOfRange(_))
        ));
    }

    #[test]
    fn explicit_probabilities_must_normalize() {
        assert!(ModelParams::with_symbol_probs(2, 0.5, vec![0.25, 0.25]).is_ok());
        assert!(matches!(
            ModelParams::with_symbol_probs(2, 0.5, vec![0.25, 0.26]),
            Err(ParamsError::NotNormalized(_))
        ));
        assert!(matches!(
            ModelParams::with_symbol_probs(2, 0.5, vec![0.5, 0.0]),
            Err(ParamsError::NonPositiveSymbol { index: 1, .. })
        ));
        assert!(matches!(
            ModelParams::with_symbol_probs(3, 0.5, vec![0.5]),
            Err(ParamsError::SymbolCountMismatch { .. })
        ));
    }

    #[test]
    fn uniform_symbol_probability() {
        let p = ModelParams::new(4, 0.2).unwrap();
        assert!((p.symbol_prob(3) - 0.2).abs() < 1e-15);
    }
}
