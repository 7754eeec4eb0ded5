//! Closed-form quantities of the word model with and without the lexical
//! filter: the length law, surviving type counts, rank blocks, exact
//! rank-frequency curves and Zipf exponents.
//!
//! Lengths are restricted to the profile window `k_min..=k_max` and the
//! length law is renormalized over the classes that have at least one
//! surviving type. With `k_min = 0` the compatibility normalization applies
//! instead: the empty word counts as the single type of length zero and no
//! renormalization happens, so frequencies are the raw
//! `(1 - q)^k q / T_k`.

use num_bigint::BigUint;
use num_traits::{FromPrimitive, ToPrimitive, Zero};
use thiserror::Error;

use crate::params::ModelParams;
use crate::profile::{ProfileError, ProfileKind, SurvivalProfile, TableEntry};
use crate::table::{big_to_f64, BlockTable, PendingBlock, Provenance, RankFrequencyTable, TableError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalyticError {
    #[error(transparent)]
    Profile(#[from] ProfileError),
    #[error(transparent)]
    Table(#[from] TableError),
    #[error("surviving type count for length {k} is not representable")]
    OverflowUnrepresentable { k: u32 },
    #[error("profile keeps {types} types of length {k}, more than the {possible} that exist")]
    SurvivalAboveOne { k: u32, types: String, possible: String },
    #[error("length {k} lies outside the profile window {k_min}..={k_max}")]
    LengthOutOfWindow { k: u32, k_min: u32, k_max: u32 },
    #[error("no type of length {k} survives the filter")]
    EmptyLengthClass { k: u32 },
    #[error("no length in the profile window has a surviving type")]
    NoSurvivors,
    #[error("rank inversion needs a gamma-law profile")]
    ProfileNotAsymptotic,
    #[error("rank must be at least 1")]
    ZeroRank,
}

/// All surviving types of one length.
#[derive(Debug, Clone, PartialEq)]
pub struct LengthClass {
    pub k: u32,
    /// Floored surviving type count `T_k`.
    pub types: BigUint,
    /// `T_k` before flooring.
    pub types_real: f64,
    /// Survival probability `pi_k = T_k / m^k`, from the floored count.
    pub survival: f64,
}

/// `Pr(L = len) = (1 - q)^len q`.
pub fn word_length_pmf(params: &ModelParams, len: u32) -> f64 {
    (1.0 - params.q()).powi(len as i32) * params.q()
}

/// Expected number of word boundaries (blank symbols) among `n` symbols.
pub fn expected_word_count(n: u64, params: &ModelParams) -> f64 {
    n as f64 * params.q()
}

/// Floors a real type count, snapping values within 1e-9 (relative) of an
/// integer onto it so that e.g. `17576 * (10 / 17576)` yields 10.
fn floor_snapped(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() <= 1e-9 * x.abs().max(1.0) {
        r
    } else {
        x.floor()
    }
}

fn real_to_count(x: f64, k: u32) -> Result<(BigUint, f64), AnalyticError> {
    if !x.is_finite() {
        return Err(AnalyticError::OverflowUnrepresentable { k });
    }
    let floored = floor_snapped(x.max(0.0));
    let count = BigUint::from_f64(floored).ok_or(AnalyticError::OverflowUnrepresentable { k })?;
    Ok((count, x))
}

fn kind_types(kind: &ProfileKind, m: u32, k: u32) -> Result<(BigUint, f64), AnalyticError> {
    let mf = m as f64;
    match kind {
        ProfileKind::Unfiltered => {
            let t = BigUint::from(m).pow(k);
            let real = big_to_f64(&t);
            Ok((t, real))
        }
        &ProfileKind::Gamma { c, gamma } => {
            if gamma == 1.0 && c.fract() == 0.0 {
                let t =
                    BigUint::from_f64(c).ok_or(AnalyticError::OverflowUnrepresentable { k })? * BigUint::from(m).pow(k);
                let real = big_to_f64(&t);
                return Ok((t, real));
            }
            real_to_count(c * mf.powf(gamma * k as f64), k)
        }
        &ProfileKind::Polynomial { c0, c1, beta } => real_to_count(c0 + c1 * (k as f64).powf(beta), k),
        ProfileKind::Table { entries, default } => match entries.get(&k) {
            Some(&TableEntry::Types(t)) => Ok((BigUint::from(t), t as f64)),
            Some(&TableEntry::Survival(p)) => real_to_count(mf.powi(k as i32) * p, k),
            None => {
                let beyond = entries.keys().next_back().is_none_or(|&last| k > last);
                match default {
                    Some(rule) if beyond => kind_types(rule, m, k),
                    _ => Ok((BigUint::zero(), 0.0)),
                }
            }
        },
    }
}

fn check_window(profile: &SurvivalProfile, k: u32) -> Result<(), AnalyticError> {
    if k < profile.k_min() || k > profile.k_max() {
        return Err(AnalyticError::LengthOutOfWindow {
            k,
            k_min: profile.k_min(),
            k_max: profile.k_max(),
        });
    }
    Ok(())
}

/// Surviving types of length `k`, with the real-valued count before
/// flooring. The length must lie in the profile window.
pub fn length_class(profile: &SurvivalProfile, params: &ModelParams, k: u32) -> Result<LengthClass, AnalyticError> {
    check_window(profile, k)?;
    let possible = BigUint::from(params.m()).pow(k);
    let (types, types_real) = if k == 0 {
        // Compatibility mode: the empty word.
        (BigUint::from(1u32), 1.0)
    } else {
        kind_types(profile.kind(), params.m(), k)?
    };
    if types > possible {
        return Err(AnalyticError::SurvivalAboveOne {
            k,
            types: types.to_string(),
            possible: possible.to_string(),
        });
    }
    let survival = if types.is_zero() {
        0.0
    } else {
        // Ratio of big integers, computed through logarithms when the
        // operands do not fit in f64.
        match (types.to_f64(), possible.to_f64()) {
            (Some(a), Some(b)) if a.is_finite() && b.is_finite() => a / b,
            _ => (ln_big(&types) - ln_big(&possible)).exp(),
        }
    };
    Ok(LengthClass {
        k,
        types,
        types_real,
        survival,
    })
}

fn ln_big(x: &BigUint) -> f64 {
    let bits = x.bits();
    if bits <= 1000 {
        return big_to_f64(x).ln();
    }
    let shift = bits - 64;
    big_to_f64(&(x >> shift)).ln() + shift as f64 * std::f64::consts::LN_2
}

/// Every length class of the profile window, empty ones included.
pub fn length_classes(profile: &SurvivalProfile, params: &ModelParams) -> Result<Vec<LengthClass>, AnalyticError> {
    (profile.k_min()..=profile.k_max())
        .map(|k| length_class(profile, params, k))
        .collect()
}

/// Surviving type count `T_k`.
pub fn survival_count(profile: &SurvivalProfile, params: &ModelParams, k: u32) -> Result<BigUint, AnalyticError> {
    Ok(length_class(profile, params, k)?.types)
}

/// `T_k` as a machine integer, failing when it does not fit.
pub fn survival_count_u64(profile: &SurvivalProfile, params: &ModelParams, k: u32) -> Result<u64, AnalyticError> {
    survival_count(profile, params, k)?
        .to_u64()
        .ok_or(AnalyticError::OverflowUnrepresentable { k })
}

/// Cumulative surviving types `R_k`, summed from `k_min`.
pub fn cumulative_types(profile: &SurvivalProfile, params: &ModelParams, k: u32) -> Result<BigUint, AnalyticError> {
    check_window(profile, k)?;
    (profile.k_min()..=k).try_fold(BigUint::zero(), |acc, j| Ok(acc + survival_count(profile, params, j)?))
}

/// Normalization constant `Z` of the length law over the nonempty classes
/// in the window; 1 in compatibility mode.
pub fn normalization_constant(profile: &SurvivalProfile, params: &ModelParams) -> Result<f64, AnalyticError> {
    let classes = length_classes(profile, params)?;
    normalization_of(&classes, profile, params)
}

fn normalization_of(
    classes: &[LengthClass],
    profile: &SurvivalProfile,
    params: &ModelParams,
) -> Result<f64, AnalyticError> {
    let z: f64 = classes
        .iter()
        .filter(|c| !c.types.is_zero())
        .map(|c| word_length_pmf(params, c.k))
        .sum();
    if z == 0.0 {
        return Err(AnalyticError::NoSurvivors);
    }
    Ok(if profile.is_compatibility() { 1.0 } else { z })
}

/// Usage frequency of each surviving type of length `k`,
/// `(1 - q)^k q / (Z T_k)`.
pub fn post_filter_frequency(params: &ModelParams, profile: &SurvivalProfile, k: u32) -> Result<f64, AnalyticError> {
    let class = length_class(profile, params, k)?;
    if class.types.is_zero() {
        return Err(AnalyticError::EmptyLengthClass { k });
    }
    let z = normalization_constant(profile, params)?;
    Ok(class_frequency(params, &class, z))
}

fn class_frequency(params: &ModelParams, class: &LengthClass, z: f64) -> f64 {
    let t = class.types.to_f64().unwrap_or(f64::INFINITY);
    if t.is_finite() {
        word_length_pmf(params, class.k) / (z * t)
    } else {
        (word_length_pmf(params, class.k).ln() - z.ln() - ln_big(&class.types)).exp()
    }
}

/// The exact rank-frequency law in block-compressed form.
pub fn analytic_blocks(params: &ModelParams, profile: &SurvivalProfile) -> Result<BlockTable, AnalyticError> {
    let classes = length_classes(profile, params)?;
    let z = normalization_of(&classes, profile, params)?;
    let included: f64 = classes
        .iter()
        .filter(|c| !c.types.is_zero())
        .map(|c| word_length_pmf(params, c.k))
        .sum();
    let tail = (1.0 - params.q()).powi(profile.k_max() as i32 + 1);
    let pending = classes
        .iter()
        .filter(|c| !c.types.is_zero())
        .map(|c| PendingBlock {
            k: c.k,
            width: c.types.clone(),
            width_real: c.types_real,
            frequency: class_frequency(params, c, z),
            tokens: None,
        })
        .collect();
    Ok(BlockTable::assemble(
        pending,
        Provenance::Analytic,
        z,
        tail,
        1.0 - included,
    ))
}

/// The exact rank-frequency law expanded to one entry per surviving type.
/// Fails with `CapExceeded` above `cap` entries.
pub fn analytic_rank_frequency(
    params: &ModelParams,
    profile: &SurvivalProfile,
    cap: u64,
) -> Result<RankFrequencyTable, AnalyticError> {
    Ok(analytic_blocks(params, profile)?.expand(cap)?)
}

/// Zipf exponent of the filtered model in its published closed form,
/// `(1/gamma) (1 - ln(1 - q) / ln m)`.
///
/// For `gamma < 1` this does not match the log-log slope of the exact
/// block curve; see [`block_slope_exponent`].
pub fn theoretical_exponent(params: &ModelParams, gamma: f64) -> f64 {
    let m = params.m() as f64;
    (1.0 / gamma) * (1.0 - (1.0 - params.q()).ln() / m.ln())
}

/// Zipf exponent of the unfiltered model, `1 - ln(1 - q) / ln m`.
pub fn fcwm_exponent(params: &ModelParams) -> f64 {
    theoretical_exponent(params, 1.0)
}

/// Asymptotic log-log slope of the block curve when `T_k ~ C m^(gamma k)`:
/// frequencies fall by `(1 - q) / m^gamma` per length while ranks grow by
/// `m^gamma`, giving `1 - ln(1 - q) / (gamma ln m)`. Agrees with
/// [`theoretical_exponent`] only at `gamma = 1`.
pub fn block_slope_exponent(params: &ModelParams, gamma: f64) -> f64 {
    let m = params.m() as f64;
    1.0 - (1.0 - params.q()).ln() / (gamma * m.ln())
}

/// Asymptotic length of the word at rank `rank`, `ln R / (gamma ln m)`.
/// Only meaningful in the large-rank limit.
pub fn invert_rank(profile: &SurvivalProfile, params: &ModelParams, rank: u64) -> Result<f64, AnalyticError> {
    let gamma = match profile.kind() {
        ProfileKind::Unfiltered => 1.0,
        ProfileKind::Gamma { gamma, .. } => *gamma,
        _ => return Err(AnalyticError::ProfileNotAsymptotic),
    };
    if rank == 0 {
        return Err(AnalyticError::ZeroRank);
    }
    Ok((rank as f64).ln() / (gamma * (params.m() as f64).ln()))
}
