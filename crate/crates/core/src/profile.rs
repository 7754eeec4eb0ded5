//! Survival profiles of the lexical filter and their textual form.
//!
//! A profile says how many types of each length survive the filter. It is
//! written on the command line in a small language:
//!
//! ```text
//! unfiltered
//! gamma:C=20,g=0.5
//! poly:c0=3,c1=2,b=1.5
//! table:k3=10,k4=20
//! table:k3=10,default=gamma:C=0.03,g=0.6
//! table:p3=0.000569,k4=74
//! ```
//!
//! `kN=T` pins the surviving type count of length `N`, `pN=x` pins the
//! survival probability instead. In a table, `default=` covers every
//! unlisted length above the largest listed one; unlisted lengths below it
//! have no survivors.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_K_MIN: u32 = 1;
pub const DEFAULT_K_MAX: u32 = 40;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProfileError {
    #[error("cannot parse profile `{spec}`: {reason}")]
    Parse { spec: String, reason: String },
    #[error("gamma profile needs C > 0 and 0 < g <= 1 (got C={c}, g={gamma})")]
    BadGamma { c: f64, gamma: f64 },
    #[error("polynomial profile needs c0 >= 0, c1 > 0 and 1 <= b <= 3 (got c0={c0}, c1={c1}, b={beta})")]
    BadPolynomial { c0: f64, c1: f64, beta: f64 },
    #[error("survival probability for length {k} must lie in [0, 1], got {value}")]
    BadSurvival { k: u32, value: f64 },
    #[error("length window is empty: k_min={k_min} > k_max={k_max}")]
    EmptyWindow { k_min: u32, k_max: u32 },
}

/// One pinned entry of a table profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TableEntry {
    /// Exact surviving type count `T_k`.
    Types(u64),
    /// Survival probability `pi_k`; `T_k = floor(m^k pi_k)`.
    Survival(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ProfileKind {
    /// Every combinatorial type survives, `T_k = m^k`.
    Unfiltered,
    /// `T_k = floor(C m^(gamma k))`.
    Gamma { c: f64, gamma: f64 },
    /// `T_k = floor(c0 + c1 k^beta)`.
    Polynomial { c0: f64, c1: f64, beta: f64 },
    /// Explicit per-length entries with an optional rule for longer lengths.
    Table {
        entries: BTreeMap<u32, TableEntry>,
        default: Option<Box<ProfileKind>>,
    },
}

impl ProfileKind {
    fn validate(&self) -> Result<(), ProfileError> {
        match self {
            ProfileKind::Unfiltered => Ok(()),
            &ProfileKind::Gamma { c, gamma } => {
                if c > 0.0 && c.is_finite() && gamma > 0.0 && gamma <= 1.0 {
                    Ok(())
                } else {
                    Err(ProfileError::BadGamma { c, gamma })
                }
            }
            &ProfileKind::Polynomial { c0, c1, beta } => {
                if c0 >= 0.0 && c0.is_finite() && c1 > 0.0 && c1.is_finite() && (1.0..=3.0).contains(&beta) {
                    Ok(())
                } else {
                    Err(ProfileError::BadPolynomial { c0, c1, beta })
                }
            }
            ProfileKind::Table { entries, default } => {
                for (&k, entry) in entries {
                    if let TableEntry::Survival(p) = *entry {
                        if !(0.0..=1.0).contains(&p) {
                            return Err(ProfileError::BadSurvival { k, value: p });
                        }
                    }
                }
                match default {
                    Some(d) => d.validate(),
                    None => Ok(()),
                }
            }
        }
    }
}

/// A lexical filter: which lengths are considered (`k_min..=k_max`) and how
/// many types of each length survive.
///
/// `k_min = 0` selects the compatibility normalization: the empty word is a
/// single type of length zero and frequencies are not renormalized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalProfile {
    kind: ProfileKind,
    k_min: u32,
    k_max: u32,
}

impl SurvivalProfile {
    pub fn new(kind: ProfileKind, k_min: u32, k_max: u32) -> Result<Self, ProfileError> {
        kind.validate()?;
        if k_min > k_max || k_max == 0 {
            return Err(ProfileError::EmptyWindow { k_min, k_max });
        }
        Ok(Self { kind, k_min, k_max })
    }

    pub fn unfiltered(k_min: u32, k_max: u32) -> Result<Self, ProfileError> {
        Self::new(ProfileKind::Unfiltered, k_min, k_max)
    }

    pub fn gamma(c: f64, gamma: f64, k_min: u32, k_max: u32) -> Result<Self, ProfileError> {
        Self::new(ProfileKind::Gamma { c, gamma }, k_min, k_max)
    }

    pub fn polynomial(c0: f64, c1: f64, beta: f64, k_min: u32, k_max: u32) -> Result<Self, ProfileError> {
        Self::new(ProfileKind::Polynomial { c0, c1, beta }, k_min, k_max)
    }

    /// Table of exact type counts with no default rule.
    pub fn table<I: IntoIterator<Item = (u32, u64)>>(types: I, k_min: u32, k_max: u32) -> Result<Self, ProfileError> {
        let entries = types.into_iter().map(|(k, t)| (k, TableEntry::Types(t))).collect();
        Self::new(ProfileKind::Table { entries, default: None }, k_min, k_max)
    }

    /// Parses the profile language with an explicit length window.
    pub fn parse(spec: &str, k_min: u32, k_max: u32) -> Result<Self, ProfileError> {
        Self::new(spec.parse()?, k_min, k_max)
    }

    pub fn kind(&self) -> &ProfileKind {
        &self.kind
    }

    pub fn k_min(&self) -> u32 {
        self.k_min
    }

    pub fn k_max(&self) -> u32 {
        self.k_max
    }

    /// True for the verbatim (unrenormalized, empty word included) mode.
    pub fn is_compatibility(&self) -> bool {
        self.k_min == 0
    }

    pub fn with_window(&self, k_min: u32, k_max: u32) -> Result<Self, ProfileError> {
        Self::new(self.kind.clone(), k_min, k_max)
    }

    /// Asymptotic growth rate of the surviving lexicon, `T_k ~ C m^(gamma k)`.
    /// `None` for polynomial growth and for tables without a gamma tail.
    pub fn growth_rate(&self) -> Option<f64> {
        fn rate(kind: &ProfileKind) -> Option<f64> {
            match kind {
                ProfileKind::Unfiltered => Some(1.0),
                ProfileKind::Gamma { gamma, .. } => Some(*gamma),
                ProfileKind::Polynomial { .. } => None,
                ProfileKind::Table { default, .. } => default.as_deref().and_then(rate),
            }
        }
        rate(&self.kind)
    }
}

impl fmt::Display for ProfileKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProfileKind::Unfiltered => write!(f, "unfiltered"),
            ProfileKind::Gamma { c, gamma } => write!(f, "gamma:C={c},g={gamma}"),
            ProfileKind::Polynomial { c0, c1, beta } => write!(f, "poly:c0={c0},c1={c1},b={beta}"),
            ProfileKind::Table { entries, default } => {
                write!(f, "table:")?;
                let mut first = true;
                for (k, entry) in entries {
                    if !first {
                        write!(f, ",")?;
                    }
                    first = false;
                    match entry {
                        TableEntry::Types(t) => write!(f, "k{k}={t}")?,
                        TableEntry::Survival(p) => write!(f, "p{k}={p}")?,
                    }
                }
                if let Some(d) = default {
                    if !first {
                        write!(f, ",")?;
                    }
                    write!(f, "default={d}")?;
                }
                Ok(())
            }
        }
    }
}

impl fmt::Display for SurvivalProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.kind.fmt(f)
    }
}

impl FromStr for ProfileKind {
    type Err = ProfileError;

    fn from_str(spec: &str) -> Result<Self, Self::Err> {
        let err = |reason: String| ProfileError::Parse {
            spec: spec.to_string(),
            reason,
        };
        let spec_trim = spec.trim();
        let (family, body) = match spec_trim.split_once(':') {
            Some((fam, body)) => (fam.trim().to_ascii_lowercase(), body.trim()),
            None => (spec_trim.to_ascii_lowercase(), ""),
        };
        let kind = match family.as_str() {
            "unfiltered" | "full" => {
                if !body.is_empty() {
                    return Err(err("unfiltered takes no arguments".into()));
                }
                ProfileKind::Unfiltered
            }
            "gamma" => {
                let kv = key_values(body).map_err(err)?;
                let c = required(&kv, &["c"]).map_err(err)?;
                let gamma = required(&kv, &["g", "gamma"]).map_err(err)?;
                reject_unknown(&kv, &["c", "g", "gamma"]).map_err(err)?;
                ProfileKind::Gamma { c, gamma }
            }
            "poly" | "polynomial" => {
                let kv = key_values(body).map_err(err)?;
                let c0 = required(&kv, &["c0"]).map_err(err)?;
                let c1 = required(&kv, &["c1"]).map_err(err)?;
                let beta = required(&kv, &["b", "beta"]).map_err(err)?;
                reject_unknown(&kv, &["c0", "c1", "b", "beta"]).map_err(err)?;
                ProfileKind::Polynomial { c0, c1, beta }
            }
            "table" => {
                // Everything after `default=` belongs to the nested rule.
                let (listed, default) = match body.find("default=") {
                    Some(pos) => (
                        body[..pos].trim_end_matches([',', ' ']),
                        Some(&body[pos + "default=".len()..]),
                    ),
                    None => (body, None),
                };
                let mut entries = BTreeMap::new();
                for item in listed.split(',').map(str::trim).filter(|s| !s.is_empty()) {
                    let (key, value) = item
                        .split_once('=')
                        .ok_or_else(|| err(format!("expected key=value, got `{item}`")))?;
                    let key = key.trim().to_ascii_lowercase();
                    let value = value.trim();
                    let (tag, len) = key.split_at(1);
                    let k: u32 = len.parse().map_err(|_| err(format!("bad length in `{item}`")))?;
                    let entry = match tag {
                        "k" => TableEntry::Types(
                            value
                                .parse()
                                .map_err(|_| err(format!("type count must be an integer in `{item}`")))?,
                        ),
                        "p" => TableEntry::Survival(
                            value.parse().map_err(|_| err(format!("bad probability in `{item}`")))?,
                        ),
                        _ => return Err(err(format!("unknown table key `{key}`"))),
                    };
                    if entries.insert(k, entry).is_some() {
                        return Err(err(format!("length {k} listed twice")));
                    }
                }
                let default = match default {
                    Some(d) => {
                        let nested: ProfileKind = d.parse()?;
                        if matches!(nested, ProfileKind::Table { .. }) {
                            return Err(err("a table default cannot be another table".into()));
                        }
                        Some(Box::new(nested))
                    }
                    None => None,
                };
                if entries.is_empty() && default.is_none() {
                    return Err(err("table needs at least one entry".into()));
                }
                ProfileKind::Table { entries, default }
            }
            other => return Err(err(format!("unknown profile family `{other}`"))),
        };
        kind.validate()?;
        Ok(kind)
    }
}

fn key_values(body: &str) -> Result<Vec<(String, f64)>, String> {
    body.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|item| {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| format!("expected key=value, got `{item}`"))?;
            let v: f64 = v.trim().parse().map_err(|_| format!("bad number in `{item}`"))?;
            Ok((k.trim().to_ascii_lowercase(), v))
        })
        .collect()
}

fn required(kv: &[(String, f64)], names: &[&str]) -> Result<f64, String> {
    kv.iter()
        .find(|(k, _)| names.contains(&k.as_str()))
        .map(|(_, v)| *v)
        .ok_or_else(|| format!("missing `{}`", names[0]))
}

fn reject_unknown(kv: &[(String, f64)], known: &[&str]) -> Result<(), String> {
    match kv.iter().find(|(k, _)| !known.contains(&k.as_str())) {
        Some((k, _)) => Err(format!("unknown key `{k}`")),
        None => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_each_family() {
        assert_eq!("unfiltered".parse::<ProfileKind>().unwrap(), ProfileKind::Unfiltered);
        assert_eq!(
            "gamma:C=20,g=0.5".parse::<ProfileKind>().unwrap(),
            ProfileKind::Gamma { c: 20.0, gamma: 0.5 }
        );
        assert_eq!(
            "poly:c0=3,c1=2,b=1.5".parse::<ProfileKind>().unwrap(),
            ProfileKind::Polynomial {
                c0: 3.0,
                c1: 2.0,
                beta: 1.5
            }
        );
    }

    #[test]
    fn parses_hybrid_table() {
        let kind: ProfileKind = "table:k3=10,default=gamma:C=0.03,g=0.6".parse().unwrap();
        match &kind {
            ProfileKind::Table { entries, default } => {
                assert_eq!(entries.get(&3), Some(&TableEntry::Types(10)));
                assert_eq!(default.as_deref(), Some(&ProfileKind::Gamma { c: 0.03, gamma: 0.6 }));
            }
            _ => panic!("expected table"),
        }
        assert_eq!(kind.to_string().parse::<ProfileKind>().unwrap(), kind);
    }

    #[test]
    fn rejects_malformed_specs() {
        for bad in [
            "gamma:C=20",
            "gamma:C=20,g=1.5",
            "gamma:C=-1,g=0.5",
            "poly:c0=1,c1=1,b=4",
            "table:",
            "table:k3=ten",
            "table:x3=1",
            "table:k3=1,k3=2",
            "table:p3=1.5",
            "table:k3=1,default=table:k4=1",
            "zipf:a=1",
        ] {
            assert!(bad.parse::<ProfileKind>().is_err(), "{bad} should fail");
        }
    }

    #[test]
    fn window_must_be_nonempty() {
        assert!(SurvivalProfile::unfiltered(3, 2).is_err());
        assert!(SurvivalProfile::unfiltered(0, 0).is_err());
        assert!(SurvivalProfile::unfiltered(0, 3).unwrap().is_compatibility());
    }

    #[test]
    fn growth_rates() {
        assert_eq!(SurvivalProfile::unfiltered(1, 5).unwrap().growth_rate(), Some(1.0));
        assert_eq!(
            SurvivalProfile::parse("table:k3=10,default=gamma:C=0.03,g=0.6", 1, 40)
                .unwrap()
                .growth_rate(),
            Some(0.6)
        );
        assert_eq!(
            SurvivalProfile::polynomial(1.0, 1.0, 2.0, 1, 9).unwrap().growth_rate(),
            None
        );
    }
}
