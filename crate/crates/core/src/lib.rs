//! Word-frequency statistics of a random-typing word model with a
//! stochastic lexical filter.
//!
//! Symbols are drawn i.i.d. from `m` letters and a blank; words are maximal
//! runs of letters. A filter keeps `T_k` of the `m^k` possible types of each
//! length `k`. The crate provides the exact rank-frequency law of the
//! filtered model ([`analytic`]), a token simulator that never enumerates the
//! type space ([`generator`]), Zipf exponent estimators ([`estimator`]) and
//! ingestion of plain-text corpora for comparison ([`corpus`]).

pub mod analytic;
pub mod corpus;
pub mod estimator;
pub mod generator;
pub mod io;
pub mod params;
pub mod profile;
pub mod rng;
pub mod table;

pub use params::ModelParams;
pub use profile::SurvivalProfile;
pub use table::{BlockTable, Provenance, RankBlock, RankFrequencyTable};
