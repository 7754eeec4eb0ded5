//! Stochastic simulation of the raw symbol stream and of filtered tokens.
//!
//! Surviving types are never enumerated. A type is identified by its length
//! `k` and an index in `1..=T_k`; drawing the index uniformly is the same as
//! choosing uniformly among the survivors of that length. A concrete
//! spelling is produced on demand by [`Speller`].

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Geometric;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analytic::{length_classes, word_length_pmf, AnalyticError};
use crate::params::ModelParams;
use crate::profile::SurvivalProfile;
use crate::rng::{substream, Purpose, MAX_CHUNK};

/// Lengths above this share one overflow bucket in histograms.
pub const HISTOGRAM_MAX_LENGTH: u32 = 200;

/// Default floor on the per-draw acceptance probability in rejection mode.
pub const DEFAULT_MIN_ACCEPTANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GenerationError {
    #[error(transparent)]
    Analytic(#[from] AnalyticError),
    #[error("no length in the profile window has a surviving type")]
    NoSurvivors,
    #[error("acceptance probability {acceptance:e} is below the floor {floor:e}; rejection sampling would not terminate in practice")]
    NonTermination { acceptance: f64, floor: f64 },
    #[error("this operation needs a {expected} target")]
    WrongTarget { expected: &'static str },
    #[error("target must be at least 1")]
    EmptyTarget,
    #[error("chunk size must be at least 1 and yield at most {MAX_CHUNK} chunks")]
    BadChunking,
    #[error("index {index} is outside 1..={limit} for length {k}")]
    IndexOutOfClass { k: u32, index: String, limit: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingMode {
    /// Length from the renormalized length law over nonempty classes, then a
    /// uniform survivor. Every draw yields a token.
    #[default]
    Renormalized,
    /// Length from the raw geometric law, kept with probability `pi_k`,
    /// otherwise counted as a rejection and redrawn.
    Rejection,
}

impl fmt::Display for SamplingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SamplingMode::Renormalized => "renormalized",
            SamplingMode::Rejection => "rejection",
        })
    }
}

impl FromStr for SamplingMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "renormalized" => Ok(SamplingMode::Renormalized),
            "rejection" => Ok(SamplingMode::Rejection),
            other => Err(format!("unknown sampling mode `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    Symbols(u64),
    Tokens(u64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationConfig {
    pub params: ModelParams,
    pub profile: SurvivalProfile,
    pub target: Target,
    pub seed: u64,
    pub mode: SamplingMode,
    /// Tokens per chunk. `None` runs a single sequential chunk.
    pub chunk_tokens: Option<u64>,
    pub min_acceptance: f64,
}

impl GenerationConfig {
    pub fn tokens(params: ModelParams, profile: SurvivalProfile, n: u64, seed: u64) -> Self {
        Self {
            params,
            profile,
            target: Target::Tokens(n),
            seed,
            mode: SamplingMode::Renormalized,
            chunk_tokens: None,
            min_acceptance: DEFAULT_MIN_ACCEPTANCE,
        }
    }

    /// Raw-stream configuration; the profile is not consulted.
    pub fn symbols(params: ModelParams, n: u64, seed: u64) -> Self {
        let profile = SurvivalProfile::unfiltered(1, 1).expect("valid window");
        Self {
            target: Target::Symbols(n),
            ..Self::tokens(params, profile, n, seed)
        }
    }

    pub fn with_mode(mut self, mode: SamplingMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_chunks(mut self, chunk_tokens: u64) -> Self {
        self.chunk_tokens = Some(chunk_tokens);
        self
    }
}

/// Position of a type inside its length class, 1-based. Values that fit in
/// a `u64` are always stored as `Small`, so derived ordering and hashing
/// agree with numeric ordering.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TypeIndex {
    Small(u64),
    Big(BigUint),
}

impl TypeIndex {
    pub fn from_biguint(x: BigUint) -> Self {
        match x.to_u64() {
            Some(v) => TypeIndex::Small(v),
            None => TypeIndex::Big(x),
        }
    }

    pub fn to_biguint(&self) -> BigUint {
        match self {
            TypeIndex::Small(v) => BigUint::from(*v),
            TypeIndex::Big(b) => b.clone(),
        }
    }

    /// Little-endian bytes without trailing zeros.
    pub fn to_bytes_le(&self) -> Vec<u8> {
        match self {
            TypeIndex::Small(v) => {
                let b = v.to_le_bytes();
                let len = 8 - (v.leading_zeros() / 8) as usize;
                b[..len].to_vec()
            }
            TypeIndex::Big(b) => b.to_bytes_le(),
        }
    }
}

impl fmt::Display for TypeIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TypeIndex::Small(v) => write!(f, "{v}"),
            TypeIndex::Big(b) => write!(f, "{b}"),
        }
    }
}

/// A surviving word type: its length and its index among the survivors of
/// that length. Ordered by length, then index.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TypeId {
    pub length: u32,
    pub index: TypeIndex,
}

impl TypeId {
    pub fn new(length: u32, index: u64) -> Self {
        Self {
            length,
            index: TypeIndex::Small(index),
        }
    }
}

/// Token counts per length; lengths above [`HISTOGRAM_MAX_LENGTH`] go to
/// `overflow`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LengthHistogram {
    pub counts: BTreeMap<u32, u64>,
    pub overflow: u64,
}

impl LengthHistogram {
    pub fn record(&mut self, length: u32) {
        self.record_n(length, 1);
    }

    pub fn record_n(&mut self, length: u32, n: u64) {
        if length > HISTOGRAM_MAX_LENGTH {
            self.overflow += n;
        } else {
            *self.counts.entry(length).or_insert(0) += n;
        }
    }

    pub fn get(&self, length: u32) -> u64 {
        self.counts.get(&length).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.counts.values().sum::<u64>() + self.overflow
    }

    pub fn merge(&mut self, other: &LengthHistogram) {
        for (&k, &n) in &other.counts {
            *self.counts.entry(k).or_insert(0) += n;
        }
        self.overflow += other.overflow;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationReport {
    pub mode: SamplingMode,
    pub seed: u64,
    pub tokens_emitted: u64,
    /// Draws discarded by the filter; always 0 in renormalized mode.
    pub rejected_tokens: u64,
    pub length_histogram: LengthHistogram,
    pub distinct_types: u64,
}

struct Class {
    k: u32,
    types: BigUint,
    types_small: Option<u64>,
    survival: f64,
}

struct Sampler {
    classes: Vec<Class>,
    /// For rejection mode: index into `classes` by `k - k_min`.
    by_length: Vec<Option<usize>>,
    k_min: u32,
    weights: WeightedIndex<f64>,
    geometric: Geometric,
    mode: SamplingMode,
}

impl Sampler {
    fn new(config: &GenerationConfig) -> Result<Self, GenerationError> {
        let all = length_classes(&config.profile, &config.params)?;
        let k_min = config.profile.k_min();
        let mut by_length = vec![None; all.len()];
        let mut classes = Vec::new();
        for c in all {
            if c.types.is_zero() {
                continue;
            }
            by_length[(c.k - k_min) as usize] = Some(classes.len());
            classes.push(Class {
                k: c.k,
                types_small: c.types.to_u64(),
                types: c.types,
                survival: c.survival,
            });
        }
        if classes.is_empty() {
            return Err(GenerationError::NoSurvivors);
        }
        let weights = WeightedIndex::new(classes.iter().map(|c| word_length_pmf(&config.params, c.k)))
            .map_err(|_| GenerationError::NoSurvivors)?;
        let geometric = Geometric::new(config.params.q()).expect("q in (0, 1)");
        if config.mode == SamplingMode::Rejection {
            let acceptance: f64 = classes
                .iter()
                .map(|c| word_length_pmf(&config.params, c.k) * c.survival)
                .sum();
            if acceptance.is_nan() || acceptance < config.min_acceptance {
                return Err(GenerationError::NonTermination {
                    acceptance,
                    floor: config.min_acceptance,
                });
            }
        }
        Ok(Self {
            classes,
            by_length,
            k_min,
            weights,
            geometric,
            mode: config.mode,
        })
    }

    fn draw_index(class: &Class, rng: &mut ChaCha8Rng) -> TypeIndex {
        match class.types_small {
            Some(t) => TypeIndex::Small(rng.random_range(0..t) + 1),
            None => TypeIndex::from_biguint(uniform_below(&class.types, rng) + 1u32),
        }
    }

    /// Draws `n` accepted tokens from chunk `chunk`; returns the number of
    /// rejected draws.
    fn run_chunk<F: FnMut(TypeId)>(&self, seed: u64, chunk: u64, n: u64, mut emit: F) -> u64 {
        let mut lengths = substream(seed, Purpose::Lengths, chunk);
        let mut indices = substream(seed, Purpose::Indices, chunk);
        let mut rejected = 0;
        match self.mode {
            SamplingMode::Renormalized => {
                for _ in 0..n {
                    let class = &self.classes[self.weights.sample(&mut lengths)];
                    emit(TypeId {
                        length: class.k,
                        index: Self::draw_index(class, &mut indices),
                    });
                }
            }
            SamplingMode::Rejection => {
                let mut accept = substream(seed, Purpose::Acceptance, chunk);
                let mut accepted = 0;
                while accepted < n {
                    let len = self.geometric.sample(&mut lengths);
                    let slot = len
                        .checked_sub(self.k_min as u64)
                        .and_then(|i| self.by_length.get(i as usize).copied().flatten());
                    // Lengths outside the window or with no survivors reject
                    // outright; the acceptance draw is still consumed so that
                    // streams stay aligned.
                    let u: f64 = accept.random();
                    match slot {
                        Some(ci) if u < self.classes[ci].survival => {
                            let class = &self.classes[ci];
                            emit(TypeId {
                                length: class.k,
                                index: Self::draw_index(class, &mut indices),
                            });
                            accepted += 1;
                        }
                        _ => rejected += 1,
                    }
                }
            }
        }
        rejected
    }
}

/// Uniform integer in `[0, bound)` by rejection on the bit length.
fn uniform_below(bound: &BigUint, rng: &mut ChaCha8Rng) -> BigUint {
    let bits = bound.bits();
    let words = bits.div_ceil(64) as usize;
    let top_bits = bits - 64 * (words as u64 - 1);
    let mask = if top_bits == 64 {
        u64::MAX
    } else {
        (1u64 << top_bits) - 1
    };
    loop {
        let mut limbs: Vec<u64> = (0..words).map(|_| rng.random()).collect();
        *limbs.last_mut().expect("bound > 0") &= mask;
        let x = BigUint::from_slice(
            &limbs
                .iter()
                .flat_map(|l| [*l as u32, (*l >> 32) as u32])
                .collect::<Vec<u32>>(),
        );
        if &x < bound {
            return x;
        }
    }
}

fn chunk_plan(n: u64, chunk_tokens: Option<u64>) -> Result<Vec<u64>, GenerationError> {
    let size = chunk_tokens.unwrap_or(n);
    if size == 0 {
        return Err(GenerationError::BadChunking);
    }
    let chunks = n.div_ceil(size);
    if chunks > MAX_CHUNK {
        return Err(GenerationError::BadChunking);
    }
    Ok((0..chunks).map(|i| size.min(n - i * size)).collect())
}

/// Generates filtered tokens, handing each to `visit` in sequence order.
///
/// With a chunk size set, chunks are generated in parallel; the emitted
/// sequence depends only on the seed and the chunk size.
pub fn generate_filtered_tokens_with<F: FnMut(&TypeId)>(
    config: &GenerationConfig,
    mut visit: F,
) -> Result<GenerationReport, GenerationError> {
    let n = match config.target {
        Target::Tokens(n) => n,
        Target::Symbols(_) => return Err(GenerationError::WrongTarget { expected: "token" }),
    };
    if n == 0 {
        return Err(GenerationError::EmptyTarget);
    }
    let sampler = Sampler::new(config)?;
    let plan = chunk_plan(n, config.chunk_tokens)?;

    let mut histogram = LengthHistogram::default();
    let mut distinct: HashSet<TypeId> = HashSet::new();
    let mut rejected = 0;
    let mut emitted = 0;
    let mut record = |t: TypeId| {
        visit(&t);
        histogram.record(t.length);
        emitted += 1;
        distinct.insert(t);
    };
    if plan.len() == 1 {
        rejected = sampler.run_chunk(config.seed, 0, n, &mut record);
    } else {
        let batch = rayon::current_num_threads().max(1);
        let indexed: Vec<(u64, u64)> = plan.iter().copied().enumerate().map(|(i, c)| (i as u64, c)).collect();
        for group in indexed.chunks(batch) {
            let outputs: Vec<(Vec<TypeId>, u64)> = group
                .par_iter()
                .map(|&(chunk, len)| {
                    let mut out = Vec::with_capacity(len as usize);
                    let rej = sampler.run_chunk(config.seed, chunk, len, |t| out.push(t));
                    (out, rej)
                })
                .collect();
            for (tokens, rej) in outputs {
                rejected += rej;
                tokens.into_iter().for_each(&mut record);
            }
        }
    }
    Ok(GenerationReport {
        mode: config.mode,
        seed: config.seed,
        tokens_emitted: emitted,
        rejected_tokens: rejected,
        length_histogram: histogram,
        distinct_types: distinct.len() as u64,
    })
}

/// Generates filtered tokens into memory.
pub fn generate_filtered_tokens(config: &GenerationConfig) -> Result<(Vec<TypeId>, GenerationReport), GenerationError> {
    let mut tokens = Vec::new();
    let report = generate_filtered_tokens_with(config, |t| tokens.push(t.clone()))?;
    Ok((tokens, report))
}

/// One symbol of the raw stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Symbol {
    Blank,
    /// Letter by 0-based alphabet position.
    Letter(u32),
}

/// Lazy i.i.d. symbol source; memory use does not depend on its length.
pub struct SymbolStream {
    rng: ChaCha8Rng,
    remaining: u64,
    q: f64,
    m: u32,
    /// Over `[blank, letter 0, letter 1, ...]` when probabilities are explicit.
    weighted: Option<WeightedIndex<f64>>,
}

impl Iterator for SymbolStream {
    type Item = Symbol;

    fn next(&mut self) -> Option<Symbol> {
        if self.remaining == 0 {
            return None;
        }
        self.remaining -= 1;
        Some(match &self.weighted {
            Some(w) => match w.sample(&mut self.rng) {
                0 => Symbol::Blank,
                j => Symbol::Letter(j as u32 - 1),
            },
            None => {
                if self.rng.random::<f64>() < self.q {
                    Symbol::Blank
                } else {
                    Symbol::Letter(self.rng.random_range(0..self.m))
                }
            }
        })
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = usize::try_from(self.remaining).unwrap_or(usize::MAX);
        (n, Some(n))
    }
}

pub fn generate_symbol_stream(config: &GenerationConfig) -> Result<SymbolStream, GenerationError> {
    let n = match config.target {
        Target::Symbols(n) => n,
        Target::Tokens(_) => return Err(GenerationError::WrongTarget { expected: "symbol" }),
    };
    if n == 0 {
        return Err(GenerationError::EmptyTarget);
    }
    let weighted = config.params.symbol_probs().map(|p| {
        WeightedIndex::new(std::iter::once(config.params.q()).chain(p.iter().copied()))
            .expect("validated probabilities")
    });
    Ok(SymbolStream {
        rng: substream(config.seed, Purpose::Symbols, 0),
        remaining: n,
        q: config.params.q(),
        m: config.params.m(),
        weighted,
    })
}

/// Maximal runs of letters. Adjacent blanks produce no empty word.
pub struct Words<I> {
    inner: I,
}

impl<I: Iterator<Item = Symbol>> Iterator for Words<I> {
    type Item = Vec<u32>;

    fn next(&mut self) -> Option<Vec<u32>> {
        let mut word = Vec::new();
        for s in self.inner.by_ref() {
            match s {
                Symbol::Letter(j) => word.push(j),
                Symbol::Blank if word.is_empty() => {}
                Symbol::Blank => return Some(word),
            }
        }
        (!word.is_empty()).then_some(word)
    }
}

pub fn segment_words<I: IntoIterator<Item = Symbol>>(stream: I) -> Words<I::IntoIter> {
    Words {
        inner: stream.into_iter(),
    }
}

/// Summary of a raw-stream run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamReport {
    pub seed: u64,
    pub symbols: u64,
    /// Blank symbols; each closes one (possibly empty) word.
    pub blanks: u64,
    /// Nonempty words.
    pub words: u64,
    pub length_histogram: LengthHistogram,
}

/// Generates a raw stream, segments it and hands each nonempty word to
/// `visit`.
pub fn run_symbol_stream<F: FnMut(&[u32])>(
    config: &GenerationConfig,
    mut visit: F,
) -> Result<StreamReport, GenerationError> {
    let stream = generate_symbol_stream(config)?;
    let mut report = StreamReport {
        seed: config.seed,
        symbols: 0,
        blanks: 0,
        words: 0,
        length_histogram: LengthHistogram::default(),
    };
    let counted = stream.inspect(|s| {
        report.symbols += 1;
        if *s == Symbol::Blank {
            report.blanks += 1;
        }
    });
    let mut words = 0;
    let mut histogram = LengthHistogram::default();
    for w in segment_words(counted) {
        words += 1;
        histogram.record(w.len() as u32);
        visit(&w);
    }
    report.words = words;
    report.length_histogram = histogram;
    Ok(report)
}

/// Display character for alphabet position `j`: `a-z`, then `A-Z`, then
/// `0-9`, then consecutive code points from U+0100.
pub fn alphabet_symbol(j: u32) -> char {
    match j {
        0..=25 => (b'a' + j as u8) as char,
        26..=51 => (b'A' + (j - 26) as u8) as char,
        52..=61 => (b'0' + (j - 52) as u8) as char,
        _ => char::from_u32(0x100 + j - 62).unwrap_or(char::REPLACEMENT_CHARACTER),
    }
}

pub fn spell_letters(letters: &[u32]) -> String {
    letters.iter().map(|&j| alphabet_symbol(j)).collect()
}

/// Seeded injection from `(length, index)` to a spelling.
///
/// For each length `k` the index is pushed through an affine bijection
/// `x -> (a x + b) mod m^k` with `gcd(a, m) = 1`, where `a` and `b` come from
/// the spelling sub-stream for chunk `k`; the result is written as `k`
/// base-`m` digits, most significant first.
pub struct Speller {
    m: u32,
    seed: u64,
    maps: BTreeMap<u32, AffineMap>,
}

struct AffineMap {
    modulus: BigUint,
    a: BigUint,
    b: BigUint,
}

impl Speller {
    pub fn new(params: &ModelParams, seed: u64) -> Self {
        Self {
            m: params.m(),
            seed,
            maps: BTreeMap::new(),
        }
    }

    fn map_for(&mut self, k: u32) -> &AffineMap {
        let (m, seed) = (self.m, self.seed);
        self.maps.entry(k).or_insert_with(|| {
            let modulus = BigUint::from(m).pow(k);
            let mut rng = substream(seed, Purpose::Spelling, k as u64);
            let a = loop {
                let a = uniform_below(&modulus, &mut rng);
                let residue = (&a % m).to_u32().expect("below m");
                if !a.is_zero() && gcd(residue, m) == 1 {
                    break a;
                }
                if modulus.is_one() {
                    break BigUint::one();
                }
            };
            let b = uniform_below(&modulus, &mut rng);
            AffineMap { modulus, a, b }
        })
    }

    pub fn spell(&mut self, id: &TypeId) -> Result<String, GenerationError> {
        let k = id.length;
        let m = self.m;
        let map = self.map_for(k);
        let index = id.index.to_biguint();
        if index.is_zero() || index > map.modulus {
            return Err(GenerationError::IndexOutOfClass {
                k,
                index: index.to_string(),
                limit: map.modulus.to_string(),
            });
        }
        let mut x = (&map.a * (index - 1u32) + &map.b) % &map.modulus;
        let mut digits = vec![0u32; k as usize];
        for d in digits.iter_mut().rev() {
            *d = (&x % m).to_u32().expect("below m");
            x /= m;
        }
        Ok(spell_letters(&digits))
    }
}

/// One-off spelling of a type; see [`Speller`].
pub fn realize_spelling(id: &TypeId, params: &ModelParams, seed: u64) -> Result<String, GenerationError> {
    Speller::new(params, seed).spell(id)
}

fn gcd(mut a: u32, mut b: u32) -> u32 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}
