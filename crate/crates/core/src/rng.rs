//! Seeded random sub-streams.
//!
//! Every random draw comes from ChaCha8 seeded with the 64-bit run seed via
//! `SeedableRng::seed_from_u64`. Independent purposes and independent chunks
//! of a run use distinct ChaCha stream ids:
//!
//! ```text
//! stream id = (purpose << 48) | chunk
//! ```
//!
//! so a chunk's output depends only on `(seed, purpose, chunk)` and chunks
//! may be generated in any order or in parallel.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// What a sub-stream is used for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Lengths = 1,
    Indices = 2,
    Acceptance = 3,
    Symbols = 4,
    Spelling = 5,
}

/// Largest chunk number representable in a stream id.
pub const MAX_CHUNK: u64 = (1 << 48) - 1;

pub fn substream(seed: u64, purpose: Purpose, chunk: u64) -> ChaCha8Rng {
    assert!(chunk <= MAX_CHUNK, "chunk {chunk} out of range");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((purpose as u64) << 48) | chunk);
    rng
}
