//! Benchmark generators and sample-level transformations.
//!
//! * [`family`]: random family trees over `parentOf` and genders.
//! * [`countries`]: the S1/S2/S3 located-in completion tasks over a world map.
//! * [`sampling`]: BFS subgraph extraction, negative sampling and the
//!   missing-fact / conflicting-fact corruptions.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::kb::{LabeledQuery, SampleKb};

pub mod countries;
pub mod family;
pub mod sampling;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DatagenError {
    #[error("invalid generator configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("world too small: {0}")]
    WorldTooSmall(&'static str),
    #[error("world data is inconsistent: {0}")]
    BadWorld(alloc::string::String),
    #[error("triple dump is empty")]
    EmptyDump,
    #[error("start individual is not in the dump")]
    UnknownStart,
    #[error("sample has no facts")]
    EmptySample,
    #[error("every fact of the sample is inferable from the others")]
    NoRemovableFact,
}

/// A sample together with its oracle-labeled queries.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledSample {
    pub kb: SampleKb,
    pub queries: alloc::vec::Vec<LabeledQuery>,
}

/// The independent random stream for sample `index` of a run seeded with
/// `seed`.
pub fn stream_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}
