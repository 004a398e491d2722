//! Streaming dense retrieval with session-sharded indexes and
//! regularized-replay model updating.
//!
//! The pipeline is: build or load a multi-domain [`corpus::Corpus`], assign
//! its test queries and documents to discrete sessions with
//! [`stream_sim::build_stream`], then for each session fine-tune the dual
//! encoder under one of five updating strategies ([`trainer`]), index the
//! session's documents into an immutable shard ([`vindex`]), and evaluate
//! retrieval over all shards built so far ([`evalkit`]). The
//! [`orchestrator`] ties the loop together and writes reports.
//!
//! Numeric kernels are generic over [`Scalar`]; the pipeline and all file
//! formats use [`Real`] (`f64`).

pub mod corpus;
pub mod encoder;
pub mod evalkit;
pub mod io_util;
pub mod orchestrator;
pub mod special;
pub mod stream_sim;
pub mod trainer;
pub mod vindex;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Scalar type for the numeric kernels (encoder, losses, optimizer,
/// quantization). `f32` and `f64` both satisfy it; the pipeline runs in
/// `f64` so that gradient checks against central finite differences are
/// tight.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + std::fmt::Debug + std::fmt::Display + Send + Sync + 'static
{
    fn from_real(v: f64) -> Self {
        <Self as FromPrimitive>::from_f64(v).expect("f64 conversion")
    }
    fn to_real(self) -> f64 {
        <Self as ToPrimitive>::to_f64(&self).expect("f64 conversion")
    }
}

impl<T> Scalar for T where
    T: Float
        + FromPrimitive
        + ToPrimitive
        + std::fmt::Debug
        + std::fmt::Display
        + Send
        + Sync
        + 'static
{
}

/// Concrete scalar used by the pipeline and the on-disk formats.
pub type Real = f64;

/// Concrete model alias used by the orchestrator and CLI.
pub type EncoderModel = encoder::EncoderModel<Real>;
/// Concrete shard alias used by the orchestrator and CLI.
pub type IndexShard = vindex::IndexShard<Real>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("validation error: {0}")]
    Validation(String),
    #[error("format error at offset {offset}: {msg}")]
    Format { offset: u64, msg: String },
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("domain error: {0}")]
    DomainError(String),
    #[error("undefined result: {0}")]
    Undefined(String),
    #[error("training aborted: {0}")]
    Training(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

/// SplitMix64 step, used to derive independent sub-seeds from one run seed.
pub fn derive_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
