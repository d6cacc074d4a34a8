//! Control plane for cascaded simultaneous speech translation.
//!
//! A streaming ASR controller commits words once consecutive hypotheses agree,
//! a streaming MT controller translates them with sentence-level history and
//! RALCP beam voting, and the metrics module scores the resulting emission
//! log. Model inference sits behind the [`backends`] traits.

pub mod asr_stream;
pub mod backends;
pub mod clock;
pub mod datagen;
pub mod error;
pub mod jsonl;
pub mod metrics;
pub mod mt_stream;
pub mod pipeline;
pub mod policy;
pub mod textnorm;
pub mod types;

pub use error::{Error, ErrorKind, Result};
