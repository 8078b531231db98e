//! Decoder-only compressed CSI feedback for massive MIMO.
//!
//! Synthetic site-specific channels ([`channel`]) are compressed per user with
//! standardized Type-I/II codebooks ([`codebook`]); a convolutional refiner
//! ([`neural`]) trained on the achievable rate turns the reported CSI into
//! precoders ([`precoding`]); [`training`] wires everything into experiments and
//! [`io`] handles configuration, persistence and reports.

pub mod channel;
pub mod codebook;
pub mod error;
pub mod hash;
pub mod io;
pub mod neural;
pub mod parallel;
pub mod precoding;
pub mod training;

pub use error::{Error, Result};
