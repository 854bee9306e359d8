//! Isolated-word recognition front end.
//!
//! The pipeline: acoustic feature extraction and energy endpointing
//! ([`audio`], [`endpoint`]), fuzzy profiling of per-segment speed,
//! emphasis, and accent ([`fuzzy`], [`filter`]), feature-domain
//! normalization that preserves the unfiltered profile as a side channel
//! ([`filter`]), and DTW template matching ([`dtw`], [`recognizer`]).
//! [`synth`] and [`eval`] provide the deterministic synthetic corpus and
//! the accuracy harness used to exercise the whole chain.

pub mod audio;
pub mod config;
pub mod dtw;
pub mod endpoint;
pub mod error;
pub mod eval;
pub mod filter;
pub mod fuzzy;
pub mod recognizer;
pub mod records;
pub mod synth;

pub use error::{Error, Result};
