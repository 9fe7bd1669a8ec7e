//! Casing-collar recognition from CCL (casing collar locator) waveforms.
//!
//! The pipeline: normalize a waveform, cut collar-centered segments, augment
//! them into fixed-length windows with smoothed per-sample targets, train a
//! small 1D convolutional network (TAN or MAN) to emit a per-sample
//! probability map, then run sliding-window inference over whole waveforms,
//! threshold the map into collar marks and score them against annotations.

pub mod augment;
pub mod config;
pub mod error;
pub mod infer;
pub mod labeling;
pub mod nn;
pub mod signal;
pub mod synth;
pub mod train;

pub use error::{Error, Result};
