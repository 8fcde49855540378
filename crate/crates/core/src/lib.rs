//! Action anticipation from streaming skeleton sequences.
//!
//! A stacked LSTM reads skeleton frames one at a time and emits, for every
//! frame, a distribution over the action classes plus background and a
//! class-agnostic actionness score. Training combines frame-wise
//! classification with two auxiliary terms: regression of each partial
//! observation onto a pretrained teacher's full-instance representation,
//! and binary actionness. Evaluation measures how early each action is
//! recognized.
//!
//! The guide in `book/` walks through each part with runnable snippets.

pub mod data;
pub mod error;
pub mod eval;
pub mod losses;
pub mod model;
pub mod checkpoint;
pub mod config;
pub mod rng;
pub mod sampling;
pub mod teacher;
pub mod train;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/overview.md")]
    mod overview {}
    #[doc = include_str!("../../../book/src/data.md")]
    mod data {}
    #[doc = include_str!("../../../book/src/sampling.md")]
    mod sampling {}
    #[doc = include_str!("../../../book/src/model.md")]
    mod model {}
    #[doc = include_str!("../../../book/src/losses.md")]
    mod losses {}
    #[doc = include_str!("../../../book/src/training.md")]
    mod training {}
    #[doc = include_str!("../../../book/src/metrics.md")]
    mod metrics {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
