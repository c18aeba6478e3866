//! Iterative ensemble training with anti-gradient control (IET-AGC) for
//! small denoising diffusion models, together with the auditing tools used
//! to measure training-data memorization.
//!
//! The crate is organized bottom-up:
//!
//! * [`schedule`], [`denoiser`], [`diffusion`]: the diffusion model itself.
//! * [`agc`]: per-timestep loss memory bank and loss masking.
//! * [`trainer`]: the single-model training loop and baseline methods.
//! * [`iet`]: dataset sharding, per-shard training and parameter averaging.
//! * [`audit`]: memorization extraction and the analysis procedures.
//! * [`data`], [`checkpoint`]: datasets and on-disk formats.
//! * [`experiment`]: config parsing and the command implementations behind
//!   the `ietagc` binary.

pub mod agc;
pub mod checkpoint;
pub mod audit;
pub mod data;
pub mod denoiser;
pub mod diffusion;
pub mod error;
pub mod experiment;
pub mod iet;
pub mod schedule;
pub mod seed;
pub mod trainer;

pub use error::{Error, Result};

/// The guide under `book/`, compiled here so its snippets run as doc-tests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/diffusion.md")]
    mod diffusion {}
    #[doc = include_str!("../../../book/src/agc.md")]
    mod agc {}
    #[doc = include_str!("../../../book/src/iet.md")]
    mod iet {}
    #[doc = include_str!("../../../book/src/audit.md")]
    mod audit {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
}
