//! Noise-injection data augmentation for single-asset portfolio learning.
//!
//! The crate covers the whole loop: simulate or load prices ([`procgen`],
//! [`dataio`]), perturb them ([`augment`]), derive closed-form positions
//! ([`portfolio`]) and their utilities ([`utility`]), tune the augmentation
//! strength ([`metaopt`]), train a small network ([`nntrain`]) and evaluate
//! it out of sample ([`backtest`], [`experiment`]).

pub mod augment;
pub mod backtest;
pub mod dataio;
pub mod error;
pub mod experiment;
pub mod metaopt;
pub mod nntrain;
pub mod noise;
pub mod portfolio;
pub mod procgen;
pub mod stats;
pub mod utility;

pub use error::{Error, Result};
