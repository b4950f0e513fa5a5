//! Conditional denoising-diffusion generation of mobile UI layouts.
//!
//! A layout of up to [`layout::N_MAX`] components is encoded as a fixed
//! `16 × 16` tensor, noised by a linear-β forward process and recovered by a
//! learned noise predictor conditioned on keywords and a coarse sketch.
//! Design rules (alignment, spacing, colour harmony) act both as a training
//! penalty and as a projection applied during sampling.

pub mod cli;
pub mod condition;
pub mod config;
pub mod dataio;
pub mod denoiser;
pub mod diffusion;
pub mod error;
pub mod layout;
pub mod metrics;
pub mod raster;
pub mod rng;
pub mod rules;
pub mod server;

pub use condition::Condition;
pub use denoiser::{DenoiserParams, TrainConfig};
pub use diffusion::{DiffusionSchedule, SamplerConfig};
pub use error::{Error, Result};
pub use layout::{Component, ComponentType, Layout, LayoutTensor};
pub use rules::RuleConfig;
