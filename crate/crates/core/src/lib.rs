//! Two-tier multiple instance learning with pseudo-bag feature distillation.
//!
//! Slides are bags of precomputed patch features. A gated-attention MIL model
//! (Tier-1) is trained on random pseudo-bags; per-instance class probabilities
//! are recovered from it by gradient-weighted attribution and used to distill
//! one feature per pseudo-bag, and a second attention MIL model (Tier-2)
//! classifies the slide from the distilled features.

pub mod abmil;
pub mod attribution;
pub mod cli;
pub mod data;
pub mod diffcore;
pub mod dtfd;
mod error;
pub mod metrics;

pub use error::{Error, Result};
