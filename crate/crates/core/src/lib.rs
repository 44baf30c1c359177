//! Critical-step GRPO for masked generative token models.
//!
//! The crate bundles a procedural grid-image world with verifiable rewards
//! ([`world`]), a small bidirectional transformer with its own reverse-mode
//! autodiff ([`model`]), MaskGIT-style iterative decoding with entropy-routed
//! sampling ([`sampler`]), critical-step selection ([`css`]), the GRPO trainer
//! ([`rl`]), masked-token pretraining ([`pretrain`]) and evaluation
//! ([`eval`]). [`commands`] wires them into the `maskfocus` binary.

pub mod commands;
pub mod config;
pub mod css;
pub mod error;
pub mod eval;
pub mod harness;
pub mod model;
pub mod pretrain;
pub mod rl;
pub mod rng;
pub mod sampler;
pub mod world;

pub use error::{Error, Result};
