//! Latent-action imitation learning on tabular MDPs.
//!
//! The crate implements a three-stage pipeline and the exact theory that
//! justifies it:
//!
//! 1. **Pretraining** — a factored transition model `T(s'|s,a) ≈ T_Z(s'|s, φ(s,a))`
//!    is fit on cheap, suboptimal offline data, either by exact per-state
//!    clustering of transition rows ([`reparam`]), by a contrastive
//!    energy-based model ([`ebm`]), or by a random-feature linear model.
//! 2. **Latent imitation** — an expert dataset is reparametrized through `φ`
//!    and a policy is cloned in the latent action space; a decoder learned
//!    from the offline data maps latent actions back to raw ones ([`latent`]).
//! 3. **Verification** — on tabular instances every quantity in the
//!    suboptimality bounds is computable exactly, so the bounds are checked
//!    number-for-number rather than approximately ([`theory`]).
//!
//! The crate is organized examples-first: each major capability has a
//! runnable program under `examples/`, and `tests/acceptance.rs` pins the
//! end-to-end claims. A thin `trail` binary exposes the same pipeline as
//! subcommands (`gen-data`, `pretrain`, `imitate`, `eval`, `verify-bound`,
//! `sweep`, `report`).

pub mod baselines;
pub mod config;
pub mod data;
pub mod ebm;
pub mod envs;
mod error;
pub mod latent;
pub mod mdp;
pub mod nn;
pub mod pipeline;
pub mod reparam;
pub mod report;
pub mod rng;
pub mod theory;

pub use error::{Error, Result};
