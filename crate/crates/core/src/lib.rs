//! Desk-scale laboratory for joint distribution matching between two
//! low-dimensional domains.
//!
//! The crate trains a pair of auto-encoders (`G1∘E1`, `G2∘E2`) with a shared
//! latent space so that the cross-compositions `G2∘E1` and `G1∘E2` become
//! translation maps between domains, driven by reconstruction and adversarial
//! losses. Alongside the trainer it ships exact discrete optimal-transport
//! solvers (Hungarian assignment and a transportation simplex) plus an
//! entropic approximation, which serve both as evaluation metrics and as an
//! independent check that the transport cost between the two induced joint
//! distributions decomposes into the sum of two marginal transport costs.
//!
//! Everything is seed-deterministic: same config + seed reproduces training
//! bit for bit, and checkpoints resume mid-run without divergence.

pub mod autodiff;
pub mod data;
pub mod error;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod nn;
pub mod ot;
pub mod synthesis;
pub mod trainer;

pub use error::{Error, Result};
