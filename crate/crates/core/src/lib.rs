//! Deterministic core for debiasing marketplace experiments.
//!
//! Markets here are bipartite matching linear programs: demand types meet
//! supply types over an admissible pair set, and the platform's objective is
//! the total matched value. This crate solves those programs exactly, exposes
//! their demand-side shadow prices, and builds the two treatment-effect
//! estimators that a platform could run on an experiment in such a market:
//! the naive difference-in-means (RCT) estimator and the shadow-price (SP)
//! estimator, in fluid and sampled forms, for the primary objective as well
//! as secondary metrics.
//!
//! Everything in this crate is pure and deterministic; randomness, file
//! formats, and scenario drivers live in the companion `matchsp` crate.
//!
//! `no_std` with `alloc`: the crate suits embedding in services that forbid
//! host dependencies. The optional `serde` feature derives `Serialize` (and
//! `Deserialize` for input types) on the public data types.

#![cfg_attr(not(test), no_std)]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod error;
pub mod estimators;
pub mod instance;
mod linalg;
pub mod lp;
pub mod market;
pub mod mat;
pub mod num;
pub mod secondary;

pub use error::{Error, Result};
pub use instance::{Edge, IntentDecomposition, MarketRates, MatchingInstance};
pub use mat::Mat;
