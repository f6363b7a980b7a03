//! Batch active learning with hallucinated-label gradient embeddings.
//!
//! The pieces, bottom-up:
//!
//! * [`embedding`]: gradient embeddings `(p - e_yhat) ⊗ z` and their norm identity.
//! * [`samplers`]: k-means++ seeding, a k-DPP swap chain, furthest-first
//!   k-center, uncertainty scores and uniform sampling.
//! * [`mlp`]: a two-layer MLP backend trained from scratch with Adam.
//! * [`al_loop`]: the pool-based query loop, including the ALBL bandit.
//! * [`diagnostics`], [`stats`], [`report`]: batch diversity measures and
//!   the pairwise comparison protocol.
//! * [`data`], [`config`], [`results`], [`cli`]: ingestion, configuration,
//!   persistence and the `badge` command line.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Adam and backprop loops walk several parallel buffers by index.
#![allow(clippy::needless_range_loop)]

pub mod al_loop;
pub mod cli;
pub mod config;
pub mod data;
pub mod diagnostics;
pub mod embedding;
pub mod error;
pub mod linalg;
pub mod mlp;
pub mod report;
pub mod results;
pub mod samplers;
pub mod stats;

pub use error::{Error, Result};
