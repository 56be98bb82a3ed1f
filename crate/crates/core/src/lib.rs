//! Similar-ticket retrieval for IT support desks.
//!
//! Given a new support ticket, rank previously resolved tickets by textual
//! similarity using one of several interchangeable representations
//! (keyword labels, TF-IDF, BM25, LDA topic mixtures, averaged word vectors,
//! externally computed sentence embeddings, or a random baseline).
//!
//! The crate is organised as a pipeline:
//!
//! - [`corpus`] loads, validates, redacts and splits ticket files.
//! - [`textprep`] normalises and tokenises text.
//! - [`techniques`] fits models and turns text into [`techniques::Representation`]s.
//! - [`index`] scores representations and selects the top-k candidates.
//! - [`eval`] derives ground truth from labelled card layouts and computes
//!   precision / at-least-one accuracy per technique.
//! - [`service`] is the long-running recommendation server with its
//!   snapshot + journal store.
//! - [`cli`] wires everything to the `ticketsim` binary.

pub mod cli;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod index;
pub mod model;
pub mod service;
pub mod techniques;
pub mod textprep;

pub use error::{Error, ErrorClass, Result};

/// Seed used everywhere a seed is not given explicitly.
pub const DEFAULT_SEED: u64 = 13;

/// Number of recommendations returned per query.
pub const DEFAULT_K: usize = 5;
