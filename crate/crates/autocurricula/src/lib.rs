//! Open-ended task curricula: learning-progress sampling filtered by models
//! of task interestingness.
//!
//! The crate composes from the bottom up:
//!
//! - [`taskdsl`] — the environment-state task language: parsing, canonical
//!   serialization, completion checking, and affordance-gated generation.
//! - [`curriculum`] — learning-progress estimation and sampling weights.
//! - [`interestingness`] — models of interestingness that split tasks into
//!   interesting and boring, backed by oracles, embeddings, or a language
//!   model.
//! - [`fmclient`] — a language-model client with a persistent cache and a
//!   scriptable mock backend.
//! - [`proposer`] — prompt-driven generation of new tasks from an archive.
//! - [`world`] — synthetic learners and a craft-chain world to exercise
//!   curricula end to end.
//! - [`harness`] — experiment configs, conditions, statistics, and report
//!   emission.

pub mod curriculum;
pub mod error;
pub mod fmclient;
pub mod harness;
pub mod interestingness;
pub mod proposer;
pub mod taskdsl;
pub mod world;

pub use error::{Error, Result};
