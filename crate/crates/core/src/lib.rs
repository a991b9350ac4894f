//! Initialization engine for LLM multi-agent systems.
//!
//! A run has two halves:
//!
//! 1. **Role generation** ([`generation`]): a planner, formatter and observer
//!    iterate for `K` rounds against a [`chat::ChatProvider`] and produce a
//!    pool of standardized [`generation::AgentSpec`] records.
//! 2. **Team selection** ([`selection`], [`selector`]): every team within the
//!    configured size bounds is scored on task relevance and Vendi-score
//!    diversity ([`objectives`]), the Pareto front is computed (exactly, or
//!    approximated with NSGA-II for large pools) and a selector model picks one
//!    team from the front.
//!
//! [`pipeline::Engine`] wires both halves together, persists a
//! [`pipeline::RunRecord`] per run and exports the chosen team.
//!
//! Scoring of candidate teams is data-parallel. With the `parallel` feature
//! (default) it runs on rayon; [`Execution::Sequential`] or building without the
//! feature keeps everything on the calling thread.

pub mod chat;
pub mod cli;
pub mod embedding;
mod error;
mod exec;
pub mod generation;
pub mod objectives;
pub mod pipeline;
pub mod selection;
pub mod selector;
pub mod synthetic;

pub use error::{Error, ErrorCategory, Result};
pub use exec::Execution;
