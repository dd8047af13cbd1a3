//! Core routing and evaluation logic for a multilingual ASR cascade.
//!
//! A cascade pairs a cheap base model with a library of stronger (often
//! commercial) backends. For every utterance the base model emits a
//! transcript hypothesis, a language prediction, a three-way invocation
//! token (`no` / `yes` / `uncertain`), and confidence signals. The router
//! either accepts the base transcript or invokes the best backend for the
//! predicted language; `uncertain` cases are resolved by a conjunctive
//! fusion rule over posterior probability, entropy, and an ordinal
//! transcription-confidence grade.
//!
//! This crate is `no_std`-compatible (alloc required) and holds only the
//! pure algorithmic pieces:
//!
//! - [`wer`] — word error rate, text normalization, controlled corruption
//! - [`confidence`] — posterior probability, entropy, fusion thresholds
//! - [`label`] — WER-interval invocation labels and training manifests
//! - [`route`] — the runtime routing decision
//! - [`backend`] — replay/synthetic/remote backends, best-per-language
//!   registry, invocation cost ledger
//! - [`eval`] — corpus-level metrics and baseline systems
//! - [`synth`] — deterministic synthetic corpora for desk-scale runs
//!
//! File formats, configuration, the CLI, and the HTTP service live in the
//! companion `cascade-cli` crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod backend;
pub mod confidence;
pub mod corpus;
pub mod eval;
pub mod label;
pub mod route;
pub mod synth;
pub mod wer;

pub use confidence::{ConfidenceLevel, ConfidenceSummary, FusionThresholds, FusionVerdict};
pub use corpus::{Corpus, Language, Utterance};
pub use label::InvocationLabel;
pub use route::{BaseModelOutput, EngineConfig, Route, RouteReason, RoutingDecision};
