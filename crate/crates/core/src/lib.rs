//! Monitoring of Critical Infrastructure Facilities (CIFs) during disasters
//! from short social-media messages.
//!
//! The crate covers the full experiment pipeline:
//!
//! - [`cif_catalog`]: acquire and persist facility catalogs for an area of
//!   interest, from a live geocoding service or bundled fixtures.
//! - [`synth_corpus`]: build the labeled synthetic corpus (generation prompts,
//!   tag parsing, impact taxonomy, timeline dispersal, noise mixing,
//!   facility-name injection, ground-truth status derivation).
//! - [`llm_gateway`]: pluggable text-generation backends (HTTP JSON, scripted
//!   mock for offline runs).
//! - [`embed_index`]: deterministic and remote embedding providers plus a
//!   persisted cosine-similarity index with exact top-K search.
//! - [`retrieval`]: the three CIF query formulations and retrieval runs over
//!   a K grid with relevance judgments.
//! - [`metrics`]: AP@K / mAP@K, hit rate, precision/recall/F1, confusion
//!   matrices.
//! - [`zeroshot_classifier`]: zero-shot prompts for per-tweet impact, severity,
//!   and operational status, plus multi-tweet overall-status inference.
//! - [`pipeline`]: staged orchestration with resumable artifacts, seeded
//!   determinism, and structured reports.

pub mod cif_catalog;
pub mod embed_index;
pub mod error;
pub mod hashing;
pub mod llm_gateway;
pub mod metrics;
pub mod pipeline;
pub mod retrieval;
pub mod synth_corpus;
pub mod zeroshot_classifier;

pub use error::{CoreError, CoreResult};
