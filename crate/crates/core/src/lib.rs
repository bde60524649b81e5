//! Alert analysis toolkit for multi-step attack scenarios.
//!
//! The pipeline takes newline-delimited alerts from three IDS dialects
//! (Wazuh, Suricata, AMiner), normalizes them into a common schema,
//! labels them by attack phase, scores and ranks detectors by how
//! robustly they report attacks versus normal-operation noise, filters
//! low-value alerts, merges the survivors into meta-alerts, and extracts
//! per-victim attack graphs.
//!
//! Stages communicate through persisted stores (see [`store`]); each
//! module is usable on its own. With the default `parallel` feature the
//! hot loops run on rayon; disabling it falls back to sequential code
//! with identical output.

pub mod aggregation;
pub mod error;
pub mod filtering;
pub mod graph;
pub mod ingest;
pub mod labels;
pub mod model;
pub mod render;
pub mod scoring;
pub mod store;
pub mod synth;

pub use error::{Error, ParseError, Result};
pub use model::{Alert, AttackPhaseWindow, DetectorId, IdsSource, PhaseName, ScenarioLabels, TestWindow};

/// Caps the worker pool used by the parallel code paths. Returns false
/// when the pool was already fixed or the crate was built without the
/// `parallel` feature; callers treat that as advisory.
pub fn configure_workers(jobs: usize) -> bool {
    #[cfg(feature = "parallel")]
    {
        rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global().is_ok()
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = jobs;
        false
    }
}
