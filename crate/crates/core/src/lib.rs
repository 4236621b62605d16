//! Constrained travel-plan tooling: a deterministic constraint oracle, a
//! plan → feedback → refine loop over pluggable model backends, evaluation
//! metrics, and fine-tuning corpus generation.

pub mod codec;
pub mod domain;
pub mod faft;
pub mod ingest;
pub mod metrics;
pub mod gateway;
pub mod oracle;
pub mod orchestrator;
pub mod scrub;
pub mod synth;

pub use codec::{parse_plan, render_plan, ParseDiagnostics};
pub use domain::*;
