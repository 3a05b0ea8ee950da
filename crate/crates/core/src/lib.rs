//! Faithfulness-through-counterfactuals (FTC) evaluation for free-text NLI explanations.

pub mod error;
pub mod freelogic;
pub mod metrics;
pub mod model;
pub mod modelio;
pub mod pipeline;
pub mod report;
pub mod rewrite;
pub mod sensitivity;
pub mod stats;
pub mod synth;
pub mod text;
