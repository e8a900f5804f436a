//! Desk-scale laboratory for online influence maximization with edge-level
//! feedback: factorized bandit policy, classical baselines, seeded cascade
//! simulation, and a reproducible experiment harness.

pub mod config;
pub mod env;
pub mod error;
pub mod experiment;
pub mod graph;
pub mod oracle;
pub mod policy;
pub mod rng;

pub use config::{ExperimentConfig, GraphSource, PolicyConfig, PolicyKind};
pub use env::{
    CascadeResult, GenerationMode, GenerationSpec, GroundTruthModel, PerturbationSpec,
};
pub use error::{Error, Result};
pub use graph::{DirectedGraph, EdgeId};
pub use oracle::{OracleKind, OracleSpec};
pub use policy::{
    CbVariant, CucbPolicy, EpsGreedyPolicy, ImLinUcbPolicy, ImfbHyperparams, ImfbPolicy, Policy,
    UpdateMode,
};
pub use rng::Stream;
