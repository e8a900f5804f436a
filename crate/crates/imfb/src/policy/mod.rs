//! Shared policy interface: select seeds, observe a cascade, update.
//!
//! Every policy (IMFB and the baselines) runs through the experiment loop
//! unchanged via this trait.

use std::collections::BTreeSet;

use rand_chacha::ChaCha8Rng;

use crate::env::{CascadeResult, GroundTruthModel};
use crate::error::Result;
use crate::graph::DirectedGraph;
use crate::oracle::OracleSpec;

pub mod baselines;
#[allow(clippy::module_inception)]
pub mod imfb;

pub use baselines::{CucbPolicy, EpsGreedyPolicy, ImLinUcbPolicy};
pub use imfb::{CbVariant, ImfbHyperparams, ImfbPolicy, UpdateMode};

pub trait Policy {
    fn name(&self) -> &'static str;

    /// Current round counter t (starts at 1, incremented by `update`).
    fn round(&self) -> usize;

    /// Optimistic per-edge scores fed to the oracle.
    fn edge_scores(&self, graph: &DirectedGraph) -> Vec<f64>;

    /// Per-edge point estimates (no exploration bonus), for estimation-error
    /// metrics.
    fn point_estimates(&self, graph: &DirectedGraph) -> Vec<f64>;

    /// Seed selection. Default: oracle over the optimistic scores. The rng
    /// is only consumed by policies with randomized selection.
    fn select_seeds(
        &self,
        graph: &DirectedGraph,
        oracle: &OracleSpec,
        k: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<BTreeSet<usize>> {
        let _ = rng;
        oracle.select(graph, &self.edge_scores(graph), k)
    }

    /// Consume one round of edge-level feedback and advance the round
    /// counter.
    fn update(&mut self, graph: &DirectedGraph, cascade: &CascadeResult) -> Result<()>;

    /// Mean L2 factor errors over the given observed nodes, where the
    /// policy estimates latent factors of matching dimension (IMFB only).
    fn factor_errors(
        &self,
        ground_truth: &GroundTruthModel,
        observed_nodes: &BTreeSet<usize>,
    ) -> Option<(f64, f64)> {
        let _ = (ground_truth, observed_nodes);
        None
    }
}
