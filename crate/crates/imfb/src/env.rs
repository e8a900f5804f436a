//! Environment: ground-truth latent factors, activation probabilities,
//! perturbations, and the independent-cascade simulator.
//!
//! The ground truth is the environment's secret: policies never see
//! `theta_star` / `beta_star` (the one deliberate exception is the
//! feature construction for the oracle-fed IMLinUCB baseline).

use std::collections::{BTreeSet, HashSet};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::DirectedGraph;

/// Default cap on edge count for exact spread enumeration (2^20 realizations).
pub const ENUMERATION_CAP: usize = 20;

/// How latent factors are sampled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GenerationMode {
    /// Every factor entry from U(0, 0.1).
    Uniform,
    /// Nodes grouped by descending out-degree; higher-degree groups draw
    /// from lower ranges, balancing the soft-degree distribution.
    Stratified,
    /// Top decile by out-degree gets low-range factors, the rest high-range,
    /// with optional removal of a fraction of cross-type edges.
    TwoType,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerationSpec {
    pub mode: GenerationMode,
    pub dim: usize,
    #[serde(default)]
    pub target_mean_p: Option<f64>,
    /// Number of degree strata in stratified mode.
    #[serde(default = "default_group_count")]
    pub group_count: usize,
    /// Fraction of cross-type edges removed in two-type mode.
    #[serde(default)]
    pub cross_type_edge_removal: f64,
    pub rng_seed: u64,
}

fn default_group_count() -> usize {
    10
}

impl GenerationSpec {
    pub fn validate(&self) -> Result<()> {
        if self.dim < 1 {
            return Err(Error::InvalidArgument("generation.dim must be >= 1".into()));
        }
        if let Some(t) = self.target_mean_p {
            if !(t > 0.0 && t <= 1.0) {
                return Err(Error::InvalidArgument(
                    "generation.target_mean_p must be in (0, 1]".into(),
                ));
            }
        }
        if self.group_count < 1 {
            return Err(Error::InvalidArgument(
                "generation.group_count must be >= 1".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.cross_type_edge_removal) {
            return Err(Error::InvalidArgument(
                "generation.cross_type_edge_removal must be in [0, 1]".into(),
            ));
        }
        Ok(())
    }
}

/// Per-round environment perturbations: activation uses
/// `clamp(c * p + eta, 0, 1)` with `eta ~ U(-a, a)` drawn fresh per edge.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationSpec {
    #[serde(default)]
    pub noise_halfwidth: f64,
    #[serde(default = "default_scale")]
    pub scale: f64,
    /// Draw one shared eta per round instead of per edge.
    #[serde(default)]
    pub per_round_global_noise: bool,
}

fn default_scale() -> f64 {
    1.0
}

impl Default for PerturbationSpec {
    fn default() -> Self {
        Self {
            noise_halfwidth: 0.0,
            scale: 1.0,
            per_round_global_noise: false,
        }
    }
}

impl PerturbationSpec {
    pub fn validate(&self) -> Result<()> {
        if self.noise_halfwidth < 0.0 {
            return Err(Error::InvalidArgument(
                "perturbation.noise_halfwidth must be >= 0".into(),
            ));
        }
        if self.scale <= 0.0 {
            return Err(Error::InvalidArgument(
                "perturbation.scale must be > 0".into(),
            ));
        }
        Ok(())
    }

    pub fn is_identity(&self) -> bool {
        self.noise_halfwidth == 0.0 && self.scale == 1.0
    }
}

/// True per-node factors and the derived per-edge activation probabilities.
#[derive(Debug, Clone)]
pub struct GroundTruthModel {
    pub dim: usize,
    pub theta_star: Vec<Vec<f64>>,
    pub beta_star: Vec<Vec<f64>>,
    pub p_star: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct GroundTruthDoc {
    dim: usize,
    theta_star: Vec<Vec<f64>>,
    beta_star: Vec<Vec<f64>>,
}

impl GroundTruthModel {
    fn from_factors(
        graph: &DirectedGraph,
        dim: usize,
        theta_star: Vec<Vec<f64>>,
        beta_star: Vec<Vec<f64>>,
    ) -> Self {
        let p_star = graph
            .edges()
            .iter()
            .map(|&(g, r)| dot(&theta_star[g], &beta_star[r]).clamp(0.0, 1.0))
            .collect();
        Self {
            dim,
            theta_star,
            beta_star,
            p_star,
        }
    }

    pub fn mean_p(&self) -> f64 {
        if self.p_star.is_empty() {
            return 0.0;
        }
        self.p_star.iter().sum::<f64>() / self.p_star.len() as f64
    }

    /// Soft degree of node `v`: sum of p* over its out-edges.
    pub fn soft_degree(&self, graph: &DirectedGraph, v: usize) -> f64 {
        graph.out_edges(v).iter().map(|&e| self.p_star[e]).sum()
    }

    /// Serialize factors only; p* is recomputed on load.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&GroundTruthDoc {
            dim: self.dim,
            theta_star: self.theta_star.clone(),
            beta_star: self.beta_star.clone(),
        })
        .expect("ground truth serializes")
    }

    pub fn from_json(graph: &DirectedGraph, text: &str) -> Result<Self> {
        let doc: GroundTruthDoc =
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if doc.theta_star.len() != graph.node_count() || doc.beta_star.len() != graph.node_count() {
            return Err(Error::Config(format!(
                "ground truth has {} nodes, graph has {}",
                doc.theta_star.len(),
                graph.node_count()
            )));
        }
        Ok(Self::from_factors(
            graph,
            doc.dim,
            doc.theta_star,
            doc.beta_star,
        ))
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(v: &mut [f64]) {
    let norm = dot(v, v).sqrt();
    if norm > 0.0 {
        for x in v {
            *x /= norm;
        }
    }
}

fn sample_factor<R: Rng>(dim: usize, lo: f64, hi: f64, rng: &mut R) -> Vec<f64> {
    let mut v: Vec<f64> = (0..dim).map(|_| rng.random_range(lo..hi)).collect();
    normalize(&mut v);
    v
}

/// Generate ground truth on `graph` per `spec`. In two-type mode with a
/// nonzero removal fraction the returned graph differs from the input.
pub fn generate_environment<R: Rng>(
    graph: &DirectedGraph,
    spec: &GenerationSpec,
    rng: &mut R,
) -> Result<(DirectedGraph, GroundTruthModel)> {
    spec.validate()?;
    let n = graph.node_count();

    // Per-node sampling range, by mode.
    let ranges: Vec<(f64, f64)> = match spec.mode {
        GenerationMode::Uniform => vec![(0.0, 0.1); n],
        GenerationMode::Stratified => {
            let order = nodes_by_descending_out_degree(graph);
            let g = spec.group_count.min(n.max(1));
            let mut ranges = vec![(0.0, 0.1); n];
            for (rank, &v) in order.iter().enumerate() {
                // Highest-degree nodes land in group 0 and draw from the
                // lowest range.
                let k = rank * g / n.max(1);
                ranges[v] = (k as f64 / g as f64, (k + 1) as f64 / g as f64);
            }
            ranges
        }
        GenerationMode::TwoType => {
            let order = nodes_by_descending_out_degree(graph);
            let top = (n / 10).max(1).min(n);
            let mut ranges = vec![(0.9, 1.0); n];
            for &v in order.iter().take(top) {
                ranges[v] = (0.0, 0.1);
            }
            ranges
        }
    };

    // Two-type edge removal happens before factor sampling so the p* mean
    // is computed on the graph actually used.
    let graph = if spec.mode == GenerationMode::TwoType && spec.cross_type_edge_removal > 0.0 {
        let order = nodes_by_descending_out_degree(graph);
        let top: HashSet<usize> = order.iter().take((n / 10).max(1).min(n)).copied().collect();
        let mut removed = HashSet::new();
        for (i, &(u, v)) in graph.edges().iter().enumerate() {
            if top.contains(&u) != top.contains(&v)
                && rng.random_range(0.0..1.0) < spec.cross_type_edge_removal
            {
                removed.insert(i);
            }
        }
        graph.without_edges(&removed)
    } else {
        graph.clone()
    };

    let theta_star: Vec<Vec<f64>> = (0..n)
        .map(|v| sample_factor(spec.dim, ranges[v].0, ranges[v].1, rng))
        .collect();
    let beta_star: Vec<Vec<f64>> = (0..n)
        .map(|v| sample_factor(spec.dim, ranges[v].0, ranges[v].1, rng))
        .collect();
    let (mut theta_star, mut beta_star) = (theta_star, beta_star);

    if let Some(target) = spec.target_mean_p {
        if graph.edge_count() == 0 {
            return Err(Error::Generation(
                "cannot hit a target mean probability on a graph with no edges".into(),
            ));
        }
        let dots: Vec<f64> = graph
            .edges()
            .iter()
            .map(|&(g, r)| dot(&theta_star[g], &beta_star[r]))
            .collect();
        let s = rescale_factor(&dots, target)?;
        for v in theta_star.iter_mut().chain(beta_star.iter_mut()) {
            for x in v {
                *x *= s;
            }
        }
    }

    let model = GroundTruthModel::from_factors(&graph, spec.dim, theta_star, beta_star);
    Ok((graph, model))
}

/// Common scalar applied to every factor vector so the mean p* over edges
/// hits `target`. theta and beta each get `s`, so p scales by s^2. Errors
/// when more than half the edges would clamp at 1.
fn rescale_factor(dots: &[f64], target: f64) -> Result<f64> {
    let mean_dot = dots.iter().sum::<f64>() / dots.len() as f64;
    if mean_dot <= 0.0 {
        return Err(Error::Generation(
            "mean factor dot product is zero; cannot rescale".into(),
        ));
    }
    let s = (target / mean_dot).sqrt();
    let clamped = dots.iter().filter(|&&d| s * s * d > 1.0).count();
    if 2 * clamped > dots.len() {
        return Err(Error::Generation(format!(
            "target mean {target} would clamp {clamped}/{} edges; choose a smaller target",
            dots.len()
        )));
    }
    Ok(s)
}

fn nodes_by_descending_out_degree(graph: &DirectedGraph) -> Vec<usize> {
    let degs = graph.degrees();
    let mut order: Vec<usize> = (0..graph.node_count()).collect();
    order.sort_by_key(|&v| (std::cmp::Reverse(degs[v].0), v));
    order
}

/// One edge's effective activation probability under the perturbation.
pub fn apply_perturbation<R: Rng>(p: f64, spec: &PerturbationSpec, rng: &mut R) -> f64 {
    let eta = if spec.noise_halfwidth > 0.0 {
        rng.random_range(-spec.noise_halfwidth..spec.noise_halfwidth)
    } else {
        0.0
    };
    (spec.scale * p + eta).clamp(0.0, 1.0)
}

/// Effective probabilities for one round. Noise is fresh per edge unless
/// `per_round_global_noise` is set.
pub fn effective_probabilities<R: Rng>(
    p_star: &[f64],
    spec: &PerturbationSpec,
    rng: &mut R,
) -> Vec<f64> {
    if spec.is_identity() {
        return p_star.to_vec();
    }
    if spec.per_round_global_noise && spec.noise_halfwidth > 0.0 {
        let eta = rng.random_range(-spec.noise_halfwidth..spec.noise_halfwidth);
        return p_star
            .iter()
            .map(|&p| (spec.scale * p + eta).clamp(0.0, 1.0))
            .collect();
    }
    p_star
        .iter()
        .map(|&p| apply_perturbation(p, spec, rng))
        .collect()
}

/// One round's diffusion outcome with edge-level feedback.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CascadeResult {
    /// Seeds first (sorted), then activation-wave order.
    pub activated_nodes: Vec<usize>,
    /// Out-edges of activated nodes, in observation order.
    pub observed_edges: Vec<usize>,
    /// Parallel to `observed_edges`.
    pub outcomes: Vec<bool>,
}

impl CascadeResult {
    pub fn observations(&self) -> impl Iterator<Item = (usize, bool)> + '_ {
        self.observed_edges.iter().copied().zip(self.outcomes.iter().copied())
    }
}

/// Breadth-first independent cascade. Every out-edge of an activated node
/// is observed and its Bernoulli outcome drawn exactly once; an edge into
/// an already-active node is still observed but cannot re-activate.
pub fn simulate_cascade<R: Rng>(
    graph: &DirectedGraph,
    probabilities: &[f64],
    seeds: &BTreeSet<usize>,
    rng: &mut R,
) -> Result<CascadeResult> {
    for &s in seeds {
        if s >= graph.node_count() {
            return Err(Error::NodeOutOfRange(s, graph.node_count()));
        }
    }
    debug_assert_eq!(probabilities.len(), graph.edge_count());

    let mut activated = vec![false; graph.node_count()];
    let mut activated_nodes: Vec<usize> = seeds.iter().copied().collect();
    for &s in seeds {
        activated[s] = true;
    }
    let mut observed_edges = Vec::new();
    let mut outcomes = Vec::new();

    let mut frontier: Vec<usize> = activated_nodes.clone();
    while !frontier.is_empty() {
        let mut next = BTreeSet::new();
        for &u in &frontier {
            for &e in graph.out_edges(u) {
                let y = rng.random_range(0.0..1.0) < probabilities[e];
                observed_edges.push(e);
                outcomes.push(y);
                let r = graph.receiving(crate::graph::EdgeId(e));
                if y && !activated[r] {
                    activated[r] = true;
                    next.insert(r);
                }
            }
        }
        frontier = next.iter().copied().collect();
        activated_nodes.extend(frontier.iter().copied());
    }

    Ok(CascadeResult {
        activated_nodes,
        observed_edges,
        outcomes,
    })
}

/// Exact expected spread by enumerating all 2^|E| live-edge realizations.
/// Tractable only for tiny graphs; the cap guards against blowups.
pub fn exact_expected_spread(
    graph: &DirectedGraph,
    probabilities: &[f64],
    seeds: &BTreeSet<usize>,
) -> Result<f64> {
    exact_expected_spread_capped(graph, probabilities, seeds, ENUMERATION_CAP)
}

pub fn exact_expected_spread_capped(
    graph: &DirectedGraph,
    probabilities: &[f64],
    seeds: &BTreeSet<usize>,
    cap: usize,
) -> Result<f64> {
    let m = graph.edge_count();
    if m > cap {
        return Err(Error::EnumerationCap { edges: m, cap });
    }
    if seeds.is_empty() {
        return Ok(0.0);
    }
    for &s in seeds {
        if s >= graph.node_count() {
            return Err(Error::NodeOutOfRange(s, graph.node_count()));
        }
    }
    let mut total = 0.0;
    for mask in 0u64..(1u64 << m) {
        let mut weight = 1.0;
        for e in 0..m {
            let p = probabilities[e];
            weight *= if mask >> e & 1 == 1 { p } else { 1.0 - p };
            if weight == 0.0 {
                break;
            }
        }
        if weight == 0.0 {
            continue;
        }
        total += weight * reachable_count(graph, mask, seeds) as f64;
    }
    Ok(total)
}

fn reachable_count(graph: &DirectedGraph, live_mask: u64, seeds: &BTreeSet<usize>) -> usize {
    let mut reached = vec![false; graph.node_count()];
    let mut stack: Vec<usize> = seeds.iter().copied().collect();
    for &s in seeds {
        reached[s] = true;
    }
    while let Some(u) = stack.pop() {
        for &e in graph.out_edges(u) {
            if live_mask >> e & 1 == 1 {
                let r = graph.receiving(crate::graph::EdgeId(e));
                if !reached[r] {
                    reached[r] = true;
                    stack.push(r);
                }
            }
        }
    }
    reached.iter().filter(|&&b| b).count()
}
