//! Seed-selection oracles behind one interface: DegreeDiscountIC for
//! production use and exact brute force for tiny test graphs.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::env;
use crate::error::{Error, Result};
use crate::graph::DirectedGraph;

/// Default cap on C(|V|, K) for the exact oracle.
pub const SUBSET_CAP: u64 = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OracleKind {
    DegreeDiscount,
    Exact,
}

/// Which oracle to use and the (alpha, gamma) approximation constants it is
/// credited with when scaling regret. The exact oracle is (1, 1).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSpec {
    #[serde(default = "default_kind")]
    pub kind: OracleKind,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
}

fn default_kind() -> OracleKind {
    OracleKind::DegreeDiscount
}

fn default_alpha() -> f64 {
    1.0
}

fn default_gamma() -> f64 {
    1.0 - 1.0 / std::f64::consts::E
}

impl Default for OracleSpec {
    fn default() -> Self {
        Self {
            kind: default_kind(),
            alpha: default_alpha(),
            gamma: default_gamma(),
        }
    }
}

impl OracleSpec {
    pub fn exact() -> Self {
        Self {
            kind: OracleKind::Exact,
            alpha: 1.0,
            gamma: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::InvalidArgument("oracle.alpha must be in [0, 1]".into()));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::InvalidArgument("oracle.gamma must be in (0, 1]".into()));
        }
        Ok(())
    }

    pub fn select(
        &self,
        graph: &DirectedGraph,
        probabilities: &[f64],
        k: usize,
    ) -> Result<BTreeSet<usize>> {
        match self.kind {
            OracleKind::DegreeDiscount => select_seeds_degree_discount(graph, probabilities, k),
            OracleKind::Exact => select_seeds_exact(graph, probabilities, k),
        }
    }
}

/// DegreeDiscountIC generalized to heterogeneous probabilities. Node v with
/// out-degree d_v, t_v already-selected in-neighbors, and mean probability
/// pbar_v over the edges from those selected in-neighbors scores
/// `d_v - 2 t_v - (d_v - t_v) * t_v * pbar_v`. Ties break on lowest id.
pub fn select_seeds_degree_discount(
    graph: &DirectedGraph,
    probabilities: &[f64],
    k: usize,
) -> Result<BTreeSet<usize>> {
    let n = graph.node_count();
    let k = k.min(n);
    let out_degree: Vec<f64> = (0..n).map(|v| graph.out_edges(v).len() as f64).collect();
    let mut selected_in = vec![0.0f64; n]; // t_v
    let mut p_sum = vec![0.0f64; n]; // sum of p over edges from selected in-neighbors
    let mut score: Vec<f64> = out_degree.clone();
    let mut chosen = BTreeSet::new();

    for _ in 0..k {
        let u = (0..n)
            .filter(|v| !chosen.contains(v))
            .max_by(|&a, &b| {
                score[a]
                    .partial_cmp(&score[b])
                    .unwrap()
                    .then(b.cmp(&a)) // lower id wins ties
            })
            .expect("k <= node count");
        chosen.insert(u);
        for &e in graph.out_edges(u) {
            let v = graph.receiving(crate::graph::EdgeId(e));
            if chosen.contains(&v) {
                continue;
            }
            selected_in[v] += 1.0;
            p_sum[v] += probabilities[e];
            let t = selected_in[v];
            let d = out_degree[v];
            let p_bar = p_sum[v] / t;
            score[v] = d - 2.0 * t - (d - t) * t * p_bar;
        }
    }
    Ok(chosen)
}

/// Brute-force argmax of exact expected spread over all K-subsets.
/// Lexicographically first subset wins ties.
pub fn select_seeds_exact(
    graph: &DirectedGraph,
    probabilities: &[f64],
    k: usize,
) -> Result<BTreeSet<usize>> {
    let n = graph.node_count();
    let k = k.min(n);
    if k == 0 {
        return Ok(BTreeSet::new());
    }
    let combos = binomial(n as u64, k as u64);
    if combos > SUBSET_CAP {
        return Err(Error::SubsetCap {
            n,
            k,
            cap: SUBSET_CAP,
        });
    }
    let mut best: Option<(f64, BTreeSet<usize>)> = None;
    let mut subset: Vec<usize> = (0..k).collect();
    loop {
        let seeds: BTreeSet<usize> = subset.iter().copied().collect();
        let spread = env::exact_expected_spread(graph, probabilities, &seeds)?;
        // Strict improvement keeps the lexicographically first maximizer.
        if best.as_ref().map_or(true, |(b, _)| spread > *b + 1e-12) {
            best = Some((spread, seeds));
        }
        if !next_combination(&mut subset, n) {
            break;
        }
    }
    Ok(best.expect("at least one subset").1)
}

fn next_combination(subset: &mut [usize], n: usize) -> bool {
    let k = subset.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if subset[i] < n - k + i {
            subset[i] += 1;
            for j in i + 1..k {
                subset[j] = subset[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut result: u64 = 1;
    for i in 0..k {
        result = result.saturating_mul(n - i) / (i + 1);
        if result > SUBSET_CAP * 1000 {
            return u64::MAX;
        }
    }
    result
}
