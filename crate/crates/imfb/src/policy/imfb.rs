//! Factorization bandit: per-node ridge statistics over latent influence
//! and susceptibility factors, closed-form coordinate updates, and
//! determinant-based confidence widths.

use std::collections::BTreeSet;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::{CascadeResult, GroundTruthModel};
use crate::error::{Error, Result};
use crate::graph::{DirectedGraph, EdgeId};
use crate::policy::Policy;

/// How per-round feedback is folded into the statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UpdateMode {
    /// Rank-one accumulation with partner estimates frozen at observation
    /// time. O(1) per observation.
    Incremental,
    /// Keep the full observation history and re-run alternating coordinate
    /// descent from it every round. O(t) per round; for validation.
    ExactRecompute,
}

/// Which pairing of norms enters the confidence width.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CbVariant {
    /// Cross pairing with the 2q^(2t) decay term. Default.
    CrossPaired,
    /// Own-node pairing with a 2q^t decay term.
    OwnPaired,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImfbHyperparams {
    #[serde(default = "default_dim")]
    pub dim: usize,
    #[serde(default = "default_lambda")]
    pub lambda1: f64,
    #[serde(default = "default_lambda")]
    pub lambda2: f64,
    #[serde(default = "default_q")]
    pub q: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_update_mode")]
    pub update_mode: UpdateMode,
    #[serde(default = "default_cb_variant")]
    pub cb_variant: CbVariant,
}

fn default_dim() -> usize {
    20
}
fn default_lambda() -> f64 {
    1.0
}
fn default_q() -> f64 {
    0.9
}
fn default_delta() -> f64 {
    0.1
}
fn default_update_mode() -> UpdateMode {
    UpdateMode::Incremental
}
fn default_cb_variant() -> CbVariant {
    CbVariant::CrossPaired
}

impl Default for ImfbHyperparams {
    fn default() -> Self {
        Self {
            dim: default_dim(),
            lambda1: default_lambda(),
            lambda2: default_lambda(),
            q: default_q(),
            delta: default_delta(),
            update_mode: default_update_mode(),
            cb_variant: default_cb_variant(),
        }
    }
}

impl ImfbHyperparams {
    pub fn validate(&self) -> Result<()> {
        if self.dim < 1 {
            return Err(Error::InvalidArgument("dim must be >= 1".into()));
        }
        if self.lambda1 <= 0.0 || self.lambda2 <= 0.0 {
            return Err(Error::InvalidArgument(
                "lambda1 and lambda2 must be > 0".into(),
            ));
        }
        if !(self.q > 0.0 && self.q < 1.0) {
            return Err(Error::InvalidArgument("q must be in (0, 1)".into()));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::InvalidArgument(
                "delta must be in (0, 1)".into(),
            ));
        }
        Ok(())
    }
}

/// Per-node SPD statistic with its cached factorization.
struct NodeStat {
    /// lambda * I plus accumulated rank-one terms.
    gram: DMatrix<f64>,
    moment: DVector<f64>,
    chol: Cholesky<f64, Dyn>,
    ln_det: f64,
}

impl NodeStat {
    fn new(dim: usize, lambda: f64) -> Self {
        let gram = DMatrix::identity(dim, dim) * lambda;
        let chol = Cholesky::new(gram.clone()).expect("lambda I is SPD");
        let ln_det = ln_det_from_chol(&chol);
        Self {
            gram,
            moment: DVector::zeros(dim),
            chol,
            ln_det,
        }
    }

    fn refresh(&mut self) -> Result<()> {
        let chol = Cholesky::new(self.gram.clone()).ok_or_else(|| {
            Error::InvalidArgument("statistics matrix lost positive definiteness".into())
        })?;
        self.ln_det = ln_det_from_chol(&chol);
        self.chol = chol;
        Ok(())
    }

    fn solve(&self) -> DVector<f64> {
        self.chol.solve(&self.moment)
    }

    /// sqrt(x^T gram^{-1} x).
    fn inv_norm(&self, x: &DVector<f64>) -> f64 {
        x.dot(&self.chol.solve(x)).max(0.0).sqrt()
    }
}

fn ln_det_from_chol(chol: &Cholesky<f64, Dyn>) -> f64 {
    2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>()
}

pub struct ImfbPolicy {
    hp: ImfbHyperparams,
    /// theta-side statistics: A_v (ridge lambda2) and b_v.
    influence: Vec<NodeStat>,
    /// beta-side statistics: C_v (ridge lambda1) and d_v.
    susceptibility: Vec<NodeStat>,
    theta_hat: Vec<DVector<f64>>,
    beta_hat: Vec<DVector<f64>>,
    /// Nodes whose theta (resp. beta) has been solved from statistics at
    /// least once; the closed-form invariant applies to these.
    theta_solved: Vec<bool>,
    beta_solved: Vec<bool>,
    round: usize,
    /// (edge, outcome) history, retained only in exact-recompute mode.
    history: Vec<(usize, bool)>,
}

impl ImfbPolicy {
    /// Algorithm initialization: ridge identities and random unit-norm
    /// factor estimates.
    pub fn new<R: Rng>(graph: &DirectedGraph, hp: ImfbHyperparams, rng: &mut R) -> Result<Self> {
        hp.validate()?;
        let n = graph.node_count();
        let dim = hp.dim;
        let draw_unit = |rng: &mut R| {
            let mut v = DVector::from_fn(dim, |_, _| rng.random_range(0.0..1.0));
            let norm = v.norm();
            if norm > 0.0 {
                v /= norm;
            }
            v
        };
        let theta_hat: Vec<_> = (0..n).map(|_| draw_unit(rng)).collect();
        let beta_hat: Vec<_> = (0..n).map(|_| draw_unit(rng)).collect();
        Ok(Self {
            influence: (0..n).map(|_| NodeStat::new(dim, hp.lambda2)).collect(),
            susceptibility: (0..n).map(|_| NodeStat::new(dim, hp.lambda1)).collect(),
            theta_hat,
            beta_hat,
            theta_solved: vec![false; n],
            beta_solved: vec![false; n],
            round: 1,
            history: Vec::new(),
            hp,
        })
    }

    pub fn hyperparams(&self) -> &ImfbHyperparams {
        &self.hp
    }

    pub fn theta_hat(&self, v: usize) -> &DVector<f64> {
        &self.theta_hat[v]
    }

    pub fn beta_hat(&self, v: usize) -> &DVector<f64> {
        &self.beta_hat[v]
    }

    /// Total learned parameters: one theta and one beta per node.
    pub fn learned_parameter_count(&self) -> usize {
        2 * self.hp.dim * self.theta_hat.len()
    }

    /// alpha^theta_v: det term from C_v against the lambda2 prior.
    fn alpha_theta(&self, v: usize) -> f64 {
        self.alpha_term(self.susceptibility[v].ln_det, self.hp.lambda2)
    }

    /// alpha^beta_v: det term from A_v against the lambda1 prior.
    fn alpha_beta(&self, v: usize) -> f64 {
        self.alpha_term(self.influence[v].ln_det, self.hp.lambda1)
    }

    fn alpha_term(&self, ln_det: f64, lambda: f64) -> f64 {
        let d = self.hp.dim as f64;
        let q = self.hp.q;
        let log_arg = ln_det - (self.hp.delta.powi(2).ln() + d * lambda.ln());
        log_arg.max(0.0).sqrt() + (lambda * (1.0 - q) + 2.0 * q) / (lambda.sqrt() * (1.0 - q))
    }

    /// Confidence width CB_{e,t} for one edge at the current round.
    pub fn confidence_width(&self, graph: &DirectedGraph, edge: usize) -> f64 {
        let (g, r) = graph.endpoints(EdgeId(edge));
        let t = self.round as f64;
        let q = self.hp.q;
        match self.hp.cb_variant {
            CbVariant::CrossPaired => {
                self.alpha_beta(g) * self.influence[g].inv_norm(&self.beta_hat[r])
                    + self.alpha_theta(r) * self.susceptibility[r].inv_norm(&self.theta_hat[g])
                    + 2.0 * q.powf(2.0 * t)
            }
            CbVariant::OwnPaired => {
                self.alpha_beta(g) * self.influence[g].inv_norm(&self.beta_hat[g])
                    + self.alpha_theta(r) * self.susceptibility[r].inv_norm(&self.theta_hat[r])
                    + 2.0 * q.powf(t)
            }
        }
    }

    fn incremental_update(&mut self, graph: &DirectedGraph, cascade: &CascadeResult) -> Result<()> {
        // Rank-one terms use the estimates entering this round.
        let theta_in: Vec<DVector<f64>> = self.theta_hat.clone();
        let beta_in: Vec<DVector<f64>> = self.beta_hat.clone();
        let mut touched_theta = BTreeSet::new();
        let mut touched_beta = BTreeSet::new();
        for (e, y) in cascade.observations() {
            let (g, r) = graph.endpoints(EdgeId(e));
            let yv = if y { 1.0 } else { 0.0 };
            let stat = &mut self.influence[g];
            stat.gram.ger(1.0, &beta_in[r], &beta_in[r], 1.0);
            stat.moment.axpy(yv, &beta_in[r], 1.0);
            touched_theta.insert(g);
            let stat = &mut self.susceptibility[r];
            stat.gram.ger(1.0, &theta_in[g], &theta_in[g], 1.0);
            stat.moment.axpy(yv, &theta_in[g], 1.0);
            touched_beta.insert(r);
        }
        for &v in &touched_theta {
            self.influence[v].refresh()?;
            self.theta_hat[v] = self.influence[v].solve();
            self.theta_solved[v] = true;
        }
        for &v in &touched_beta {
            self.susceptibility[v].refresh()?;
            self.beta_hat[v] = self.susceptibility[v].solve();
            self.beta_solved[v] = true;
        }
        Ok(())
    }

    fn recompute_from_history(&mut self, graph: &DirectedGraph) -> Result<()> {
        let mut giving_nodes = BTreeSet::new();
        let mut receiving_nodes = BTreeSet::new();
        for &(e, _) in &self.history {
            let (g, r) = graph.endpoints(EdgeId(e));
            giving_nodes.insert(g);
            receiving_nodes.insert(r);
        }
        for sweep in 0..50 {
            let mut max_change: f64 = 0.0;
            // theta pass with beta frozen.
            for &v in &giving_nodes {
                let stat = &mut self.influence[v];
                stat.gram = DMatrix::identity(self.hp.dim, self.hp.dim) * self.hp.lambda2;
                stat.moment.fill(0.0);
            }
            for &(e, y) in &self.history {
                let (g, r) = graph.endpoints(EdgeId(e));
                let stat = &mut self.influence[g];
                stat.gram.ger(1.0, &self.beta_hat[r], &self.beta_hat[r], 1.0);
                stat.moment
                    .axpy(if y { 1.0 } else { 0.0 }, &self.beta_hat[r], 1.0);
            }
            for &v in &giving_nodes {
                self.influence[v].refresh()?;
                let next = self.influence[v].solve();
                max_change = max_change.max((&next - &self.theta_hat[v]).abs().max());
                self.theta_hat[v] = next;
                self.theta_solved[v] = true;
            }
            // beta pass with theta frozen.
            for &v in &receiving_nodes {
                let stat = &mut self.susceptibility[v];
                stat.gram = DMatrix::identity(self.hp.dim, self.hp.dim) * self.hp.lambda1;
                stat.moment.fill(0.0);
            }
            for &(e, y) in &self.history {
                let (g, r) = graph.endpoints(EdgeId(e));
                let stat = &mut self.susceptibility[r];
                stat.gram
                    .ger(1.0, &self.theta_hat[g], &self.theta_hat[g], 1.0);
                stat.moment
                    .axpy(if y { 1.0 } else { 0.0 }, &self.theta_hat[g], 1.0);
            }
            for &v in &receiving_nodes {
                self.susceptibility[v].refresh()?;
                let next = self.susceptibility[v].solve();
                max_change = max_change.max((&next - &self.beta_hat[v]).abs().max());
                self.beta_hat[v] = next;
                self.beta_solved[v] = true;
            }
            if max_change < 1e-8 && sweep > 0 {
                break;
            }
        }
        Ok(())
    }

    /// Max-norm residual of the closed-form identity A_v theta_v = b_v.
    pub fn theta_residual_inf(&self, v: usize) -> f64 {
        (&self.influence[v].gram * &self.theta_hat[v] - &self.influence[v].moment)
            .abs()
            .max()
    }

    pub fn beta_residual_inf(&self, v: usize) -> f64 {
        (&self.susceptibility[v].gram * &self.beta_hat[v] - &self.susceptibility[v].moment)
            .abs()
            .max()
    }

    pub fn theta_solved_nodes(&self) -> Vec<usize> {
        (0..self.theta_solved.len())
            .filter(|&v| self.theta_solved[v])
            .collect()
    }

    pub fn beta_solved_nodes(&self) -> Vec<usize> {
        (0..self.beta_solved.len())
            .filter(|&v| self.beta_solved[v])
            .collect()
    }

    /// Symmetry + Cholesky success for every statistics matrix.
    pub fn check_spd(&self) -> bool {
        let sym_ok = |m: &DMatrix<f64>| {
            let mut ok = true;
            for i in 0..m.nrows() {
                for j in 0..i {
                    ok &= (m[(i, j)] - m[(j, i)]).abs() < 1e-9;
                }
            }
            ok
        };
        self.influence
            .iter()
            .chain(self.susceptibility.iter())
            .all(|s| sym_ok(&s.gram) && Cholesky::new(s.gram.clone()).is_some())
    }

    /// sqrt(x^T A_v^{-1} x), for uncertainty-shrinkage checks.
    pub fn influence_inv_norm(&self, v: usize, x: &DVector<f64>) -> f64 {
        self.influence[v].inv_norm(x)
    }
}

impl Policy for ImfbPolicy {
    fn name(&self) -> &'static str {
        "imfb"
    }

    fn round(&self) -> usize {
        self.round
    }

    fn edge_scores(&self, graph: &DirectedGraph) -> Vec<f64> {
        (0..graph.edge_count())
            .map(|e| {
                let (g, r) = graph.endpoints(EdgeId(e));
                let raw = self.theta_hat[g].dot(&self.beta_hat[r]) + self.confidence_width(graph, e);
                raw.clamp(0.0, 1.0)
            })
            .collect()
    }

    fn point_estimates(&self, graph: &DirectedGraph) -> Vec<f64> {
        (0..graph.edge_count())
            .map(|e| {
                let (g, r) = graph.endpoints(EdgeId(e));
                self.theta_hat[g].dot(&self.beta_hat[r])
            })
            .collect()
    }

    fn update(&mut self, graph: &DirectedGraph, cascade: &CascadeResult) -> Result<()> {
        for &e in &cascade.observed_edges {
            if e >= graph.edge_count() {
                return Err(Error::EdgeOutOfRange(e, graph.edge_count()));
            }
        }
        match self.hp.update_mode {
            UpdateMode::Incremental => self.incremental_update(graph, cascade)?,
            UpdateMode::ExactRecompute => {
                self.history.extend(cascade.observations());
                if !self.history.is_empty() {
                    self.recompute_from_history(graph)?;
                }
            }
        }
        self.round += 1;
        Ok(())
    }

    fn factor_errors(
        &self,
        ground_truth: &GroundTruthModel,
        observed_nodes: &BTreeSet<usize>,
    ) -> Option<(f64, f64)> {
        if ground_truth.dim != self.hp.dim || observed_nodes.is_empty() {
            return None;
        }
        let mut theta_err = 0.0;
        let mut beta_err = 0.0;
        for &v in observed_nodes {
            let t_star = DVector::from_column_slice(&ground_truth.theta_star[v]);
            let b_star = DVector::from_column_slice(&ground_truth.beta_star[v]);
            theta_err += (&self.theta_hat[v] - t_star).norm();
            beta_err += (&self.beta_hat[v] - b_star).norm();
        }
        let n = observed_nodes.len() as f64;
        Some((theta_err / n, beta_err / n))
    }
}
