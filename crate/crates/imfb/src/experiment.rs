//! Multi-run experiment harness: round loop, metrics, and CSV persistence.
//!
//! Every random draw is keyed by (master_seed, purpose, run, round), so two
//! executions of the same config produce byte-identical outputs regardless
//! of worker scheduling.

use std::collections::BTreeSet;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::config::{ExperimentConfig, GraphSource, PolicyConfig, PolicyKind};
use crate::env::{
    self, effective_probabilities, simulate_cascade, CascadeResult, GroundTruthModel,
    PerturbationSpec, ENUMERATION_CAP,
};
use crate::error::{Error, Result};
use crate::graph::{random_graph, DirectedGraph, EdgeId};
use crate::oracle::{self, OracleSpec};
use crate::policy::{CucbPolicy, EpsGreedyPolicy, ImLinUcbPolicy, ImfbPolicy, Policy};
use crate::rng::{derive, Stream};

#[derive(Debug, Clone, PartialEq)]
pub struct RoundMetrics {
    pub round: usize,
    /// Realized activated-node count (seeds included).
    pub reward: u64,
    pub cumulative_reward: u64,
    /// Mean |p_hat - p*| over this round's observed edges.
    pub est_error: Option<f64>,
    pub theta_err: Option<f64>,
    pub beta_err: Option<f64>,
    pub regret_proxy: Option<f64>,
}

/// Per-round mean/std across runs; optional metrics aggregate over the
/// runs where they are present.
#[derive(Debug, Clone)]
pub struct AggregateRow {
    pub round: usize,
    pub reward: (f64, f64),
    pub cumulative_reward: (f64, f64),
    pub est_error: Option<(f64, f64)>,
    pub theta_err: Option<(f64, f64)>,
    pub beta_err: Option<(f64, f64)>,
    pub regret_proxy: Option<(f64, f64)>,
}

pub struct ExperimentOutcome {
    pub graph: DirectedGraph,
    pub ground_truth: GroundTruthModel,
    /// Exact optimal spread, available only under the enumeration caps.
    pub optimal_spread: Option<f64>,
    pub per_run: Vec<Vec<RoundMetrics>>,
    pub aggregate: Vec<AggregateRow>,
}

/// Per-round scaled-regret proxy: f(S_opt) - reward / (alpha * gamma).
pub fn regret_proxy(round_reward: f64, optimal_spread: f64, alpha_gamma: f64) -> f64 {
    optimal_spread - round_reward / alpha_gamma
}

/// Mean absolute estimation error over the observed edges, or None when
/// nothing was observed.
pub fn estimation_error(
    point_estimates: &[f64],
    p_star: &[f64],
    observed_edges: &[usize],
) -> Option<f64> {
    if observed_edges.is_empty() {
        return None;
    }
    let sum: f64 = observed_edges
        .iter()
        .map(|&e| (point_estimates[e] - p_star[e]).abs())
        .sum();
    Some(sum / observed_edges.len() as f64)
}

/// Observed nodes of a cascade: receiving endpoints of observed edges.
pub fn observed_nodes(graph: &DirectedGraph, cascade: &CascadeResult) -> BTreeSet<usize> {
    cascade
        .observed_edges
        .iter()
        .map(|&e| graph.receiving(EdgeId(e)))
        .collect()
}

/// One bandit round: UCB scores -> oracle -> cascade -> update. Returns the
/// intermediates for logging.
#[allow(clippy::too_many_arguments)]
pub fn play_round(
    policy: &mut dyn Policy,
    graph: &DirectedGraph,
    oracle: &OracleSpec,
    k: usize,
    p_star: &[f64],
    perturbation: &PerturbationSpec,
    master_seed: u64,
    run: u64,
    round: u64,
) -> Result<(BTreeSet<usize>, CascadeResult)> {
    let seeds = policy.select_seeds(
        graph,
        oracle,
        k,
        &mut derive(master_seed, Stream::Exploration, run, round),
    )?;
    let effective = effective_probabilities(
        p_star,
        perturbation,
        &mut derive(master_seed, Stream::Perturbation, run, round),
    );
    let cascade = simulate_cascade(
        graph,
        &effective,
        &seeds,
        &mut derive(master_seed, Stream::Cascade, run, round),
    )?;
    policy.update(graph, &cascade)?;
    Ok((seeds, cascade))
}

/// Build the graph and ground truth a config describes. Shared by all runs.
pub fn build_environment(
    config: &ExperimentConfig,
) -> Result<(DirectedGraph, GroundTruthModel)> {
    let graph = match &config.graph {
        GraphSource::Synthetic { nodes, edges } => random_graph(
            *nodes,
            *edges,
            &mut derive(config.generation.rng_seed, Stream::GroundTruth, 0, 0),
        )?,
        GraphSource::File { path, symmetrize } => {
            let file = std::fs::File::open(path)?;
            let (graph, _) = DirectedGraph::load_edge_list(std::io::BufReader::new(file))?;
            if *symmetrize {
                graph.symmetrized()
            } else {
                graph
            }
        }
    };
    env::generate_environment(
        &graph,
        &config.generation,
        &mut derive(config.generation.rng_seed, Stream::GroundTruth, 0, 1),
    )
}

pub fn build_policy(
    config: &PolicyConfig,
    graph: &DirectedGraph,
    ground_truth: &GroundTruthModel,
    master_seed: u64,
    run: u64,
) -> Result<Box<dyn Policy>> {
    let mut init_rng = derive(master_seed, Stream::PolicyInit, run, 0);
    Ok(match config.kind {
        PolicyKind::Imfb => Box::new(ImfbPolicy::new(graph, config.imfb.clone(), &mut init_rng)?),
        PolicyKind::Cucb => Box::new(CucbPolicy::new(graph)),
        PolicyKind::EpsGreedy => {
            Box::new(EpsGreedyPolicy::new(graph, config.eps_greedy.epsilon)?)
        }
        PolicyKind::Imlinucb => Box::new(ImLinUcbPolicy::new(
            graph,
            ground_truth,
            config.imlinucb.c_explore,
            config.imlinucb.lambda,
        )?),
    })
}

fn run_single(
    config: &ExperimentConfig,
    graph: &DirectedGraph,
    ground_truth: &GroundTruthModel,
    optimal_spread: Option<f64>,
    run: usize,
) -> Result<Vec<RoundMetrics>> {
    let annotate = |round: usize| {
        move |e: Error| Error::InRun {
            run,
            round,
            source: Box::new(e),
        }
    };
    let mut policy = build_policy(
        &config.policy,
        graph,
        ground_truth,
        config.master_seed,
        run as u64,
    )
    .map_err(annotate(0))?;
    let alpha_gamma = config.oracle.alpha * config.oracle.gamma;
    let mut metrics = Vec::with_capacity(config.rounds);
    let mut cumulative = 0u64;
    for round in 1..=config.rounds {
        let (_, cascade) = play_round(
            policy.as_mut(),
            graph,
            &config.oracle,
            config.k,
            &ground_truth.p_star,
            &config.perturbation,
            config.master_seed,
            run as u64,
            round as u64,
        )
        .map_err(annotate(round))?;
        let reward = cascade.activated_nodes.len() as u64;
        cumulative += reward;
        let est_error = estimation_error(
            &policy.point_estimates(graph),
            &ground_truth.p_star,
            &cascade.observed_edges,
        );
        let nodes = observed_nodes(graph, &cascade);
        let factor_errs = policy.factor_errors(ground_truth, &nodes);
        metrics.push(RoundMetrics {
            round,
            reward,
            cumulative_reward: cumulative,
            est_error,
            theta_err: factor_errs.map(|(t, _)| t),
            beta_err: factor_errs.map(|(_, b)| b),
            regret_proxy: optimal_spread.map(|o| regret_proxy(reward as f64, o, alpha_gamma)),
        });
    }
    Ok(metrics)
}

/// Run every configured run (in parallel), aggregate, and flush CSV output
/// plus the resolved config echo to `output_dir`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutcome> {
    config.validate()?;
    let (graph, ground_truth) = build_environment(config)?;

    let optimal_spread = compute_optimal_spread(&graph, &ground_truth, config.k)?;

    let per_run: Vec<Vec<RoundMetrics>> = (0..config.runs)
        .into_par_iter()
        .map(|r| run_single(config, &graph, &ground_truth, optimal_spread, r))
        .collect::<Result<_>>()?;
    let aggregate = aggregate_rows(&per_run, config.rounds);

    write_outputs(config, &per_run, &aggregate)?;

    Ok(ExperimentOutcome {
        graph,
        ground_truth,
        optimal_spread,
        per_run,
        aggregate,
    })
}

/// Exact optimal spread on the unperturbed environment, when the graph is
/// small enough to enumerate. Absent otherwise.
fn compute_optimal_spread(
    graph: &DirectedGraph,
    ground_truth: &GroundTruthModel,
    k: usize,
) -> Result<Option<f64>> {
    if graph.edge_count() > ENUMERATION_CAP || k == 0 {
        return Ok(None);
    }
    match oracle::select_seeds_exact(graph, &ground_truth.p_star, k) {
        Ok(seeds) => Ok(Some(env::exact_expected_spread(
            graph,
            &ground_truth.p_star,
            &seeds,
        )?)),
        Err(Error::SubsetCap { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

fn aggregate_rows(per_run: &[Vec<RoundMetrics>], rounds: usize) -> Vec<AggregateRow> {
    let mean_std = |values: &[f64]| -> (f64, f64) {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        (mean, var.sqrt())
    };
    let opt_mean_std = |values: Vec<f64>| -> Option<(f64, f64)> {
        if values.is_empty() {
            None
        } else {
            Some(mean_std(&values))
        }
    };
    (0..rounds)
        .map(|i| {
            let rows: Vec<&RoundMetrics> = per_run.iter().map(|r| &r[i]).collect();
            AggregateRow {
                round: i + 1,
                reward: mean_std(&rows.iter().map(|m| m.reward as f64).collect::<Vec<_>>()),
                cumulative_reward: mean_std(
                    &rows
                        .iter()
                        .map(|m| m.cumulative_reward as f64)
                        .collect::<Vec<_>>(),
                ),
                est_error: opt_mean_std(rows.iter().filter_map(|m| m.est_error).collect()),
                theta_err: opt_mean_std(rows.iter().filter_map(|m| m.theta_err).collect()),
                beta_err: opt_mean_std(rows.iter().filter_map(|m| m.beta_err).collect()),
                regret_proxy: opt_mean_std(rows.iter().filter_map(|m| m.regret_proxy).collect()),
            }
        })
        .collect()
}

fn fmt_opt(value: Option<f64>) -> String {
    value.map(|v| format!("{v:.9}")).unwrap_or_default()
}

fn fmt_opt_pair(value: Option<(f64, f64)>) -> String {
    match value {
        Some((mean, std)) => format!("{mean:.9},{std:.9}"),
        None => ",".to_string(),
    }
}

pub fn run_csv_path(output_dir: &Path, run: usize) -> PathBuf {
    output_dir.join(format!("run_{run}.csv"))
}

fn write_outputs(
    config: &ExperimentConfig,
    per_run: &[Vec<RoundMetrics>],
    aggregate: &[AggregateRow],
) -> Result<()> {
    let dir = &config.output_dir;
    std::fs::create_dir_all(dir)?;

    for (r, rows) in per_run.iter().enumerate() {
        let mut out = std::io::BufWriter::new(std::fs::File::create(run_csv_path(dir, r))?);
        writeln!(
            out,
            "round,reward,cum_reward,est_error,theta_err,beta_err,regret_proxy"
        )?;
        for m in rows {
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                m.round,
                m.reward,
                m.cumulative_reward,
                fmt_opt(m.est_error),
                fmt_opt(m.theta_err),
                fmt_opt(m.beta_err),
                fmt_opt(m.regret_proxy),
            )?;
        }
    }

    let mut out = std::io::BufWriter::new(std::fs::File::create(dir.join("aggregate.csv"))?);
    writeln!(
        out,
        "round,reward_mean,reward_std,cum_reward_mean,cum_reward_std,\
         est_error_mean,est_error_std,theta_err_mean,theta_err_std,\
         beta_err_mean,beta_err_std,regret_proxy_mean,regret_proxy_std"
    )?;
    for row in aggregate {
        writeln!(
            out,
            "{},{:.9},{:.9},{:.9},{:.9},{},{},{},{}",
            row.round,
            row.reward.0,
            row.reward.1,
            row.cumulative_reward.0,
            row.cumulative_reward.1,
            fmt_opt_pair(row.est_error),
            fmt_opt_pair(row.theta_err),
            fmt_opt_pair(row.beta_err),
            fmt_opt_pair(row.regret_proxy),
        )?;
    }

    std::fs::write(
        dir.join("config.json"),
        serde_json::to_string_pretty(&config.resolved_json()).expect("config serializes") + "\n",
    )?;
    Ok(())
}
