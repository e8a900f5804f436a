//! Command-line front end. Thin and synchronous: parallelism lives in the
//! experiment module.
//!
//! Exit codes: 0 success, 2 usage/config, 3 environment/generation,
//! 4 runtime.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use imfb::env::{self, GenerationMode, GenerationSpec};
use imfb::experiment::run_experiment;
use imfb::graph::{random_graph, DirectedGraph};
use imfb::rng::{derive, Stream};
use imfb::{config, Error};

#[derive(Parser)]
#[command(name = "imfb", about = "Online influence maximization laboratory", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment from a JSON config and write per-run CSV metrics.
    Run {
        /// Config file path.
        #[arg(short, long)]
        config: PathBuf,
        /// Override a config value: dotted.path=value (repeatable).
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Generate a graph and ground-truth model to disk.
    Generate(GenerateArgs),
    /// Print statistics (n, m, degree quantiles) for an edge list.
    Inspect {
        path: PathBuf,
    },
    /// Parse and semantically check a config; print the resolved echo.
    Validate {
        /// Config file path.
        #[arg(short, long)]
        config: PathBuf,
        /// Override a config value: dotted.path=value (repeatable).
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
}

#[derive(Args)]
struct GenerateArgs {
    /// Node count for a synthetic graph (requires --edges).
    #[arg(long, conflicts_with = "input")]
    nodes: Option<usize>,
    /// Edge count for a synthetic graph.
    #[arg(long, requires = "nodes")]
    edges: Option<usize>,
    /// Load the graph from an edge list instead of generating one.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Duplicate every loaded edge in both directions.
    #[arg(long, requires = "input")]
    symmetrize: bool,
    #[arg(long, value_enum, default_value = "uniform")]
    mode: ModeArg,
    /// Latent factor dimension.
    #[arg(long, default_value_t = 20)]
    dim: usize,
    /// Rescale factors so the mean activation probability hits this value.
    #[arg(long)]
    target_mean_p: Option<f64>,
    /// Degree strata count (stratified mode).
    #[arg(long, default_value_t = 10)]
    group_count: usize,
    /// Fraction of cross-type edges removed (two-type mode).
    #[arg(long, default_value_t = 0.0)]
    cross_type_edge_removal: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output prefix; writes <prefix>.edges and <prefix>.ground_truth.json.
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum ModeArg {
    Uniform,
    Stratified,
    TwoType,
}

impl From<ModeArg> for GenerationMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Uniform => GenerationMode::Uniform,
            ModeArg::Stratified => GenerationMode::Stratified,
            ModeArg::TwoType => GenerationMode::TwoType,
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::InvalidArgument(_) => 2,
        Error::Generation(_) => 3,
        Error::InRun { source, .. } => exit_code(source),
        _ => 4,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, overrides } => cmd_run(&config, &overrides),
        Command::Generate(args) => cmd_generate(&args),
        Command::Inspect { path } => cmd_inspect(&path),
        Command::Validate { config, overrides } => cmd_validate(&config, &overrides),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn cmd_run(config_path: &PathBuf, overrides: &[String]) -> Result<(), Error> {
    let config = config::load_config(config_path, overrides)?;
    match run_experiment(&config) {
        Ok(outcome) => {
            let last = outcome.aggregate.last().expect("rounds >= 1");
            println!(
                "final mean cumulative reward {:.3} \u{b1} {:.3} ({} runs, {} rounds, policy {:?})",
                last.cumulative_reward.0,
                last.cumulative_reward.1,
                config.runs,
                config.rounds,
                config.policy.kind,
            );
            Ok(())
        }
        Err(e) => {
            // Don't leave a half-written output directory behind.
            let _ = std::fs::remove_dir_all(&config.output_dir);
            Err(e)
        }
    }
}

fn cmd_generate(args: &GenerateArgs) -> Result<(), Error> {
    let spec = GenerationSpec {
        mode: args.mode.into(),
        dim: args.dim,
        target_mean_p: args.target_mean_p,
        group_count: args.group_count,
        cross_type_edge_removal: args.cross_type_edge_removal,
        rng_seed: args.seed,
    };
    spec.validate()?;
    let base = match (&args.input, args.nodes, args.edges) {
        (Some(path), _, _) => {
            let file = std::fs::File::open(path)?;
            let (graph, report) = DirectedGraph::load_edge_list(std::io::BufReader::new(file))?;
            if report.self_loops_dropped + report.duplicates_deduped > 0 {
                eprintln!(
                    "dropped {} self-loops, {} duplicate edges",
                    report.self_loops_dropped, report.duplicates_deduped
                );
            }
            if args.symmetrize {
                graph.symmetrized()
            } else {
                graph
            }
        }
        (None, Some(n), Some(m)) => {
            random_graph(n, m, &mut derive(args.seed, Stream::GroundTruth, 0, 0))?
        }
        _ => {
            return Err(Error::InvalidArgument(
                "provide either --input or both --nodes and --edges".into(),
            ))
        }
    };
    let (graph, model) = env::generate_environment(
        &base,
        &spec,
        &mut derive(args.seed, Stream::GroundTruth, 0, 1),
    )?;

    let edges_path = args.out.with_extension("edges");
    let gt_path = args.out.with_extension("ground_truth.json");
    graph.write_edge_list(std::fs::File::create(&edges_path)?)?;
    std::fs::write(&gt_path, model.to_json() + "\n")?;

    let soft: Vec<f64> = (0..graph.node_count())
        .map(|v| model.soft_degree(&graph, v))
        .collect();
    let hard: Vec<f64> = (0..graph.node_count())
        .map(|v| graph.out_edges(v).len() as f64)
        .collect();
    println!(
        "graph: {} nodes, {} edges -> {}",
        graph.node_count(),
        graph.edge_count(),
        edges_path.display()
    );
    println!("mean p*: {:.6}", model.mean_p());
    println!(
        "soft degree: mean {:.4}, max {:.4}, cv {:.4} (hard-degree cv {:.4})",
        mean(&soft),
        soft.iter().cloned().fold(0.0, f64::max),
        coefficient_of_variation(&soft),
        coefficient_of_variation(&hard),
    );
    println!("ground truth -> {}", gt_path.display());
    Ok(())
}

fn cmd_inspect(path: &PathBuf) -> Result<(), Error> {
    let file = std::fs::File::open(path)?;
    let (graph, report) = DirectedGraph::load_edge_list(std::io::BufReader::new(file))?;
    println!("nodes: {}", graph.node_count());
    println!("edges: {}", graph.edge_count());
    if report.self_loops_dropped + report.duplicates_deduped > 0 {
        println!(
            "dropped: {} self-loops, {} duplicates",
            report.self_loops_dropped, report.duplicates_deduped
        );
    }
    for (label, pick) in [("out", 0usize), ("in", 1usize)] {
        let mut degs: Vec<usize> = graph
            .degrees()
            .iter()
            .map(|d| if pick == 0 { d.0 } else { d.1 })
            .collect();
        degs.sort_unstable();
        let q = |f: f64| degs[((degs.len() - 1) as f64 * f).round() as usize];
        println!(
            "{label}-degree quantiles: min {} p25 {} median {} p75 {} max {}",
            q(0.0),
            q(0.25),
            q(0.5),
            q(0.75),
            q(1.0)
        );
    }
    Ok(())
}

fn cmd_validate(config_path: &PathBuf, overrides: &[String]) -> Result<(), Error> {
    let config = config::load_config(config_path, overrides)?;
    println!(
        "{}",
        serde_json::to_string_pretty(&config.resolved_json()).expect("config serializes")
    );
    Ok(())
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

fn coefficient_of_variation(values: &[f64]) -> f64 {
    let m = mean(values);
    if m == 0.0 {
        return 0.0;
    }
    let var = values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / values.len() as f64;
    var.sqrt() / m
}
