//! Command-line front end tying the pipeline together: world synthesis,
//! skeleton generation, planning, benchmarking and mesh export.
//!
//! Exit codes: 0 success, 2 input error, 3 planning failure, 1 internal
//! error.

mod commands;
mod config;

use clap::{Parser, Subcommand};

use config::{CliError, MapSource, OutputArgs, ParamArgs};

#[derive(Parser)]
#[command(
    name = "skelgraph",
    about = "Sparse 3D skeleton graph generation and global planning",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize a world and write its point cloud, grid and spec files.
    Synth {
        #[command(flatten)]
        source: MapSource,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Generate a skeleton graph and write graph JSON, OBJ and stats.
    Generate {
        #[command(flatten)]
        source: MapSource,
        #[command(flatten)]
        params: ParamArgs,
        #[command(flatten)]
        output: OutputArgs,
        /// Seed position "x,y,z" or "auto" for the free point nearest the
        /// bounds center.
        #[arg(long, default_value = "auto")]
        seed_pos: String,
    },
    /// Plan between two positions over a previously generated graph.
    Plan {
        #[command(flatten)]
        source: MapSource,
        #[command(flatten)]
        params: ParamArgs,
        #[command(flatten)]
        output: OutputArgs,
        /// Graph JSON written by `generate`.
        #[arg(long)]
        graph: std::path::PathBuf,
        /// Start position "x,y,z".
        #[arg(long)]
        start: String,
        /// Goal position "x,y,z".
        #[arg(long)]
        goal: String,
        /// Also run grid A* as an optimality oracle and print the ratio.
        #[arg(long)]
        oracle: bool,
    },
    /// Repeat generation and random planning queries, writing statistics CSVs.
    Bench {
        #[command(flatten)]
        source: MapSource,
        #[command(flatten)]
        params: ParamArgs,
        #[command(flatten)]
        output: OutputArgs,
        /// Generation repetitions.
        #[arg(long, default_value_t = 10)]
        runs: usize,
        /// Random planning pairs.
        #[arg(long, default_value_t = 10)]
        pairs: usize,
        /// Seed for the pair sampler.
        #[arg(long, default_value_t = 0)]
        rng_seed: u64,
        #[arg(long, default_value = "auto")]
        seed_pos: String,
    },
    /// Export the synthetic world's solid geometry as an OBJ mesh.
    ExportObj {
        #[command(flatten)]
        source: MapSource,
        #[command(flatten)]
        output: OutputArgs,
    },
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Synth { source, output } => commands::synth(&source, &output),
        Command::Generate {
            source,
            params,
            output,
            seed_pos,
        } => commands::generate(&source, &params, &output, &seed_pos),
        Command::Plan {
            source,
            params,
            output,
            graph,
            start,
            goal,
            oracle,
        } => commands::plan(&source, &params, &output, &graph, &start, &goal, oracle),
        Command::Bench {
            source,
            params,
            output,
            runs,
            pairs,
            rng_seed,
            seed_pos,
        } => commands::bench(&source, &params, &output, runs, pairs, rng_seed, &seed_pos),
        Command::ExportObj { source, output } => commands::export_obj(&source, &output),
    };
    match result {
        Ok(()) => {}
        Err(err) => {
            eprintln!("error: {err}");
            std::process::exit(match err {
                CliError::Input(_) => 2,
                CliError::Planning(_) => 3,
                CliError::Internal(_) => 1,
            });
        }
    }
}
