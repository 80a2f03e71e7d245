mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use convio::dataflow::Layout;

use config::{Hardware, Output, Problem, RunConfig, Tuner, Usage};

/// I/O lower bounds, dataflow simulation and auto-tuning for convolutions.
#[derive(Parser)]
#[command(name = "convio", version)]
struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for every random choice.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Print the merged configuration as TOML and exit.
    #[arg(long, global = true)]
    print_config: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Closed-form and exact I/O lower bounds.
    LowerBound {
        #[command(flatten)]
        problem: Problem,
        #[command(flatten)]
        hw: Hardware,
        #[command(flatten)]
        out: Output,
    },
    /// Vertex counts of the computation DAG against the closed form.
    DagStats {
        #[command(flatten)]
        problem: Problem,
        /// Refuse DAGs with more vertices than this.
        #[arg(long, default_value_t = 1_000_000)]
        cap: u64,
        #[command(flatten)]
        out: Output,
    },
    /// Optimal pebbling and S-partition check on a tiny DAG.
    Pebble {
        /// Bundled fixture name.
        #[arg(long)]
        fixture: Option<String>,
        /// DAG in adjacency text format.
        #[arg(long)]
        dag: Option<PathBuf>,
        /// Red pebbles.
        #[arg(long, required_unless_present = "list")]
        s: Option<usize>,
        /// List the bundled fixtures.
        #[arg(long)]
        list: bool,
        #[command(flatten)]
        out: Output,
    },
    /// Plan and simulate a tiled dataflow.
    Simulate {
        #[command(flatten)]
        problem: Problem,
        #[command(flatten)]
        hw: Hardware,
        /// Tile as XxYxZ [default: I/O-optimal tile].
        #[arg(long)]
        tile: Option<String>,
        /// Threads as AxBxC.
        #[arg(long)]
        threads: Option<String>,
        #[arg(long)]
        layout: Option<Layout>,
        /// Load each transformed kernel once per sub-block (Winograd).
        #[arg(long)]
        shared_kernel: bool,
        #[command(flatten)]
        out: Output,
    },
    /// Search the configuration space with the learned cost model.
    Tune {
        #[command(flatten)]
        problem: Problem,
        #[command(flatten)]
        hw: Hardware,
        #[command(flatten)]
        tuner: Tuner,
        /// Restrict to these layouts.
        #[arg(long, value_delimiter = ',')]
        layout: Vec<Layout>,
        /// Continue from a history CSV.
        #[arg(long)]
        resume: Option<PathBuf>,
        /// Also enumerate the space for the true optimum.
        #[arg(long)]
        oracle: bool,
        #[command(flatten)]
        out: Output,
    },
    /// Bound, optimal tile, simulation and search-space size in one report.
    Report {
        #[command(flatten)]
        problem: Problem,
        #[command(flatten)]
        hw: Hardware,
        #[command(flatten)]
        out: Output,
    },
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<Usage>().is_some() {
        return 2;
    }
    match err.downcast_ref::<convio::Error>() {
        Some(e) if e.is_infeasible() => 3,
        Some(
            convio::Error::Geometry(_)
            | convio::Error::Parse { .. }
            | convio::Error::Unsupported(_)
            | convio::Error::Argument(_),
        ) => 2,
        _ => 4,
    }
}

fn merge(cli: &Cli) -> anyhow::Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let (p0, h0, t0) = (Problem::default(), Hardware::default(), Tuner::default());
    let (problem, hw, tuner, out) = match &cli.cmd {
        Cmd::LowerBound { problem, hw, out } | Cmd::Report { problem, hw, out } => {
            (problem, hw, &t0, out)
        }
        Cmd::DagStats { problem, out, .. } => (problem, &h0, &t0, out),
        Cmd::Pebble { out, .. } => (&p0, &h0, &t0, out),
        Cmd::Simulate {
            problem, hw, out, ..
        } => (problem, hw, &t0, out),
        Cmd::Tune {
            problem,
            hw,
            tuner,
            out,
            ..
        } => (problem, hw, tuner, out),
    };
    cfg.overlay(cli.seed, problem, hw, tuner, out);
    Ok(cfg)
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let cfg = merge(&cli)?;
    if cli.print_config {
        print!("{}", cfg.to_toml());
        return Ok(());
    }
    match &cli.cmd {
        Cmd::LowerBound { .. } => commands::lower_bound(&cfg),
        Cmd::DagStats { cap, .. } => commands::dag_stats(&cfg, *cap),
        Cmd::Pebble {
            fixture,
            dag,
            s,
            list,
            ..
        } => {
            if *list {
                return commands::list_fixtures();
            }
            let s = s.ok_or_else(|| config::usage("missing --s"))?;
            commands::pebble(&cfg, fixture.as_deref(), dag.as_deref(), s)
        }
        Cmd::Simulate {
            tile,
            threads,
            layout,
            shared_kernel,
            ..
        } => {
            let args = commands::TileArgs {
                tile: tile.as_deref(),
                threads: threads.as_deref(),
                layout: *layout,
                shared_kernel: *shared_kernel,
            };
            commands::simulate_cmd(&cfg, &args)
        }
        Cmd::Tune {
            layout,
            resume,
            oracle,
            ..
        } => {
            let args = commands::TuneArgs {
                layouts: layout,
                resume: resume.as_deref(),
                oracle: *oracle,
            };
            commands::tune_cmd(&cfg, &args)
        }
        Cmd::Report { .. } => commands::report(&cfg),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
