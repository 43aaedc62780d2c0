mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hiermetric::dist::FactorLaw;
use hiermetric::Result;
use serde::Serialize;

use commands::{BisectArgs, BrwArgs, LeafArg, Output};
use config::{parse_grid, ConfigFile, Overrides, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "hiermetric", version, about = "Random metrics on hierarchical graphs")]
struct Cli {
    /// Seed for every random stream; required by stochastic commands.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// JSON config file; flags given here take precedence over it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Preset name (eight, diamond, parallel2, racket, interval2, interval-<d>) or graph JSON path.
    #[arg(long, global = true)]
    graph: Option<String>,
    /// Factor law, e.g. lognormal:0.3, dirac:1, exp:2, uniform:2, atoms:1@0.5,2@0.5.
    #[arg(long, global = true)]
    law: Option<String>,
    #[arg(long, global = true)]
    lambda: Option<f64>,
    /// Sample size.
    #[arg(long = "n", global = true)]
    n: Option<usize>,
    /// Generations in the drift fit.
    #[arg(long, global = true)]
    k: Option<usize>,
    #[arg(long, global = true)]
    warmup: Option<usize>,
    #[arg(long, global = true)]
    reps: Option<usize>,
    #[arg(long, global = true)]
    depth: Option<usize>,
    #[arg(long, global = true)]
    generations: Option<usize>,
    /// upper:A or lower:a.
    #[arg(long, global = true)]
    cutoff: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
enum Command {
    /// Percolation function on a grid and its fixed points.
    Theta {
        #[arg(long, default_value_t = 1001)]
        grid_points: usize,
    },
    /// Simple IO-paths and pivotal-edge labels.
    Paths,
    /// Critical rescaling constant.
    LambdaCr(BisectArgs),
    /// Log-normal sigma sweep of log(2 lambda_cr).
    Sweep {
        /// lo:hi:step or a comma-separated list.
        #[arg(long)]
        sigma_grid: Option<String>,
    },
    /// Normalized stationary sample.
    Stationary,
    /// KS distance between two normalized orbits.
    Converge {
        /// Law of the second start (the first is Dirac(1)).
        #[arg(long, default_value = "lognormal:2")]
        spread: String,
    },
    /// Phase of the limit space for log-normal factors.
    Phase {
        #[arg(long)]
        sigma: f64,
    },
    /// Drift of the branching random walk maximum.
    Brw(BrwArgs),
    /// Level maxima of copy IO-distances.
    Cascade {
        #[arg(long, value_enum, default_value = "stationary")]
        leaf: LeafArg,
    },
    /// Larger-half selection chain along the IO-geodesic.
    Geodesic {
        #[arg(long, default_value_t = 0)]
        trace_rep: usize,
    },
    /// Percolation with replacement on the figure-eight.
    PercolationToy {
        #[arg(long)]
        p: f64,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
    },
    /// Sierpinski gasket tools.
    #[command(subcommand)]
    Sierpinski(SierpinskiCommand),
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(tag = "subcommand", rename_all = "kebab-case")]
enum SierpinskiCommand {
    LambdaCr,
    Theta {
        /// uniform, singletons, pair12, pair23, pair31, together, or five probabilities.
        #[arg(long, default_value = "uniform")]
        start: String,
        #[arg(long, default_value_t = 200)]
        steps: usize,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
    Glue,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Theta { .. } => "theta",
            Command::Paths => "paths",
            Command::LambdaCr(_) => "lambda_cr",
            Command::Sweep { .. } => "sweep",
            Command::Stationary => "stationary",
            Command::Converge { .. } => "converge",
            Command::Phase { .. } => "phase",
            Command::Brw(_) => "brw",
            Command::Cascade { .. } => "cascade",
            Command::Geodesic { .. } => "geodesic",
            Command::PercolationToy { .. } => "percolation_toy",
            Command::Sierpinski(SierpinskiCommand::LambdaCr) => "sierpinski_lambda_cr",
            Command::Sierpinski(SierpinskiCommand::Theta { .. }) => "sierpinski_theta",
            Command::Sierpinski(SierpinskiCommand::Glue) => "sierpinski_glue",
        }
    }
}

#[derive(Serialize)]
struct Resolved<'a> {
    #[serde(flatten)]
    run: &'a RunConfig,
    #[serde(flatten)]
    command: &'a Command,
}

fn run(cli: Cli) -> Result<String> {
    let file = match &cli.config {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::default(),
    };
    let sigma_grid = match &cli.command {
        Command::Sweep { sigma_grid: Some(g) } => {
            Some(parse_grid(g).map_err(|e| hiermetric::Error::InvalidArgument(format!("sigma grid: {e}")))?)
        }
        _ => None,
    };
    let overrides = Overrides {
        graph: cli.graph,
        law: cli.law,
        lambda: cli.lambda,
        n: cli.n,
        k: cli.k,
        warmup: cli.warmup,
        reps: cli.reps,
        depth: cli.depth,
        generations: cli.generations,
        seed: cli.seed,
        cutoff: cli.cutoff,
        output_dir: cli.out,
        sigma_grid,
        workers: cli.workers,
    };
    let cfg = RunConfig::resolve(overrides, file)?;
    if let Some(w) = cfg.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build_global()
            .map_err(|e| hiermetric::Error::InvalidArgument(format!("workers: {e}")))?;
    }
    let out = Output { dir: &cfg.output_dir };
    let cmd = &cli.command;
    out.json(
        &format!("{}.config", cmd.name()),
        &Resolved {
            run: &cfg,
            command: cmd,
        },
    )?;
    match cmd {
        Command::Theta { grid_points } => commands::theta(&cfg, &out, *grid_points),
        Command::Paths => commands::paths(&cfg, &out),
        Command::LambdaCr(args) => commands::lambda_cr(&cfg, &out, args),
        Command::Sweep { .. } => commands::sweep(&cfg, &out),
        Command::Stationary => commands::stationary(&cfg, &out),
        Command::Converge { spread } => commands::converge(&cfg, &out, &spread.parse::<FactorLaw>()?),
        Command::Phase { sigma } => commands::phase(&cfg, &out, *sigma),
        Command::Brw(args) => commands::brw(&cfg, &out, args),
        Command::Cascade { leaf } => commands::cascade(&cfg, &out, *leaf),
        Command::Geodesic { trace_rep } => commands::geodesic(&cfg, &out, *trace_rep),
        Command::PercolationToy { p, tol } => commands::percolation_toy(&out, *p, *tol),
        Command::Sierpinski(SierpinskiCommand::LambdaCr) => commands::sierpinski_lambda_cr(&cfg, &out),
        Command::Sierpinski(SierpinskiCommand::Theta { start, steps, tol }) => {
            commands::sierpinski_theta(&out, start, *steps, *tol)
        }
        Command::Sierpinski(SierpinskiCommand::Glue) => commands::sierpinski_glue(&cfg, &out),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(report) => {
            print!("{report}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            let msg = serde_json::json!({ "error": e.to_string() });
            eprintln!("{msg}");
            ExitCode::from(2)
        }
    }
}
