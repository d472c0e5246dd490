//! `warm` — command-line laboratory for power-reinforced urn models.
//!
//! Subcommands: `equilibria`, `threshold`, `phase`, `simulate`, `flow`,
//! `reduce`, `model`. Exit codes: 0 ok, 2 validation error, 3 strict-mode
//! warnings, 4 internal consistency failure. `WARM_SEED` supplies the default
//! seed when `--seed` is absent; all commands are deterministic given their
//! full flag set.

mod commands;
mod source;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "warm",
    version,
    about = "Numerical laboratory for power-reinforced urn models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// JSON model file (explicit or family shape).
    #[arg(long)]
    pub model: Option<String>,
    /// Builder family: star, cycle, complete, path, whisker, triangle,
    /// fixed_m, bernoulli, graph.
    #[arg(long)]
    pub family: Option<String>,
    /// Family parameters, comma separated: n=3,m=2 or r=1,s=1 or p=0.5.
    #[arg(long, default_value = "")]
    pub params: String,
    /// Reinforcement exponent; overrides the model file's value.
    #[arg(long)]
    pub alpha: Option<f64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Catalogue all equilibria with eigenvalue classification.
    Equilibria {
        #[command(flatten)]
        model: ModelArgs,
        /// Newton starts per face.
        #[arg(long, default_value_t = 50)]
        starts: usize,
        /// Catalogue admission threshold on the residual.
        #[arg(long, default_value_t = 1e-10)]
        tol_residual: f64,
        /// Zero band for eigenvalue classification.
        #[arg(long, default_value_t = 1e-8)]
        eig_eps: f64,
        /// Sup-norm radius identifying two points.
        #[arg(long, default_value_t = 1e-7)]
        dedup: f64,
        /// Exit 3 when the solver reports failed Newton starts.
        #[arg(long)]
        strict: bool,
        /// Output file (stdout when absent).
        #[arg(long)]
        out: Option<String>,
    },
    /// Closed-form or bisected critical exponents.
    Threshold {
        #[command(flatten)]
        model: ModelArgs,
        /// One of: uniform (needs a model), star, cycle, complete, fixed_m,
        /// star_tangency, whisker. Defaults to the model family.
        #[arg(long)]
        kind: Option<String>,
        #[arg(long)]
        out: Option<String>,
    },
    /// Bifurcation data: equilibria swept over an exponent range, CSV.
    Phase {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        alpha_min: f64,
        #[arg(long)]
        alpha_max: f64,
        #[arg(long, default_value_t = 50)]
        count: usize,
        /// Logarithmic spacing instead of linear.
        #[arg(long)]
        log: bool,
        #[arg(long, default_value_t = 50)]
        starts: usize,
        /// Worker threads; the output does not depend on it.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long)]
        out: Option<String>,
    },
    /// Monte-Carlo urn runs with endpoint assignment to the catalogue.
    Simulate {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 100_000)]
        steps: u64,
        #[arg(long, default_value_t = 50)]
        runs: u64,
        /// Base seed; run i uses base + i. Defaults to $WARM_SEED, then 0.
        #[arg(long)]
        seed: Option<u64>,
        /// Record the trace every K steps (0: no traces).
        #[arg(long, default_value_t = 0)]
        record_stride: u64,
        /// Worker threads; the output does not depend on it.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Output prefix for PREFIX_runs.csv and PREFIX_trace_<run>.csv.
        #[arg(long)]
        out: String,
    },
    /// Integrate the mean-field flow from a start point, CSV trajectory.
    Flow {
        #[command(flatten)]
        model: ModelArgs,
        /// Comma-separated start point, or "barycenter", or "random".
        #[arg(long, default_value = "barycenter")]
        start: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 200.0)]
        t_max: f64,
        #[arg(long, default_value_t = 1e-2)]
        step: f64,
        #[arg(long, default_value_t = 10)]
        record_stride: usize,
        #[arg(long)]
        out: Option<String>,
    },
    /// Subgraph machinery: spanning collections, star-forest allocations,
    /// whisker-forest probe.
    Reduce {
        #[command(flatten)]
        model: ModelArgs,
        /// What to emit: collections | star-forest | whisker-probe.
        #[arg(long, default_value = "collections")]
        what: String,
        /// Exponent grid for the whisker probe, comma separated.
        #[arg(long, default_value = "2,5,10,20,50")]
        alpha_grid: String,
        #[arg(long)]
        out: Option<String>,
    },
    /// Validate or describe a model.
    Model {
        /// validate | describe
        #[arg(value_name = "ACTION")]
        action: String,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        out: Option<String>,
    },
}

/// Error carrying the process exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn validation(msg: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: msg.into(),
        }
    }
    pub fn strict(msg: impl Into<String>) -> Self {
        Self {
            code: 3,
            message: msg.into(),
        }
    }
    pub fn consistency(msg: impl Into<String>) -> Self {
        Self {
            code: 4,
            message: msg.into(),
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.message)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::validation(format!("io error: {e}"))
    }
}

pub fn default_seed(explicit: Option<u64>) -> u64 {
    explicit
        .or_else(|| std::env::var("WARM_SEED").ok().and_then(|s| s.parse().ok()))
        .unwrap_or(0)
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Equilibria {
            model,
            starts,
            tol_residual,
            eig_eps,
            dedup,
            strict,
            out,
        } => commands::equilibria(
            &model,
            starts,
            tol_residual,
            eig_eps,
            dedup,
            strict,
            out.as_deref(),
        ),
        Command::Threshold { model, kind, out } => {
            commands::threshold(&model, kind.as_deref(), out.as_deref())
        }
        Command::Phase {
            model,
            alpha_min,
            alpha_max,
            count,
            log,
            starts,
            jobs,
            out,
        } => commands::phase(
            &model,
            alpha_min,
            alpha_max,
            count,
            log,
            starts,
            jobs,
            out.as_deref(),
        ),
        Command::Simulate {
            model,
            steps,
            runs,
            seed,
            record_stride,
            jobs,
            out,
        } => commands::simulate(
            &model,
            steps,
            runs,
            default_seed(seed),
            record_stride,
            jobs,
            &out,
        ),
        Command::Flow {
            model,
            start,
            seed,
            t_max,
            step,
            record_stride,
            out,
        } => commands::flow(
            &model,
            &start,
            default_seed(seed),
            t_max,
            step,
            record_stride,
            out.as_deref(),
        ),
        Command::Reduce {
            model,
            what,
            alpha_grid,
            out,
        } => commands::reduce(&model, &what, &alpha_grid, out.as_deref()),
        Command::Model { action, model, out } => {
            commands::model_cmd(&action, &model, out.as_deref())
        }
    };
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(e.code);
    }
}
