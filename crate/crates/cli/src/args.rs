use std::net::SocketAddr;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Probabilistic digital twin for preloaded embankments.
///
/// Scenario fields can be overridden with `--set dotted.path=value` or the shorthand
/// `--dotted.path=value`, e.g. `--study.sigma-eps=[0.05,0.1]`.
#[derive(Debug, Parser)]
#[command(name = "pdt", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Forward-simulate settlement trajectories for soil drawn from the priors
    Simulate(SimulateArgs),
    /// Run a filtering session on recorded or synthetic measurements
    Update(UpdateArgs),
    /// Optimize one policy family with the cross-entropy method
    Optimize(OptimizeArgs),
    /// Monte Carlo cost of a fixed policy
    Evaluate(EvaluateArgs),
    /// Optimize every policy and noise level and write the comparison tables
    Study(StudyArgs),
    /// Regenerate tables from a saved study, verify a session log, normalize the scenario
    Report(ReportArgs),
    /// Serve the session API over HTTP
    Serve(ServeArgs),
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Scenario TOML file, or the name of the bundled scenario
    #[arg(short, long, default_value = "stockholm-highway73")]
    pub scenario: PathBuf,
    /// Master seed
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory, created when missing
    #[arg(short, long, default_value = "pdt-out")]
    pub out: PathBuf,
    /// Scenario override `dotted.path=value` (repeatable)
    #[arg(long = "set", value_name = "PATH=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Clone, Args)]
pub struct HeuristicArgs {
    /// Initial surcharge height [m] (default: scenario heuristic)
    #[arg(long)]
    pub h0: Option<f64>,
    /// COV threshold of the decision gate (default: scenario heuristic)
    #[arg(long)]
    pub cov_th: Option<f64>,
    /// Non-compliance probability threshold (default: scenario heuristic)
    #[arg(long)]
    pub p_th: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: Common,
    /// Initial surcharge height [m] (default: scenario heuristic h0)
    #[arg(long)]
    pub h0: Option<f64>,
    /// Week of the surcharge increment
    #[arg(long, requires = "h_add")]
    pub t_add: Option<u32>,
    /// Height of the surcharge increment [m]
    #[arg(long, requires = "t_add")]
    pub h_add: Option<f64>,
    /// Last tabulated week (default: t_max plus the delay cap)
    #[arg(long)]
    pub weeks: Option<u32>,
    /// Number of soil realizations drawn from the priors
    #[arg(long, default_value_t = 3)]
    pub samples: usize,
}

#[derive(Debug, Args)]
pub struct UpdateArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub heuristic: HeuristicArgs,
    /// CSV with columns `week,settlement_m`; `#` lines are comments
    #[arg(long, conflicts_with = "truth_seed")]
    pub measurements: Option<PathBuf>,
    /// Generate measurements from ground truth `(truth_seed, truth_index)` instead
    #[arg(long)]
    pub truth_seed: Option<u64>,
    /// Rollout index of the ground truth
    #[arg(long, default_value_t = 0)]
    pub truth_index: usize,
    /// Last measured week in truth mode (default: t_max)
    #[arg(long)]
    pub weeks: Option<u32>,
    /// Particle count (default: scenario filter.n_particles)
    #[arg(long)]
    pub n_particles: Option<usize>,
    /// Commit this increment instead of the recommendation [m]
    #[arg(long)]
    pub commit_h_add: Option<f64>,
    /// Leave the session open instead of closing it after the last measurement
    #[arg(long)]
    pub no_close: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OptimizedPolicy {
    Bu,
    Static,
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    #[command(flatten)]
    pub common: Common,
    /// Policy family
    #[arg(long, value_enum, default_value_t = OptimizedPolicy::Bu)]
    pub policy: OptimizedPolicy,
    /// Measurement noise [m] (default: scenario measurement.sigma_eps_m)
    #[arg(long)]
    pub sigma_eps: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EvaluatedPolicy {
    Bu,
    Static,
    Clairvoyant,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub heuristic: HeuristicArgs,
    /// Policy to evaluate
    #[arg(long, value_enum, default_value_t = EvaluatedPolicy::Bu)]
    pub policy: EvaluatedPolicy,
    /// Measurement noise [m] (default: scenario measurement.sigma_eps_m)
    #[arg(long)]
    pub sigma_eps: Option<f64>,
    /// Monte Carlo rollouts
    #[arg(long, default_value_t = 1000)]
    pub n_mc: usize,
    /// Particles per rollout (default: scenario study.ce.n_bu)
    #[arg(long)]
    pub n_bu: Option<usize>,
}

#[derive(Debug, Args)]
pub struct StudyArgs {
    #[command(flatten)]
    pub common: Common,
    /// Skip the per-iteration CE traces
    #[arg(long)]
    pub no_traces: bool,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[command(flatten)]
    pub common: Common,
    /// `study.json` written by `pdt study`; its tables are regenerated
    #[arg(long)]
    pub study: Option<PathBuf>,
    /// Session log to replay and verify against the scenario
    #[arg(long)]
    pub log: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Listen address
    #[arg(long, default_value_t = pdt_service::default_addr())]
    pub addr: SocketAddr,
    /// Directory served for paths outside the API, e.g. a built dashboard
    #[arg(long)]
    pub static_dir: Option<PathBuf>,
}

/// Rewrites `--a.b=value` and `--a.b value` into `--set a.b=value`. Only flags whose name
/// contains a dot are touched, so regular options pass through.
pub fn expand_overrides<I: IntoIterator<Item = String>>(argv: I) -> Vec<String> {
    let mut out = Vec::new();
    let mut it = argv.into_iter();
    while let Some(a) = it.next() {
        let Some(flag) = a.strip_prefix("--") else {
            out.push(a);
            continue;
        };
        let (name, value) = match flag.split_once('=') {
            Some((n, v)) => (n, Some(v.to_string())),
            None => (flag, None),
        };
        if !name.contains('.') {
            out.push(a);
            continue;
        }
        let value = match value.or_else(|| it.next()) {
            Some(v) => v,
            None => {
                // leave it for clap to reject
                out.push(a);
                continue;
            }
        };
        out.push("--set".into());
        out.push(format!("{name}={value}"));
    }
    out
}
