//! Command-line front end for the amplified-interferometry simulator.
//!
//! Every invocation resolves its physical parameters from defaults, an
//! optional key=value config file, and command-line flags (flags win), then
//! writes one deterministic machine-readable artifact: CSV with the full
//! resolved configuration in `#` header lines, or JSON with the same
//! configuration embedded. Identical invocations produce byte-identical
//! files; no timestamps are ever written.
//!
//! Exit codes: 0 success, 2 usage error, 3 numerical convergence failure.

mod commands;
mod config;
mod output;

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

/// Simulator for optical phase estimation with post-sensing parametric
/// amplification.
#[derive(Debug, Parser)]
#[command(name = "ampliphase", version, max_term_width = 100)]
struct Cli {
    /// Plain-text key=value config file; flags override file values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output file (CSV or JSON per --format). Relative paths resolve under
    /// $AMPLIPHASE_OUT_DIR when that is set. Omit to write to stdout.
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,

    /// Output format.
    #[arg(long, global = true, default_value = "csv")]
    format: output::Format,

    #[command(subcommand)]
    command: Command,
}

/// Physical knobs of the protocol, all optional on the command line; defaults
/// are echoed into every output artifact.
#[derive(Debug, Clone, Args)]
struct ParamArgs {
    /// Probe amplitude |α| in √photons (default 1).
    #[arg(long)]
    alpha_mag: Option<f64>,
    /// Post-sample mean photon number |β|² = ξ|α|²; shorthand that sets
    /// ξ = 1 (or keeps --xi) and derives |α|. Conflicts with --alpha-mag.
    #[arg(long, conflicts_with = "alpha_mag")]
    beta_sq: Option<f64>,
    /// Probe phase θ in radians (default 0).
    #[arg(long)]
    theta: Option<f64>,
    /// Sample transmission ξ ∈ [0, 1] (default 1).
    #[arg(long)]
    xi: Option<f64>,
    /// Amplifier gain magnitude g ≥ 0 (default 0).
    #[arg(long)]
    g: Option<f64>,
    /// Pump phase λ in radians (default 0).
    #[arg(long)]
    lambda: Option<f64>,
    /// Detector efficiency η ∈ [0, 1] (default 1).
    #[arg(long)]
    eta: Option<f64>,
    /// True interferometric phase φ in radians (default π/2).
    #[arg(long)]
    phi: Option<f64>,
}

#[derive(Debug, Clone, Args)]
struct McArgs {
    /// Pulses per run.
    #[arg(long, default_value_t = 100_000)]
    pulses: usize,
    /// Master seed; run r uses seed + r.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of independent runs.
    #[arg(long, default_value_t = 1)]
    runs: usize,
    /// Counting model.
    #[arg(long, default_value = "exact-pmf")]
    model: commands::ModelArg,
    /// Posterior grid points over [0, π).
    #[arg(long, default_value_t = 2048)]
    grid_points: usize,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Quantum Fisher information: closed forms, the truncated Fock-space
    /// evaluation, and the 2|β|² benchmark.
    Qfi {
        #[command(flatten)]
        params: ParamArgs,
        /// Fock cutoff for the numeric evaluation (auto-sized when omitted).
        #[arg(long)]
        cutoff: Option<usize>,
    },
    /// Classical Fisher information of photon counting, alongside the QFI
    /// and the inverse-variance sensitivity for the same parameters.
    Cfi {
        #[command(flatten)]
        params: ParamArgs,
        /// Photon-number cutoff (auto-sized when omitted).
        #[arg(long)]
        cutoff: Option<usize>,
    },
    /// Photon-difference moments and the error-propagation sensitivity.
    Sensitivity {
        #[command(flatten)]
        params: ParamArgs,
    },
    /// Photon-number distributions of both output modes.
    Pmf {
        #[command(flatten)]
        params: ParamArgs,
        /// Photon-number cutoff (auto-sized when omitted).
        #[arg(long)]
        cutoff: Option<usize>,
        /// Also emit the brute-force Fock-basis oracle columns.
        #[arg(long)]
        oracle: bool,
    },
    /// Enhancement over unamplified references in the pump-phase-averaged
    /// model, both normalization conventions.
    Enhancement {
        #[command(flatten)]
        params: ParamArgs,
    },
    /// Monte Carlo runs with Bayesian single-step estimation.
    Simulate {
        #[command(flatten)]
        params: ParamArgs,
        #[command(flatten)]
        mc: McArgs,
    },
    /// Two-step adaptive protocol runs.
    TwoStep {
        #[command(flatten)]
        params: ParamArgs,
        #[command(flatten)]
        mc: McArgs,
        /// Step-I fraction p = M₁/M in (0, 1); derived from the closed-form
        /// Fisher informations when omitted.
        #[arg(long)]
        fraction: Option<f64>,
    },
    /// Sweep one parameter axis and run a command at every point.
    Sweep {
        #[command(flatten)]
        params: ParamArgs,
        /// Axis as name:start:stop:steps with name in
        /// {phi, g, eta, xi, beta_sq}; steps ≥ 2 points, endpoints included.
        #[arg(long)]
        axis: String,
        /// Command to run at each axis point.
        #[arg(long, value_name = "COMMAND")]
        command: commands::SweepCommand,
        #[command(flatten)]
        mc: McArgs,
        /// Cutoff for qfi/cfi (auto-sized when omitted).
        #[arg(long)]
        cutoff: Option<usize>,
        /// Step-I fraction for two-step (derived when omitted).
        #[arg(long)]
        fraction: Option<f64>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
