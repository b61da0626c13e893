//! Batch front end: reads JSON model files, dispatches analyses and writes
//! trajectory/report artifacts.
//!
//! Exit codes: 0 success, 1 residuals above tolerance, 2 parse error,
//! 3 degenerate point or non-(2,3,5) model, 4 violated geodesic
//! precondition, 5 pipeline stage failure.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "geoctrl", about = "Geometric-control batch toolkit", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Model file (JSON).
    #[arg(long)]
    model: PathBuf,
    /// Integration step.
    #[arg(long, default_value_t = 1e-3)]
    step: f64,
    /// Residual tolerance.
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    /// RNG seed for sampled computations.
    #[arg(long, default_value_t = 17)]
    seed: u64,
    /// Worker pool size (0 = default).
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    /// Output path prefix; reports go to stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Growth vector, growth-(2,3,5) and bracket-generation report at a point.
    Analyze {
        #[command(flatten)]
        common: Common,
        /// Base point, comma-separated (rationals like 1/2 or decimals).
        #[arg(long)]
        point: String,
        /// Flag depth bound (0 = dimension + 2).
        #[arg(long, default_value_t = 0)]
        maxdepth: usize,
    },
    /// Integrate a normal or abnormal extremal and write CSV + residuals.
    Geodesic {
        #[command(flatten)]
        common: Common,
        /// "normal" or "abnormal".
        #[arg(long)]
        kind: String,
        /// Initial point (comma-separated); defaults to a problem block.
        #[arg(long)]
        point: Option<String>,
        /// Initial covector (comma-separated).
        #[arg(long)]
        covector: Option<String>,
        /// Problem block label to take defaults from.
        #[arg(long)]
        problem: Option<String>,
        /// Time horizon.
        #[arg(long, default_value_t = 1.0)]
        horizon: f64,
    },
    /// Quotient by a coordinate projection: frame report and the projected
    /// trajectory residual for a seeded random control.
    Quotient {
        #[command(flatten)]
        common: Common,
        /// Coordinates to keep: names or 1-based indices, comma-separated.
        #[arg(long)]
        keep: String,
        /// Initial point for the probe trajectory.
        #[arg(long)]
        point: String,
    },
    /// Prolong the model to its line space: fibre-velocity samples and the
    /// growth vector upstairs.
    Prolong {
        #[command(flatten)]
        common: Common,
        /// Base point (rational coordinates).
        #[arg(long)]
        point: String,
    },
    /// Full pipeline: certify, prolong, build the leaf space, then check
    /// the fibre/extremal matching statements.
    DualityCheck {
        #[command(flatten)]
        common: Common,
        /// Base point on the line space: 5 coordinates plus the fibre angle.
        #[arg(long)]
        z0: String,
        /// Abnormal arcs sampled per covector type.
        #[arg(long, default_value_t = 10)]
        samples: usize,
        /// Leaf-space fibres compared.
        #[arg(long, default_value_t = 5)]
        fibers: usize,
        /// Curve-distance tolerance of the matching check.
        #[arg(long, default_value_t = 1e-4)]
        curve_tol: f64,
    },
    /// Steer the system so the (projected) endpoint reaches a target.
    Steer {
        #[command(flatten)]
        common: Common,
        /// Start point.
        #[arg(long)]
        from: String,
        /// Target values for the steered coordinates.
        #[arg(long)]
        to: String,
        /// Coordinates the target constrains (default: all).
        #[arg(long)]
        keep: Option<String>,
        /// Control arcs.
        #[arg(long, default_value_t = 4)]
        arcs: usize,
        /// Time horizon.
        #[arg(long, default_value_t = 1.0)]
        horizon: f64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Analyze {
            common,
            point,
            maxdepth,
        } => commands::analyze(&common, &point, maxdepth),
        Command::Geodesic {
            common,
            kind,
            point,
            covector,
            problem,
            horizon,
        } => commands::geodesic(&common, &kind, point, covector, problem, horizon),
        Command::Quotient {
            common,
            keep,
            point,
        } => commands::quotient(&common, &keep, &point),
        Command::Prolong { common, point } => commands::prolong(&common, &point),
        Command::DualityCheck {
            common,
            z0,
            samples,
            fibers,
            curve_tol,
        } => commands::duality_check(&common, &z0, samples, fibers, curve_tol),
        Command::Steer {
            common,
            from,
            to,
            keep,
            arcs,
            horizon,
        } => commands::steer(&common, &from, &to, keep, arcs, horizon),
    };
    match result {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            let code = err
                .downcast_ref::<geoctrl::Error>()
                .map(commands::exit_code_for)
                .unwrap_or(1);
            ExitCode::from(code)
        }
    }
}
