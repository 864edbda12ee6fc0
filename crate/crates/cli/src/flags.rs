use std::path::PathBuf;

use clap::{Args, Parser};

use crate::config::Command;

/// Parametric Stein operators: verification, Stein-equation solutions,
/// score factorization and goodness-of-fit.
#[derive(Debug, Parser)]
#[command(name = "steinforge", version, about)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Option<Command>,
    #[command(flatten)]
    pub flags: Flags,
}

#[derive(Debug, Default, Args)]
pub struct Flags {
    /// JSON run configuration; flags override its fields
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Target family, optionally with parameters: NAME[:p1,p2]
    #[arg(long, global = true, value_name = "NAME")]
    pub family: Option<String>,
    /// Fixed family parameters
    #[arg(long, global = true, value_delimiter = ',', allow_negative_numbers = true, value_name = "V[,V...]")]
    pub params: Option<Vec<f64>>,
    /// Parameter of interest at which the operator is built
    #[arg(long, global = true, value_delimiter = ',', allow_negative_numbers = true, value_name = "V[,V...]")]
    pub theta0: Option<Vec<f64>>,
    /// generic, location, scale, discrete or named
    #[arg(long, global = true, value_name = "F")]
    pub flavor: Option<String>,
    /// polynomial:DEGREE[:none|gaussian] or hermite:COUNT
    #[arg(long, global = true, value_name = "SPEC")]
    pub battery: Option<String>,
    /// Event set, e.g. le:0.0, int:{0,1}, interval:-1,2 (repeatable)
    #[arg(long = "set", global = true, value_name = "SPEC", allow_hyphen_values = true)]
    pub sets: Vec<String>,
    /// Alternative law FAMILY[:params]@THETA, or @THETA for the target family
    #[arg(long, global = true, value_name = "SPEC", allow_hyphen_values = true)]
    pub alt: Option<String>,
    /// Second family for score: NAME[:p1,p2]
    #[arg(long, global = true, value_name = "NAME")]
    pub compare: Option<String>,
    /// Common support restriction for score: LO,HI (empty or inf for open ends)
    #[arg(long, global = true, value_name = "LO,HI", allow_hyphen_values = true)]
    pub restrict: Option<String>,
    /// Sample file for gof (csv or jsonl)
    #[arg(long, global = true, value_name = "PATH")]
    pub samples: Option<PathBuf>,
    /// csv or jsonl; guessed from the extension when absent
    #[arg(long, global = true, value_name = "FMT")]
    pub samples_format: Option<String>,
    #[arg(long, global = true, value_name = "A")]
    pub alpha: Option<f64>,
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    /// Monte Carlo replications for gof calibration
    #[arg(long, global = true, value_name = "N")]
    pub n_sim: Option<usize>,
    /// Tolerance override (also STEINFORGE_TOL)
    #[arg(long, global = true, value_name = "T")]
    pub tol: Option<f64>,
    /// Directory for report files
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Leave timestamps out of reports
    #[arg(long, global = true)]
    pub deterministic: bool,
}
