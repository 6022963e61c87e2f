//! `normspec` batch runner: clouds, scans, Newton searches, multiplicity
//! tests and eigenfunctions, written as CSV and SVG files.

mod commands;
mod config;
mod plot;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{load_file, resolve, FileConfig, Overrides};

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numeric { lambda: Option<f64>, message: String },
}

impl CliError {
    /// Classifies a library error, attaching the `λ` being processed.
    pub fn numeric(e: normspec::Error, lambda: Option<f64>) -> Self {
        match e {
            normspec::Error::NotPositiveDefinite { lambda, .. } => CliError::Numeric {
                lambda: Some(lambda),
                message: e.to_string(),
            },
            normspec::Error::InvalidArgument(_)
            | normspec::Error::InvalidBasis(_)
            | normspec::Error::Parse { .. }
            | normspec::Error::Io(_) => CliError::Config(e.to_string()),
            _ => CliError::Numeric {
                lambda,
                message: e.to_string(),
            },
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 1,
            CliError::Numeric { .. } => 2,
        }
    }
}

impl From<normspec::Error> for CliError {
    fn from(e: normspec::Error) -> Self {
        CliError::numeric(e, None)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Config(e.to_string())
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Numeric { lambda: Some(l), message } => write!(f, "numeric failure at lambda = {l}: {message}"),
            CliError::Numeric { lambda: None, message } => write!(f, "numeric failure: {message}"),
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "normspec", version, about = "Meshfree eigenvalue experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Named problem configuration.
    #[arg(long, global = true)]
    preset: Option<String>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads for scans, Newton starts and assembly.
    #[arg(long, global = true)]
    workers: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Evaluate N(lambda) on a uniform grid; writes scan.csv and scan.svg.
    Scan {
        #[arg(long)]
        min: Option<f64>,
        #[arg(long)]
        max: Option<f64>,
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Newton search from each starting value; writes newton.csv.
    Newton {
        /// Comma-separated starting values.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        starts: Option<Vec<f64>>,
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Norm-ratio multiplicity test; writes multiplicity.csv.
    Multiplicity {
        #[arg(long, allow_negative_numbers = true)]
        lambda: Option<f64>,
        /// Comma-separated anchor counts.
        #[arg(long, value_delimiter = ',')]
        anchors: Option<Vec<usize>>,
        #[arg(long)]
        n1: Option<usize>,
        #[arg(long)]
        n2: Option<usize>,
    },
    /// Interpolant at an eigenvalue, evaluated on the cloud; writes eigenfunction.csv.
    Eigenfunction {
        #[arg(long, allow_negative_numbers = true)]
        lambda: Option<f64>,
        /// Evaluate at the given lambda without Newton refinement.
        #[arg(long)]
        no_refine: bool,
    },
    /// Generate the point clouds; writes interior.csv, boundary.csv and anchors.csv.
    Cloud,
}

fn apply_command_flags(file: &mut FileConfig, command: &Command) {
    match command {
        Command::Scan { min, max, steps } => {
            let s = &mut file.scan;
            s.lambda_min = min.unwrap_or(s.lambda_min);
            s.lambda_max = max.unwrap_or(s.lambda_max);
            s.steps = steps.unwrap_or(s.steps);
        }
        Command::Newton { starts, tol } => {
            if let Some(v) = starts {
                file.newton.starts = v.clone();
            }
            file.newton.tol = tol.unwrap_or(file.newton.tol);
        }
        Command::Multiplicity { lambda, anchors, n1, n2 } => {
            let m = &mut file.multiplicity;
            m.lambda = lambda.unwrap_or(m.lambda);
            if let Some(a) = anchors {
                m.anchors = a.clone();
            }
            m.n1 = n1.unwrap_or(m.n1);
            m.n2 = n2.or(m.n2);
        }
        Command::Eigenfunction { lambda, no_refine } => {
            let e = &mut file.eigenfunction;
            e.lambda = lambda.unwrap_or(e.lambda);
            e.refine &= !no_refine;
        }
        Command::Cloud => {}
    }
}

fn run(cli: Cli) -> Result<Vec<PathBuf>, CliError> {
    let mut file = match &cli.config {
        Some(path) => load_file(path)?,
        None => FileConfig::default(),
    };
    apply_command_flags(&mut file, &cli.command);
    let overrides = Overrides {
        preset: cli.preset.clone(),
        seed: cli.seed,
        workers: cli.workers,
    };
    let cfg = resolve(file, &overrides)?;
    match cli.command {
        Command::Scan { .. } => commands::scan(&cfg, &cli.out),
        Command::Newton { .. } => commands::newton(&cfg, &cli.out),
        Command::Multiplicity { .. } => commands::multiplicity(&cfg, &cli.out),
        Command::Eigenfunction { .. } => commands::eigenfunction_cmd(&cfg, &cli.out),
        Command::Cloud => commands::cloud(&cfg, &cli.out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if e.use_stderr() => {
            let _ = e.print();
            return ExitCode::from(1);
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
    };
    match run(cli) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("normspec: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
