//! Run configuration: a TOML file with a `[problem]` table mirroring
//! `ProblemSpec`, one table per command, and command-line overrides.

use std::path::Path;

use serde::{Deserialize, Serialize};

use normspec::problems::{preset, ProblemSpec, PRESETS};
use normspec::solver::{NewtonOptions, DEFAULT_CUTOFF};

use crate::CliError;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub preset: Option<String>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    /// Full `ProblemSpec`, or a partial one layered over `preset`.
    pub problem: Option<toml::Table>,
    #[serde(default)]
    pub scan: ScanParams,
    #[serde(default)]
    pub newton: NewtonParams,
    #[serde(default)]
    pub multiplicity: MultiplicityParams,
    #[serde(default)]
    pub eigenfunction: EigenfunctionParams,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanParams {
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub steps: usize,
}

impl Default for ScanParams {
    fn default() -> Self {
        Self {
            lambda_min: 0.0,
            lambda_max: 21.0,
            steps: 169,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NewtonParams {
    /// Explicit starting values; when empty, `(n/2)²` for `n = 0..=half_square_max`.
    pub starts: Vec<f64>,
    pub half_square_max: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub max_halvings: usize,
}

impl Default for NewtonParams {
    fn default() -> Self {
        let o = NewtonOptions::default();
        Self {
            starts: Vec::new(),
            half_square_max: 30,
            tol: o.tol,
            max_iter: o.max_iter,
            max_halvings: o.max_halvings,
        }
    }
}

impl NewtonParams {
    pub fn start_values(&self) -> Vec<f64> {
        if self.starts.is_empty() {
            (0..=self.half_square_max).map(|n| (n as f64 / 2.0).powi(2)).collect()
        } else {
            self.starts.clone()
        }
    }

    pub fn options(&self) -> NewtonOptions {
        NewtonOptions {
            tol: self.tol,
            max_iter: self.max_iter,
            max_halvings: self.max_halvings,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MultiplicityParams {
    pub lambda: f64,
    pub anchors: Vec<usize>,
    pub n1: usize,
    /// Defaults to `round(10·n1/9)`.
    pub n2: Option<usize>,
    pub cutoff: f64,
}

impl Default for MultiplicityParams {
    fn default() -> Self {
        Self {
            lambda: 56.0,
            anchors: vec![15, 16],
            n1: 800,
            n2: None,
            cutoff: DEFAULT_CUTOFF,
        }
    }
}

impl MultiplicityParams {
    pub fn n2(&self) -> usize {
        self.n2.unwrap_or_else(|| (self.n1 as f64 * 10.0 / 9.0).round() as usize)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EigenfunctionParams {
    pub lambda: f64,
    /// Refine `lambda` by Newton before evaluating.
    pub refine: bool,
}

impl Default for EigenfunctionParams {
    fn default() -> Self {
        Self { lambda: 1.0, refine: true }
    }
}

/// Fully resolved configuration of one run.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub preset: Option<String>,
    pub problem: ProblemSpec,
    pub workers: usize,
    pub scan: ScanParams,
    pub newton: NewtonParams,
    pub multiplicity: MultiplicityParams,
    pub eigenfunction: EigenfunctionParams,
}

/// Values given on the command line; each one overrides the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub preset: Option<String>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
}

fn config_err(msg: impl std::fmt::Display) -> CliError {
    CliError::Config(msg.to_string())
}

pub fn load_file(path: &Path) -> Result<FileConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| config_err(format!("{}: {e}", path.display())))
}

fn merge(base: &mut toml::Table, over: &toml::Table) {
    for (k, v) in over {
        match (base.get_mut(k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            _ => {
                base.insert(k.clone(), v.clone());
            }
        }
    }
}

pub fn resolve(file: FileConfig, over: &Overrides) -> Result<RunConfig, CliError> {
    let preset_name = over.preset.clone().or(file.preset.clone());
    let mut table = match &preset_name {
        Some(name) => {
            let spec = preset(name)
                .ok_or_else(|| config_err(format!("unknown preset {name:?}; known: {}", PRESETS.join(", "))))?;
            toml::Table::try_from(&spec).map_err(config_err)?
        }
        None => toml::Table::new(),
    };
    match &file.problem {
        Some(p) => merge(&mut table, p),
        None if preset_name.is_none() => return Err(config_err("give --preset or a [problem] table")),
        None => {}
    }
    let mut problem: ProblemSpec = toml::Value::Table(table)
        .try_into()
        .map_err(|e| config_err(format!("problem: {e}")))?;
    if let Some(seed) = over.seed.or(file.seed) {
        problem.seed = seed;
    }
    problem.validate().map_err(config_err)?;
    let workers = over.workers.or(file.workers).unwrap_or(1);
    if workers == 0 {
        return Err(config_err("workers must be at least 1"));
    }
    Ok(RunConfig {
        preset: preset_name,
        problem,
        workers,
        scan: file.scan,
        newton: file.newton,
        multiplicity: file.multiplicity,
        eigenfunction: file.eigenfunction,
    })
}

impl RunConfig {
    /// The configuration as a standalone file that reproduces this run.
    pub fn to_file(&self) -> Result<FileConfig, CliError> {
        Ok(FileConfig {
            preset: None,
            seed: Some(self.problem.seed),
            workers: Some(self.workers),
            problem: Some(toml::Table::try_from(&self.problem).map_err(config_err)?),
            scan: self.scan.clone(),
            newton: self.newton.clone(),
            multiplicity: self.multiplicity.clone(),
            eigenfunction: self.eigenfunction.clone(),
        })
    }

    /// Comment lines for output headers: version, command and config echo.
    pub fn header(&self, command: &str) -> Result<Vec<String>, CliError> {
        let echo = toml::to_string(&self.to_file()?).map_err(config_err)?;
        let mut lines = vec![format!("normspec {} {command}", env!("CARGO_PKG_VERSION"))];
        if let Some(p) = &self.preset {
            lines.push(format!("from preset {p}"));
        }
        lines.extend(echo.lines().map(str::to_string));
        Ok(lines)
    }
}
