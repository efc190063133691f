//! Run configuration: JSON file values overridden by command-line flags,
//! then per-experiment defaults.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};
use sivs_core::solvers::{Method, SolveConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Mms,
    Cavity,
    GammaSweep,
    Compare,
}

impl Experiment {
    pub fn as_str(&self) -> &'static str {
        match self {
            Experiment::Mms => "mms",
            Experiment::Cavity => "cavity",
            Experiment::GammaSweep => "gamma-sweep",
            Experiment::Compare => "compare",
        }
    }
}

/// Flags shared by every subcommand. All optional so that file values can
/// fill the gaps.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct RunArgs {
    /// Mesh resolution(s), cells per side; comma separated.
    #[arg(long, value_delimiter = ',')]
    pub n: Option<Vec<usize>>,
    /// Reynolds number of the cavity.
    #[arg(long, conflicts_with = "re_list")]
    pub re: Option<f64>,
    /// Increasing Reynolds numbers solved by continuation.
    #[arg(long, value_delimiter = ',')]
    pub re_list: Option<Vec<f64>>,
    /// Viscosity of the manufactured-solution problem.
    #[arg(long)]
    pub nu: Option<f64>,
    /// Grad-div parameter.
    #[arg(long, conflicts_with = "gamma_list")]
    pub gamma: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub gamma_list: Option<Vec<f64>>,
    /// Solver(s): sivs, ipy or picard; comma separated for `compare`.
    #[arg(long, value_delimiter = ',', value_parser = parse_method)]
    pub method: Option<Vec<Method>>,
    /// Relative pressure-increment stopping tolerance.
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Keep every iterate and write contraction monitors.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub keep_iterates: Option<bool>,
    /// Sequential linear algebra for bitwise reproducible output.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub single_thread: Option<bool>,
}

fn parse_method(s: &str) -> std::result::Result<Method, String> {
    s.parse::<Method>().map_err(|e| e.to_string())
}

impl RunArgs {
    /// Values present in `self` win over those in `base`.
    pub fn overlay(self, base: RunArgs) -> RunArgs {
        RunArgs {
            n: self.n.or(base.n),
            re: self.re.or(base.re),
            re_list: self.re_list.or(base.re_list),
            nu: self.nu.or(base.nu),
            gamma: self.gamma.or(base.gamma),
            gamma_list: self.gamma_list.or(base.gamma_list),
            method: self.method.or(base.method),
            tol: self.tol.or(base.tol),
            max_iter: self.max_iter.or(base.max_iter),
            out: self.out.or(base.out),
            keep_iterates: self.keep_iterates.or(base.keep_iterates),
            single_thread: self.single_thread.or(base.single_thread),
        }
    }

    pub fn from_file(path: &Path) -> Result<RunArgs> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }
}

/// Fully resolved configuration of one invocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub n: Vec<usize>,
    /// Reynolds numbers (cavity problems); empty for the manufactured
    /// solution.
    pub re: Vec<f64>,
    pub nu: f64,
    pub gamma: Vec<f64>,
    pub methods: Vec<Method>,
    pub stop_tol: f64,
    pub max_nonlinear: usize,
    pub out: PathBuf,
    pub keep_iterates: bool,
    pub single_thread: bool,
}

impl RunConfig {
    pub fn resolve(experiment: Experiment, args: RunArgs) -> Result<RunConfig> {
        use Experiment::*;
        let defaults = SolveConfig::default();
        let n = args.n.unwrap_or_else(|| match experiment {
            Mms => vec![10, 20, 40, 80],
            Cavity => vec![128],
            GammaSweep => vec![64],
            Compare => vec![16],
        });
        let re = match (args.re, args.re_list) {
            (Some(r), _) => vec![r],
            (None, Some(list)) => list,
            (None, None) => match experiment {
                Mms => vec![],
                Compare if args.nu.is_some() => vec![],
                _ => vec![100.0],
            },
        };
        let gamma = match (args.gamma, args.gamma_list) {
            (Some(g), _) => vec![g],
            (None, Some(list)) => list,
            (None, None) if experiment == GammaSweep => vec![1e-6, 1e-3, 1.0, 1e2, 1e3, 1e6],
            (None, None) => vec![1.0],
        };
        let methods = args.method.unwrap_or_else(|| match experiment {
            Compare => vec![Method::Sivs, Method::Ipy, Method::Picard],
            _ => vec![Method::Sivs],
        });
        let cfg = RunConfig {
            experiment,
            n,
            re,
            nu: args.nu.unwrap_or(1.0),
            gamma,
            methods,
            stop_tol: args.tol.unwrap_or(defaults.stop_tol),
            max_nonlinear: args.max_iter.unwrap_or(defaults.max_nonlinear),
            out: args.out.unwrap_or_else(|| PathBuf::from(format!("runs/{}", experiment.as_str()))),
            keep_iterates: args.keep_iterates.unwrap_or(false),
            single_thread: args.single_thread.unwrap_or(false),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        use Experiment::*;
        if self.n.is_empty() || self.n.contains(&0) {
            bail!("mesh resolutions must be positive");
        }
        if !matches!(self.experiment, Mms) && self.n.len() != 1 {
            bail!("{} takes a single --n", self.experiment.as_str());
        }
        if self.re.iter().any(|r| !(*r > 0.0)) {
            bail!("Reynolds numbers must be positive");
        }
        if self.re.windows(2).any(|w| w[1] <= w[0]) {
            bail!("--re-list must be strictly increasing");
        }
        if !(self.nu > 0.0) {
            bail!("--nu must be positive");
        }
        if self.gamma.is_empty() || self.gamma.iter().any(|g| !(*g >= 0.0)) {
            bail!("grad-div parameters must be nonnegative");
        }
        if !matches!(self.experiment, GammaSweep) && self.gamma.len() != 1 {
            bail!("{} takes a single --gamma", self.experiment.as_str());
        }
        if matches!(self.experiment, GammaSweep | Compare) && self.re.len() > 1 {
            bail!("{} takes a single Reynolds number", self.experiment.as_str());
        }
        if self.methods.is_empty() {
            bail!("no method selected");
        }
        if !matches!(self.experiment, Compare) && self.methods.len() != 1 {
            bail!("{} takes a single --method", self.experiment.as_str());
        }
        if matches!(self.experiment, Mms) && !self.re.is_empty() {
            bail!("mms does not take a Reynolds number; use --nu");
        }
        self.solve_config(self.methods[0]).validate()?;
        Ok(())
    }

    pub fn solve_config(&self, method: Method) -> SolveConfig {
        SolveConfig {
            stop_tol: self.stop_tol,
            max_nonlinear: self.max_nonlinear,
            keep_iterates: self.keep_iterates,
            ..SolveConfig::new(method)
        }
    }
}
