use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use contact_algebroid::config::RunConfig;

use crate::failure::Failure;

#[derive(Debug, Parser)]
#[command(
    name = "algebroid",
    version,
    about = "Validate and simulate contact systems on Lie algebroids"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check the structure equations and the bracket axioms of a system.
    Validate(RunArgs),
    /// Integrate a trajectory and write CSV plus diagnostics.
    Simulate {
        #[command(flatten)]
        run: RunArgs,
        /// Parameter sweep `name=start:stop:step`, runs in parallel.
        #[arg(long, value_name = "NAME=A:B:STEP")]
        sweep: Option<String>,
    },
    /// Integrate the Herglotz and contact Hamiltonian flows and compare them through the Legendre map.
    Compare(RunArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum MethodArg {
    Rk4,
    Rkf45,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum SideArg {
    Hamiltonian,
    Lagrangian,
}

#[derive(Debug, Default, Args)]
pub struct RunArgs {
    /// TOML run configuration; flags given on the command line take precedence.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Catalog name (tq, lie:so3, lie:abelian, atiyah, atiyah:so3, wong, wong:so3) or spec file path.
    #[arg(long)]
    pub system: Option<String>,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    pub hamiltonian: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub lagrangian: Option<String>,
    #[arg(long = "param", value_name = "NAME=VALUE", allow_hyphen_values = true)]
    pub params: Vec<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub gamma: Option<f64>,
    #[arg(long, value_enum)]
    pub side: Option<SideArg>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub q0: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub p0: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub y0: Option<Vec<f64>>,
    #[arg(long, allow_hyphen_values = true)]
    pub z0: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub t0: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub t1: Option<f64>,
    #[arg(long, value_enum)]
    pub method: Option<MethodArg>,
    #[arg(long)]
    pub step: Option<f64>,
    #[arg(long)]
    pub rtol: Option<f64>,
    #[arg(long)]
    pub atol: Option<f64>,
    /// Keep every k-th accepted step.
    #[arg(long, value_name = "K")]
    pub record_every: Option<usize>,
    /// Record on a fixed time grid instead.
    #[arg(long, value_name = "DT")]
    pub record_interval: Option<f64>,
    #[arg(long, value_name = "PATH")]
    pub out: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub tol: Option<f64>,
    /// Number of random base points for validation.
    #[arg(long)]
    pub samples: Option<usize>,
}

pub fn parse_assignment(text: &str) -> Result<(String, &str), Failure> {
    let (name, value) = text
        .split_once('=')
        .ok_or_else(|| Failure::Config(format!("expected NAME=VALUE, got `{text}`")))?;
    let name = name.trim();
    if name.is_empty() {
        return Err(Failure::Config(format!("empty name in `{text}`")));
    }
    Ok((name.to_string(), value.trim()))
}

impl RunArgs {
    /// Merges the optional config file with the flags, flags winning.
    pub fn resolve(&self) -> Result<RunConfig, Failure> {
        let base = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        let mut params = std::collections::BTreeMap::new();
        for p in &self.params {
            let (name, value) = parse_assignment(p)?;
            let v: f64 = value
                .parse()
                .map_err(|_| Failure::Config(format!("--param {name}: `{value}` is not a number")))?;
            params.insert(name, v);
        }
        let flags = RunConfig {
            system: self.system.clone(),
            dim: self.dim,
            hamiltonian: self.hamiltonian.clone(),
            lagrangian: self.lagrangian.clone(),
            side: self.side.map(|s| match s {
                SideArg::Hamiltonian => "hamiltonian".into(),
                SideArg::Lagrangian => "lagrangian".into(),
            }),
            params,
            gamma: self.gamma,
            q0: self.q0.clone(),
            p0: self.p0.clone(),
            y0: self.y0.clone(),
            z0: self.z0,
            t0: self.t0,
            t1: self.t1,
            method: self.method.map(|m| match m {
                MethodArg::Rk4 => "rk4".into(),
                MethodArg::Rkf45 => "rkf45".into(),
            }),
            step: self.step,
            rtol: self.rtol,
            atol: self.atol,
            record_every: self.record_every,
            record_interval: self.record_interval,
            out: self.out.clone(),
            seed: self.seed,
            tol: self.tol,
            samples: self.samples,
        };
        Ok(base.overlay(flags))
    }
}
