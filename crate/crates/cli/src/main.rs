//! `blowup`: meshing, solving, Green/φ computations and concentration
//! diagnostics for `Δu = u`, `∂u/∂ν = u^p`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::RunConfig;

/// Exit status of a failed run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Config = 2,
    Solver = 3,
    Diagnostics = 4,
}

#[derive(Debug)]
pub struct Failure {
    pub status: Status,
    pub error: anyhow::Error,
}

pub type Outcome<T = ()> = Result<T, Failure>;

pub trait Classify<T> {
    fn or_status(self, status: Status) -> Outcome<T>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn or_status(self, status: Status) -> Outcome<T> {
        self.map_err(|e| Failure {
            status,
            error: e.into(),
        })
    }
}

#[derive(Debug, Parser)]
#[command(name = "blowup", version, about = "Boundary concentration laboratory for Δu = u, ∂u/∂ν = u^p")]
struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Increase log verbosity (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args, Default)]
pub struct DomainArgs {
    /// Domain preset: disk, ellipse or star.
    #[arg(long)]
    domain: Option<String>,
    #[arg(long)]
    a: Option<f64>,
    #[arg(long)]
    b: Option<f64>,
    #[arg(long)]
    amplitude: Option<f64>,
    #[arg(long)]
    lobes: Option<u32>,
    /// Target mesh size.
    #[arg(long)]
    h: Option<f64>,
    /// Grading point, `(x,y):factor` or `s:factor`; repeatable.
    #[arg(long)]
    grade: Vec<String>,
    /// Innermost ring radius of graded fans.
    #[arg(long)]
    core: Option<f64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl DomainArgs {
    fn apply(&self, c: &mut RunConfig) {
        if let Some(d) = &self.domain {
            c.domain.preset = d.clone();
        }
        c.domain.a = self.a.or(c.domain.a);
        c.domain.b = self.b.or(c.domain.b);
        c.domain.amplitude = self.amplitude.or(c.domain.amplitude);
        c.domain.lobes = self.lobes.or(c.domain.lobes);
        c.mesh.h = self.h.unwrap_or(c.mesh.h);
        if !self.grade.is_empty() {
            c.mesh.grade = self.grade.clone();
        }
        c.mesh.core = self.core.or(c.mesh.core);
        if let Some(o) = &self.out {
            c.output.dir = o.clone();
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print the default configuration.
    Config,
    /// Generate a mesh and print its statistics.
    Mesh {
        #[command(flatten)]
        domain: DomainArgs,
    },
    /// Solve along a continuation schedule and write a branch directory.
    Solve {
        #[command(flatten)]
        domain: DomainArgs,
        /// Exponents, strictly increasing.
        #[arg(long, value_delimiter = ',')]
        p_list: Option<Vec<f64>>,
        /// Comma-separated arc parameters of the bubbles, or `auto`.
        #[arg(long)]
        peaks: Option<String>,
        /// Number of peaks for `--peaks auto`.
        #[arg(long)]
        m: Option<usize>,
        /// Initial guess: bubble or constant.
        #[arg(long)]
        ansatz: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the concentration diagnostics on a branch directory.
    Diagnose {
        branch: PathBuf,
        /// Output directory; defaults to the branch directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tabulate the Robin function or search for critical points of φ_m.
    Green {
        #[command(flatten)]
        domain: DomainArgs,
        #[arg(long)]
        robin_samples: Option<usize>,
        #[arg(long)]
        phi_crit: Option<usize>,
        #[arg(long)]
        starts: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn run(cli: Cli) -> Outcome {
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path).or_status(Status::Config)?,
        None => RunConfig::default(),
    };
    match cli.command {
        Command::Config => {
            print!("{}", config.to_toml().or_status(Status::Config)?);
            Ok(())
        }
        Command::Mesh { domain } => {
            domain.apply(&mut config);
            commands::mesh(&config)
        }
        Command::Solve {
            domain,
            p_list,
            peaks,
            m,
            ansatz,
            seed,
        } => {
            domain.apply(&mut config);
            if let Some(ps) = p_list {
                config.solver.schedule = ps;
            }
            if let Some(p) = peaks {
                config.solve.peaks = p;
            }
            config.solve.m = m.unwrap_or(config.solve.m);
            if let Some(a) = ansatz {
                config.solve.ansatz = a;
            }
            config.seed = seed.unwrap_or(config.seed);
            commands::solve(&config)
        }
        Command::Diagnose { branch, out } => commands::diagnose(&config, &branch, out.as_deref()),
        Command::Green {
            domain,
            robin_samples,
            phi_crit,
            starts,
            seed,
        } => {
            domain.apply(&mut config);
            config.green.robin_samples = robin_samples.or(config.green.robin_samples);
            config.green.phi_crit = phi_crit.or(config.green.phi_crit);
            config.green.starts = starts.unwrap_or(config.green.starts);
            config.seed = seed.unwrap_or(config.seed);
            commands::green(&config)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(Status::Config as u8)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.status as u8)
        }
    }
}
