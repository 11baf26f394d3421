//! `inls`: reproducible runs of the blow-up laboratory.
//!
//! Exit codes: 0 when every gating check passes, 2 when the computation
//! finished but a check failed, 1 when the computation failed, 3 when the
//! configuration violates the schema.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use crate::error::CliError;
use crate::output::{Check, Output};

#[derive(Parser)]
#[command(name = "inls", version, about = "Minimal-mass blow-up laboratory for the inhomogeneous mass-critical NLS")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML configuration; omitted tables take defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Seed for every random draw; overrides `seed` in the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Ground state Q, Q̃ and the normalization constants.
    Groundstate,
    /// Secular basis, Gram matrix and growth curves of e^{itL}.
    Modes,
    /// Modulation path q solved from a forcing p.
    Modulation,
    /// Physical or transformed-frame evolution.
    Evolve,
    /// Fixed-point construction of the remainder w.
    Construct,
    /// V(r), g(r) of a surface of revolution and its admissibility.
    Surface,
    /// Hypothesis validation and interpolation inequalities.
    Verify,
    /// Construction followed by assembly of the blow-up solution.
    Demo,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Groundstate => "groundstate",
            Command::Modes => "modes",
            Command::Modulation => "modulation",
            Command::Evolve => "evolve",
            Command::Construct => "construct",
            Command::Surface => "surface",
            Command::Verify => "verify",
            Command::Demo => "demo",
        }
    }
}

#[derive(Serialize)]
struct Summary<'a> {
    subcommand: &'a str,
    seed: u64,
    passed: bool,
    failure: Option<&'a str>,
    checks: &'a [Check],
    result: &'a serde_json::Value,
}

fn run(cli: &Cli) -> Result<i32, CliError> {
    let raw = config::load(cli.config.as_deref())?;
    let cfg = config::resolve(raw, cli.command, cli.seed)?;
    let out = Output::create(&cli.out)?;
    out.text("config.toml", &cfg.to_toml())?;
    let report = commands::run(cli.command, &cfg, &out)?;
    let passed = report.failure.is_none() && report.passed();
    out.json(
        "summary.json",
        &Summary {
            subcommand: cli.command.name(),
            seed: cfg.seed,
            passed,
            failure: report.failure.as_deref(),
            checks: &report.checks,
            result: &report.result,
        },
    )?;
    for c in &report.checks {
        let verdict = if c.pass { "PASS" } else if c.gating { "FAIL" } else { "NOTE" };
        println!("{verdict} {}: {:e} {} {:e}", c.name, c.value, c.relation, c.bound);
    }
    if let Some(f) = &report.failure {
        eprintln!("computation failed: {f}");
        return Ok(1);
    }
    println!("{} {}", cli.command.name(), if passed { "PASS" } else { "FAIL" });
    Ok(if passed { 0 } else { 2 })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 3 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
