//! One module per subcommand. Each writes its files into the run directory
//! and returns the checks that decide the exit code.

mod construct;
mod demo;
mod evolve;
mod groundstate;
mod modes;
mod modulation;
mod surface;
mod verify;

use inls_core::ground_state::GroundState;
use inls_core::linops::{Mode, SecularBasis};
use inls_core::Grid;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::Resolved;
use crate::error::CliError;
use crate::output::{Output, Report};
use crate::Command;

pub fn run(cmd: Command, cfg: &Resolved, out: &Output) -> Result<Report, CliError> {
    match cmd {
        Command::Groundstate => groundstate::run(cfg, out),
        Command::Modes => modes::run(cfg, out),
        Command::Modulation => modulation::run(cfg, out),
        Command::Evolve => evolve::run(cfg, out),
        Command::Construct => construct::run(cfg, out),
        Command::Surface => surface::run(cfg, out),
        Command::Verify => verify::run(cfg, out),
        Command::Demo => demo::run(cfg, out),
    }
}

fn rng(cfg: &Resolved) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(cfg.seed)
}

fn ground_state(cfg: &Resolved, grid: &Grid) -> Result<GroundState, CliError> {
    Ok(GroundState::solve(grid, &cfg.ground_state)?)
}

/// Column names nu_1..nu_6.
const NU_COLUMNS: [&str; 6] = ["nu_1", "nu_2", "nu_3", "nu_4", "nu_5", "nu_6"];

/// Basis index of the first mode of each family 1..6; families without a
/// mode on this grid map to None.
fn family_indices(basis: &SecularBasis) -> [Option<usize>; 6] {
    let mut out = [None; 6];
    for (i, m) in basis.modes.iter().enumerate() {
        let f = Mode::family(*m) - 1;
        out[f].get_or_insert(i);
    }
    out
}

fn by_family(idx: &[Option<usize>; 6], nu: &[f64]) -> [f64; 6] {
    idx.map(|i| i.and_then(|i| nu.get(i).copied()).unwrap_or(f64::NAN))
}
