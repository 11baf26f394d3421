use inls_core::checks::{validate_hypotheses, HypothesisMode};
use inls_core::constructor::{Constructor, IterationRecord, IterationState, Status};
use inls_core::ground_state::GroundState;
use inls_core::linops::SecularBasis;
use inls_core::modulation::ModulationPath;
use inls_core::sources::ProblemSpec;
use inls_core::Grid;
use serde_json::json;

use super::{by_family, family_indices, ground_state, NU_COLUMNS};
use crate::config::Resolved;
use crate::error::CliError;
use crate::output::{num, Check, Output, Report};

/// Everything a construction leaves behind for `demo`.
pub struct Built {
    pub grid: Grid,
    pub gs: GroundState,
    pub spec: ProblemSpec,
    pub state: IterationState,
}

pub fn run(cfg: &Resolved, out: &Output) -> Result<Report, CliError> {
    Ok(build(cfg, out)?.0)
}

pub fn build(cfg: &Resolved, out: &Output) -> Result<(Report, Built), CliError> {
    let grid = cfg.build_grid()?;
    let spec = cfg.spec_on(&grid)?;
    let gs = ground_state(cfg, &grid)?;
    let basis = SecularBasis::build(&grid, &gs)?;
    let opts = cfg.construct;
    let (state, summary, idx) = {
        let c = Constructor::new(&grid, &gs, &basis, &spec, opts)?;
        let state = c.picard();
        let summary = c.summary(&state);
        (state, summary, family_indices(&basis))
    };

    out.csv("iterations.csv", &IterationRecord::COLUMNS, state.history.iter().map(|r| r.row()))?;
    let path_rows = state.path.as_ref().map(ModulationPath::rows).unwrap_or_default();
    out.csv("paths.csv", &ModulationPath::COLUMNS, path_rows)?;
    let weight = 3.0 - 3.0 * opts.epsilon;
    out.csv(
        "nu6.csv",
        &["tau", "nu6", "nu6_scaled"],
        state.taus.iter().zip(&state.nu6).map(|(t, v)| [*t, *v, t.powf(weight) * v]),
    )?;
    let mut header = vec!["tau", "w_h1", "w_moment"];
    header.extend(NU_COLUMNS);
    let rows = state.taus.iter().zip(&state.w).zip(&state.nu).map(|((t, w), nu)| {
        let mut r = vec![*t, grid.hs_norm(w, 1.0), grid.moment_norm(w, 1.0)];
        r.extend(by_family(&idx, nu));
        r
    });
    out.csv("remainder.csv", &header, rows)?;

    out.grid(&grid)?;
    let mut wanted = cfg.output.w_snapshots.clone();
    if wanted.is_empty() {
        wanted = vec![state.taus[0], *state.taus.last().unwrap()];
    }
    wanted.sort_by(f64::total_cmp);
    let mut index = Vec::new();
    for (k, t) in wanted.iter().enumerate() {
        let near = state.taus.iter().enumerate().min_by(|a, b| (a.1 - t).abs().total_cmp(&(b.1 - t).abs()));
        if let Some((i, tau)) = near {
            let name = format!("w_{k}.csv");
            out.field(&name, &state.w[i])?;
            index.push(vec![k.to_string(), num(*tau), name]);
        }
    }
    out.records("w_snapshots.csv", &["k", "tau", "file"], index)?;

    let contraction = state.history.iter().map(|r| r.contraction).fold(0.0, f64::max);
    let converged = state.status == Status::Converged;
    let checks = vec![
        Check::holds("picard converged", converged),
        Check::at_most("sup tau^(2-eps) |w|_H1", summary.h1_weighted_sup, 1.0),
        Check::below("non-conformal secular coordinates", summary.max_secular_non_conformal, 1e-6),
        Check::below("modulation tuning contraction", contraction, 1.0),
    ];
    let hypotheses = validate_hypotheses(&spec, HypothesisMode::Thblup);
    let result = json!({
        "status": state.status,
        "iterations": state.iteration,
        "residual": state.residual,
        "y_norm": state.y,
        "summary": summary,
        "contraction": contraction,
        "nodes": state.taus.len(),
        "hypotheses": hypotheses,
        "problem": { "v": spec.v.name(), "g": spec.g.name(), "d": spec.d, "tau0": spec.tau0 },
    });
    let mut report = Report::new(checks, result);
    if !converged {
        report.failure = Some(match &state.status {
            Status::Diverged(why) => format!("Picard iteration diverged: {why}"),
            _ => format!("Picard iteration stopped after {} iterations, residual {:e}", state.iteration, state.residual),
        });
    }
    Ok((report, Built { grid, gs, spec, state }))
}
