use inls_core::checks::{corpus, doubling_check, validate_hypotheses, verify_interpolation, HypothesisMode};
use inls_core::Grid;
use serde_json::json;

use crate::config::Resolved;
use crate::error::CliError;
use crate::output::{num, Check, Output, Report};

pub fn run(cfg: &Resolved, out: &Output) -> Result<Report, CliError> {
    let v = &cfg.verify;
    let d = cfg.problem.dim(cfg.grid.geometry.dim());
    let spec = cfg.problem.spec(d);
    let mut checks = Vec::new();
    let mut verdicts = Vec::new();
    for mode in [HypothesisMode::Thblup, HypothesisMode::Stronger] {
        let verdict = validate_hypotheses(&spec, mode);
        for c in &verdict.clauses {
            let check = Check::holds(&format!("{mode:?}: {}", c.name).to_lowercase(), c.pass);
            checks.push(if mode == v.mode { check } else { check.informational() });
        }
        verdicts.push(verdict);
    }
    out.json("hypotheses.json", &verdicts)?;

    let grid = Grid::new(v.corpus_grid.clone()).map_err(|e| CliError::schema("verify.corpus_grid", e.to_string()))?;
    let rows = doubling_check(&grid, v.corpus, cfg.seed)?;
    out.records(
        "interpolation.csv",
        &["id", "ratio_n", "ratio_2n", "relative_change", "pass"],
        rows.iter().map(|r| {
            vec![r.id.to_string(), num(r.ratio_n), num(r.ratio_2n), num(r.relative_change), r.pass.to_string()]
        }),
    )?;
    for r in &rows {
        checks.push(Check::holds(&format!("{} under corpus doubling", r.id), r.pass));
    }
    let reports = verify_interpolation(&grid, &corpus(&grid, 2 * v.corpus, cfg.seed)?)?;
    out.json("interpolation.json", &reports)?;
    let result = json!({
        "mode": v.mode,
        "problem": { "v": spec.v.name(), "g": spec.g.name(), "d": d },
        "hypotheses": verdicts,
        "doubling": rows,
        "interpolation": reports,
    });
    Ok(Report::new(checks, result))
}
