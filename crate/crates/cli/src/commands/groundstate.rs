use inls_core::ground_state::closed_form_1d;
use inls_core::{Geometry, C64};
use serde_json::json;

use super::ground_state;
use crate::config::Resolved;
use crate::error::CliError;
use crate::output::{num, Check, Output, Report};

/// √3·π/2, the mass of the one-dimensional ground state.
const MASS_1D: f64 = 2.720_699_046_351_326;

pub fn run(cfg: &Resolved, out: &Output) -> Result<Report, CliError> {
    let grid = cfg.build_grid()?;
    let gs = ground_state(cfg, &grid)?;
    out.grid(&grid)?;
    let rows = grid
        .coords()
        .iter()
        .zip(grid.radius())
        .enumerate()
        .map(|(i, (c, r))| [i as f64, c[0], c[1], *r, gs.q[i], gs.qtilde[i]]);
    out.csv("groundstate.csv", &["index", "x", "y", "r", "q", "qtilde"], rows)?;

    let qc: Vec<C64> = gs.q.iter().map(|v| C64::new(*v, 0.0)).collect();
    let kappa = gs.kappa(&grid);
    let grad_q = grid.grad_norm(&qc);
    let moment_q = grid.position_norm(&qc);
    let constants = [
        ("mass", gs.mass),
        ("gn_constant", gs.gn_constant),
        ("alpha0", gs.alpha0),
        ("beta0", gs.beta0),
        ("gamma0", gs.gamma0),
        ("kappa", kappa),
        ("grad_norm", grad_q),
        ("moment_norm", moment_q),
        ("decay_rate", gs.decay_rate),
    ];
    out.records("constants.csv", &["name", "value"], constants.iter().map(|(k, v)| vec![k.to_string(), num(*v)]))?;

    let mut checks = vec![
        Check::below("profile residual", gs.residual, 1e-8),
        Check::below("qtilde identity", gs.identity_rel_error, 1e-6),
    ];
    let mut result = json!({
        "d": gs.d,
        "mass": gs.mass,
        "gn_constant": gs.gn_constant,
        "alpha0": gs.alpha0,
        "beta0": gs.beta0,
        "gamma0": gs.gamma0,
        "kappa": kappa,
        "grad_norm": grad_q,
        "moment_norm": moment_q,
        "residuals": {
            "profile": gs.residual,
            "qtilde": gs.qtilde_residual,
            "identity": gs.identity_rel_error,
            "pohozaev": gs.pohozaev_rel_error,
        },
        "iterations": gs.iterations,
        "decay_rate": gs.decay_rate,
        "min_value": gs.min_value,
    });
    if grid.geometry() == Geometry::Line {
        let pointwise = grid
            .coords()
            .iter()
            .zip(&gs.q)
            .map(|(c, q)| (q - closed_form_1d(c[0])).abs())
            .fold(0.0, f64::max);
        let mass_error = (gs.mass - MASS_1D).abs() / MASS_1D;
        checks.push(Check::below("closed form, pointwise", pointwise, 1e-8));
        checks.push(Check::below("mass vs sqrt(3)pi/2", mass_error, 1e-6));
        result["closed_form_error"] = json!(pointwise);
        result["mass_rel_error"] = json!(mass_error);
    }
    Ok(Report::new(checks, result))
}
