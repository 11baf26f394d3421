use inls_core::constructor::ROUNDOFF_FLOOR;
use inls_core::dynamics::assemble_blowup;
use inls_core::C64;
use serde_json::json;

use super::construct;
use crate::config::Resolved;
use crate::error::CliError;
use crate::output::{Check, Output, Report};

/// Tolerance of the informational t‖∇u‖/κ comparison.
const KAPPA_TOL: f64 = 0.1;

pub fn run(cfg: &Resolved, out: &Output) -> Result<Report, CliError> {
    let (mut report, b) = construct::build(cfg, out)?;
    let path = match (&report.failure, &b.state.path) {
        (None, Some(p)) => p,
        (None, None) => {
            report.failure = Some("construction returned no modulation path".into());
            return Ok(report);
        }
        _ => return Ok(report),
    };
    let blowup = assemble_blowup(&b.grid, &b.gs, path, b.spec.v0(), &b.state.taus, &b.state.w)?;
    let qc: Vec<C64> = b.gs.q.iter().map(|v| C64::new(*v, 0.0)).collect();
    let moment_q = b.grid.position_norm(&qc);
    // t‖∇S(t)‖ for the explicit profile S
    let explicit = |t: f64| (blowup.grad_q.powi(2) + 0.25 * t * t * moment_q * moment_q).sqrt();
    let rows = blowup.samples.iter().map(|s| {
        [
            s.s,
            s.tau,
            s.grad_rate,
            explicit(s.s),
            blowup.kappa,
            s.sigma_distance,
            s.hdot1_distance,
            s.lambda,
            s.mass,
            s.w_h1,
        ]
    });
    out.csv(
        "rate.csv",
        &[
            "t",
            "tau",
            "grad_rate",
            "explicit_rate",
            "kappa",
            "sigma_distance",
            "hdot1_distance",
            "lambda",
            "mass",
            "w_h1",
        ],
        rows,
    )?;

    // non-increasing up to roundoff relative to ‖∇S(t)‖, so that w ≡ 0 passes
    let monotone = blowup.samples.windows(2).all(|w| {
        w[1].sigma_distance <= w[0].sigma_distance + ROUNDOFF_FLOOR * explicit(w[1].s) / w[1].s
    });
    let last = blowup.samples.last().expect("assembly returns one sample per node");
    let rate_error = (last.grad_rate / explicit(last.s) - 1.0).abs();
    let kappa_error = (last.grad_rate / blowup.kappa - 1.0).abs();
    report.checks.push(Check::at_most("t|grad u| vs explicit profile at smallest t", rate_error, cfg.demo.rate_tol));
    report.checks.push(Check::holds("Sigma distance monotone", monotone));
    report.checks.push(Check::at_most("t|grad u| vs kappa at smallest t", kappa_error, KAPPA_TOL).informational());
    report.result["blowup"] = json!({
        "kappa": blowup.kappa,
        "grad_q": blowup.grad_q,
        "moment_q": moment_q,
        "smallest_t": last.s,
        "grad_rate": last.grad_rate,
        "explicit_rate": explicit(last.s),
        "rate_rel_error": rate_error,
        "kappa_rel_error": kappa_error,
        "scale_ratio": blowup.scale_ratio(),
        "drift_ratio": blowup.drift_ratio(),
        "distance_monotone": monotone,
        "distance_strictly_monotone": blowup.distance_monotone(),
    });
    Ok(report)
}
