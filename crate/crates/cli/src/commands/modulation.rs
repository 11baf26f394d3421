use inls_core::modulation::{measure_q_decay, q_to_p, solve_q_from_p, DecayClass, ModulationPath, PPath, TauGrid};
use rand::Rng;
use serde_json::json;

use super::rng;
use crate::config::{Forcing, Resolved};
use crate::error::CliError;
use crate::output::{Check, Output, Report};

/// Slack on a measured decay exponent against the table.
const DECAY_TOL: f64 = 0.1;

pub fn run(cfg: &Resolved, out: &Output) -> Result<Report, CliError> {
    let m = &cfg.modulation;
    let tau0 = cfg.problem.tau0;
    let d = cfg.problem.dim(cfg.grid.geometry.dim());
    let grid = if m.log_spacing {
        TauGrid::log(tau0, m.tau_max, m.nodes)?
    } else {
        TauGrid::uniform(tau0, m.tau_max, m.nodes)?
    };
    let c = m.decay;
    let mut p = PPath::zero(grid.clone());
    match m.forcing {
        Forcing::Power => {
            let f: Vec<f64> = grid.tau.iter().map(|t| m.amplitude * t.powf(-c)).collect();
            p.p1 = f.clone();
            p.p4 = f.clone();
            p.p5 = f.clone();
            for l in 0..d {
                p.p2[l] = f.clone();
                p.p3[l] = f.clone();
            }
        }
        Forcing::Random => {
            let mut r = rng(cfg);
            let mut comp = || -> Vec<f64> {
                let a: f64 = if m.amplitude > 0.0 { r.gen_range(-m.amplitude..m.amplitude) } else { 0.0 };
                let b: f64 = r.gen_range(-0.3..0.3);
                let w: f64 = r.gen_range(0.5..2.0);
                grid.tau.iter().map(|t| a * t.powf(-c) * (1.0 + b * (w * t.ln()).sin())).collect()
            };
            p.p1 = comp();
            p.p4 = comp();
            p.p5 = comp();
            for l in 0..d {
                p.p2[l] = comp();
                p.p3[l] = comp();
            }
        }
    }
    let class = DecayClass::uniform(c);
    let (path, report) = ModulationPath::solve(p, &class, &m.solve)?;
    out.csv("modulation.csv", &ModulationPath::COLUMNS, path.rows())?;

    let (back, _) = solve_q_from_p(&q_to_p(&path.q)?, &class, &m.solve)?;
    let scale = path.q.components().iter().flat_map(|v| v.iter()).fold(0.0f64, |a, v| a.max(v.abs()));
    let round_trip = if scale > 0.0 { back.max_difference(&path.q) / scale } else { back.max_difference(&path.q) };

    let table = class.table();
    let measured = measure_q_decay(&path.q, m.window[0], m.window[1]);
    let mut checks = vec![Check::below("q -> p -> q round trip", round_trip, 1e-6)];
    if m.forcing == Forcing::Power {
        let gap = |v: Option<f64>, want: f64| v.map_or(f64::INFINITY, |x| (x - want).abs());
        let short = |v: Option<f64>, want: f64| v.map_or(f64::INFINITY, |x| (want - x).max(0.0));
        checks.push(Check::at_most("decay of q1", gap(measured.q1, table.q1), DECAY_TOL));
        checks.push(Check::at_most("decay of q2", gap(measured.q2, table.q2), DECAY_TOL));
        checks.push(Check::at_most("decay of q3 below table", short(measured.q3, table.q3), DECAY_TOL));
        checks.push(Check::at_most("decay of q4r", gap(measured.q4r, table.q4r), DECAY_TOL));
        checks.push(Check::at_most("decay of q5 below table", short(measured.q5, table.q5), DECAY_TOL));
    }
    let result = json!({
        "class": class,
        "admissible": class.admissible(),
        "solve": report,
        "round_trip": round_trip,
        "decay_table": table,
        "measured_decay": measured,
        "window": m.window,
    });
    Ok(Report::new(checks, result))
}
