use inls_core::linops::{coercivity, growth_curve, random_field, LinearizedOperator, SecularBasis};
use serde_json::json;

use super::{ground_state, rng};
use crate::config::Resolved;
use crate::error::CliError;
use crate::output::{num, Check, Output, Report};

/// Largest H¹ growth of an M field tolerated over the sampled window.
const GROWTH_BOUND: f64 = 10.0;

pub fn run(cfg: &Resolved, out: &Output) -> Result<Report, CliError> {
    let m = &cfg.modes;
    let grid = cfg.build_grid()?;
    let gs = ground_state(cfg, &grid)?;
    let basis = SecularBasis::build(&grid, &gs)?;
    let op = LinearizedOperator::new(&grid, &gs);
    out.grid(&grid)?;

    let labels: Vec<String> = basis.modes.iter().map(|m| m.label()).collect();
    let mut rows = Vec::new();
    for (j, label) in labels.iter().enumerate() {
        for (kind, f) in [("n", &basis.n[j]), ("m", &basis.m[j])] {
            for (i, z) in f.iter().enumerate() {
                rows.push(vec![label.clone(), kind.to_string(), i.to_string(), num(z.re), num(z.im)]);
            }
        }
    }
    out.records("modes.csv", &["mode", "kind", "index", "re", "im"], rows)?;

    let g = &basis.gram;
    let gram_rows = g.raw.iter().enumerate().flat_map(|(k, row)| {
        let labels = &g.labels;
        row.iter().enumerate().map(move |(j, v)| vec![labels[k].clone(), labels[j].clone(), num(*v)])
    });
    out.records("gram.csv", &["n", "m", "raw"], gram_rows)?;

    let mut r = rng(cfg);
    let fields: Vec<_> =
        (0..m.random_fields).map(|_| basis.project_m(&grid, &random_field(&grid, &mut r, m.bumps))).collect();
    let mut growth_rows = Vec::new();
    let mut worst: f64 = 0.0;
    for (k, f) in fields.iter().enumerate() {
        let curve = growth_curve(&op, f, m.t_end, m.samples, 1.0, m.dt, m.order)?;
        let h0 = curve[0].1;
        for (t, h) in curve {
            let ratio = h / h0;
            worst = worst.max(ratio);
            growth_rows.push([t, k as f64, h, ratio]);
        }
    }
    out.csv("growth.csv", &["t", "field", "h1_norm", "ratio"], growth_rows)?;
    let coer = coercivity(&op, &basis, &fields);

    let mut checks = vec![Check::below("Gram deviation", g.raw_max_deviation, 1e-6)];
    if !fields.is_empty() {
        checks.push(Check::at_most("M-field H1 growth", worst, GROWTH_BOUND));
        checks.push(Check::above("coercivity on M", coer.c_lower, 0.0));
    }
    let result = json!({
        "modes": labels,
        "alpha0": basis.alpha0,
        "beta0": basis.beta0,
        "gamma0": basis.gamma0,
        "gram": g,
        "max_growth_ratio": if fields.is_empty() { None } else { Some(worst) },
        "coercivity": coer,
    });
    Ok(Report::new(checks, result))
}
