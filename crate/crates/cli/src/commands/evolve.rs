use inls_core::dynamics::{
    evolve_physical, evolve_transformed, explicit_s, transformed_secular, Equation, EvolveOptions,
};
use inls_core::linops::{random_field, SecularBasis};
use inls_core::C64;
use serde_json::json;

use super::{by_family, family_indices, ground_state, rng, NU_COLUMNS};
use crate::config::{Initial, Resolved};
use crate::error::CliError;
use crate::output::{num, Check, Output, Report};

fn nearest(snaps: &[(f64, Vec<C64>)], t: f64) -> Option<&(f64, Vec<C64>)> {
    snaps.iter().min_by(|a, b| (a.0 - t).abs().total_cmp(&(b.0 - t).abs()))
}

pub fn run(cfg: &Resolved, out: &Output) -> Result<Report, CliError> {
    let e = &cfg.evolve;
    let grid = cfg.build_grid()?;
    let spec = cfg.spec_on(&grid)?;
    let transformed = e.equation == Equation::Transformed;
    let gs = if transformed || e.initial != Initial::Random { Some(ground_state(cfg, &grid)?) } else { None };
    let initial: Vec<C64> = match e.initial {
        Initial::Random => {
            let mut r = rng(cfg);
            random_field(&grid, &mut r, e.bumps).iter().map(|z| e.amplitude * z).collect()
        }
        Initial::GroundState => {
            let ph = if transformed { C64::from_polar(1.0, e.t0) } else { C64::new(1.0, 0.0) };
            gs.as_ref().unwrap().q.iter().map(|q| ph * q).collect()
        }
        Initial::Explicit => explicit_s(&grid, gs.as_ref().unwrap(), e.t0)?,
    };

    let seg = (e.t1 - e.t0) / (e.rows - 1) as f64;
    let row_times: Vec<f64> = (0..e.rows).map(|k| e.t0 + k as f64 * seg).collect();
    let mut stored = e.snapshots.clone();
    if transformed {
        stored.extend(&row_times);
    }
    let opts = EvolveOptions { dt: e.dt, rows: e.rows, order: e.order, snapshots: stored };
    let res = match e.equation {
        Equation::Physical => evolve_physical(&grid, &spec, &initial, e.t0, e.t1, &opts)?,
        _ => evolve_transformed(&grid, &spec, &initial, e.t0, e.t1, &opts)?,
    };

    let nu_rows: Vec<[f64; 6]> = if transformed {
        let gs = gs.as_ref().unwrap();
        let basis = SecularBasis::build(&grid, gs)?;
        let idx = family_indices(&basis);
        res.rows
            .iter()
            .map(|r| match nearest(&res.snapshots, r.t) {
                Some((t, v)) => by_family(&idx, &transformed_secular(&grid, gs, &basis, *t, v)),
                None => [f64::NAN; 6],
            })
            .collect()
    } else {
        vec![[f64::NAN; 6]; res.rows.len()]
    };
    let mut header = vec!["t", "mass", "energy", "grad_norm", "moment_norm"];
    header.extend(NU_COLUMNS);
    let rows = res.rows.iter().zip(&nu_rows).map(|(r, nu)| {
        let mut v = vec![r.t, r.mass, r.energy, r.grad_norm, r.moment_norm];
        v.extend(nu);
        v
    });
    out.csv("evolve.csv", &header, rows)?;

    out.grid(&grid)?;
    let mut index = Vec::new();
    let mut wanted = e.snapshots.clone();
    wanted.sort_by(f64::total_cmp);
    for (k, t) in wanted.iter().enumerate() {
        if let Some((ts, f)) = nearest(&res.snapshots, *t) {
            let name = format!("snapshot_{k}.csv");
            out.field(&name, f)?;
            index.push(vec![k.to_string(), num(*ts), name]);
        }
    }
    out.records("snapshots.csv", &["k", "t", "file"], index)?;

    let drift = res.drift();
    let mut checks = Vec::new();
    let mut report_failure = None;
    if let Some(t) = res.halted_at {
        report_failure = Some(format!("non-finite field at t = {t}"));
    } else {
        checks.push(Check::below("mass drift per unit time", drift.mass, 1e-10));
        if !transformed {
            checks.push(Check::below("energy drift per unit time", drift.energy, 1e-8));
        }
    }
    let result = json!({
        "equation": e.equation,
        "drift": drift,
        "halted_at": res.halted_at,
        "rows": res.rows.len(),
        "problem": { "v": spec.v.name(), "g": spec.g.name(), "d": spec.d },
    });
    let mut report = Report::new(checks, result);
    report.failure = report_failure;
    Ok(report)
}
