use inls_core::checks::{validate_hypotheses, HypothesisMode};
use inls_core::geometry::{admissibility, check_profile};
use serde_json::json;

use crate::config::Resolved;
use crate::error::CliError;
use crate::output::{Check, Output, Report};

pub fn run(cfg: &Resolved, out: &Output) -> Result<Report, CliError> {
    let s = cfg
        .problem
        .surface
        .as_ref()
        .ok_or_else(|| CliError::schema("problem.surface", "the surface subcommand needs a surface"))?;
    let sc = &cfg.surface;
    let rows = (0..sc.points).map(|i| {
        let r = sc.r_max * i as f64 / (sc.points - 1) as f64;
        let (phi, dphi, _) = s.phi(r);
        [r, phi, dphi, s.v(r), s.g(r), s.v_minus_v0(r), s.g_minus_one(r)]
    });
    out.csv("surface.csv", &["r", "phi", "dphi", "v", "g", "v_minus_v0", "g_minus_one"], rows)?;

    let profile = check_profile(s, sc.r_max)?;
    let adm = admissibility(s, sc.r_max);
    let spec = cfg.problem.spec(2);
    let thblup = validate_hypotheses(&spec, HypothesisMode::Thblup);
    let stronger = validate_hypotheses(&spec, HypothesisMode::Stronger);
    out.json("admissibility.json", &json!({ "profile": profile, "admissibility": adm }))?;
    let checks = vec![
        Check::holds("warping profile valid", profile.valid),
        Check::holds("V and g bounded", adm.bounded),
        Check::holds("vanishing-order hypotheses (thblup)", thblup.pass).informational(),
        Check::holds("vanishing-order hypotheses (stronger)", stronger.pass).informational(),
    ];
    let result = json!({
        "surface": s.name(),
        "v0": s.v0(),
        "taylor": s.taylor(),
        "profile": profile,
        "admissibility": adm,
        "hypotheses": { "thblup": thblup, "stronger": stronger },
    });
    Ok(Report::new(checks, result))
}
