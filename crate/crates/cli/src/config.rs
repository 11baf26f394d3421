//! Run configuration: a TOML document with one optional table per concern.
//!
//! Missing tables and keys take subcommand-dependent defaults; the resolved
//! document is written next to the outputs and can be fed back through
//! `--config` to repeat the run.

use std::path::Path;

use inls_core::checks::HypothesisMode;
use inls_core::constructor::ConstructOptions;
use inls_core::dynamics::Equation;
use inls_core::geometry::Surface;
use inls_core::ground_state::GroundStateOptions;
use inls_core::modulation::SolveOptions;
use inls_core::profiles::Profile;
use inls_core::sources::ProblemSpec;
use inls_core::split::Order;
use inls_core::{Geometry, Grid, GridConfig};
use serde::{Deserialize, Serialize};

use crate::error::CliError;
use crate::Command;

/// The document as written by the user; every table is optional.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub subcommand: Option<String>,
    pub seed: Option<u64>,
    pub grid: Option<GridConfig>,
    pub ground_state: Option<GroundStateOptions>,
    pub problem: Option<ProblemConfig>,
    pub construct: Option<ConstructOptions>,
    pub evolve: Option<EvolveConfig>,
    pub modes: Option<ModesConfig>,
    pub modulation: Option<ModulationConfig>,
    pub surface: Option<SurfaceConfig>,
    pub verify: Option<VerifyConfig>,
    pub demo: Option<DemoConfig>,
    pub output: Option<OutputConfig>,
}

/// Either a surface of revolution or an explicit (V, g) pair.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    #[serde(default = "default_tau0")]
    pub tau0: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub surface: Option<Surface>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v: Option<Profile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g: Option<Profile>,
}

fn default_tau0() -> f64 {
    20.0
}

impl ProblemConfig {
    fn flat() -> Self {
        ProblemConfig { tau0: default_tau0(), surface: None, v: Some(Profile::zero()), g: Some(Profile::one()) }
    }

    fn quintic() -> Self {
        ProblemConfig { tau0: default_tau0(), surface: Some(Surface::Quintic { c0: 0.1 }), v: None, g: None }
    }

    /// Dimension a problem needs: surfaces live in the plane.
    pub fn dim(&self, grid_dim: usize) -> usize {
        if self.surface.is_some() {
            2
        } else {
            grid_dim
        }
    }

    pub fn spec(&self, d: usize) -> ProblemSpec {
        match &self.surface {
            Some(s) => ProblemSpec {
                d,
                v: Profile::SurfacePotential { surface: s.clone() },
                g: Profile::SurfaceCoupling { surface: s.clone() },
                tau0: self.tau0,
            },
            None => ProblemSpec {
                d,
                v: self.v.clone().unwrap_or_else(Profile::zero),
                g: self.g.clone().unwrap_or_else(Profile::one),
                tau0: self.tau0,
            },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Initial {
    /// Q, or e^{it₀}Q in the transformed frame.
    GroundState,
    /// `amplitude` times a seeded random field.
    Random,
    /// The explicit blow-up profile S(t₀).
    Explicit,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvolveConfig {
    pub equation: Equation,
    pub t0: f64,
    pub t1: f64,
    pub initial: Initial,
    pub amplitude: f64,
    pub bumps: usize,
    pub dt: f64,
    pub rows: usize,
    pub order: Order,
    /// Times at which the field is written.
    pub snapshots: Vec<f64>,
}

impl Default for EvolveConfig {
    fn default() -> Self {
        EvolveConfig {
            equation: Equation::Physical,
            t0: 0.0,
            t1: 1.0,
            initial: Initial::Random,
            amplitude: 0.6,
            bumps: 2,
            dt: 1e-3,
            rows: 11,
            order: Order::Four,
            snapshots: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModesConfig {
    pub t_end: f64,
    pub samples: usize,
    pub dt: f64,
    pub order: Order,
    /// Seeded random fields projected onto M whose growth is recorded.
    pub random_fields: usize,
    pub bumps: usize,
}

impl Default for ModesConfig {
    fn default() -> Self {
        ModesConfig { t_end: 20.0, samples: 40, dt: 0.01, order: Order::Four, random_fields: 5, bumps: 3 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Forcing {
    /// Every component equal to amplitude·τ^{−c}.
    Power,
    /// Seeded a·τ^{−c}(1 + b sin(ω ln τ)) with |a| < amplitude.
    Random,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModulationConfig {
    pub tau_max: f64,
    pub nodes: usize,
    pub log_spacing: bool,
    /// Decay exponent c of the forcing class.
    pub decay: f64,
    pub forcing: Forcing,
    pub amplitude: f64,
    /// Window [lo, hi] of the decay-exponent regression.
    pub window: [f64; 2],
    pub solve: SolveOptions,
}

impl Default for ModulationConfig {
    fn default() -> Self {
        ModulationConfig {
            tau_max: 2000.0,
            nodes: 2001,
            log_spacing: true,
            decay: 2.5,
            forcing: Forcing::Random,
            amplitude: 0.2,
            window: [100.0, 1000.0],
            solve: SolveOptions::default(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SurfaceConfig {
    pub r_max: f64,
    pub points: usize,
}

impl Default for SurfaceConfig {
    fn default() -> Self {
        SurfaceConfig { r_max: 20.0, points: 401 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyConfig {
    /// Hypothesis set that decides the exit code; the other is reported.
    pub mode: HypothesisMode,
    /// Corpus size n; the constants are compared between n and 2n fields.
    pub corpus: usize,
    pub corpus_grid: GridConfig,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig { mode: HypothesisMode::Thblup, corpus: 100, corpus_grid: GridConfig::line(1024, 40.0) }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DemoConfig {
    /// Allowed |t‖∇u‖ / t‖∇S(t)‖ − 1| at the smallest t.
    pub rate_tol: f64,
}

impl Default for DemoConfig {
    fn default() -> Self {
        DemoConfig { rate_tol: 1e-2 }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    /// τ values at which w is written by `construct` and `demo`; empty
    /// means the two ends of the horizon.
    pub w_snapshots: Vec<f64>,
}

/// The configuration after defaults, as written to `config.toml`.
#[derive(Clone, Debug, Serialize)]
pub struct Resolved {
    pub subcommand: String,
    pub seed: u64,
    pub grid: GridConfig,
    pub ground_state: GroundStateOptions,
    pub problem: ProblemConfig,
    pub construct: ConstructOptions,
    pub evolve: EvolveConfig,
    pub modes: ModesConfig,
    pub modulation: ModulationConfig,
    pub surface: SurfaceConfig,
    pub verify: VerifyConfig,
    pub demo: DemoConfig,
    pub output: OutputConfig,
}

/// Parses a document, reporting the key path of the first violation.
pub fn parse(text: &str) -> Result<RunConfig, CliError> {
    let de = toml::Deserializer::parse(text).map_err(|e| CliError::schema("", e.to_string()))?;
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        CliError::schema(if path == "." { "" } else { &path }, e.into_inner().message().trim())
    })
}

pub fn load(path: Option<&Path>) -> Result<RunConfig, CliError> {
    match path {
        None => Ok(RunConfig::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::schema("", format!("cannot read {}: {e}", p.display())))?;
            parse(&text)
        }
    }
}

fn uses_surface_defaults(cmd: Command) -> bool {
    matches!(cmd, Command::Construct | Command::Demo | Command::Surface)
}

pub fn resolve(raw: RunConfig, cmd: Command, seed: Option<u64>) -> Result<Resolved, CliError> {
    if let Some(s) = &raw.subcommand {
        if s != cmd.name() {
            return Err(CliError::schema("subcommand", format!("document is for `{s}`, invoked as `{}`", cmd.name())));
        }
    }
    let surface_defaults = uses_surface_defaults(cmd);
    let grid = raw.grid.unwrap_or_else(|| {
        if surface_defaults {
            GridConfig::radial(256, 30.0)
        } else {
            GridConfig::line(1024, 32.0)
        }
    });
    let problem = raw.problem.unwrap_or_else(|| if surface_defaults { ProblemConfig::quintic() } else { ProblemConfig::flat() });
    let mut problem = problem;
    if problem.surface.is_none() {
        problem.v.get_or_insert_with(Profile::zero);
        problem.g.get_or_insert_with(Profile::one);
    }
    let r = Resolved {
        subcommand: cmd.name().to_string(),
        seed: seed.or(raw.seed).unwrap_or(0),
        grid,
        ground_state: raw.ground_state.unwrap_or_default(),
        problem,
        construct: raw.construct.unwrap_or_default(),
        evolve: raw.evolve.unwrap_or_default(),
        modes: raw.modes.unwrap_or_default(),
        modulation: raw.modulation.unwrap_or_default(),
        surface: raw.surface.unwrap_or_default(),
        verify: raw.verify.unwrap_or_default(),
        demo: raw.demo.unwrap_or_default(),
        output: raw.output.unwrap_or_default(),
    };
    r.validate()?;
    Ok(r)
}

fn require(ok: bool, path: &str, msg: &str) -> Result<(), CliError> {
    if ok {
        Ok(())
    } else {
        Err(CliError::schema(path, msg))
    }
}

impl Resolved {
    fn validate(&self) -> Result<(), CliError> {
        require(self.grid.n >= 4, "grid.n", "need at least 4 points")?;
        require(self.grid.half_width > 0.0, "grid.half_width", "must be positive")?;
        let p = &self.problem;
        require(p.tau0 > 0.0, "problem.tau0", "must be positive")?;
        if p.surface.is_some() {
            require(p.v.is_none() && p.g.is_none(), "problem.surface", "a surface fixes V and g; drop problem.v and problem.g")?;
        }
        if let Some(s) = &p.surface {
            s.validate().map_err(|e| CliError::schema("problem.surface", e.to_string()))?;
        }
        for (key, prof) in [("problem.v", &p.v), ("problem.g", &p.g)] {
            if let Some(pr) = prof {
                pr.validate().map_err(|e| CliError::schema(key, e.to_string()))?;
            }
        }
        self.construct.validate(p.tau0).map_err(|e| CliError::schema("construct", e.to_string()))?;

        let e = &self.evolve;
        require(e.equation != Equation::Remainder, "evolve.equation", "the remainder frame runs through `construct`")?;
        require(e.dt > 0.0, "evolve.dt", "must be positive")?;
        require(e.rows >= 2, "evolve.rows", "need at least 2 rows")?;
        require(e.t0 != e.t1, "evolve.t1", "must differ from evolve.t0")?;
        if e.equation == Equation::Transformed {
            require(e.t0 > 0.0, "evolve.t0", "the transformed frame needs positive times")?;
            require(e.t1 > 0.0, "evolve.t1", "the transformed frame needs positive times")?;
        }
        if e.initial == Initial::Explicit {
            require(e.equation == Equation::Physical && e.t0 > 0.0, "evolve.initial", "the explicit profile starts a physical run at t0 > 0")?;
        }

        let m = &self.modes;
        require(m.t_end > 0.0, "modes.t_end", "must be positive")?;
        require(m.samples >= 1, "modes.samples", "need at least one sample")?;
        require(m.dt > 0.0, "modes.dt", "must be positive")?;

        let q = &self.modulation;
        require(q.tau_max > p.tau0, "modulation.tau_max", "must exceed problem.tau0")?;
        require(q.nodes >= 5, "modulation.nodes", "need at least 5 nodes")?;
        require(q.decay > 2.0, "modulation.decay", "the decay class needs c > 2")?;
        require(q.amplitude >= 0.0, "modulation.amplitude", "must be non-negative")?;
        require(q.window[0] < q.window[1], "modulation.window", "need lo < hi")?;

        require(self.surface.r_max > 0.0, "surface.r_max", "must be positive")?;
        require(self.surface.points >= 2, "surface.points", "need at least 2 points")?;

        require(self.verify.corpus >= 1, "verify.corpus", "need at least one field")?;
        require(
            self.verify.corpus_grid.geometry != Geometry::Radial,
            "verify.corpus_grid.geometry",
            "the inequalities are checked on Cartesian grids",
        )?;
        require(self.demo.rate_tol > 0.0, "demo.rate_tol", "must be positive")?;
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("resolved configuration serializes")
    }

    pub fn build_grid(&self) -> Result<Grid, CliError> {
        Grid::new(self.grid.clone()).map_err(|e| CliError::schema("grid", e.to_string()))
    }

    /// The problem on `grid`; surfaces need a two-dimensional grid.
    pub fn spec_on(&self, grid: &Grid) -> Result<ProblemSpec, CliError> {
        if self.problem.surface.is_some() && grid.dim() != 2 {
            return Err(CliError::schema("problem.surface", "surfaces need a radial or plane grid"));
        }
        let spec = self.problem.spec(grid.dim());
        spec.validate(grid).map_err(|e| CliError::schema("problem", e.to_string()))?;
        Ok(spec)
    }
}
