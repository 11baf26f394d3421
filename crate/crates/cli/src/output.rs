//! Writers for the run directory. Every CSV is UTF-8 with a header row;
//! numbers use Rust's shortest round-trip formatting (`.` decimal point,
//! exponent for very small or large magnitudes, `NaN` for undefined), and
//! integral values below 1e15 are written without a fractional part.

use std::fs;
use std::path::{Path, PathBuf};

use inls_core::{Grid, C64};
use serde::Serialize;
use serde_json::Value;

use crate::error::CliError;

pub struct Output {
    dir: PathBuf,
}

pub fn num(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{v}")
    } else {
        format!("{v:?}")
    }
}

impl Output {
    pub fn create(dir: &Path) -> Result<Output, CliError> {
        fs::create_dir_all(dir)?;
        Ok(Output { dir: dir.to_path_buf() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn text(&self, name: &str, body: &str) -> Result<(), CliError> {
        fs::write(self.path(name), body)?;
        Ok(())
    }

    pub fn json(&self, name: &str, value: &impl Serialize) -> Result<(), CliError> {
        let mut s = serde_json::to_string_pretty(value)?;
        s.push('\n');
        self.text(name, &s)
    }

    /// Numeric table.
    pub fn csv<I>(&self, name: &str, header: &[&str], rows: I) -> Result<(), CliError>
    where
        I: IntoIterator,
        I::Item: AsRef<[f64]>,
    {
        self.records(name, header, rows.into_iter().map(|r| r.as_ref().iter().map(|v| num(*v)).collect()))
    }

    /// Table of preformatted cells.
    pub fn records(
        &self,
        name: &str,
        header: &[&str],
        rows: impl IntoIterator<Item = Vec<String>>,
    ) -> Result<(), CliError> {
        let mut w = csv::Writer::from_path(self.path(name))?;
        w.write_record(header)?;
        for r in rows {
            if r.len() != header.len() {
                return Err(CliError::Compute(format!("{name}: row of {} cells under {} columns", r.len(), header.len())));
            }
            w.write_record(&r)?;
        }
        w.flush()?;
        Ok(())
    }

    /// A field in the (index, re, im) layout; `grid.csv` maps indices to points.
    pub fn field(&self, name: &str, f: &[C64]) -> Result<(), CliError> {
        self.csv(name, &["index", "re", "im"], f.iter().enumerate().map(|(i, z)| [i as f64, z.re, z.im]))
    }

    pub fn grid(&self, grid: &Grid) -> Result<(), CliError> {
        let rows = grid
            .coords()
            .iter()
            .zip(grid.radius())
            .zip(grid.weights())
            .enumerate()
            .map(|(i, ((c, r), w))| [i as f64, c[0], c[1], *r, *w]);
        self.csv("grid.csv", &["index", "x", "y", "r", "weight"], rows)
    }
}

/// One pass/fail comparison of a measured value against a bound.
#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub bound: f64,
    /// How `value` relates to `bound` when the check passes.
    pub relation: &'static str,
    pub pass: bool,
    /// Whether a failure sets exit code 2; informational checks are reported only.
    pub gating: bool,
}

impl Check {
    pub fn below(name: &str, value: f64, bound: f64) -> Check {
        Check { name: name.into(), value, bound, relation: "<", pass: value < bound, gating: true }
    }

    pub fn at_most(name: &str, value: f64, bound: f64) -> Check {
        Check { name: name.into(), value, bound, relation: "<=", pass: value <= bound, gating: true }
    }

    pub fn above(name: &str, value: f64, bound: f64) -> Check {
        Check { name: name.into(), value, bound, relation: ">", pass: value > bound, gating: true }
    }

    /// A boolean verdict, recorded as value 1 (true) or 0 (false).
    pub fn holds(name: &str, ok: bool) -> Check {
        Check { name: name.into(), value: ok as u8 as f64, bound: 1.0, relation: "==", pass: ok, gating: true }
    }

    pub fn informational(mut self) -> Check {
        self.gating = false;
        self
    }
}

/// What a subcommand hands back for `summary.json`.
pub struct Report {
    pub checks: Vec<Check>,
    pub result: Value,
    /// Set when the computation itself failed after writing partial outputs.
    pub failure: Option<String>,
}

impl Report {
    pub fn new(checks: Vec<Check>, result: Value) -> Report {
        Report { checks, result, failure: None }
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass || !c.gating)
    }
}
