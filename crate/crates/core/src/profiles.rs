//! Coefficient profiles V(x) and g(x).
//!
//! Each profile evaluates its value and its deviation from the value at the
//! origin. The deviation is computed directly, never as a difference of two
//! values, so vanishing orders at 0 can be read off down to |x| ~ 1e-4.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::geometry::Surface;
use crate::grid::Grid;
use crate::quad::Spline;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Profile {
    Constant {
        value: f64,
    },
    /// base + a·P(x/w)·e^{−|x/w|²/2} with P(s) = |s|^m, or s₁^m when `axial`.
    Bump {
        base: f64,
        amplitude: f64,
        width: f64,
        order: u32,
        #[serde(default)]
        axial: bool,
    },
    /// base + a·s^m/(1 + s^m), s = |x|/w.
    Rational {
        base: f64,
        amplitude: f64,
        width: f64,
        order: u32,
    },
    /// Radial samples with natural-spline evaluation, constant beyond the last node.
    Tabulated {
        r: Vec<f64>,
        values: Vec<f64>,
        #[serde(skip)]
        cache: OnceLock<Spline>,
    },
    /// The potential V of a surface of revolution.
    SurfacePotential { surface: Surface },
    /// The coupling g = r/φ of a surface of revolution.
    SurfaceCoupling { surface: Surface },
}

fn radius(x: [f64; 2]) -> f64 {
    x[0].hypot(x[1])
}

impl Profile {
    pub fn zero() -> Profile {
        Profile::Constant { value: 0.0 }
    }

    pub fn one() -> Profile {
        Profile::Constant { value: 1.0 }
    }

    pub fn tabulated(r: Vec<f64>, values: Vec<f64>) -> Result<Profile> {
        let p = Profile::Tabulated { r, values, cache: OnceLock::new() };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Profile::Bump { width, .. } | Profile::Rational { width, .. } if !(*width > 0.0) => {
                invalid("profile width must be positive")
            }
            Profile::Tabulated { r, values, .. } => {
                if r.first().copied() != Some(0.0) {
                    return invalid("tabulated profile must start at r = 0");
                }
                Spline::new(r.clone(), values.clone()).map(|_| ())
            }
            Profile::SurfacePotential { surface } | Profile::SurfaceCoupling { surface } => surface.validate(),
            _ => Ok(()),
        }
    }

    fn spline(&self) -> Option<&Spline> {
        match self {
            Profile::Tabulated { r, values, cache } => Some(cache.get_or_init(|| {
                Spline::new(r.clone(), values.clone()).expect("tabulated profile validated before use")
            })),
            _ => None,
        }
    }

    /// Value at the origin.
    pub fn origin(&self) -> f64 {
        match self {
            Profile::Constant { value } => *value,
            Profile::Bump { base, amplitude, order, .. } => base + if *order == 0 { *amplitude } else { 0.0 },
            Profile::Rational { base, amplitude, order, .. } => base + if *order == 0 { 0.5 * amplitude } else { 0.0 },
            Profile::Tabulated { values, .. } => values[0],
            Profile::SurfacePotential { surface } => surface.v0(),
            Profile::SurfaceCoupling { .. } => 1.0,
        }
    }

    pub fn value(&self, x: [f64; 2]) -> f64 {
        match self {
            Profile::Tabulated { .. } => self.spline().unwrap().eval(radius(x)),
            Profile::SurfacePotential { surface } => surface.v(radius(x)),
            Profile::SurfaceCoupling { surface } => surface.g(radius(x)),
            _ => self.origin() + self.deviation(x),
        }
    }

    /// value(x) − value(0)
    pub fn deviation(&self, x: [f64; 2]) -> f64 {
        match self {
            Profile::Constant { .. } => 0.0,
            Profile::Bump { amplitude, width, order, axial, .. } => {
                let s = [x[0] / width, x[1] / width];
                let s2 = s[0] * s[0] + s[1] * s[1];
                if *order == 0 {
                    return amplitude * (-0.5 * s2).exp_m1();
                }
                let p = if *axial { s[0].powi(*order as i32) } else { s2.sqrt().powi(*order as i32) };
                amplitude * p * (-0.5 * s2).exp()
            }
            Profile::Rational { amplitude, width, order, .. } => {
                if *order == 0 {
                    return 0.0;
                }
                let sm = (radius(x) / width).powi(*order as i32);
                amplitude * sm / (1.0 + sm)
            }
            Profile::Tabulated { values, .. } => self.spline().unwrap().eval(radius(x)) - values[0],
            Profile::SurfacePotential { surface } => surface.v_minus_v0(radius(x)),
            Profile::SurfaceCoupling { surface } => surface.g_minus_one(radius(x)),
        }
    }

    pub fn sample(&self, grid: &Grid) -> Vec<f64> {
        grid.real_from_fn(|x| self.value(x))
    }

    pub fn sample_deviation(&self, grid: &Grid) -> Vec<f64> {
        grid.real_from_fn(|x| self.deviation(x))
    }

    pub fn name(&self) -> String {
        match self {
            Profile::Constant { value } => format!("constant({value})"),
            Profile::Bump { base, amplitude, width, order, axial } => {
                format!("bump(base={base},a={amplitude},w={width},m={order}{})", if *axial { ",axial" } else { "" })
            }
            Profile::Rational { base, amplitude, width, order } => {
                format!("rational(base={base},a={amplitude},w={width},m={order})")
            }
            Profile::Tabulated { r, .. } => format!("tabulated({} nodes)", r.len()),
            Profile::SurfacePotential { surface } => format!("V[{}]", surface.name()),
            Profile::SurfaceCoupling { surface } => format!("g[{}]", surface.name()),
        }
    }
}
