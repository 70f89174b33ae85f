use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::grid::{sample, tent, Domain, GridFunction, Point};

pub const CORPUS_SIZE: usize = 10;

const NAMES: [&str; CORPUS_SIZE] = [
    "tent",
    "offset-tent",
    "smooth-bump",
    "cos2-bump",
    "elliptic-tent",
    "signed-pair",
    "pyramid",
    "quartic-bump",
    "modulated-bump",
    "bump-plus-tent",
];

/// Member `index` of the comparison corpus at length scale `unit`; every
/// member is supported in the disc of radius `2·unit`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorpusMember {
    pub index: usize,
    pub unit: f64,
}

fn smooth_bump(x: Point, c: Point, r: f64) -> f64 {
    let t = ((x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2)) / (r * r);
    if t >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - t)).exp()
    }
}

fn quartic(x: Point, c: Point, r: f64) -> f64 {
    let t = ((x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2)) / (r * r);
    if t >= 1.0 {
        0.0
    } else {
        (1.0 - t).powi(2)
    }
}

impl CorpusMember {
    pub fn new(index: usize, unit: f64) -> Result<Self> {
        if index >= CORPUS_SIZE {
            return Err(Error::InvalidParams(format!(
                "corpus index {index} out of range 0..{CORPUS_SIZE}"
            )));
        }
        if !(unit.is_finite() && unit > 0.0) {
            return Err(Error::InvalidParams(format!("corpus unit must be positive, got {unit}")));
        }
        Ok(CorpusMember { index, unit })
    }

    pub fn name(&self) -> &'static str {
        NAMES[self.index]
    }

    pub fn support_radius(&self) -> f64 {
        2.0 * self.unit
    }

    /// Same member dilated: `x ↦ f(λx)`.
    pub fn dilated(&self, lambda: f64) -> Self {
        CorpusMember {
            index: self.index,
            unit: self.unit / lambda,
        }
    }

    pub fn eval(&self, x: Point) -> f64 {
        let u = self.unit;
        let y = [x[0] / u, x[1] / u];
        match self.index {
            0 => tent(y, [0.0, 0.0], 2.0, 1.0),
            1 => tent(y, [0.3, -0.2], 1.5, 1.0),
            2 => smooth_bump(y, [0.0, 0.0], 2.0),
            3 => {
                let r = y[0].hypot(y[1]);
                if r >= 1.8 {
                    0.0
                } else {
                    (PI * r / 3.6).cos().powi(2)
                }
            }
            4 => (1.0 - (y[0] / 2.0).hypot(y[1])).max(0.0),
            5 => tent(y, [0.8, 0.0], 1.1, 1.0) - tent(y, [-0.8, 0.0], 1.1, 0.7),
            6 => (1.0 - y[0].abs().max(y[1].abs()) / 1.4).max(0.0),
            7 => quartic(y, [0.0, 0.0], 2.0),
            8 => quartic(y, [0.0, 0.0], 2.0) * (2.0 * y[0]).cos(),
            _ => smooth_bump(y, [0.4, 0.4], 1.4) + tent(y, [-0.9, -0.6], 0.8, 0.5),
        }
    }

    pub fn sample(&self, domain: Domain) -> Result<GridFunction> {
        sample(|x| self.eval(x), domain, Some(self.support_radius()))
    }
}

/// All corpus members at length scale `unit`.
pub fn corpus(unit: f64) -> Result<Vec<CorpusMember>> {
    (0..CORPUS_SIZE).map(|i| CorpusMember::new(i, unit)).collect()
}
