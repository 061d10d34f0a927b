//! Graded tensor grids on `[0, R_r] x [0, R_t]`.
//!
//! Each axis uses `x(xi) = L sinh(beta xi) / sinh(beta)` on a uniform
//! `xi`-grid. The map is odd, so mirror ghost nodes at `x = 0` sit exactly at
//! `-x_1`, and doubling the interval count nests the coarse nodes in the fine
//! ones.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub r_max: f64,
    pub t_max: f64,
    /// Spacing at the origin in `r`.
    pub dr: f64,
    /// Spacing at the origin in `t`.
    pub dt: f64,
    /// Grading strength `beta`; zero gives a uniform grid.
    pub grading: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { r_max: 40.0, t_max: 40.0, dr: 0.025, dt: 0.025, grading: 4.0 }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64| v.is_finite() && v > 0.0;
        if !pos(self.r_max) || !pos(self.t_max) {
            return Err(Error::InvalidArgument("truncation radii must be > 0".into()));
        }
        if !pos(self.dr) || !pos(self.dt) {
            return Err(Error::InvalidArgument(format!("grid spacings must be > 0 (dr = {}, dt = {})", self.dr, self.dt)));
        }
        if !(self.grading.is_finite() && self.grading >= 0.0) {
            return Err(Error::InvalidArgument(format!("grading {} must be >= 0", self.grading)));
        }
        if self.dr > self.r_max / 4.0 || self.dt > self.t_max / 4.0 {
            return Err(Error::InvalidArgument("fewer than four grid intervals per axis".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Axis {
    pub length: f64,
    pub beta: f64,
    pub intervals: usize,
    pub nodes: Vec<f64>,
}

impl Axis {
    /// Picks the interval count so the first spacing is at most `h0`.
    pub fn with_spacing(length: f64, h0: f64, beta: f64) -> Self {
        let scale = if beta < 1e-12 { 1.0 } else { beta / beta.sinh() };
        let intervals = ((length * scale / h0) - 1e-9).ceil().max(4.0) as usize;
        Self::with_intervals(length, beta, intervals)
    }

    pub fn with_intervals(length: f64, beta: f64, intervals: usize) -> Self {
        let mut axis = Self { length, beta, intervals, nodes: Vec::new() };
        axis.nodes = (0..=intervals).map(|k| axis.map(k as f64 / intervals as f64)).collect();
        axis.nodes[0] = 0.0;
        axis.nodes[intervals] = length;
        axis
    }

    pub fn refined(&self) -> Self {
        Self::with_intervals(self.length, self.beta, 2 * self.intervals)
    }

    pub fn map(&self, xi: f64) -> f64 {
        if self.beta < 1e-12 {
            self.length * xi
        } else {
            self.length * (self.beta * xi).sinh() / self.beta.sinh()
        }
    }

    /// `(x'(xi), x''(xi))`.
    pub fn map_derivatives(&self, xi: f64) -> (f64, f64) {
        if self.beta < 1e-12 {
            (self.length, 0.0)
        } else {
            let c = self.length * self.beta / self.beta.sinh();
            (c * (self.beta * xi).cosh(), c * self.beta * (self.beta * xi).sinh())
        }
    }

    pub fn inverse(&self, x: f64) -> f64 {
        if self.beta < 1e-12 {
            x / self.length
        } else {
            (x * self.beta.sinh() / self.length).asinh() / self.beta
        }
    }

    /// Node coordinate, extended oddly to negative indices.
    pub fn node(&self, k: isize) -> f64 {
        if k < 0 {
            -self.nodes[(-k) as usize]
        } else {
            self.nodes[k as usize]
        }
    }

    pub fn first_spacing(&self) -> f64 {
        self.nodes[1]
    }

    pub fn last_spacing(&self) -> f64 {
        self.nodes[self.intervals] - self.nodes[self.intervals - 1]
    }

    /// Trapezoid weights in `xi`, mapped to `x`.
    pub fn trapezoid_weights(&self) -> Vec<f64> {
        let n = self.intervals;
        let h = 1.0 / n as f64;
        (0..=n)
            .map(|k| {
                let end = if k == 0 || k == n { 0.5 } else { 1.0 };
                end * h * self.map_derivatives(k as f64 * h).0
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrectorGrid {
    pub r: Axis,
    pub t: Axis,
}

impl CorrectorGrid {
    pub fn from_spec(spec: &GridSpec) -> Result<Self> {
        spec.validate()?;
        Ok(Self {
            r: Axis::with_spacing(spec.r_max, spec.dr, spec.grading),
            t: Axis::with_spacing(spec.t_max, spec.dt, spec.grading),
        })
    }

    /// Same domain with every spacing halved.
    pub fn refined(&self) -> Self {
        Self { r: self.r.refined(), t: self.t.refined() }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.r.intervals + 1, self.t.intervals + 1)
    }

    pub fn unknowns(&self) -> usize {
        self.r.intervals * self.t.intervals
    }
}
