//! Orders in `delta` of the interior residual `Delta_g` of the ansatz with and
//! without the corrector.
//!
//! Everything is computed in the rescaled variable `x = y / delta`, where
//! `delta^{(n+2)/2} Delta_g u(delta x) = F(x)` and the `L^{2n/(n+2)}` norm is
//! scale invariant. The domain is the half-ball `|x| <= X` with `X` fixed
//! across the sweep, chosen inside the plateau of the cut-off and inside the
//! corrector grid, so the fitted orders reflect the metric expansion only.

use rayon::prelude::*;
use serde::Serialize;

use super::jet::{laplace_beltrami, metric_jet_eval, FermiMetricJet, MetricAt};
use crate::bubble::{Bubble, CutOff, HalfSpacePoint};
use crate::corrector::checks::full_source;
use crate::corrector::{CorrectorField, CorrectorProfile};
use crate::error::{Error, Result};
use crate::fit::{loglog_fit, LinearFit};
use crate::special::quadrature::gauss_legendre;
use crate::special::sphere::ReducedSphereRule;

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ResidualOptions {
    /// Gauss-Legendre nodes per radial panel (panels double in length).
    pub radial_nodes: usize,
    /// Gauss-Legendre nodes per angular panel (four panels on `[0, pi/2]`).
    pub angle_nodes: usize,
    pub sphere_resolution: usize,
}

impl Default for ResidualOptions {
    fn default() -> Self {
        Self { radial_nodes: 12, angle_nodes: 10, sphere_resolution: 8 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ResidualReport {
    pub n: usize,
    pub deltas: Vec<f64>,
    pub norm_without: Vec<f64>,
    pub norm_with: Vec<f64>,
    pub fit_without: Option<LinearFit>,
    pub fit_with: Option<LinearFit>,
    /// Set when a fit is missing or has `R^2 < 0.99`.
    pub flagged: bool,
    pub domain_radius: f64,
    pub active_dims: usize,
    pub exponent: f64,
}

impl ResidualReport {
    pub fn slope_without(&self) -> Option<f64> {
        self.fit_without.map(|f| f.slope)
    }
    pub fn slope_with(&self) -> Option<f64> {
        self.fit_with.map(|f| f.slope)
    }
}

fn rescaled(m: &MetricAt, delta: f64) -> MetricAt {
    MetricAt {
        volume: m.volume,
        ginv: m.ginv.clone(),
        dlog_volume: m.dlog_volume.iter().map(|v| v * delta).collect(),
        divergence: m.divergence.iter().map(|v| v * delta).collect(),
    }
}

struct Nodes {
    /// `(rho, psi, weight)` with the Jacobian `rho^{n-1} cos^{n-2}(psi)` folded in.
    plane: Vec<(f64, f64, f64)>,
    sphere: ReducedSphereRule,
}

fn build_nodes(n: usize, radius: f64, active: usize, opts: &ResidualOptions) -> Result<Nodes> {
    let sphere = ReducedSphereRule::new(n - 1, active, opts.sphere_resolution).ok_or_else(|| {
        Error::Precondition(format!("angular reduction supports at most 3 active tangential directions, jet uses {active}"))
    })?;
    let mut edges = vec![0.0, 0.25f64.min(radius)];
    while *edges.last().unwrap() < radius {
        let next = (edges.last().unwrap() * 2.0).min(radius);
        edges.push(next);
    }
    let (xr, wr) = gauss_legendre(opts.radial_nodes);
    let (xa, wa) = gauss_legendre(opts.angle_nodes);
    let quarter = std::f64::consts::FRAC_PI_2;
    let mut plane = Vec::new();
    for pair in edges.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        for (u, w) in xr.iter().zip(&wr) {
            let rho = 0.5 * (a + b) + 0.5 * (b - a) * u;
            let wrho = 0.5 * (b - a) * w;
            for k in 0..4 {
                let (c, d) = (quarter * k as f64 / 4.0, quarter * (k + 1) as f64 / 4.0);
                for (s, v) in xa.iter().zip(&wa) {
                    let psi = 0.5 * (c + d) + 0.5 * (d - c) * s;
                    let wpsi = 0.5 * (d - c) * v;
                    let jac = rho.powi(n as i32 - 1) * psi.cos().powi(n as i32 - 2);
                    plane.push((rho, psi, wrho * wpsi * jac));
                }
            }
        }
    }
    Ok(Nodes { plane, sphere })
}

/// `F` without and with the corrector at one rescaled point.
fn residual_pair(
    jet: &FermiMetricJet,
    field: Option<&CorrectorField>,
    delta: f64,
    x: &HalfSpacePoint,
) -> Result<(f64, f64, f64)> {
    let n = jet.n();
    let y = x.scaled(delta);
    let metric = rescaled(&metric_jet_eval(jet, &y)?, delta);
    let bubble = Bubble::standard(n)?;
    let gu = bubble.gradient(x);
    let hu = bubble.hessian(x);
    let without = laplace_beltrami(&metric, 0.0, &gu, &hu);
    let with = match field {
        Some(f) if !f.h.is_zero() => {
            let vj = f.jet(x)?;
            let g: Vec<f64> = gu.iter().zip(&vj.gradient).map(|(a, b)| a + delta * b).collect();
            let h = &hu + &vj.hessian * delta;
            // The Euclidean Laplacian of v is taken from the equation it solves.
            let lap = -delta * full_source(f.h, x);
            laplace_beltrami(&metric, lap, &g, &h)
        }
        _ => without,
    };
    Ok((without, with, metric.volume))
}

/// Norms of the rescaled residual with and without the corrector for each
/// `delta`, and log-log slopes against `delta`.
pub fn ansatz_residual_orders(
    jet: &FermiMetricJet,
    profile: Option<&CorrectorProfile>,
    deltas: &[f64],
    cutoff: &CutOff,
    opts: &ResidualOptions,
) -> Result<ResidualReport> {
    jet.validate()?;
    let n = jet.n();
    if deltas.len() < 3 {
        return Err(Error::Precondition("need at least three deltas".into()));
    }
    if deltas.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Precondition("deltas must be strictly decreasing".into()));
    }
    for &d in deltas {
        cutoff.check_scale(d)?;
    }
    let field = match profile {
        Some(p) => Some(CorrectorField::new(&jet.h, p)?),
        None if !jet.h.is_zero() => return Err(Error::Precondition("a solved corrector is required when h != 0".into())),
        None => None,
    };
    let dmax = deltas[0];
    let mut radius = (cutoff.radius / 2.0).min(1.0) / dmax;
    if let Some(p) = profile {
        radius = radius.min(0.9 * p.grid.r.length.min(p.grid.t.length));
    }
    let active = jet.active_dims();
    let nodes = build_nodes(n, radius, active, opts)?;
    let q = 2.0 * n as f64 / (n as f64 + 2.0);

    let mut norm_without = Vec::new();
    let mut norm_with = Vec::new();
    for &delta in deltas {
        let parts: Vec<(f64, f64)> = nodes
            .plane
            .par_iter()
            .map(|&(rho, psi, w)| {
                let (zeta, t) = (rho * psi.cos(), rho * psi.sin());
                let mut acc = (0.0, 0.0);
                for (theta, wt) in nodes.sphere.directions.iter().zip(&nodes.sphere.weights) {
                    let x = HalfSpacePoint { z: theta.iter().map(|c| c * zeta).collect(), t };
                    let (a, b, vol) = residual_pair(jet, field.as_ref(), delta, &x)?;
                    acc.0 += wt * vol * a.abs().powf(q);
                    acc.1 += wt * vol * b.abs().powf(q);
                }
                Ok((w * acc.0, w * acc.1))
            })
            .collect::<Result<_>>()?;
        let (s0, s1) = parts.iter().fold((0.0, 0.0), |(a, b), (c, d)| (a + c, b + d));
        norm_without.push(s0.powf(1.0 / q));
        norm_with.push(s1.powf(1.0 / q));
    }
    let fit_without = loglog_fit(deltas, &norm_without).ok();
    let fit_with = loglog_fit(deltas, &norm_with).ok();
    let flagged = [fit_without, fit_with].iter().any(|f| f.is_none_or(|f| f.r_squared < 0.99));
    Ok(ResidualReport {
        n,
        deltas: deltas.to_vec(),
        norm_without,
        norm_with,
        fit_without,
        fit_with,
        flagged,
        domain_radius: radius,
        active_dims: active,
        exponent: q,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::form::TracelessSymmetricForm;

    #[test]
    fn curvature_only_has_no_first_order_term() {
        let jet = FermiMetricJet::flat(7).with_constant_curvature_block(0.5, 2);
        let opts = ResidualOptions { radial_nodes: 8, angle_nodes: 6, sphere_resolution: 6 };
        let rep = ansatz_residual_orders(&jet, None, &[0.02, 0.01, 0.005], &CutOff::default(), &opts).unwrap();
        assert_eq!(rep.norm_with, rep.norm_without);
        let s = rep.slope_without().unwrap();
        assert!((s - 2.0).abs() < 0.2, "slope {s}");
    }

    #[test]
    fn preconditions() {
        let jet = FermiMetricJet::from_form(TracelessSymmetricForm::diagonal(7, &[1.0, -1.0]).unwrap());
        let c = CutOff::default();
        let o = ResidualOptions::default();
        assert!(ansatz_residual_orders(&jet, None, &[0.02, 0.01, 0.005], &c, &o).is_err());
        let flat = FermiMetricJet::flat(7);
        assert!(ansatz_residual_orders(&flat, None, &[0.01, 0.02, 0.005], &c, &o).is_err());
        assert!(ansatz_residual_orders(&flat, None, &[0.5, 0.02, 0.005], &c, &o).is_err());
    }
}
