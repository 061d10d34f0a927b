//! Importance-sampled Monte Carlo of the full functional
//! `J_eps(u) = 1/2 int |grad u|_g^2 + a u^2 - (n-2)^2/(2(n-1) + eps(n-2)) int_boundary (u^+)^{s+eps}`
//! at `u = delta^{-(n-2)/2} (U + delta v)(y/delta) chi(|y|)` under the truncated
//! metric jet, in rescaled coordinates `x = y/delta`.
//!
//! Samples are drawn from densities proportional to `(1 + |x|^2)^{-(n-1)}` on the
//! half-space and on its boundary, which match the decay of both integrands.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution};
use rayon::prelude::*;
use serde::Serialize;

use super::jet::{metric_jet_eval, FermiMetricJet};
use super::{EnergyCoefficients, LambdaPower};
use crate::bubble::{Bubble, CutOff, HalfSpacePoint};
use crate::corrector::{CorrectorField, CorrectorProfile};
use crate::error::{Error, Result};
use crate::special::sphere::sample_sphere;
use crate::special::{radial_integral, sphere_area};

const CHUNK: usize = 4096;

#[derive(Debug, Clone, Copy, Serialize)]
pub struct McOptions {
    /// Samples per integral (interior and boundary each).
    pub samples: usize,
    pub seed: u64,
    /// Largest acceptable standard error of the total.
    pub stderr_budget: Option<f64>,
    /// Subtract the flat Dirichlet density, whose integral is known exactly.
    pub control_variate: bool,
}

impl Default for McOptions {
    fn default() -> Self {
        Self { samples: 1_000_000, seed: 0, stderr_budget: None, control_variate: true }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct McEstimate {
    pub eps: f64,
    pub lambda: f64,
    pub delta: f64,
    pub estimate: f64,
    pub stderr: f64,
    pub interior: f64,
    pub interior_stderr: f64,
    pub boundary: f64,
    pub boundary_stderr: f64,
    /// `A + B(eps) + eps lambda^p phi + C eps ln(lambda)`.
    pub prediction: f64,
    pub samples: usize,
}

impl McEstimate {
    /// `|estimate - target|` in units of the standard error.
    pub fn z_score(&self, target: f64) -> f64 {
        (self.estimate - target).abs() / self.stderr
    }
}

struct Setup<'a> {
    jet: &'a FermiMetricJet,
    field: Option<CorrectorField<'a>>,
    bubble: Bubble,
    cutoff: CutOff,
    delta: f64,
}

impl Setup<'_> {
    /// `(U + delta v)` and its gradient, with `v = 0` off the corrector grid.
    fn profile(&self, x: &HalfSpacePoint) -> (f64, Vec<f64>) {
        let mut u = self.bubble.value(x);
        let mut g = self.bubble.gradient(x);
        if let Some(f) = &self.field {
            if let Ok(j) = f.jet(x) {
                u += self.delta * j.value;
                g.iter_mut().zip(&j.gradient).for_each(|(a, b)| *a += self.delta * b);
            }
        }
        (u, g)
    }

    fn interior(&self, x: &HalfSpacePoint) -> Result<f64> {
        let rho = x.norm();
        let (chi, dchi, _) = self.cutoff.profile(self.delta * rho);
        if chi == 0.0 && dchi == 0.0 {
            return Ok(0.0);
        }
        let (u, mut g) = self.profile(x);
        let coords = x.coords();
        for (a, c) in g.iter_mut().zip(&coords) {
            *a = chi * *a + if rho > 0.0 { u * self.delta * dchi * c / rho } else { 0.0 };
        }
        let m = metric_jet_eval(self.jet, &x.scaled(self.delta))?;
        let n = g.len();
        let mut grad2 = 0.0;
        for a in 0..n {
            for b in 0..n {
                grad2 += m.ginv[(a, b)] * g[a] * g[b];
            }
        }
        let ut = chi * u;
        Ok(0.5 * (grad2 + self.delta * self.delta * self.jet.a0 * ut * ut) * m.volume)
    }

    fn boundary(&self, x: &HalfSpacePoint, power: f64) -> Result<f64> {
        let chi = self.cutoff.value(self.delta * x.norm());
        if chi == 0.0 {
            return Ok(0.0);
        }
        let (u, _) = self.profile(x);
        let m = metric_jet_eval(self.jet, &x.scaled(self.delta))?;
        Ok((chi * u).max(0.0).powf(power) * m.volume)
    }
}

/// Mean and standard error of `f(X)` for `X` drawn by `draw`, chunked so the
/// stream of each chunk depends only on `(seed, chunk index)`.
fn sample_mean<D, F>(samples: usize, seed: u64, stream: u64, draw: D, f: F) -> Result<(f64, f64)>
where
    D: Fn(&mut ChaCha8Rng) -> HalfSpacePoint + Sync,
    F: Fn(&HalfSpacePoint) -> Result<f64> + Sync,
{
    let chunks = samples.div_ceil(CHUNK);
    let sums: Vec<(f64, f64)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(stream * 1_000_003 + c as u64);
            let count = CHUNK.min(samples - c * CHUNK);
            let mut s = (0.0, 0.0);
            for _ in 0..count {
                let v = f(&draw(&mut rng))?;
                s.0 += v;
                s.1 += v * v;
            }
            Ok(s)
        })
        .collect::<Result<_>>()?;
    let (s1, s2) = sums.iter().fold((0.0, 0.0), |(a, b), (c, d)| (a + c, b + d));
    let m = samples as f64;
    let mean = s1 / m;
    let var = (s2 / m - mean * mean).max(0.0) * m / (m - 1.0);
    Ok((mean, (var / m).sqrt()))
}

/// Radius with density `r^{2a-1} (1 + r^2)^{-(a+b)}` through a Beta variate.
fn radius(beta: &Beta<f64>, rng: &mut ChaCha8Rng) -> f64 {
    let b = beta.sample(rng);
    (b / (1.0 - b)).sqrt()
}

/// Monte Carlo estimate of `J_eps` and the value predicted by the expansion.
/// Only `n = 7` is supported.
#[allow(clippy::too_many_arguments)]
pub fn energy_direct_mc(
    jet: &FermiMetricJet,
    profile: Option<&CorrectorProfile>,
    coeffs: &EnergyCoefficients,
    lambda: f64,
    eps: f64,
    power: LambdaPower,
    cutoff: &CutOff,
    opts: &McOptions,
) -> Result<McEstimate> {
    jet.validate()?;
    let n = jet.n();
    if n != 7 || coeffs.n != 7 {
        return Err(Error::Precondition(format!("direct Monte Carlo energy is restricted to n = 7, got {n}")));
    }
    if !(eps > 0.0 && eps < 1.0) || !(lambda > 0.0) {
        return Err(Error::InvalidArgument(format!("need 0 < eps < 1 and lambda > 0, got eps = {eps}, lambda = {lambda}")));
    }
    if opts.samples < 2 {
        return Err(Error::InvalidArgument("need at least two samples".into()));
    }
    if cutoff.radius > 1.0 {
        return Err(Error::Precondition("the metric jet is only used on |y| <= 1; cut-off radius must be <= 1".into()));
    }
    let delta = lambda * eps.sqrt();
    cutoff.check_scale(delta)?;
    let field = match profile {
        Some(p) if !jet.h.is_zero() => Some(CorrectorField::new(&jet.h, p)?),
        None if !jet.h.is_zero() => return Err(Error::Precondition("a solved corrector is required when h != 0".into())),
        _ => None,
    };
    let setup = Setup { jet, field, bubble: Bubble::standard(n)?, cutoff: *cutoff, delta };
    let nf = n as f64;
    let p = (nf - 2.0) / 2.0;
    let s = 2.0 * (nf - 1.0) / (nf - 2.0);

    let beta_in = Beta::new(nf / 2.0, nf / 2.0 - 1.0).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let z_bd = sphere_area(n - 1) * radial_integral(nf - 1.0, nf - 2.0)?;
    let z_in = 0.5 * sphere_area(n) * radial_integral(nf - 1.0, nf - 1.0)?;
    let draw_in = |rng: &mut ChaCha8Rng| {
        let r = radius(&beta_in, rng);
        let mut x: Vec<f64> = sample_sphere(n, rng).into_iter().map(|c| c * r).collect();
        let t = x.pop().unwrap().abs();
        HalfSpacePoint { z: x, t }
    };
    let weight = |x: &HalfSpacePoint| (1.0 + x.norm().powi(2)).powf(nf - 1.0);
    // Control variate: the flat, uncut Dirichlet density (n-2)^2/2 ((1+t)^2 + |z|^2)^{-(n-1)}
    // integrates to (n-2)/2 times the boundary mass.
    let control = |x: &HalfSpacePoint| {
        0.5 * (nf - 2.0).powi(2) * ((1.0 + x.t).powi(2) + x.z_norm().powi(2)).powf(-(nf - 1.0))
    };
    let (cv, control_mean) = if opts.control_variate { (1.0, 0.5 * (nf - 2.0) * z_bd) } else { (0.0, 0.0) };
    let (interior, interior_stderr) = sample_mean(opts.samples, opts.seed, 0, draw_in, |x| {
        Ok(z_in * weight(x) * (setup.interior(x)? - cv * control(x)))
    })?;
    let interior = interior + control_mean;

    let beta_bd = Beta::new((nf - 1.0) / 2.0, (nf - 1.0) / 2.0).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let draw_bd = |rng: &mut ChaCha8Rng| {
        let r = radius(&beta_bd, rng);
        HalfSpacePoint { z: sample_sphere(n - 1, rng).into_iter().map(|c| c * r).collect(), t: 0.0 }
    };
    let kappa = (nf - 2.0).powi(2) / (2.0 * (nf - 1.0) + eps * (nf - 2.0)) * delta.powf(-p * eps);
    let (bd, bd_se) = sample_mean(opts.samples, opts.seed, 1, draw_bd, |x| {
        Ok(z_bd * weight(x) * setup.boundary(x, s + eps)?)
    })?;
    let boundary = kappa * bd;
    let boundary_stderr = kappa * bd_se;

    let stderr = interior_stderr.hypot(boundary_stderr);
    if let Some(budget) = opts.stderr_budget {
        if stderr > budget {
            return Err(Error::InsufficientSamples { stderr, budget });
        }
    }
    let phi_q = super::phi_from_pairing(&jet.h, coeffs.pairing_unit * jet.h.norm_sq(), coeffs);
    Ok(McEstimate {
        eps,
        lambda,
        delta,
        estimate: interior - boundary,
        stderr,
        interior,
        interior_stderr,
        boundary,
        boundary_stderr,
        prediction: coeffs.expansion(eps, lambda, phi_q, power),
        samples: opts.samples,
    })
}

/// `J_eps` of the cut-off-free bubble at scale `delta = lambda sqrt(eps)` in
/// the flat half-space, by one-dimensional quadrature of the boundary term.
pub fn flat_energy_exact(n: usize, lambda: f64, eps: f64) -> Result<f64> {
    let nf = n as f64;
    let mass = sphere_area(n - 1) * radial_integral(nf - 1.0, nf - 2.0)?;
    let d = super::expansion::boundary_difference(n, lambda, eps)?;
    Ok(0.5 * (nf - 2.0) * mass - (nf - 2.0).powi(2) / (2.0 * (nf - 1.0) + eps * (nf - 2.0)) * (mass + d))
}
