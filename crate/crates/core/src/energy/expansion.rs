//! The boundary-term difference
//! `D(eps) = int_{|z| < 1/delta} (delta^{-eps(n-2)/2} U^eps - 1) U^{2(n-1)/(n-2)} dz`
//! with `delta = lambda sqrt(eps)`, and its fit to `c1 eps|ln eps| + c2 eps`.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fit::{linear_fit, LinearFit};
use crate::special::quadrature::{integrate, QuadOptions};
use crate::special::sphere_area;

use super::coefficients;

#[derive(Debug, Clone, Serialize)]
pub struct ExpansionSample {
    pub eps: f64,
    pub delta: f64,
    pub difference: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExpansionReport {
    pub n: usize,
    pub lambda: f64,
    pub samples: Vec<ExpansionSample>,
    pub fit: LinearFit,
    pub c1: f64,
    pub c2: f64,
    /// `(n-2)/4 int U^{2(n-1)/(n-2)}`.
    pub c1_expected: f64,
    /// `int U^{..} ln U - (n-2)/2 ln(lambda) int U^{..}`.
    pub c2_expected: f64,
    pub c1_rel_err: f64,
    pub c2_rel_err: f64,
}

/// `D(eps)` by adaptive quadrature of the radial profile.
pub fn boundary_difference(n: usize, lambda: f64, eps: f64) -> Result<f64> {
    let nf = n as f64;
    let p = (nf - 2.0) / 2.0;
    let delta = lambda * eps.sqrt();
    let shift = -p * delta.ln();
    let f = move |r: f64| {
        let s = 1.0 + r * r;
        let ln_u = -p * s.ln();
        r.powf(nf - 2.0) * (eps * (shift + ln_u)).exp_m1() * s.powf(-(nf - 1.0))
    };
    let opts = QuadOptions { abs_tol: 1e-18, rel_tol: 1e-12, max_intervals: 20_000 };
    // Split at r = 1 and r = 10 so the bulk is resolved before the long tail.
    let upper = 1.0 / delta;
    let mut total = 0.0;
    let mut lo = 0.0;
    for hi in [1.0, 10.0, upper] {
        if hi <= lo {
            continue;
        }
        let hi = hi.min(upper);
        let r = integrate(f, lo, hi, opts);
        if !r.converged {
            return Err(Error::Quadrature { value: r.value, error: r.abs_error });
        }
        total += r.value;
        lo = hi;
    }
    Ok(sphere_area(n - 1) * total)
}

/// Regresses `D(eps)/eps` on `|ln eps|`; the slope is `c1`, the intercept `c2`.
pub fn boundary_term_expansion_check(n: usize, lambda: f64, eps_list: &[f64], cutoff_radius: f64) -> Result<ExpansionReport> {
    if eps_list.len() < 4 {
        return Err(Error::Precondition(format!("need at least 4 eps values for a 2-parameter fit, got {}", eps_list.len())));
    }
    if !(lambda > 0.0) {
        return Err(Error::InvalidArgument(format!("lambda = {lambda} must be > 0")));
    }
    for &eps in eps_list {
        let delta = lambda * eps.sqrt();
        if !(eps > 0.0 && eps < 1.0) || delta > cutoff_radius / 10.0 {
            return Err(Error::Precondition(format!("eps = {eps} gives delta = {delta} outside (0, R/10]")));
        }
    }
    let samples: Vec<ExpansionSample> = eps_list
        .par_iter()
        .map(|&eps| {
            Ok(ExpansionSample { eps, delta: lambda * eps.sqrt(), difference: boundary_difference(n, lambda, eps)? })
        })
        .collect::<Result<_>>()?;
    let x: Vec<f64> = samples.iter().map(|s| s.eps.ln().abs()).collect();
    let y: Vec<f64> = samples.iter().map(|s| s.difference / s.eps).collect();
    let fit = linear_fit(&x, &y)?;
    let k = coefficients(n, 0.0)?;
    let nf = n as f64;
    let c1_expected = (nf - 2.0) / 4.0 * k.boundary_mass;
    let c2_expected = k.boundary_log_mass - (nf - 2.0) / 2.0 * lambda.ln() * k.boundary_mass;
    let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(f64::MIN_POSITIVE);
    Ok(ExpansionReport {
        n,
        lambda,
        c1: fit.slope,
        c2: fit.intercept,
        c1_rel_err: rel(fit.slope, c1_expected),
        c2_rel_err: rel(fit.intercept, c2_expected),
        samples,
        fit,
        c1_expected,
        c2_expected,
    })
}

/// Shift of the fitted `c2` between `lambda` and `2 lambda` against the
/// predicted `-(n-2)/2 ln 2 int U^{..}`.
#[derive(Debug, Clone, Serialize)]
pub struct LambdaShiftReport {
    pub observed: f64,
    pub expected: f64,
    pub rel_err: f64,
}

pub fn lambda_shift(base: &ExpansionReport, doubled: &ExpansionReport) -> Result<LambdaShiftReport> {
    let k = coefficients(base.n, 0.0)?;
    let expected = -(base.n as f64 - 2.0) / 2.0 * (doubled.lambda / base.lambda).ln() * k.boundary_mass;
    let observed = doubled.c2 - base.c2;
    Ok(LambdaShiftReport { observed, expected, rel_err: (observed - expected).abs() / expected.abs() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_short_lists_and_large_eps() {
        assert!(boundary_term_expansion_check(7, 1.0, &[1e-2, 1e-3, 1e-4], 1.0).is_err());
        assert!(boundary_term_expansion_check(7, 20.0, &[1e-2, 1e-3, 1e-4, 1e-5], 1.0).is_err());
    }

    #[test]
    fn difference_is_small_and_positive() {
        // For lambda = 1 the shift -p ln(delta) dominates ln U near the core.
        let d = boundary_difference(7, 1.0, 1e-4).unwrap();
        assert!(d > 0.0 && d < 1e-2);
    }
}
