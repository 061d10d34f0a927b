//! The radial integrals `I_m^alpha = int_0^inf rho^alpha / (1 + rho^2)^m drho`,
//! sphere areas and angular moments.

pub mod quadrature;
pub mod sphere;

use serde::Serialize;
use statrs::function::beta::ln_beta;
use statrs::function::gamma::digamma;

use crate::error::{Error, Result};
use quadrature::{integrate_half_line, QuadOptions, QuadResult};

pub use sphere::{angular_moment_quadratic, angular_moment_quadratic_closed_form, sphere_area};

/// A validated `I_m^alpha` with its closed-form value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RadialIntegral {
    pub m: f64,
    pub alpha: f64,
    pub value: f64,
}

fn validate(m: f64, alpha: f64) -> Result<()> {
    if !(m.is_finite() && alpha.is_finite()) || alpha < 0.0 || alpha + 1.0 >= 2.0 * m {
        return Err(Error::NonconvergentIntegral { m, alpha });
    }
    Ok(())
}

/// `I_m^alpha` through `(1/2) B((alpha+1)/2, m - (alpha+1)/2)`.
pub fn radial_integral(m: f64, alpha: f64) -> Result<f64> {
    validate(m, alpha)?;
    let a = 0.5 * (alpha + 1.0);
    Ok(0.5 * ln_beta(a, m - a).exp())
}

pub fn radial_integral_checked(m: f64, alpha: f64) -> Result<RadialIntegral> {
    Ok(RadialIntegral { m, alpha, value: radial_integral(m, alpha)? })
}

/// `I_m^alpha` by adaptive Gauss-Kronrod on the compactified half-line.
pub fn radial_integral_quadrature(m: f64, alpha: f64) -> Result<QuadResult> {
    validate(m, alpha)?;
    Ok(integrate_half_line(
        |rho| rho.powf(alpha) * (1.0 + rho * rho).powf(-m),
        QuadOptions::default(),
    ))
}

/// `int_0^inf rho^alpha ln(1 + rho^2) / (1 + rho^2)^m drho`, obtained by
/// differentiating the Beta closed form in `m`.
pub fn radial_log_integral(m: f64, alpha: f64) -> Result<f64> {
    validate(m, alpha)?;
    let a = 0.5 * (alpha + 1.0);
    Ok(0.5 * ln_beta(a, m - a).exp() * (digamma(m) - digamma(m - a)))
}

#[derive(Debug, Clone, Serialize)]
pub struct RecursionCheck {
    pub identity: &'static str,
    /// `None` when the identity's validity condition fails.
    pub rel_err: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RecursionReport {
    pub m: f64,
    pub alpha: f64,
    pub checks: [RecursionCheck; 3],
    pub max_rel_err: f64,
}

impl RecursionReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_rel_err <= tol
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs())
}

/// Checks the three shift identities for `I_m^alpha`, skipping any whose
/// convergence condition fails.
pub fn check_recursions(m: f64, alpha: f64) -> RecursionReport {
    let i = |m: f64, a: f64| radial_integral(m, a).ok();
    let base = i(m, alpha);
    let first = base.zip(i(m + 1.0, alpha + 2.0)).map(|(l, r)| rel(l, 2.0 * m / (alpha + 1.0) * r));
    let second = base.zip(i(m + 1.0, alpha)).map(|(l, r)| rel(l, 2.0 * m / (2.0 * m - alpha - 1.0) * r));
    let third = if alpha + 3.0 < 2.0 * m {
        base.zip(i(m, alpha + 2.0)).map(|(l, r)| rel(l, (2.0 * m - alpha - 3.0) / (alpha + 1.0) * r))
    } else {
        None
    };
    let checks = [
        RecursionCheck { identity: "I(m,a) = 2m/(a+1) I(m+1,a+2)", rel_err: first },
        RecursionCheck { identity: "I(m,a) = 2m/(2m-a-1) I(m+1,a)", rel_err: second },
        RecursionCheck { identity: "I(m,a) = (2m-a-3)/(a+1) I(m,a+2)", rel_err: third },
    ];
    let max_rel_err = checks.iter().filter_map(|c| c.rel_err).fold(0.0, f64::max);
    RecursionReport { m, alpha, checks, max_rel_err }
}

/// Fifty `(m, alpha)` pairs with `alpha` spread over `[0, 2m - 2]`, so every
/// integrand decays at least like `rho^{-2}`.
pub fn sample_parameters() -> Vec<(f64, f64)> {
    let ms = [1.5, 2.0, 2.5, 3.0, 3.5, 4.0, 5.0, 6.0, 8.0, 10.0];
    ms.iter()
        .flat_map(|&m| (0..5).map(move |j| (m, (2.0 * m - 2.0) * j as f64 / 4.0)))
        .collect()
}

/// One row of the `integrals` table.
#[derive(Debug, Clone, Serialize)]
pub struct IntegralRow {
    pub m: f64,
    pub alpha: f64,
    pub closed_form: f64,
    pub quadrature: f64,
    pub rel_err: f64,
    pub recursion1_err: Option<f64>,
    pub recursion2_err: Option<f64>,
    pub recursion3_err: Option<f64>,
}

pub fn integral_row(m: f64, alpha: f64) -> Result<IntegralRow> {
    let closed_form = radial_integral(m, alpha)?;
    let quadrature = radial_integral_quadrature(m, alpha)?.value;
    let rep = check_recursions(m, alpha);
    Ok(IntegralRow {
        m,
        alpha,
        closed_form,
        quadrature,
        rel_err: rel(closed_form, quadrature),
        recursion1_err: rep.checks[0].rel_err,
        recursion2_err: rep.checks[1].rel_err,
        recursion3_err: rep.checks[2].rel_err,
    })
}

pub fn integral_table(params: &[(f64, f64)]) -> Result<Vec<IntegralRow>> {
    params.iter().map(|&(m, a)| integral_row(m, a)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn known_values() {
        assert!((radial_integral(1.0, 0.0).unwrap() - PI / 2.0).abs() < 1e-14);
        assert!((radial_integral(2.0, 1.0).unwrap() - 0.5).abs() < 1e-14);
        assert!((radial_integral(6.0, 7.0).unwrap() - 1.0 / 40.0).abs() < 1e-15);
        let q = radial_integral_quadrature(6.0, 7.0).unwrap();
        assert!((q.value - 1.0 / 40.0).abs() < 1e-13);
    }

    #[test]
    fn rejects_divergent() {
        assert!(matches!(radial_integral(1.0, 1.0), Err(Error::NonconvergentIntegral { .. })));
        assert!(radial_integral(3.0, -0.5).is_err());
        assert!(radial_integral_quadrature(2.0, 3.0).is_err());
    }

    #[test]
    fn recursion_examples() {
        let r = check_recursions(6.0, 5.0);
        assert!(r.checks.iter().all(|c| c.rel_err.is_some()));
        assert!(r.passes(1e-10));

        let r = check_recursions(2.0, 1.0);
        assert!(r.checks[2].rel_err.is_none());
        assert!(r.checks[0].rel_err.unwrap() < 1e-10 && r.checks[1].rel_err.unwrap() < 1e-10);
    }

    #[test]
    fn third_recursion_at_n7() {
        // I_6^5 = (12 - 5 - 3)/6 * I_6^7 = (2/3) I_6^7.
        let lhs = radial_integral(6.0, 5.0).unwrap();
        let rhs = radial_integral(6.0, 7.0).unwrap();
        assert!((lhs - 1.0 / 60.0).abs() < 1e-15);
        assert!((lhs - 2.0 / 3.0 * rhs).abs() < 1e-15);
    }

    #[test]
    fn log_integral_matches_quadrature() {
        for &(m, a) in &[(6.0, 5.0), (7.0, 6.0), (3.0, 1.5)] {
            let closed = radial_log_integral(m, a).unwrap();
            let q = integrate_half_line(
                |r: f64| r.powf(a) * (1.0 + r * r).ln() * (1.0 + r * r).powf(-m),
                QuadOptions::default(),
            );
            assert!(rel(closed, q.value) < 1e-10, "{m} {a}: {closed} vs {}", q.value);
        }
    }

    #[test]
    fn sample_grid_is_valid() {
        let p = sample_parameters();
        assert_eq!(p.len(), 50);
        assert!(p.iter().all(|&(m, a)| a + 1.0 < 2.0 * m));
    }
}
