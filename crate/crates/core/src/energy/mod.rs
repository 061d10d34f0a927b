//! Constants of the reduced-energy expansion
//! `A + B(eps) + eps lambda^p phi(q) + C eps ln(lambda)` and the numerical
//! checks of its computable pieces.
//!
//! `omega` below always means `sphere_area(n - 1)`, the area of `S^{n-2}`.

pub mod expansion;
pub mod jet;
pub mod mc;
pub mod residual;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::form::TracelessSymmetricForm;
use crate::special::quadrature::{integrate_half_line, QuadOptions};
use crate::special::{radial_integral, radial_integral_quadrature, radial_log_integral, sphere_area};

pub use jet::{laplace_beltrami, metric_jet_eval, FermiMetricJet, MetricAt};

/// Power of `lambda` multiplying `phi(q)`: `1` follows the statement of the
/// expansion, `2` the computation in its proof (the default).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum LambdaPower {
    #[serde(rename = "1")]
    One,
    #[serde(rename = "2")]
    #[default]
    Two,
}

impl LambdaPower {
    pub fn from_int(p: u32) -> Result<Self> {
        match p {
            1 => Ok(Self::One),
            2 => Ok(Self::Two),
            _ => Err(Error::InvalidArgument(format!("lambda exponent p must be 1 or 2, got {p}"))),
        }
    }

    pub fn as_f64(self) -> f64 {
        match self {
            Self::One => 1.0,
            Self::Two => 2.0,
        }
    }

    pub fn as_int(self) -> u32 {
        self.as_f64() as u32
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyCoefficients {
    pub n: usize,
    pub a: f64,
    pub c: f64,
    /// Coefficient of `eps` in `B(eps)`.
    pub b_lin: f64,
    /// Coefficient of `-eps |ln eps|` in `B(eps)`.
    pub b_log: f64,
    /// `phi(q) = -phi_n ||pi(q)||^2`.
    pub phi_n: f64,
    /// `int_{R^{n-1}} U^{2(n-1)/(n-2)}(z, 0) dz`.
    pub boundary_mass: f64,
    /// `int_{R^{n-1}} U^{2(n-1)/(n-2)} ln U (z, 0) dz`.
    pub boundary_log_mass: f64,
    /// Closed-form part `(n-6)(n-2) omega I_{n-1}^n / (4 (n-1)^2 (n-4))`.
    pub k_term: f64,
    /// `int Delta v v` per unit `||h||^2`.
    pub pairing_unit: f64,
}

fn check_n(n: usize) -> Result<()> {
    if n < 7 {
        return Err(Error::InvalidArgument(format!("energy coefficients need n >= 7, got {n}")));
    }
    Ok(())
}

/// `omega I_{n-1}^n` through the Beta closed form.
fn omega_i_n(n: usize) -> Result<f64> {
    let nf = n as f64;
    Ok(sphere_area(n - 1) * radial_integral(nf - 1.0, nf)?)
}

pub fn a_closed_form(n: usize) -> Result<f64> {
    check_n(n)?;
    let nf = n as f64;
    Ok((nf - 2.0) * (nf - 3.0) / (2.0 * (nf - 1.0).powi(2)) * omega_i_n(n)?)
}

pub fn c_closed_form(n: usize) -> Result<f64> {
    check_n(n)?;
    let nf = n as f64;
    Ok((nf - 2.0).powi(2) * (nf - 3.0) / (4.0 * (nf - 1.0).powi(2)) * omega_i_n(n)?)
}

/// `A` with `I_{n-1}^n` from adaptive quadrature instead of the Beta function.
pub fn a_quadrature(n: usize) -> Result<f64> {
    check_n(n)?;
    let nf = n as f64;
    let i = radial_integral_quadrature(nf - 1.0, nf)?.value;
    Ok((nf - 2.0) * (nf - 3.0) / (2.0 * (nf - 1.0).powi(2)) * sphere_area(n - 1) * i)
}

/// `C` through `(n-2)^2 / (4(n-1)) omega I_{n-1}^{n-2}`, i.e. through the
/// boundary mass of the bubble.
pub fn c_via_boundary_mass(n: usize) -> Result<f64> {
    check_n(n)?;
    let nf = n as f64;
    Ok((nf - 2.0).powi(2) / (4.0 * (nf - 1.0)) * sphere_area(n - 1) * radial_integral(nf - 1.0, nf - 2.0)?)
}

/// `int_{R^{n-1}} (1 + |z|^2)^{-(n-1)} dz` by quadrature of the radial profile.
pub fn boundary_mass_quadrature(n: usize) -> f64 {
    let nf = n as f64;
    let q = integrate_half_line(|r| r.powf(nf - 2.0) * (1.0 + r * r).powf(-(nf - 1.0)), QuadOptions::default());
    sphere_area(n - 1) * q.value
}

pub fn coefficients(n: usize, pairing_unit: f64) -> Result<EnergyCoefficients> {
    check_n(n)?;
    if !pairing_unit.is_finite() {
        return Err(Error::InvalidArgument("pairing per unit norm must be finite".into()));
    }
    let nf = n as f64;
    let omega = sphere_area(n - 1);
    let boundary_mass = omega * radial_integral(nf - 1.0, nf - 2.0)?;
    // ln U(z, 0) = -(n-2)/2 ln(1 + |z|^2).
    let boundary_log_mass = -(nf - 2.0) / 2.0 * omega * radial_log_integral(nf - 1.0, nf - 2.0)?;
    let k_term = (nf - 6.0) * (nf - 2.0) * omega_i_n(n)? / (4.0 * (nf - 1.0).powi(2) * (nf - 4.0));
    Ok(EnergyCoefficients {
        n,
        a: a_closed_form(n)?,
        c: c_closed_form(n)?,
        b_lin: (nf - 2.0).powi(3) / (2.0 * (nf - 1.0)) * boundary_mass - (nf - 2.0) / (2.0 * (nf - 1.0)) * boundary_log_mass,
        b_log: (nf - 2.0).powi(2) / (8.0 * (nf - 1.0)) * boundary_mass,
        phi_n: k_term - 0.5 * pairing_unit,
        boundary_mass,
        boundary_log_mass,
        k_term,
        pairing_unit,
    })
}

impl EnergyCoefficients {
    /// `B(eps) = b_lin eps - b_log eps |ln eps|`.
    pub fn b_of(&self, eps: f64) -> f64 {
        if eps == 0.0 {
            return 0.0;
        }
        self.b_lin * eps - self.b_log * eps * eps.ln().abs()
    }

    /// `A + B(eps) + eps lambda^p phi + C eps ln(lambda)`.
    pub fn expansion(&self, eps: f64, lambda: f64, phi_q: f64, p: LambdaPower) -> f64 {
        let log_term = if eps == 0.0 { 0.0 } else { self.c * eps * lambda.ln() };
        self.a + self.b_of(eps) + eps * lambda.powf(p.as_f64()) * phi_q + log_term
    }
}

/// `phi(h) = -Phi_n ||h||^2`.
pub fn phi(h: &TracelessSymmetricForm, coeffs: &EnergyCoefficients) -> f64 {
    -coeffs.phi_n * h.norm_sq()
}

/// `phi(h)` assembled from a pairing computed for this specific `h`.
pub fn phi_from_pairing(h: &TracelessSymmetricForm, pairing: f64, coeffs: &EnergyCoefficients) -> f64 {
    0.5 * pairing - coeffs.k_term * h.norm_sq()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn n7_closed_forms() {
        let c = coefficients(7, -0.04).unwrap();
        assert!((c.a - PI.powi(3) / 144.0).abs() < 1e-14);
        assert!((c.c - 25.0 * PI.powi(3) / 1440.0).abs() < 1e-14);
        assert!((c.boundary_mass - PI.powi(3) / 60.0).abs() < 1e-14);
        assert!((c.k_term - 5.0 * PI.powi(3) / 17280.0).abs() < 1e-15);
        assert!((c.phi_n - (c.k_term + 0.02)).abs() < 1e-15);
    }

    #[test]
    fn two_way_constants() {
        for n in 7..=30 {
            let a = a_closed_form(n).unwrap();
            let aq = a_quadrature(n).unwrap();
            assert!((a - aq).abs() <= 1e-10 * a, "n = {n}");
            let c = c_closed_form(n).unwrap();
            let cb = c_via_boundary_mass(n).unwrap();
            assert!((c - cb).abs() <= 1e-10 * c, "n = {n}");
            assert!(a > 0.0 && c > 0.0);
            let m = boundary_mass_quadrature(n);
            let k = coefficients(n, 0.0).unwrap();
            assert!((m - k.boundary_mass).abs() <= 1e-10 * m);
        }
    }

    #[test]
    fn log_mass_matches_quadrature() {
        let k = coefficients(7, 0.0).unwrap();
        let q = integrate_half_line(|r| r.powi(5) * (1.0 + r * r).powi(-6) * (-2.5 * (1.0 + r * r).ln()), QuadOptions::default());
        assert!((k.boundary_log_mass - PI.powi(3) * q.value).abs() < 1e-12);
    }

    #[test]
    fn rejects_small_n() {
        assert!(coefficients(6, 0.0).is_err());
        assert!(LambdaPower::from_int(3).is_err());
    }

    #[test]
    fn expansion_terms() {
        let k = coefficients(7, -0.05).unwrap();
        assert_eq!(k.expansion(0.0, 3.0, -1.0, LambdaPower::Two), k.a);
        let h = TracelessSymmetricForm::diagonal(7, &[1.0, -1.0]).unwrap();
        assert_eq!(phi(&TracelessSymmetricForm::zero(7), &k), 0.0);
        assert!((phi(&h.scaled(2.0), &k) - 4.0 * phi(&h, &k)).abs() < 1e-15);
        assert!(phi(&h, &k) < 0.0);
    }
}
