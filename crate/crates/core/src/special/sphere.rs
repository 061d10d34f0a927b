//! Sphere areas, monomial moments on spheres, and angular quadrature rules.
//!
//! Convention: `sphere_area(k)` is the surface measure of the unit sphere
//! `S^{k-1}` in `R^k`. The symbol `omega_{n-1}` used by the energy constants
//! is `sphere_area(n - 1)`, the area of `S^{n-2}`.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use statrs::function::gamma::{gamma, ln_gamma};

use super::quadrature::gauss_legendre;
use crate::form::TracelessSymmetricForm;

pub fn sphere_area(k: usize) -> f64 {
    assert!(k >= 1, "sphere_area needs k >= 1");
    let half = k as f64 / 2.0;
    2.0 * PI.powf(half) / gamma(half)
}

/// `int_{S^{d-1}} prod theta_i^{a_i}`; zero if any exponent is odd.
pub fn monomial_moment(d: usize, exponents: &[u32]) -> f64 {
    assert!(exponents.len() <= d);
    if exponents.iter().any(|a| a % 2 == 1) {
        return 0.0;
    }
    let mut log = 0.0;
    let mut total = 0.0;
    for i in 0..d {
        let a = exponents.get(i).copied().unwrap_or(0) as f64;
        log += ln_gamma((a + 1.0) / 2.0);
        total += (a + 1.0) / 2.0;
    }
    2.0 * (log - ln_gamma(total)).exp()
}

/// `int_{S^{d-1}} theta^T h theta`, assembled from monomial moments.
pub fn angular_quadratic(h: &TracelessSymmetricForm) -> f64 {
    let d = h.dim();
    let m2 = monomial_moment(d, &[2]);
    (0..d).map(|i| h.get(i, i) * m2).sum()
}

/// `int_{S^{d-1}} (theta^T h theta) theta_b`; every term is an odd monomial.
pub fn angular_quadratic_times_linear(h: &TracelessSymmetricForm, b: usize) -> f64 {
    let d = h.dim();
    let mut s = 0.0;
    for i in 0..d {
        for j in 0..d {
            let mut e = vec![0u32; d];
            e[i] += 1;
            e[j] += 1;
            e[b] += 1;
            s += h.get(i, j) * monomial_moment(d, &e);
        }
    }
    s
}

/// `int_{S^{n-2}} (theta^T h theta)^2` summed over index patterns with the
/// fourth-order monomial moments.
pub fn angular_moment_quadratic(h: &TracelessSymmetricForm) -> f64 {
    let d = h.dim();
    let m4 = monomial_moment(d, &[4]);
    let m22 = monomial_moment(d, &[2, 2]);
    let mut s = 0.0;
    for i in 0..d {
        s += h.get(i, i) * h.get(i, i) * m4;
        for j in 0..d {
            if i != j {
                // (iijj), (ijij), (ijji)
                s += (h.get(i, i) * h.get(j, j) + 2.0 * h.get(i, j) * h.get(i, j)) * m22;
            }
        }
    }
    s
}

/// Closed form `2 |S^{n-2}| ||h||^2 / ((n-1)(n+1))` for trace-free `h`.
pub fn angular_moment_quadratic_closed_form(h: &TracelessSymmetricForm) -> f64 {
    let d = h.dim() as f64;
    2.0 * sphere_area(h.dim()) * h.norm_sq() / (d * (d + 2.0))
}

/// Uniform point on `S^{d-1}`.
pub fn sample_sphere<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// Mean of `f` under the normalized sphere measure and its standard error.
pub fn sphere_mc_mean<R, F>(d: usize, samples: usize, rng: &mut R, f: F) -> (f64, f64)
where
    R: Rng + ?Sized,
    F: Fn(&[f64]) -> f64,
{
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..samples {
        let theta = sample_sphere(d, rng);
        let v = f(&theta);
        sum += v;
        sum_sq += v * v;
    }
    let n = samples as f64;
    let mean = sum / n;
    let var = (sum_sq / n - mean * mean).max(0.0);
    (mean, (var / n).sqrt())
}

/// Deterministic quadrature on `S^{d-1}` for integrands that depend on the
/// first `k` coordinates of `theta` and on `|theta|` restricted to the rest.
///
/// Points are `theta = (sin(phi) omega, cos(phi), 0, ...)` with `omega` in
/// `S^{k-1}`; the measure is `sin^{k-1} cos^{d-k-1} dphi domega |S^{d-k-1}|`.
#[derive(Debug, Clone)]
pub struct ReducedSphereRule {
    pub d: usize,
    pub k: usize,
    pub directions: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl ReducedSphereRule {
    /// `resolution` controls the number of nodes per angle (at least 2).
    pub fn new(d: usize, k: usize, resolution: usize) -> Option<Self> {
        if k > 3 || k >= d {
            return None;
        }
        let res = resolution.max(2);
        let inactive_area = sphere_area(d - k);
        let mut directions = Vec::new();
        let mut weights = Vec::new();
        if k == 0 {
            let mut e = vec![0.0; d];
            e[0] = 1.0;
            directions.push(e);
            weights.push(sphere_area(d));
            return Some(Self { d, k, directions, weights });
        }
        let omega_rule: Vec<(Vec<f64>, f64)> = match k {
            1 => vec![(vec![1.0], 1.0), (vec![-1.0], 1.0)],
            2 => {
                let m = 2 * res;
                (0..m)
                    .map(|i| {
                        let a = 2.0 * PI * (i as f64 + 0.5) / m as f64;
                        (vec![a.cos(), a.sin()], 2.0 * PI / m as f64)
                    })
                    .collect()
            }
            _ => {
                let (x, w) = gauss_legendre(res);
                let m = 2 * res;
                let mut out = Vec::new();
                for (c, wc) in x.iter().zip(&w) {
                    let s = (1.0 - c * c).sqrt();
                    for i in 0..m {
                        let a = 2.0 * PI * (i as f64 + 0.5) / m as f64;
                        out.push((vec![s * a.cos(), s * a.sin(), *c], wc * 2.0 * PI / m as f64));
                    }
                }
                out
            }
        };
        let (x, w) = gauss_legendre(res);
        for (xi, wi) in x.iter().zip(&w) {
            let phi = PI / 4.0 * (xi + 1.0);
            let (s, c) = phi.sin_cos();
            let wphi = wi * PI / 4.0 * s.powi(k as i32 - 1) * c.powi((d - k - 1) as i32) * inactive_area;
            for (omega, wo) in &omega_rule {
                let mut theta = vec![0.0; d];
                for (j, o) in omega.iter().enumerate() {
                    theta[j] = s * o;
                }
                theta[k] = c;
                directions.push(theta);
                weights.push(wphi * wo);
            }
        }
        Some(Self { d, k, directions, weights })
    }

    pub fn integrate<F: FnMut(&[f64]) -> f64>(&self, mut f: F) -> f64 {
        self.directions.iter().zip(&self.weights).map(|(t, w)| w * f(t)).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn areas() {
        assert!((sphere_area(2) - 2.0 * PI).abs() < 1e-14);
        assert!((sphere_area(3) - 4.0 * PI).abs() < 1e-13);
        assert!((sphere_area(6) - PI.powi(3)).abs() < 1e-12);
        assert!((monomial_moment(6, &[]) - PI.powi(3)).abs() < 1e-12);
    }

    #[test]
    fn zero_form_moment() {
        assert_eq!(angular_moment_quadratic(&TracelessSymmetricForm::zero(7)), 0.0);
    }

    #[test]
    fn diag_moment_n7() {
        let h = TracelessSymmetricForm::diagonal(7, &[1.0, -1.0]).unwrap();
        let v = angular_moment_quadratic(&h);
        assert!((v - PI.powi(3) / 12.0).abs() < 1e-12 * v);
        assert!((angular_moment_quadratic_closed_form(&h) - v).abs() < 1e-12 * v);
    }

    #[test]
    fn homogeneity() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let h = TracelessSymmetricForm::random(8, &mut rng);
        let a = angular_moment_quadratic(&h);
        let b = angular_moment_quadratic(&h.scaled(3.0));
        assert!((b - 9.0 * a).abs() < 1e-12 * b);
    }

    #[test]
    fn linear_factor_vanishes() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h = TracelessSymmetricForm::random(7, &mut rng);
        for b in 0..6 {
            assert_eq!(angular_quadratic_times_linear(&h, b), 0.0);
        }
        assert!(angular_quadratic(&h).abs() < 1e-12);
    }

    #[test]
    fn reduced_rule_matches_closed_forms() {
        let h = TracelessSymmetricForm::diagonal(7, &[1.0, -1.0]).unwrap();
        let rule = ReducedSphereRule::new(6, 2, 12).unwrap();
        let area = rule.integrate(|_| 1.0);
        assert!((area - PI.powi(3)).abs() < 1e-12);
        let m = rule.integrate(|t| h.quadratic(t).powi(2));
        assert!((m - PI.powi(3) / 12.0).abs() < 1e-12);
        for k in 0..=3 {
            let rule = ReducedSphereRule::new(9, k, 20).unwrap();
            assert!((rule.integrate(|_| 1.0) - sphere_area(9)).abs() < 1e-10);
        }
        let rule = ReducedSphereRule::new(6, 3, 10).unwrap();
        let x2 = rule.integrate(|t| t[2] * t[2]);
        assert!((x2 - monomial_moment(6, &[0, 0, 2])).abs() < 1e-12);
    }
}
