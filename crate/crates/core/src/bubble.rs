//! The standard half-space bubble `U(z, t) = ((1+t)^2 + |z|^2)^{-(n-2)/2}`,
//! its rescalings, the kernel functions of the linearized problem, and the
//! cut-off transplant `W = U_delta * chi`.
//!
//! Coordinates are `y = (z_1, .., z_{n-1}, t)`; index `n - 1` is the normal.
//! All derivatives are closed form.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HalfSpacePoint {
    pub z: Vec<f64>,
    pub t: f64,
}

impl HalfSpacePoint {
    pub fn new(z: Vec<f64>, t: f64) -> Result<Self> {
        if !(t >= 0.0) || !t.is_finite() || z.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument(format!("half-space point needs finite z and t >= 0 (t = {t})")));
        }
        Ok(Self { z, t })
    }

    pub fn origin(n: usize) -> Self {
        Self { z: vec![0.0; n - 1], t: 0.0 }
    }

    /// Point from full coordinates `(z, t)`.
    pub fn from_coords(y: &[f64]) -> Result<Self> {
        let (t, z) = y.split_last().ok_or_else(|| Error::InvalidArgument("empty coordinates".into()))?;
        Self::new(z.to_vec(), *t)
    }

    pub fn coords(&self) -> Vec<f64> {
        let mut y = self.z.clone();
        y.push(self.t);
        y
    }

    pub fn z_norm(&self) -> f64 {
        self.z.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn norm(&self) -> f64 {
        (self.z_norm().powi(2) + self.t * self.t).sqrt()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { z: self.z.iter().map(|x| x * c).collect(), t: self.t * c }
    }
}

/// `U_delta(y) = delta^{-(n-2)/2} U(y / delta)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Bubble {
    pub n: usize,
    pub delta: f64,
}

/// Radial profile `f(s) = s^{-p}` and the shifted coordinates `y' = (z, 1+t)`.
struct Jet {
    shifted: Vec<f64>,
    f: [f64; 4],
}

impl Bubble {
    pub fn new(n: usize, delta: f64) -> Result<Self> {
        if n < 3 {
            return Err(Error::InvalidArgument(format!("n = {n} must be >= 3")));
        }
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(Error::InvalidArgument(format!("delta = {delta} must be > 0")));
        }
        Ok(Self { n, delta })
    }

    pub fn standard(n: usize) -> Result<Self> {
        Self::new(n, 1.0)
    }

    /// `(n-2)/2`.
    pub fn p(&self) -> f64 {
        0.5 * (self.n as f64 - 2.0)
    }

    fn check_dim(&self, y: &HalfSpacePoint) {
        assert_eq!(y.z.len() + 1, self.n, "point dimension does not match n");
    }

    /// Unscaled jet at `x = y / delta`.
    fn jet(&self, y: &HalfSpacePoint) -> Jet {
        self.check_dim(y);
        let inv = 1.0 / self.delta;
        let mut shifted: Vec<f64> = y.z.iter().map(|z| z * inv).collect();
        shifted.push(1.0 + y.t * inv);
        let s: f64 = shifted.iter().map(|x| x * x).sum();
        let p = self.p();
        let base = s.powf(-p);
        let f = [
            base,
            -p * base / s,
            p * (p + 1.0) * base / (s * s),
            -p * (p + 1.0) * (p + 2.0) * base / (s * s * s),
        ];
        Jet { shifted, f }
    }

    fn scale(&self, order: i32) -> f64 {
        self.delta.powf(-self.p()) * self.delta.powi(-order)
    }

    pub fn value(&self, y: &HalfSpacePoint) -> f64 {
        self.jet(y).f[0] * self.scale(0)
    }

    pub fn gradient(&self, y: &HalfSpacePoint) -> Vec<f64> {
        let j = self.jet(y);
        let c = 2.0 * j.f[1] * self.scale(1);
        j.shifted.iter().map(|x| c * x).collect()
    }

    pub fn hessian(&self, y: &HalfSpacePoint) -> DMatrix<f64> {
        let j = self.jet(y);
        let c = self.scale(2);
        DMatrix::from_fn(self.n, self.n, |a, b| {
            let diag = if a == b { 2.0 * j.f[1] } else { 0.0 };
            c * (4.0 * j.f[2] * j.shifted[a] * j.shifted[b] + diag)
        })
    }

    /// `d^3 U_delta / dy_a dy_b dy_c`.
    pub fn third_derivative(&self, y: &HalfSpacePoint, a: usize, b: usize, c: usize) -> f64 {
        let j = self.jet(y);
        let x = &j.shifted;
        let d = |i: usize, k: usize| if i == k { 1.0 } else { 0.0 };
        let v = 8.0 * j.f[3] * x[a] * x[b] * x[c] + 4.0 * j.f[2] * (d(a, c) * x[b] + d(b, c) * x[a] + d(a, b) * x[c]);
        v * self.scale(3)
    }

    pub fn laplacian(&self, y: &HalfSpacePoint) -> f64 {
        self.hessian(y).trace()
    }

    /// Residual of `d_t U_delta + (n-2) U_delta^{n/(n-2)}` on `t = 0`.
    pub fn boundary_residual(&self, z: &[f64]) -> f64 {
        let y = HalfSpacePoint { z: z.to_vec(), t: 0.0 };
        let n = self.n as f64;
        let u = self.value(&y);
        self.gradient(&y)[self.n - 1] + (n - 2.0) * u.powf(n / (n - 2.0))
    }

    /// Kernel function `j_b`, `b` in `1..=n`: `j_i = dU/dz_i` for `i < n`,
    /// `j_n = (n-2)/2 U + y . grad U`. Evaluated for the unscaled bubble.
    pub fn kernel_j(&self, b: usize, y: &HalfSpacePoint) -> f64 {
        let u = self.unit();
        let g = u.gradient(y);
        if b < self.n {
            g[b - 1]
        } else {
            let yc = y.coords();
            u.p() * u.value(y) + yc.iter().zip(&g).map(|(a, b)| a * b).sum::<f64>()
        }
    }

    /// Gradient of `j_b` (unscaled bubble).
    pub fn kernel_j_gradient(&self, b: usize, y: &HalfSpacePoint) -> Vec<f64> {
        let u = self.unit();
        let h = u.hessian(y);
        if b < self.n {
            (0..self.n).map(|c| h[(b - 1, c)]).collect()
        } else {
            let g = u.gradient(y);
            let yc = y.coords();
            (0..self.n)
                .map(|c| (u.p() + 1.0) * g[c] + (0..self.n).map(|a| yc[a] * h[(a, c)]).sum::<f64>())
                .collect()
        }
    }

    /// `Delta j_b` from the closed-form third derivatives.
    pub fn kernel_j_laplacian(&self, b: usize, y: &HalfSpacePoint) -> f64 {
        let u = self.unit();
        let n = self.n;
        if b < n {
            (0..n).map(|a| u.third_derivative(y, a, a, b - 1)).sum()
        } else {
            let yc = y.coords();
            let lap = u.laplacian(y);
            let grad_lap: f64 = (0..n).map(|c| yc[c] * (0..n).map(|a| u.third_derivative(y, a, a, c)).sum::<f64>()).sum();
            (u.p() + 2.0) * lap + grad_lap
        }
    }

    /// Residual of `d_t j_b + n U^{2/(n-2)} j_b` on `t = 0`.
    pub fn kernel_boundary_residual(&self, b: usize, z: &[f64]) -> f64 {
        let y = HalfSpacePoint { z: z.to_vec(), t: 0.0 };
        let n = self.n as f64;
        let u = self.unit().value(&y);
        self.kernel_j_gradient(b, &y)[self.n - 1] + n * u.powf(2.0 / (n - 2.0)) * self.kernel_j(b, &y)
    }

    fn unit(&self) -> Bubble {
        Bubble { n: self.n, delta: 1.0 }
    }

    /// `sup U_delta = delta^{-(n-2)/2}`, attained at the origin.
    pub fn sup(&self) -> f64 {
        self.delta.powf(-self.p())
    }
}

/// Radial cut-off: 1 on `[0, R/2]`, quintic smoothstep down to 0 on `[R/2, R]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CutOff {
    pub radius: f64,
}

impl Default for CutOff {
    fn default() -> Self {
        Self { radius: 1.0 }
    }
}

impl CutOff {
    pub fn new(radius: f64) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::InvalidArgument(format!("cut-off radius {radius} must be > 0")));
        }
        Ok(Self { radius })
    }

    /// `(chi, chi', chi'')` as functions of `|y|`.
    pub fn profile(&self, rho: f64) -> (f64, f64, f64) {
        let r = self.radius;
        if rho <= 0.5 * r {
            return (1.0, 0.0, 0.0);
        }
        if rho >= r {
            return (0.0, 0.0, 0.0);
        }
        let x = 2.0 * rho / r - 1.0;
        let s = x * x * x * (10.0 - 15.0 * x + 6.0 * x * x);
        let ds = 30.0 * x * x * (1.0 - x) * (1.0 - x);
        let d2s = 60.0 * x * (1.0 - x) * (1.0 - 2.0 * x);
        let k = 2.0 / r;
        (1.0 - s, -k * ds, -k * k * d2s)
    }

    pub fn value(&self, rho: f64) -> f64 {
        self.profile(rho).0
    }

    /// Rejects concentration scales outside the plateau regime `delta <= R/10`.
    pub fn check_scale(&self, delta: f64) -> Result<()> {
        if !(delta > 0.0) || delta > self.radius / 10.0 {
            return Err(Error::Precondition(format!(
                "delta = {delta} must lie in (0, R/10] with R = {}",
                self.radius
            )));
        }
        Ok(())
    }
}

/// `W = U_delta * chi(|y|)`.
pub fn transplant_w(delta: f64, cutoff: &CutOff, y: &HalfSpacePoint) -> Result<f64> {
    let b = Bubble::new(y.z.len() + 1, delta)?;
    Ok(b.value(y) * cutoff.value(y.norm()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_point(rng: &mut ChaCha8Rng, n: usize, boundary: bool) -> HalfSpacePoint {
        let z = (0..n - 1).map(|_| rng.random_range(-3.0..3.0)).collect();
        let t = if boundary { 0.0 } else { rng.random_range(0.0..3.0) };
        HalfSpacePoint { z, t }
    }

    #[test]
    fn point_values() {
        let u = Bubble::standard(7).unwrap();
        assert_eq!(u.value(&HalfSpacePoint::origin(7)), 1.0);
        let y = HalfSpacePoint::new(vec![0.0; 6], 1.0).unwrap();
        assert!((u.value(&y) - 0.03125).abs() < 1e-15);
        assert!(HalfSpacePoint::new(vec![0.0; 6], -0.1).is_err());
    }

    #[test]
    fn harmonic_and_boundary_condition() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for n in [5, 7, 10] {
            let u = Bubble::standard(n).unwrap();
            let us = Bubble::new(n, 0.3).unwrap();
            for _ in 0..100 {
                let y = random_point(&mut rng, n, false);
                let h = u.hessian(&y);
                let scale = h.amax().max(1e-300);
                assert!(u.laplacian(&y).abs() <= 1e-10 * scale.max(1.0));
                let zb = random_point(&mut rng, n, true).z;
                let g = u.gradient(&HalfSpacePoint { z: zb.clone(), t: 0.0 })[n - 1].abs();
                assert!(u.boundary_residual(&zb).abs() <= 1e-10 * g.max(1e-300));
                assert!(us.boundary_residual(&zb).abs() <= 1e-10 * us.sup().powf(2.0));
            }
        }
    }

    #[test]
    fn scaling_covariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let u = Bubble::standard(7).unwrap();
        for &d in &[1.0, 0.5, 0.01] {
            let ud = Bubble::new(7, d).unwrap();
            for _ in 0..20 {
                let y = random_point(&mut rng, 7, false);
                let expect = d.powf(-2.5) * u.value(&y.scaled(1.0 / d));
                assert!((ud.value(&y) - expect).abs() <= 1e-12 * expect);
            }
            assert_eq!(ud.value(&HalfSpacePoint::origin(7)), ud.sup());
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let u = Bubble::new(7, 0.7).unwrap();
        let y = HalfSpacePoint::new(vec![0.3, -0.2, 0.1, 0.0, 0.5, -0.4], 0.6).unwrap();
        let g = u.gradient(&y);
        let hm = u.hessian(&y);
        let step = 1e-5;
        for a in 0..7 {
            let mut yp = y.coords();
            let mut ym = y.coords();
            yp[a] += step;
            ym[a] -= step;
            let (p, m) = (HalfSpacePoint::from_coords(&yp).unwrap(), HalfSpacePoint::from_coords(&ym).unwrap());
            let fd = (u.value(&p) - u.value(&m)) / (2.0 * step);
            assert!((fd - g[a]).abs() < 1e-7 * g[a].abs().max(1.0));
            for b in 0..7 {
                let fd = (u.gradient(&p)[b] - u.gradient(&m)[b]) / (2.0 * step);
                assert!((fd - hm[(a, b)]).abs() < 1e-6 * hm.amax());
                let fd3 = (u.hessian(&p)[(b, 2)] - u.hessian(&m)[(b, 2)]) / (2.0 * step);
                assert!((fd3 - u.third_derivative(&y, a, b, 2)).abs() < 1e-5 * hm.amax().max(1.0));
            }
        }
    }

    #[test]
    fn kernel_values_and_linearized_problem() {
        let n = 7;
        let u = Bubble::standard(n).unwrap();
        let o = HalfSpacePoint::origin(n);
        assert_eq!(u.kernel_j(n, &o), 2.5);
        assert_eq!(u.kernel_j(1, &o), 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let y = random_point(&mut rng, n, false);
            let zb = random_point(&mut rng, n, true).z;
            for b in 1..=n {
                let scale = u.kernel_j_gradient(b, &y).iter().fold(1e-300, |m: f64, x| m.max(x.abs()));
                assert!(u.kernel_j_laplacian(b, &y).abs() <= 1e-10 * scale.max(1.0));
                assert!(u.kernel_boundary_residual(b, &zb).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn cutoff_and_transplant() {
        let c = CutOff::default();
        assert_eq!(c.value(0.3), 1.0);
        assert_eq!(c.value(1.2), 0.0);
        for i in 0..=100 {
            let v = c.value(i as f64 / 100.0);
            assert!((0.0..=1.0).contains(&v));
        }
        let (v, d, _) = c.profile(0.75);
        assert!((v - 0.5).abs() < 1e-15 && d < 0.0);
        let y = HalfSpacePoint::new(vec![0.1, 0.0, 0.0, 0.0, 0.0, 0.0], 0.2).unwrap();
        let w = transplant_w(0.05, &c, &y).unwrap();
        assert_eq!(w, Bubble::new(7, 0.05).unwrap().value(&y));
        let far = HalfSpacePoint::new(vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0], 0.2).unwrap();
        assert_eq!(transplant_w(0.05, &c, &far).unwrap(), 0.0);
        assert_eq!(transplant_w(0.01, &c, &HalfSpacePoint::origin(7)).unwrap(), 0.01f64.powf(-2.5));
        assert!(c.check_scale(0.2).is_err());
        assert!(c.check_scale(0.1).is_ok());
    }
}
