//! Second-order Fermi-coordinate expansions of the volume factor and the
//! inverse metric around a boundary point, and the Laplace-Beltrami operator
//! built from them.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::bubble::HalfSpacePoint;
use crate::error::{Error, Result};
use crate::form::TracelessSymmetricForm;

/// Curvature data at the base point. Tensors over tangential indices are
/// stored flat and row-major; all default to zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FermiMetricJet {
    pub h: TracelessSymmetricForm,
    /// `dh[(i*d + j)*d + k] = d h_ij / d z_k`.
    pub dh: Vec<f64>,
    /// `rbar[((i*d + k)*d + j)*d + l] = Rbar_ikjl`.
    pub rbar: Vec<f64>,
    /// `R_injn`.
    pub r_injn: DMatrix<f64>,
    pub ric_nn: f64,
    pub a0: f64,
}

/// Volume factor and inverse metric at a point, with first derivatives.
#[derive(Debug, Clone)]
pub struct MetricAt {
    pub volume: f64,
    pub ginv: DMatrix<f64>,
    /// `d_a ln |g|^{1/2}`.
    pub dlog_volume: Vec<f64>,
    /// `sum_a d_a g^{ab}`.
    pub divergence: Vec<f64>,
}

impl FermiMetricJet {
    /// Only the second fundamental form is nonzero.
    pub fn from_form(h: TracelessSymmetricForm) -> Self {
        let d = h.dim();
        Self { dh: vec![0.0; d * d * d], rbar: vec![0.0; d * d * d * d], r_injn: DMatrix::zeros(d, d), ric_nn: 0.0, a0: 0.0, h }
    }

    pub fn flat(n: usize) -> Self {
        Self::from_form(TracelessSymmetricForm::zero(n))
    }

    pub fn n(&self) -> usize {
        self.h.n()
    }

    fn d(&self) -> usize {
        self.h.dim()
    }

    /// Checks array sizes and the pair (anti)symmetries of `Rbar`.
    pub fn validate(&self) -> Result<()> {
        let d = self.d();
        if self.dh.len() != d * d * d || self.rbar.len() != d.pow(4) || self.r_injn.shape() != (d, d) {
            return Err(Error::InvalidArgument("metric jet arrays have the wrong size".into()));
        }
        let tol = 1e-12 * self.rbar.iter().fold(1.0f64, |m, x| m.max(x.abs()));
        for i in 0..d {
            for k in 0..d {
                for j in 0..d {
                    for l in 0..d {
                        let v = self.rb(i, k, j, l);
                        if (v + self.rb(k, i, j, l)).abs() > tol
                            || (v + self.rb(i, k, l, j)).abs() > tol
                            || (v - self.rb(j, l, i, k)).abs() > tol
                        {
                            return Err(Error::InvalidArgument(format!("Rbar violates curvature symmetries at ({i},{k},{j},{l})")));
                        }
                    }
                }
            }
        }
        if (&self.r_injn - self.r_injn.transpose()).amax() > 1e-12 * self.r_injn.amax().max(1.0) {
            return Err(Error::InvalidArgument("R_injn must be symmetric".into()));
        }
        Ok(())
    }

    fn rb(&self, i: usize, k: usize, j: usize, l: usize) -> f64 {
        let d = self.d();
        self.rbar[((i * d + k) * d + j) * d + l]
    }

    fn dh_at(&self, i: usize, j: usize, k: usize) -> f64 {
        let d = self.d();
        self.dh[(i * d + j) * d + k]
    }

    /// `Rbar_ij = Rbar_ikjk`.
    pub fn rbar_ricci(&self) -> DMatrix<f64> {
        let d = self.d();
        DMatrix::from_fn(d, d, |i, j| (0..d).map(|k| self.rb(i, k, j, k)).sum())
    }

    /// Sets `Rbar_ikjl = kappa (delta_ij delta_kl - delta_il delta_kj)` on the
    /// first `k` tangential directions (a constant-curvature block).
    pub fn with_constant_curvature_block(mut self, kappa: f64, k: usize) -> Self {
        let d = self.d();
        let kk = k.min(d);
        for i in 0..kk {
            for kx in 0..kk {
                for j in 0..kk {
                    for l in 0..kk {
                        let dd = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
                        self.rbar[((i * d + kx) * d + j) * d + l] = kappa * (dd(i, j) * dd(kx, l) - dd(i, l) * dd(kx, j));
                    }
                }
            }
        }
        self
    }

    /// Number of leading tangential directions touched by any tensor.
    pub fn active_dims(&self) -> usize {
        let d = self.d();
        let mut active = 0;
        let mut mark = |idx: &[usize]| {
            active = active.max(idx.iter().max().map_or(0, |m| m + 1));
        };
        for i in 0..d {
            for j in 0..d {
                if self.h.get(i, j) != 0.0 || self.r_injn[(i, j)] != 0.0 {
                    mark(&[i, j]);
                }
                for k in 0..d {
                    if self.dh_at(i, j, k) != 0.0 {
                        mark(&[i, j, k]);
                    }
                    for l in 0..d {
                        if self.rb(i, k, j, l) != 0.0 {
                            mark(&[i, j, k, l]);
                        }
                    }
                }
            }
        }
        active
    }

    pub fn is_flat(&self) -> bool {
        self.h.is_zero()
            && self.dh.iter().all(|x| *x == 0.0)
            && self.rbar.iter().all(|x| *x == 0.0)
            && self.r_injn.iter().all(|x| *x == 0.0)
            && self.ric_nn == 0.0
    }
}

/// Truncated expansions (no remainder terms) at `y`; `|y| <= 1` is enforced.
pub fn metric_jet_eval(jet: &FermiMetricJet, y: &HalfSpacePoint) -> Result<MetricAt> {
    let n = jet.n();
    let d = n - 1;
    if y.z.len() != d {
        return Err(Error::InvalidArgument("point dimension does not match the jet".into()));
    }
    if y.norm() > 1.0 {
        return Err(Error::Precondition(format!("metric expansion used at |y| = {} > 1", y.norm())));
    }
    let z = &y.z;
    let t = y.t;
    let h = jet.h.entries();
    let h2 = h * h;
    let ric = jet.rbar_ricci();
    let norm2 = jet.h.norm_sq();

    let mut quad = 0.0;
    for i in 0..d {
        for j in 0..d {
            quad += ric[(i, j)] * z[i] * z[j];
        }
    }
    let volume = 1.0 - 0.5 * (norm2 + jet.ric_nn) * t * t - quad / 6.0;
    let mut dvol = vec![0.0; n];
    for c in 0..d {
        dvol[c] = -(0..d).map(|j| ric[(c, j)] * z[j]).sum::<f64>() / 3.0;
    }
    dvol[d] = -(norm2 + jet.ric_nn) * t;

    let mut ginv = DMatrix::identity(n, n);
    let mut divergence = vec![0.0; n];
    for i in 0..d {
        for j in 0..d {
            let mut curv = 0.0;
            let mut dz = 0.0;
            for k in 0..d {
                dz += jet.dh_at(i, j, k) * z[k];
                for l in 0..d {
                    curv += jet.rb(i, k, j, l) * z[k] * z[l];
                }
            }
            ginv[(i, j)] += 2.0 * h[(i, j)] * t + curv / 3.0 + 2.0 * dz * t + (jet.r_injn[(i, j)] + 3.0 * h2[(i, j)]) * t * t;
            // d/dz_i of the (i, j) entry, summed over i below.
            let mut dcurv = 0.0;
            for l in 0..d {
                dcurv += (jet.rb(i, i, j, l) + jet.rb(i, l, j, i)) * z[l];
            }
            divergence[j] += dcurv / 3.0 + 2.0 * jet.dh_at(i, j, i) * t;
        }
    }
    let dlog_volume = dvol.iter().map(|v| v / volume).collect();
    Ok(MetricAt { volume, ginv, dlog_volume, divergence })
}

/// `Delta_g u` from the Euclidean Laplacian, gradient and Hessian of `u`:
/// `Delta_euc u + (g^{ab} - delta) d_ab u + (d_a g^{ab} + g^{ab} d_a ln mu) d_b u`.
pub fn laplace_beltrami(m: &MetricAt, euclidean_laplacian: f64, gradient: &[f64], hessian: &DMatrix<f64>) -> f64 {
    let n = gradient.len();
    let mut out = euclidean_laplacian;
    for a in 0..n {
        for b in 0..n {
            let delta = if a == b { 1.0 } else { 0.0 };
            out += (m.ginv[(a, b)] - delta) * hessian[(a, b)];
        }
    }
    for b in 0..n {
        let drift = m.divergence[b] + (0..n).map(|a| m.ginv[(a, b)] * m.dlog_volume[a]).sum::<f64>();
        out += drift * gradient[b];
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn base_point_is_euclidean() {
        let h = TracelessSymmetricForm::diagonal(7, &[1.0, -1.0]).unwrap();
        let jet = FermiMetricJet::from_form(h).with_constant_curvature_block(0.3, 3);
        jet.validate().unwrap();
        let m = metric_jet_eval(&jet, &HalfSpacePoint::origin(7)).unwrap();
        assert_eq!(m.volume, 1.0);
        assert_eq!(m.ginv, DMatrix::identity(7, 7));
    }

    #[test]
    fn h_only_along_normal() {
        let h = TracelessSymmetricForm::diagonal(7, &[1.0, -1.0]).unwrap();
        let jet = FermiMetricJet::from_form(h.clone());
        let t = 0.3;
        let m = metric_jet_eval(&jet, &HalfSpacePoint::new(vec![0.0; 6], t).unwrap()).unwrap();
        let hm = h.entries();
        let expect = DMatrix::<f64>::identity(6, 6) + hm * (2.0 * t) + hm * hm * (3.0 * t * t);
        assert!((m.ginv.view((0, 0), (6, 6)) - expect).amax() < 1e-15);
        assert_eq!(m.ginv[(6, 6)], 1.0);
        assert_eq!(m.ginv[(0, 6)], 0.0);
    }

    #[test]
    fn ric_only_volume() {
        let mut jet = FermiMetricJet::flat(7);
        jet.ric_nn = 0.8;
        let m = metric_jet_eval(&jet, &HalfSpacePoint::new(vec![0.1; 6], 0.5).unwrap()).unwrap();
        assert!((m.volume - (1.0 - 0.5 * 0.8 * 0.25)).abs() < 1e-15);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let mut jet = FermiMetricJet::from_form(TracelessSymmetricForm::diagonal(5, &[0.5, 0.2, -0.7]).unwrap())
            .with_constant_curvature_block(0.4, 3);
        let idx = |i: usize, j: usize, k: usize| (i * 4 + j) * 4 + k;
        jet.dh[idx(0, 1, 2)] = 0.3;
        jet.dh[idx(1, 0, 2)] = 0.3;
        jet.dh[idx(1, 1, 1)] = -0.2;
        jet.ric_nn = 0.1;
        jet.validate().unwrap();
        let y = [0.1, -0.2, 0.15, 0.05, 0.3];
        let at = |y: &[f64]| metric_jet_eval(&jet, &HalfSpacePoint::from_coords(y).unwrap()).unwrap();
        let m = at(&y);
        let e = 1e-6;
        let mut div = [0.0; 5];
        for a in 0..5 {
            let (mut p, mut q) = (y, y);
            p[a] += e;
            q[a] -= e;
            let (mp, mq) = (at(&p), at(&q));
            let dl = (mp.volume.ln() - mq.volume.ln()) / (2.0 * e);
            assert!((dl - m.dlog_volume[a]).abs() < 1e-8);
            for b in 0..5 {
                div[b] += (mp.ginv[(a, b)] - mq.ginv[(a, b)]) / (2.0 * e);
            }
        }
        for b in 0..5 {
            assert!((div[b] - m.divergence[b]).abs() < 1e-8, "{b}: {} vs {}", div[b], m.divergence[b]);
        }
        assert_eq!(jet.active_dims(), 3);
    }

    #[test]
    fn enforces_unit_ball() {
        let jet = FermiMetricJet::flat(7);
        assert!(metric_jet_eval(&jet, &HalfSpacePoint::new(vec![0.0; 6], 1.5).unwrap()).is_err());
    }
}
