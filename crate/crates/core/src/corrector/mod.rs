//! The corrector `v_q` through the ansatz `v(z, t) = (h_ij z_i z_j) w(|z|, t)`.
//!
//! Because `h` is trace-free, `P(z) = z^T h z` is a harmonic quadratic and the
//! half-space problem `-Delta v = 2 t h_ij d_ij U`, `d_t v + n U^{2/(n-2)} v = 0`
//! collapses to the `h`-independent problem
//!
//! ```text
//! -(w_rr + (n+2)/r w_r + w_tt) = 2n(n-2) t ((1+t)^2 + r^2)^{-(n+2)/2}
//! w_t + n w / (1 + r^2) = 0   at t = 0,   w_r = 0 at r = 0,   w = 0 far out.
//! ```

pub mod checks;
pub mod grid;
mod interp;

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;
use serde::Serialize;

use crate::bubble::HalfSpacePoint;
use crate::error::{Error, Result};
use crate::form::TracelessSymmetricForm;
pub use grid::{Axis, CorrectorGrid, GridSpec};
pub use interp::ProfileJet;

/// Right-hand side of the reduced problem.
pub fn reduced_source(n: usize, r: f64, t: f64) -> f64 {
    let nf = n as f64;
    let s = (1.0 + t).powi(2) + r * r;
    2.0 * nf * (nf - 2.0) * t * s.powf(-(nf + 2.0) / 2.0)
}

/// Solved profile `w` on the nodes of a graded grid, far-field zeros included.
#[derive(Debug, Clone)]
pub struct CorrectorProfile {
    pub n: usize,
    pub grid: CorrectorGrid,
    /// Row-major `(i, j) -> i * (N_t + 1) + j`, `i` along `r`.
    pub w: Vec<f64>,
    /// Multiplier applied to the source before solving.
    pub source_scale: f64,
    pub residual: f64,
    pub refinement_steps: usize,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveDiagnostics {
    pub n: usize,
    pub nr: usize,
    pub nt: usize,
    pub unknowns: usize,
    pub first_spacing_r: f64,
    pub last_spacing_r: f64,
    pub residual: f64,
    pub refinement_steps: usize,
    pub warnings: Vec<String>,
}

struct System {
    rows: usize,
    triplets: Vec<Triplet<usize, usize, f64>>,
    rhs: Vec<f64>,
}

impl System {
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.rows];
        for t in &self.triplets {
            y[t.row] += t.val * x[t.col];
        }
        y
    }
}

/// Three-point weights `(left, centre, right)` for the first and second
/// derivative on a nonuniform stencil.
fn stencil(hm: f64, hp: f64) -> ([f64; 3], [f64; 3]) {
    let sum = hm + hp;
    let d1 = [-hp / (hm * sum), (hp - hm) / (hm * hp), hm / (hp * sum)];
    let d2 = [2.0 / (hm * sum), -2.0 / (hm * hp), 2.0 / (hp * sum)];
    (d1, d2)
}

fn assemble(n: usize, grid: &CorrectorGrid, scale: f64) -> System {
    let nr = grid.r.intervals;
    let nt = grid.t.intervals;
    let nf = n as f64;
    let idx = |i: usize, j: usize| i * nt + j;
    let mut triplets = Vec::with_capacity(5 * nr * nt);
    let mut rhs = vec![0.0; nr * nt];
    for i in 0..nr {
        let r = grid.r.nodes[i];
        for j in 0..nt {
            let t = grid.t.nodes[j];
            let row = idx(i, j);
            // Coefficients of the operator L = d_rr + (n+2)/r d_r + d_tt; the
            // matrix stores -L.
            let mut push = |ii: usize, jj: usize, c: f64| {
                if ii < nr && jj < nt {
                    triplets.push(Triplet::new(row, idx(ii, jj), -c));
                }
            };
            if i == 0 {
                let h = grid.r.nodes[1];
                let c = (nf + 3.0) * 2.0 / (h * h);
                push(0, j, -c);
                push(1, j, c);
            } else {
                let (d1, d2) = stencil(r - grid.r.nodes[i - 1], grid.r.nodes[i + 1] - r);
                let k = (nf + 2.0) / r;
                push(i - 1, j, d2[0] + k * d1[0]);
                push(i, j, d2[1] + k * d1[1]);
                push(i + 1, j, d2[2] + k * d1[2]);
            }
            if j == 0 {
                // Ghost node from the Robin condition: w_{-1} = w_1 + 2 h beta w_0.
                let h = grid.t.nodes[1];
                let beta = nf / (1.0 + r * r);
                push(i, 0, (-2.0 + 2.0 * h * beta) / (h * h));
                push(i, 1, 2.0 / (h * h));
            } else {
                let (_, d2) = stencil(t - grid.t.nodes[j - 1], grid.t.nodes[j + 1] - t);
                push(i, j - 1, d2[0]);
                push(i, j, d2[1]);
                push(i, j + 1, d2[2]);
            }
            rhs[row] = scale * reduced_source(n, r, t);
        }
    }
    System { rows: nr * nt, triplets, rhs }
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Solves the reduced problem on `grid`, with the source multiplied by
/// `source_scale`.
pub fn solve_on_grid(n: usize, grid: &CorrectorGrid, source_scale: f64) -> Result<CorrectorProfile> {
    if n < 5 {
        return Err(Error::InvalidArgument(format!("corrector needs n >= 5, got {n}")));
    }
    let mut warnings = Vec::new();
    if n < 7 {
        warnings.push(format!("n = {n} is below the n >= 7 regime"));
    }
    let h0 = grid.r.first_spacing().max(grid.t.first_spacing());
    if h0 > 0.05 {
        warnings.push(format!(
            "origin spacing {h0:.4} exceeds 0.05; estimated O(h^2) discretization error ~ {:.1e}",
            h0 * h0
        ));
    }
    if grid.r.length < 20.0 || grid.t.length < 20.0 {
        warnings.push("truncation radius below 20".into());
    }

    // Sequential kernels keep the factorization bitwise reproducible.
    faer::set_global_parallelism(faer::Par::Seq);
    let sys = assemble(n, grid, source_scale);
    let a = SparseColMat::<usize, f64>::try_new_from_triplets(sys.rows, sys.rows, &sys.triplets)
        .map_err(|e| Error::CorrectorSolve(format!("matrix assembly: {e:?}")))?;
    let lu = a.sp_lu().map_err(|e| Error::CorrectorSolve(format!("sparse LU: {e:?}")))?;

    let solve = |b: &[f64]| -> Vec<f64> {
        let rhs = Mat::from_fn(b.len(), 1, |i, _| b[i]);
        let x = lu.solve(&rhs);
        (0..b.len()).map(|i| x[(i, 0)]).collect()
    };
    let fscale = max_abs(&sys.rhs).max(f64::MIN_POSITIVE);
    let mut x = solve(&sys.rhs);
    let residual_of = |x: &[f64]| -> Vec<f64> { sys.apply(x).iter().zip(&sys.rhs).map(|(ax, b)| b - ax).collect() };
    let mut res = residual_of(&x);
    let mut rel = max_abs(&res) / fscale;
    let mut steps = 0;
    while rel > 1e-13 && steps < 5 {
        let dx = solve(&res);
        x.iter_mut().zip(&dx).for_each(|(a, b)| *a += b);
        res = residual_of(&x);
        rel = max_abs(&res) / fscale;
        steps += 1;
    }
    if !rel.is_finite() || rel > 1e-10 {
        return Err(Error::CorrectorSolve(format!(
            "relative residual {rel:e} after {steps} refinement steps ({} unknowns)",
            sys.rows
        )));
    }

    let (nr1, nt1) = grid.shape();
    let mut w = vec![0.0; nr1 * nt1];
    for i in 0..grid.r.intervals {
        for j in 0..grid.t.intervals {
            w[i * nt1 + j] = x[i * grid.t.intervals + j];
        }
    }
    Ok(CorrectorProfile {
        n,
        grid: grid.clone(),
        w,
        source_scale,
        residual: rel,
        refinement_steps: steps,
        warnings,
    })
}

/// Validates the grid parameters and solves with the unit source.
pub fn solve_corrector(n: usize, spec: &GridSpec) -> Result<CorrectorProfile> {
    let grid = CorrectorGrid::from_spec(spec)?;
    solve_on_grid(n, &grid, 1.0)
}

impl CorrectorProfile {
    pub fn node_value(&self, i: usize, j: usize) -> f64 {
        self.w[i * (self.grid.t.intervals + 1) + j]
    }

    pub fn diagnostics(&self) -> SolveDiagnostics {
        SolveDiagnostics {
            n: self.n,
            nr: self.grid.r.intervals,
            nt: self.grid.t.intervals,
            unknowns: self.grid.unknowns(),
            first_spacing_r: self.grid.r.first_spacing(),
            last_spacing_r: self.grid.r.last_spacing(),
            residual: self.residual,
            refinement_steps: self.refinement_steps,
            warnings: self.warnings.clone(),
        }
    }

    fn check_domain(&self, r: f64, t: f64) -> Result<()> {
        if !(r >= 0.0 && r <= self.grid.r.length && t >= 0.0 && t <= self.grid.t.length) {
            return Err(Error::OutsideDomain { r, t });
        }
        Ok(())
    }

    /// Bilinear interpolation in physical coordinates.
    pub fn bilinear(&self, r: f64, t: f64) -> Result<f64> {
        self.check_domain(r, t)?;
        let (i, a) = locate(&self.grid.r, r);
        let (j, b) = locate(&self.grid.t, t);
        let f = |ii, jj| self.node_value(ii, jj);
        Ok((1.0 - a) * (1.0 - b) * f(i, j) + a * (1.0 - b) * f(i + 1, j) + (1.0 - a) * b * f(i, j + 1) + a * b * f(i + 1, j + 1))
    }

    /// Cubic Lagrange interpolation (in the grid's `xi` variables) with first
    /// and second derivatives.
    pub fn cubic(&self, r: f64, t: f64) -> Result<ProfileJet> {
        self.check_domain(r, t)?;
        Ok(interp::cubic_jet(self, r, t))
    }

    /// Nodes as `(r, t, w)` rows.
    pub fn table(&self) -> Vec<(f64, f64, f64)> {
        let mut out = Vec::with_capacity(self.w.len());
        for (i, r) in self.grid.r.nodes.iter().enumerate() {
            for (j, t) in self.grid.t.nodes.iter().enumerate() {
                out.push((*r, *t, self.node_value(i, j)));
            }
        }
        out
    }
}

fn locate(axis: &Axis, x: f64) -> (usize, f64) {
    let k = axis.nodes.partition_point(|v| *v <= x).clamp(1, axis.intervals) - 1;
    let (a, b) = (axis.nodes[k], axis.nodes[k + 1]);
    (k, (x - a) / (b - a))
}

/// `v(z, t) = (z^T h z) w(|z|, t)` with bilinear interpolation of `w`.
pub fn assemble_v(h: &TracelessSymmetricForm, w: &CorrectorProfile, y: &HalfSpacePoint) -> Result<f64> {
    if h.n() != w.n || y.z.len() + 1 != w.n {
        return Err(Error::InvalidArgument("dimension mismatch between form, profile and point".into()));
    }
    let value = w.bilinear(y.z_norm(), y.t)?;
    Ok(h.quadratic(&y.z) * value)
}

/// `v`, its gradient and Hessian in the full coordinates `(z, t)`.
#[derive(Debug, Clone)]
pub struct FieldJet {
    pub value: f64,
    pub gradient: Vec<f64>,
    pub hessian: nalgebra::DMatrix<f64>,
}

/// The pair `(h, w)` representing `v_q`.
#[derive(Debug, Clone, Copy)]
pub struct CorrectorField<'a> {
    pub h: &'a TracelessSymmetricForm,
    pub profile: &'a CorrectorProfile,
}

impl<'a> CorrectorField<'a> {
    pub fn new(h: &'a TracelessSymmetricForm, profile: &'a CorrectorProfile) -> Result<Self> {
        if h.n() != profile.n {
            return Err(Error::InvalidArgument(format!("form has n = {}, profile n = {}", h.n(), profile.n)));
        }
        Ok(Self { h, profile })
    }

    pub fn value(&self, y: &HalfSpacePoint) -> Result<f64> {
        assemble_v(self.h, self.profile, y)
    }

    /// Value with cubic interpolation of `w`.
    pub fn value_cubic(&self, y: &HalfSpacePoint) -> Result<f64> {
        Ok(self.h.quadratic(&y.z) * self.profile.cubic(y.z_norm(), y.t)?.w)
    }

    /// Closed-form chain rule on `P(z) w(|z|, t)` using the cubic jet of `w`.
    pub fn jet(&self, y: &HalfSpacePoint) -> Result<FieldJet> {
        let n = self.profile.n;
        let d = n - 1;
        let z = &y.z;
        let r = y.z_norm();
        let pj = self.profile.cubic(r, y.t)?;
        let p = self.h.quadratic(z);
        let hz = self.h.apply(z);
        // Radial profile W(z, t) = w(|z|, t) and its derivatives.
        let (wr_over_r, use_limit) = if r < 1e-9 { (pj.w_rr, true) } else { (pj.w_r / r, false) };
        let mut gw = vec![0.0; n];
        let mut hw = nalgebra::DMatrix::zeros(n, n);
        for a in 0..d {
            gw[a] = wr_over_r * z[a];
            for b in 0..d {
                let delta = if a == b { 1.0 } else { 0.0 };
                hw[(a, b)] = if use_limit {
                    pj.w_rr * delta
                } else {
                    pj.w_rr * z[a] * z[b] / (r * r) + wr_over_r * (delta - z[a] * z[b] / (r * r))
                };
            }
            let wrt_over_r = if use_limit { 0.0 } else { pj.w_rt / r };
            hw[(a, d)] = wrt_over_r * z[a];
            hw[(d, a)] = hw[(a, d)];
        }
        gw[d] = pj.w_t;
        hw[(d, d)] = pj.w_tt;

        let mut gp = vec![0.0; n];
        for a in 0..d {
            gp[a] = 2.0 * hz[a];
        }
        let gradient: Vec<f64> = (0..n).map(|a| gp[a] * pj.w + p * gw[a]).collect();
        let hessian = nalgebra::DMatrix::from_fn(n, n, |a, b| {
            let hp = if a < d && b < d { 2.0 * self.h.get(a, b) } else { 0.0 };
            hp * pj.w + gp[a] * gw[b] + gp[b] * gw[a] + p * hw[(a, b)]
        });
        Ok(FieldJet { value: p * pj.w, gradient, hessian })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_profile() -> CorrectorProfile {
        let spec = GridSpec { r_max: 20.0, t_max: 20.0, dr: 0.1, dt: 0.1, grading: 3.0 };
        solve_corrector(7, &spec).unwrap()
    }

    #[test]
    fn solves_with_small_residual() {
        let p = small_profile();
        assert!(p.residual <= 1e-10);
        assert!(p.w.iter().all(|x| x.is_finite()));
        assert!(p.warnings.iter().any(|w| w.contains("spacing")));
        assert_eq!(p.node_value(p.grid.r.intervals, 3), 0.0);
    }

    #[test]
    fn assemble_v_trivial_cases() {
        let p = small_profile();
        let h = TracelessSymmetricForm::diagonal(7, &[1.0, -1.0]).unwrap();
        let zero = TracelessSymmetricForm::zero(7);
        let y = HalfSpacePoint::new(vec![0.3, 0.1, 0.0, 0.2, 0.0, 0.0], 0.7).unwrap();
        assert_eq!(assemble_v(&zero, &p, &y).unwrap(), 0.0);
        assert_eq!(assemble_v(&h, &p, &HalfSpacePoint::new(vec![0.0; 6], 1.3).unwrap()).unwrap(), 0.0);
        let v = assemble_v(&h, &p, &y).unwrap();
        assert_eq!(assemble_v(&h.scaled(2.0), &p, &y).unwrap(), 2.0 * v);
        let e1 = HalfSpacePoint::new(vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0], 0.5).unwrap();
        let e2 = HalfSpacePoint::new(vec![0.0, 1.0, 0.0, 0.0, 0.0, 0.0], 0.5).unwrap();
        let w1 = p.bilinear(1.0, 0.5).unwrap();
        assert_eq!(assemble_v(&h, &p, &e1).unwrap(), w1);
        assert_eq!(assemble_v(&h, &p, &e2).unwrap(), -w1);
        let out = HalfSpacePoint::new(vec![25.0, 0.0, 0.0, 0.0, 0.0, 0.0], 0.5).unwrap();
        assert!(matches!(assemble_v(&h, &p, &out), Err(Error::OutsideDomain { .. })));
    }

    #[test]
    fn interpolants_reproduce_nodes() {
        let p = small_profile();
        for &(i, j) in &[(0, 0), (3, 5), (10, 0), (17, 22)] {
            let (r, t) = (p.grid.r.nodes[i], p.grid.t.nodes[j]);
            let v = p.node_value(i, j);
            assert!((p.bilinear(r, t).unwrap() - v).abs() < 1e-14);
            assert!((p.cubic(r, t).unwrap().w - v).abs() < 1e-12 * v.abs().max(1e-300));
        }
    }

    #[test]
    fn robin_defect_of_interpolant_is_second_order() {
        // The one-sided cubic w_t at t = 0 is not the ghost-node derivative,
        // so the condition holds only up to O(h^2) on the interpolant.
        let defect = |dr: f64| {
            let spec = GridSpec { r_max: 20.0, t_max: 20.0, dr, dt: dr, grading: 3.0 };
            let p = solve_corrector(7, &spec).unwrap();
            [0.0, 0.5, 1.5].iter().map(|&r| {
                let j = p.cubic(r, 0.0).unwrap();
                (j.w_t + 7.0 / (1.0 + r * r) * j.w).abs() / j.w.abs()
            }).fold(0.0, f64::max)
        };
        let (a, b) = (defect(0.1), defect(0.05));
        assert!(b < 0.5 && a / b > 3.0, "{a} {b}");
    }

    #[test]
    fn rejects_low_dimension() {
        let grid = CorrectorGrid::from_spec(&GridSpec { r_max: 20.0, t_max: 20.0, dr: 0.5, dt: 0.5, grading: 0.0 }).unwrap();
        assert!(solve_on_grid(4, &grid, 1.0).is_err());
    }
}
