//! Verification of the solved corrector: an independent n-dimensional
//! finite-difference residual, grid convergence, decay, orthogonality and the
//! sign of the Dirichlet pairing.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{reduced_source, solve_on_grid, CorrectorField, CorrectorGrid, CorrectorProfile, GridSpec};
use crate::bubble::{Bubble, HalfSpacePoint};
use crate::error::Result;
use crate::form::TracelessSymmetricForm;
use crate::special::sphere::{self, angular_moment_quadratic};

/// `2 t h_ij d_ij U` at `y`, the source of the full corrector equation.
pub fn full_source(h: &TracelessSymmetricForm, y: &HalfSpacePoint) -> f64 {
    let u = Bubble::standard(h.n()).expect("n >= 3");
    let hess = u.hessian(y);
    let d = h.dim();
    let mut s = 0.0;
    for i in 0..d {
        for j in 0..d {
            s += h.get(i, j) * hess[(i, j)];
        }
    }
    2.0 * y.t * s
}

#[derive(Debug, Clone, Serialize)]
pub struct FdOracleReport {
    pub points: usize,
    pub step: f64,
    pub rel_residual: f64,
    pub max_abs_residual: f64,
}

/// Samples `points` interior points with `|z| <= 2.5`, `t in [0.25, 2.5]`
/// and compares `-Delta v` from the `2n`-point stencil of step `step` against
/// `2 t h_ij d_ij U`. The relative residual is `||res||_2 / ||src||_2`.
pub fn fd_oracle(field: &CorrectorField, points: usize, step: f64, seed: u64) -> Result<FdOracleReport> {
    let n = field.profile.n;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut res_sq, mut src_sq, mut max_abs) = (0.0, 0.0, 0.0f64);
    for _ in 0..points {
        let dir = sphere::sample_sphere(n - 1, &mut rng);
        let rad = 2.5 * rng.random::<f64>();
        let t = rng.random_range(0.25..2.5);
        let y = HalfSpacePoint::new(dir.iter().map(|x| x * rad).collect(), t)?;
        let center = field.value_cubic(&y)?;
        let mut lap = 0.0;
        let coords = y.coords();
        for a in 0..n {
            let mut plus = coords.clone();
            let mut minus = coords.clone();
            plus[a] += step;
            minus[a] -= step;
            let vp = field.value_cubic(&HalfSpacePoint::from_coords(&plus)?)?;
            let vm = field.value_cubic(&HalfSpacePoint::from_coords(&minus)?)?;
            lap += (vp - 2.0 * center + vm) / (step * step);
        }
        let src = full_source(field.h, &y);
        let res = -lap - src;
        res_sq += res * res;
        src_sq += src * src;
        max_abs = max_abs.max(res.abs());
    }
    Ok(FdOracleReport { points, step, rel_residual: (res_sq / src_sq).sqrt(), max_abs_residual: max_abs })
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceReport {
    pub intervals: [usize; 3],
    /// `||w_N - w_2N||` and `||w_2N - w_4N||` (RMS over coarse nodes).
    pub diff_coarse: f64,
    pub diff_fine: f64,
    pub ratio: f64,
    pub ratio_max_norm: f64,
}

/// Solves on `grid`, its refinement and double refinement, and compares
/// successive differences on the coarse nodes.
pub fn grid_convergence(n: usize, grid: &CorrectorGrid) -> Result<ConvergenceReport> {
    let g1 = grid.clone();
    let g2 = g1.refined();
    let g4 = g2.refined();
    let sols: Vec<CorrectorProfile> = [&g1, &g2, &g4]
        .iter()
        .map(|g| solve_on_grid(n, g, 1.0))
        .collect::<Result<_>>()?;
    let (nr, nt) = (g1.r.intervals, g1.t.intervals);
    let (mut s1, mut s2, mut m1, mut m2) = (0.0, 0.0, 0.0f64, 0.0f64);
    for i in 0..=nr {
        for j in 0..=nt {
            let a = sols[0].node_value(i, j);
            let b = sols[1].node_value(2 * i, 2 * j);
            let c = sols[2].node_value(4 * i, 4 * j);
            s1 += (a - b).powi(2);
            s2 += (b - c).powi(2);
            m1 = m1.max((a - b).abs());
            m2 = m2.max((b - c).abs());
        }
    }
    let count = ((nr + 1) * (nt + 1)) as f64;
    let (d1, d2) = ((s1 / count).sqrt(), (s2 / count).sqrt());
    Ok(ConvergenceReport {
        intervals: [nr, 2 * nr, 4 * nr],
        diff_coarse: d1,
        diff_fine: d2,
        ratio: d1 / d2,
        ratio_max_norm: m1 / m2,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct DecayPoint {
    pub radius: f64,
    /// `max |v| (1 + |y|)^{n-3}` over the quarter arc `|y| = R/2`, for a form
    /// with unit operator norm (so `|P(z)| <= |z|^2`).
    pub weighted_max: f64,
}

/// `|v| (1+|y|)^{n-3}` on the arc `|y| = R/2` for a sequence of truncation radii.
pub fn decay_check(n: usize, radii: &[f64], dr: f64, grading: f64) -> Result<Vec<DecayPoint>> {
    radii
        .iter()
        .map(|&radius| {
            let spec = GridSpec { r_max: radius, t_max: radius, dr, dt: dr, grading };
            let grid = CorrectorGrid::from_spec(&spec)?;
            let prof = solve_on_grid(n, &grid, 1.0)?;
            let rho = radius / 2.0;
            let mut best = 0.0f64;
            for k in 0..=200 {
                let ang = std::f64::consts::FRAC_PI_2 * k as f64 / 200.0;
                let (r, t) = (rho * ang.cos(), rho * ang.sin());
                let w = prof.cubic(r, t)?.w;
                best = best.max((r * r * w).abs() * (1.0 + rho).powi(n as i32 - 3));
            }
            Ok(DecayPoint { radius, weighted_max: best })
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct OrthogonalityReport {
    /// `int_{S^{n-2}} theta^T h theta`.
    pub angular_quadratic: f64,
    /// `int_{S^{n-2}} (theta^T h theta) theta_b`, `b = 1..n-1`.
    pub angular_linear: Vec<f64>,
    /// `int_{t=0} U^{n/(n-2)} v dz`: angular factor times radial integral.
    pub boundary_integral: f64,
    /// `int v j_b` for `b = 1..n`.
    pub kernel_integrals: Vec<f64>,
    /// Seeded Monte Carlo mean of `theta^T h theta` under the normalized
    /// sphere measure, with its standard error.
    pub mc_mean: f64,
    pub mc_stderr: f64,
    pub mc_samples: usize,
    pub norm: f64,
    pub passed: bool,
}

/// The reduced ansatz carries a degree-2 trace-free harmonic while every
/// `j_b` and `U^{n/(n-2)}` carries degree 0 or 1; all pairings therefore
/// vanish through their angular factor, which is certified here.
pub fn check_orthogonality(field: &CorrectorField, mc_samples: usize, seed: u64) -> OrthogonalityReport {
    let h = field.h;
    let d = h.dim();
    let norm = h.norm_sq().sqrt();
    let angular_quadratic = sphere::angular_quadratic(h);
    let angular_linear: Vec<f64> = (0..d).map(|b| sphere::angular_quadratic_times_linear(h, b)).collect();

    // Radial parts are finite; the products are the full integrals.
    let prof = field.profile;
    let weights_r = prof.grid.r.trapezoid_weights();
    let radial_boundary: f64 = prof
        .grid
        .r
        .nodes
        .iter()
        .enumerate()
        .map(|(i, r)| weights_r[i] * r.powi(d as i32 + 1) * prof.node_value(i, 0) * (1.0 + r * r).powf(-(d as f64 + 1.0) / 2.0))
        .sum();
    let boundary_integral = angular_quadratic * radial_boundary;
    let kernel_integrals: Vec<f64> = (1..=d + 1)
        .map(|b| if b <= d { angular_linear[b - 1] } else { angular_quadratic })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mc_mean, mc_stderr) = sphere::sphere_mc_mean(d, mc_samples, &mut rng, |t| h.quadratic(t));

    let tol = 1e-10 * norm.max(1.0);
    let passed = angular_quadratic.abs() <= tol
        && angular_linear.iter().all(|x| x.abs() <= tol)
        && mc_mean.abs() <= 1e-3 * norm.max(f64::MIN_POSITIVE);
    OrthogonalityReport {
        angular_quadratic,
        angular_linear,
        boundary_integral,
        kernel_integrals,
        mc_mean,
        mc_stderr,
        mc_samples,
        norm,
        passed,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PairingReport {
    /// `M(h) int int r^{n+2} w L w`, with `L w = -f` from the equation.
    pub direct: f64,
    /// `-int |grad v|^2 + n int_{t=0} U^{2/(n-2)} v^2`.
    pub by_parts: f64,
    pub gradient_term: f64,
    pub boundary_term: f64,
    pub rel_diff: f64,
    /// The same pairing read over the boundary `t = 0` only. `Delta v = -2 t
    /// h_ij d_ij U` vanishes there, so this reading is identically zero.
    pub boundary_domain_reading: f64,
    pub angular_moment: f64,
    /// `direct / ||h||^2` (zero when `h = 0`).
    pub per_unit_norm: f64,
}

/// Radial-temporal integrals of the reduced pairing, before the angular factor.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ReducedPairing {
    pub direct: f64,
    pub gradient: f64,
    pub boundary: f64,
}

impl ReducedPairing {
    pub fn by_parts(&self) -> f64 {
        -self.gradient + self.boundary
    }

    /// Richardson extrapolation for a second-order pair of grids.
    pub fn richardson(coarse: &Self, fine: &Self) -> Self {
        let e = |c: f64, f: f64| (4.0 * f - c) / 3.0;
        Self {
            direct: e(coarse.direct, fine.direct),
            gradient: e(coarse.gradient, fine.gradient),
            boundary: e(coarse.boundary, fine.boundary),
        }
    }
}

fn derivative_along(nodes: &[f64], vals: &[f64], k: usize) -> f64 {
    let last = nodes.len() - 1;
    if k == 0 {
        let (h1, h2) = (nodes[1] - nodes[0], nodes[2] - nodes[0]);
        // Second-order one-sided three-point formula.
        let a = -(h1 + h2) / (h1 * h2);
        let b = h2 / (h1 * (h2 - h1));
        let c = -h1 / (h2 * (h2 - h1));
        a * vals[0] + b * vals[1] + c * vals[2]
    } else if k == last {
        let (h1, h2) = (nodes[last] - nodes[last - 1], nodes[last] - nodes[last - 2]);
        let a = (h1 + h2) / (h1 * h2);
        let b = -h2 / (h1 * (h2 - h1));
        let c = h1 / (h2 * (h2 - h1));
        a * vals[last] + b * vals[last - 1] + c * vals[last - 2]
    } else {
        let (hm, hp) = (nodes[k] - nodes[k - 1], nodes[k + 1] - nodes[k]);
        let s = hm + hp;
        -hp / (hm * s) * vals[k - 1] + (hp - hm) / (hm * hp) * vals[k] + hm / (hp * s) * vals[k + 1]
    }
}

/// Trapezoid (in the mapped variables) evaluation of the reduced integrals.
pub fn reduced_pairing(prof: &CorrectorProfile) -> ReducedPairing {
    let n = prof.n as f64;
    let g = &prof.grid;
    let (nr1, nt1) = g.shape();
    let wr = g.r.trapezoid_weights();
    let wt = g.t.trapezoid_weights();
    let col: Vec<Vec<f64>> = (0..nr1).map(|i| (0..nt1).map(|j| prof.node_value(i, j)).collect()).collect();
    let row: Vec<Vec<f64>> = (0..nt1).map(|j| (0..nr1).map(|i| prof.node_value(i, j)).collect()).collect();
    let (mut direct, mut gradient, mut boundary) = (0.0, 0.0, 0.0);
    for i in 0..nr1 {
        let r = g.r.nodes[i];
        let beta = n / (1.0 + r * r);
        for j in 0..nt1 {
            let t = g.t.nodes[j];
            let w = col[i][j];
            let w_r = if i == 0 { 0.0 } else { derivative_along(&g.r.nodes, &row[j], i) };
            let w_t = if j == 0 { -beta * w } else { derivative_along(&g.t.nodes, &col[i], j) };
            let weight = wr[i] * wt[j];
            direct -= weight * r.powf(n + 2.0) * w * prof.source_scale * reduced_source(prof.n, r, t);
            gradient += weight
                * (2.0 * (n + 1.0) * r.powf(n) * w * w
                    + 4.0 * r.powf(n + 1.0) * w * w_r
                    + r.powf(n + 2.0) * (w_r * w_r + w_t * w_t));
        }
        boundary += wr[i] * n * r.powf(n + 2.0) * col[i][0] * col[i][0] / (1.0 + r * r);
    }
    ReducedPairing { direct, gradient, boundary }
}

/// Assembles the pairing of a field from reduced integrals (possibly
/// extrapolated over grids).
pub fn pairing_from_reduced(h: &TracelessSymmetricForm, red: &ReducedPairing) -> PairingReport {
    let m = angular_moment_quadratic(h);
    let direct = m * red.direct;
    let gradient_term = m * red.gradient;
    let boundary_term = m * red.boundary;
    let by_parts = -gradient_term + boundary_term;
    let scale = direct.abs().max(by_parts.abs());
    let norm = h.norm_sq();
    PairingReport {
        direct,
        by_parts,
        gradient_term,
        boundary_term,
        rel_diff: if scale > 0.0 { (direct - by_parts).abs() / scale } else { 0.0 },
        boundary_domain_reading: 0.0,
        angular_moment: m,
        per_unit_norm: if norm > 0.0 { direct / norm } else { 0.0 },
    }
}

/// `int_{R^n_+} Delta v v` in reduced form on the field's own grid.
pub fn dirichlet_pairing(field: &CorrectorField) -> PairingReport {
    pairing_from_reduced(field.h, &reduced_pairing(field.profile))
}

/// Pairing from a coarse and a refined solve, extrapolated in the grid size.
pub fn dirichlet_pairing_extrapolated(h: &TracelessSymmetricForm, coarse: &CorrectorProfile, fine: &CorrectorProfile) -> PairingReport {
    let red = ReducedPairing::richardson(&reduced_pairing(coarse), &reduced_pairing(fine));
    pairing_from_reduced(h, &red)
}

#[derive(Debug, Clone, Serialize)]
pub struct UniversalityReport {
    pub scale: f64,
    pub max_rel_dev: f64,
}

/// Solves with the source multiplied by `scale` and compares with `scale`
/// times the unit-source profile.
pub fn check_universality(unit: &CorrectorProfile, scale: f64) -> Result<UniversalityReport> {
    let scaled = solve_on_grid(unit.n, &unit.grid, scale)?;
    let peak = unit.w.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let dev = unit
        .w
        .iter()
        .zip(&scaled.w)
        .fold(0.0f64, |m, (a, b)| m.max((scale * a - b).abs()));
    Ok(UniversalityReport { scale, max_rel_dev: dev / (scale.abs() * peak) })
}

#[cfg(test)]
mod tests {
    use super::super::solve_corrector;
    use super::*;

    fn profile() -> CorrectorProfile {
        solve_corrector(7, &GridSpec { r_max: 20.0, t_max: 20.0, dr: 0.05, dt: 0.05, grading: 3.0 }).unwrap()
    }

    #[test]
    fn pairing_signs_and_scaling() {
        let p = profile();
        let h = TracelessSymmetricForm::diagonal(7, &[1.0, -1.0]).unwrap();
        let f = CorrectorField::new(&h, &p).unwrap();
        let rep = dirichlet_pairing(&f);
        assert!(rep.direct < 0.0, "{rep:?}");
        assert!(rep.rel_diff < 1e-2, "{rep:?}");
        let h2 = h.scaled(3.0);
        let rep2 = dirichlet_pairing(&CorrectorField::new(&h2, &p).unwrap());
        assert!((rep2.direct - 9.0 * rep.direct).abs() <= 1e-10 * rep2.direct.abs());
        let z = TracelessSymmetricForm::zero(7);
        assert_eq!(dirichlet_pairing(&CorrectorField::new(&z, &p).unwrap()).direct, 0.0);
    }

    #[test]
    fn orthogonality_certificate() {
        let p = profile();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let h = TracelessSymmetricForm::random(7, &mut rng);
        let rep = check_orthogonality(&CorrectorField::new(&h, &p).unwrap(), 200_000, 4);
        assert!(rep.angular_quadratic.abs() < 1e-10);
        assert!(rep.kernel_integrals.iter().all(|x| x.abs() < 1e-10));
        assert!(rep.boundary_integral.abs() < 1e-10);
        assert!(rep.mc_mean.abs() < 5.0 * rep.mc_stderr + 1e-12);
    }

    #[test]
    fn universality() {
        let p = profile();
        let rep = check_universality(&p, 2.75).unwrap();
        assert!(rep.max_rel_dev <= 1e-12, "{rep:?}");
    }

    #[test]
    fn fd_oracle_small_grid() {
        let p = profile();
        let h = TracelessSymmetricForm::diagonal(7, &[1.0, -1.0]).unwrap();
        let rep = fd_oracle(&CorrectorField::new(&h, &p).unwrap(), 20, 0.1, 1).unwrap();
        assert!(rep.rel_residual < 5e-2, "{rep:?}");
    }
}
