//! Samples of `u_eps = W_delta + delta V_delta` at `delta = lambda* sqrt(eps)`
//! and the certificate for the blow-up rate of `sup u_eps`.

use serde::Serialize;

use crate::bubble::{Bubble, CutOff, HalfSpacePoint};
use crate::corrector::{CorrectorField, CorrectorProfile};
use crate::error::{Error, Result};
use crate::fit::{linear_fit, LinearFit};

use super::ModelBoundaryField;

/// How `delta` depends on `eps`. `Linear` (`delta = eps`) is the negative control.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
pub enum DeltaScaling {
    #[default]
    SqrtEps,
    Linear,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct FamilyOptions {
    /// Samples per ray, over `|x| <= ray_extent` in rescaled units.
    pub ray_samples: usize,
    pub ray_extent: f64,
    pub scaling: DeltaScaling,
}

impl Default for FamilyOptions {
    fn default() -> Self {
        Self { ray_samples: 41, ray_extent: 10.0, scaling: DeltaScaling::SqrtEps }
    }
}

/// `(coordinate, u)` along a ray, coordinates in the original variable `y`.
pub type Ray = Vec<(f64, f64)>;

#[derive(Debug, Clone, Serialize)]
pub struct BlowupFamily {
    pub n: usize,
    pub q_star: Vec<f64>,
    pub lambda_star: f64,
    pub scaling: DeltaScaling,
    pub eps_list: Vec<f64>,
    pub deltas: Vec<f64>,
    /// Along `(0, t)`.
    pub normal_profiles: Vec<Ray>,
    /// Along `(s e_1, 0)`, where `h(e_1, e_1) > 0`.
    pub tangential_profiles: Vec<Ray>,
    pub sup_values: Vec<f64>,
    /// `max |delta^{(n-2)/2} u(delta x) - U(x)|` over both rays.
    pub collapse_errors: Vec<f64>,
}

/// `u = delta^{-(n-2)/2} (U + delta v)(y / delta) chi(|y|)`, with `v = 0` off the grid.
fn sample(bubble: &Bubble, field: &CorrectorField, cutoff: &CutOff, delta: f64, x: &HalfSpacePoint) -> f64 {
    let v = field.value_cubic(x).unwrap_or(0.0);
    let chi = cutoff.value(delta * x.norm());
    delta.powf(-bubble.p()) * (bubble.value(x) + delta * v) * chi
}

pub fn family(
    q_star: &[f64],
    lambda_star: f64,
    eps_list: &[f64],
    field: &ModelBoundaryField,
    corrector: &CorrectorProfile,
    cutoff: &CutOff,
    opts: &FamilyOptions,
) -> Result<BlowupFamily> {
    let n = field.n;
    if corrector.n != n || q_star.len() != field.dim() {
        return Err(Error::InvalidArgument("dimension mismatch between field, point and corrector".into()));
    }
    if !(lambda_star > 0.0) || opts.ray_samples < 2 {
        return Err(Error::InvalidArgument("need lambda* > 0 and at least two ray samples".into()));
    }
    let deltas: Vec<f64> = eps_list
        .iter()
        .map(|&e| match opts.scaling {
            DeltaScaling::SqrtEps => lambda_star * e.sqrt(),
            DeltaScaling::Linear => e,
        })
        .collect();
    for (e, d) in eps_list.iter().zip(&deltas) {
        if !(*e > 0.0) {
            return Err(Error::InvalidArgument(format!("eps = {e} must be positive")));
        }
        cutoff.check_scale(*d)?;
    }
    let h = field.form(q_star)?;
    let cf = CorrectorField::new(&h, corrector)?;
    let bubble = Bubble::standard(n)?;
    let mut normal_profiles = Vec::new();
    let mut tangential_profiles = Vec::new();
    let mut sup_values = Vec::new();
    let mut collapse_errors = Vec::new();
    for &delta in &deltas {
        let mut normal = Vec::new();
        let mut tangential = Vec::new();
        let mut sup: f64 = 0.0;
        let mut collapse: f64 = 0.0;
        for k in 0..opts.ray_samples {
            let s = opts.ray_extent * k as f64 / (opts.ray_samples - 1) as f64;
            let mut z = vec![0.0; n - 1];
            let xn = HalfSpacePoint { z: z.clone(), t: s };
            z[0] = s;
            let xt = HalfSpacePoint { z, t: 0.0 };
            for (x, ray, coord) in [(&xn, &mut normal, s * delta), (&xt, &mut tangential, s * delta)] {
                let u = sample(&bubble, &cf, cutoff, delta, x);
                ray.push((coord, u));
                sup = sup.max(u);
                collapse = collapse.max((delta.powf(bubble.p()) * u - bubble.value(x)).abs());
            }
        }
        normal_profiles.push(normal);
        tangential_profiles.push(tangential);
        sup_values.push(sup);
        collapse_errors.push(collapse);
    }
    Ok(BlowupFamily {
        n,
        q_star: q_star.to_vec(),
        lambda_star,
        scaling: opts.scaling,
        eps_list: eps_list.to_vec(),
        deltas,
        normal_profiles,
        tangential_profiles,
        sup_values,
        collapse_errors,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct RateRow {
    pub eps: f64,
    pub sup_u: f64,
    pub log_fit_residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BlowupCertificate {
    pub passed: bool,
    pub monotone: bool,
    pub slope: f64,
    pub expected_slope: f64,
    pub slope_rel_err: f64,
    pub fit: LinearFit,
    pub rate_table: Vec<RateRow>,
    pub lambda_star: f64,
    pub q_star: Vec<f64>,
    pub notes: Vec<String>,
}

/// Checks that `sup u_eps` increases as `eps` decreases and that the slope of
/// `ln sup u` against `ln eps` is `-(n-2)/4` within 1%.
pub fn certify_blowup(family: &BlowupFamily) -> Result<BlowupCertificate> {
    let m = family.eps_list.len();
    if m < 4 || family.sup_values.len() != m {
        return Err(Error::Precondition(format!("certification needs at least 4 eps points, got {m}")));
    }
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| family.eps_list[b].total_cmp(&family.eps_list[a]));
    let monotone = order.windows(2).all(|w| family.sup_values[w[1]] > family.sup_values[w[0]]);
    let x: Vec<f64> = family.eps_list.iter().map(|e| e.ln()).collect();
    let y: Vec<f64> = family.sup_values.iter().map(|s| s.ln()).collect();
    let fit = linear_fit(&x, &y)?;
    let expected_slope = -(family.n as f64 - 2.0) / 4.0;
    let slope_rel_err = (fit.slope - expected_slope).abs() / expected_slope.abs();
    let rate_table = family
        .eps_list
        .iter()
        .zip(&family.sup_values)
        .zip(x.iter().zip(&y))
        .map(|((&eps, &sup_u), (&lx, &ly))| RateRow { eps, sup_u, log_fit_residual: ly - fit.predict(lx) })
        .collect();
    Ok(BlowupCertificate {
        passed: monotone && slope_rel_err <= 0.01,
        monotone,
        slope: fit.slope,
        expected_slope,
        slope_rel_err,
        fit,
        rate_table,
        lambda_star: family.lambda_star,
        q_star: family.q_star.clone(),
        notes: vec![
            "profiles omit the remainder of the reduction, whose size eps|ln eps| is a stated, untested bound".into(),
            "the log term of the reduced functional is read as C ln(lambda)".into(),
        ],
    })
}
