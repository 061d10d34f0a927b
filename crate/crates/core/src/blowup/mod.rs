//! Maximization of the reduced functional `lambda^p phi(q) + C ln(lambda)` over
//! a model boundary and the resulting blowing-up family.
//!
//! The model boundary is a periodic box `[0, L)^{n-1}` carrying a field of
//! trace-free forms `h(q)`; only `q -> ||h(q)||^2` enters the functional.

pub mod family;

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::energy::{EnergyCoefficients, LambdaPower};
use crate::error::{Error, Result};
use crate::form::TracelessSymmetricForm;

pub use family::{certify_blowup, family, BlowupCertificate, BlowupFamily, DeltaScaling, FamilyOptions};

const BUILTIN_BASE: f64 = 20.0;

/// A periodic Gaussian bump `amplitude * exp(-dist(q, center)^2 / (2 width^2))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub amplitude: f64,
    pub width: f64,
    pub center: Vec<f64>,
}

/// Norm field `||h(q)||^2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FieldSpec {
    Constant { value: f64 },
    /// `base * (1 + sum of bumps)`; covers the single and two-bump fields.
    Bumps { base: f64, bumps: Vec<Bump> },
    /// Node values in row-major grid order, interpolated multilinearly.
    Table { values: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelBoundaryField {
    pub n: usize,
    pub period: f64,
    pub points_per_side: usize,
    pub spec: FieldSpec,
}

impl ModelBoundaryField {
    pub fn new(n: usize, period: f64, points_per_side: usize, spec: FieldSpec) -> Result<Self> {
        let f = Self { n, period, points_per_side, spec };
        f.validate()?;
        Ok(f)
    }

    /// Built-in fields by name: `constant`, `bump`, `two_bump`. The base level
    /// 20 keeps `lambda*` below 1 for `n = 7`, so `eps` up to `1e-2` stays in
    /// the cut-off regime at unit radius.
    pub fn builtin(name: &str, n: usize, points_per_side: usize) -> Result<Self> {
        let d = n.saturating_sub(1);
        let at = |c: f64| vec![c; d];
        let spec = match name {
            "constant" => FieldSpec::Constant { value: BUILTIN_BASE },
            "bump" => FieldSpec::Bumps { base: BUILTIN_BASE, bumps: vec![Bump { amplitude: 0.5, width: 0.15, center: at(0.25) }] },
            "two_bump" => FieldSpec::Bumps {
                base: BUILTIN_BASE,
                bumps: vec![
                    Bump { amplitude: 0.6, width: 0.12, center: at(0.25) },
                    Bump { amplitude: -0.4, width: 0.15, center: at(0.75) },
                ],
            },
            other => return Err(Error::InvalidArgument(format!("unknown builtin field '{other}'"))),
        };
        Self::new(n, 1.0, points_per_side, spec)
    }

    /// Reads a table of node values: a CSV with a `norm` column in row-major order.
    pub fn from_table(n: usize, period: f64, points_per_side: usize, path: &Path) -> Result<Self> {
        let mut rdr = csv::Reader::from_path(path)?;
        let col = rdr
            .headers()?
            .iter()
            .position(|h| h == "norm")
            .ok_or_else(|| Error::Config(format!("{} has no 'norm' column", path.display())))?;
        let mut values = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let v: f64 = rec[col].trim().parse().map_err(|e| Error::Config(format!("bad norm value: {e}")))?;
            values.push(v);
        }
        Self::new(n, period, points_per_side, FieldSpec::Table { values })
    }

    pub fn dim(&self) -> usize {
        self.n - 1
    }

    pub fn node_count(&self) -> usize {
        self.points_per_side.pow(self.dim() as u32)
    }

    pub fn spacing(&self) -> f64 {
        self.period / self.points_per_side as f64
    }

    /// Checks shapes and the non-umbilic hypothesis at every node.
    pub fn validate(&self) -> Result<()> {
        if self.n < 3 || !(self.period > 0.0) || self.points_per_side < 2 {
            return Err(Error::InvalidArgument("field needs n >= 3, period > 0 and at least 2 points per side".into()));
        }
        match &self.spec {
            FieldSpec::Constant { .. } => {}
            FieldSpec::Bumps { bumps, .. } => {
                if bumps.iter().any(|b| b.center.len() != self.dim() || !(b.width > 0.0)) {
                    return Err(Error::InvalidArgument("bump centres must have n-1 coordinates and positive width".into()));
                }
            }
            FieldSpec::Table { values } => {
                if values.len() != self.node_count() {
                    return Err(Error::InvalidArgument(format!(
                        "table has {} values, grid has {} nodes",
                        values.len(),
                        self.node_count()
                    )));
                }
            }
        }
        let bad = (0..self.node_count()).into_par_iter().map(|i| self.norm(&self.node(i))).find_first(|v| !(*v > 0.0));
        if let Some(v) = bad {
            return Err(Error::Precondition(format!("field vanishes or is negative at a node (||h||^2 = {v}); non-umbilic hypothesis violated")));
        }
        Ok(())
    }

    pub fn multi_index(&self, mut i: usize) -> Vec<usize> {
        let k = self.points_per_side;
        let mut idx = vec![0; self.dim()];
        for slot in idx.iter_mut().rev() {
            *slot = i % k;
            i /= k;
        }
        idx
    }

    pub fn node(&self, i: usize) -> Vec<f64> {
        self.multi_index(i).iter().map(|&k| k as f64 * self.spacing()).collect()
    }

    fn wrap(&self, x: f64) -> f64 {
        x.rem_euclid(self.period)
    }

    fn periodic_diff(&self, a: f64, b: f64) -> f64 {
        let l = self.period;
        (a - b + 0.5 * l).rem_euclid(l) - 0.5 * l
    }

    /// `||h(q)||^2`.
    pub fn norm(&self, q: &[f64]) -> f64 {
        match &self.spec {
            FieldSpec::Constant { value } => *value,
            FieldSpec::Bumps { base, bumps } => {
                let s: f64 = bumps
                    .iter()
                    .map(|b| {
                        let d2: f64 = q.iter().zip(&b.center).map(|(x, c)| self.periodic_diff(*x, *c).powi(2)).sum();
                        b.amplitude * (-d2 / (2.0 * b.width * b.width)).exp()
                    })
                    .sum();
                base * (1.0 + s)
            }
            FieldSpec::Table { values } => self.interpolate(values, q),
        }
    }

    fn interpolate(&self, values: &[f64], q: &[f64]) -> f64 {
        let k = self.points_per_side;
        let h = self.spacing();
        let (base, frac): (Vec<usize>, Vec<f64>) = q
            .iter()
            .map(|&x| {
                let s = self.wrap(x) / h;
                let i = (s.floor() as usize).min(k - 1);
                (i, s - i as f64)
            })
            .unzip();
        let d = q.len();
        let mut total = 0.0;
        for corner in 0..(1usize << d) {
            let mut w = 1.0;
            let mut flat = 0;
            for a in 0..d {
                let bit = (corner >> a) & 1;
                w *= if bit == 1 { frac[a] } else { 1.0 - frac[a] };
                flat = flat * k + (base[a] + bit) % k;
            }
            if w != 0.0 {
                total += w * values[flat];
            }
        }
        total
    }

    /// `h(q) = sqrt(||h||^2(q) / 2) diag(1, -1, 0, ...)`.
    pub fn form(&self, q: &[f64]) -> Result<TracelessSymmetricForm> {
        let s = (self.norm(q) / 2.0).sqrt();
        TracelessSymmetricForm::diagonal(self.n, &[s, -s])
    }

    /// Index of the smallest node norm, ties to the lowest index.
    pub fn argmin_node(&self) -> (usize, f64) {
        (0..self.node_count())
            .map(|i| (i, self.norm(&self.node(i))))
            .fold((0, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambdaWindow {
    pub a: f64,
    pub b: f64,
}

impl LambdaWindow {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0 && b > a) {
            return Err(Error::InvalidArgument(format!("lambda window needs 0 < a < b, got [{a}, {b}]")));
        }
        Ok(Self { a, b })
    }

    pub fn contains(&self, l: f64) -> bool {
        l > self.a && l < self.b
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ReducedFunctional {
    pub coeffs: EnergyCoefficients,
    pub p: LambdaPower,
    pub window: LambdaWindow,
}

impl ReducedFunctional {
    pub fn new(coeffs: EnergyCoefficients, p: LambdaPower, window: LambdaWindow) -> Result<Self> {
        if !(coeffs.c > 0.0) {
            return Err(Error::Precondition("the log coefficient C must be positive".into()));
        }
        Ok(Self { coeffs, p, window })
    }

    /// `phi(q) = -Phi_n ||h(q)||^2`.
    pub fn phi(&self, norm: f64) -> f64 {
        -self.coeffs.phi_n * norm
    }

    pub fn value(&self, lambda: f64, phi_q: f64) -> f64 {
        lambda.powf(self.p.as_f64()) * phi_q + self.coeffs.c * lambda.ln()
    }
}

/// Stationary point of `lambda^p phi + C ln(lambda)`, checked to be a maximum.
pub fn optimal_lambda(phi_q: f64, c: f64, p: LambdaPower) -> Result<f64> {
    if !(phi_q < 0.0) {
        return Err(Error::UmbilicDegenerate(phi_q));
    }
    if !(c > 0.0) {
        return Err(Error::Precondition(format!("C = {c} must be positive")));
    }
    let l = match p {
        LambdaPower::Two => (c / (-2.0 * phi_q)).sqrt(),
        LambdaPower::One => c / -phi_q,
    };
    let pf = p.as_f64();
    let second = pf * (pf - 1.0) * l.powf(pf - 2.0) * phi_q - c / (l * l);
    if !(second < 0.0) {
        return Err(Error::Precondition(format!("stationary point lambda = {l} is not a maximum")));
    }
    Ok(l)
}

/// Maximizer of the one-dimensional function on a uniform scan of `[a, b]`.
pub fn scan_lambda(phi_q: f64, c: f64, p: LambdaPower, a: f64, b: f64, step: f64) -> f64 {
    let steps = ((b - a) / step).ceil() as usize;
    (0..=steps)
        .map(|k| a + k as f64 * step)
        .map(|l| (l, l.powf(p.as_f64()) * phi_q + c * l.ln()))
        .fold((a, f64::NEG_INFINITY), |best, cur| if cur.1 > best.1 { cur } else { best })
        .0
}

/// Window `[a, b]` outside which the functional stays below `m` for every
/// `phi` in `[phi_min, phi_max]` (all negative).
pub fn window_for_level(m: f64, c: f64, p: LambdaPower, phi_max: f64) -> Result<LambdaWindow> {
    if !(m < 0.0) || !(phi_max < 0.0) {
        return Err(Error::InvalidArgument("need M < 0 and phi < 0".into()));
    }
    // lambda^p phi < 0, so C ln(lambda) < M already forces the value below M.
    let a = (m / c).exp();
    let f = |l: f64| l.powf(p.as_f64()) * phi_max + c * l.ln() - m;
    let mut lo = optimal_lambda(phi_max, c, p)?.max(a);
    let mut hi = 2.0 * lo;
    while f(hi) >= 0.0 {
        hi *= 2.0;
    }
    if f(lo) >= 0.0 {
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) >= 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
    }
    LambdaWindow::new(a, hi.max(a * 2.0))
}

#[derive(Debug, Clone, Serialize)]
pub struct SearchResult {
    pub q_star: Vec<f64>,
    pub lambda_star: f64,
    pub value: f64,
    pub phi_star: f64,
    pub norm_star: f64,
    /// Grid maximizer before refinement.
    pub grid_index: usize,
    pub grid_q: Vec<f64>,
    pub grid_value: f64,
    /// Independent grid argmin of `||h||^2`.
    pub argmin_index: usize,
    pub argmax_is_argmin: bool,
    pub degenerate: bool,
    pub window: LambdaWindow,
    pub refinement_steps: usize,
    pub warnings: Vec<String>,
}

/// Grid argmax under the total order `(value, -index)`, then pattern search in `q`.
pub fn search(field: &ModelBoundaryField, functional: &ReducedFunctional) -> Result<SearchResult> {
    field.validate()?;
    let c = functional.coeffs.c;
    let p = functional.p;
    let profile = |norm: f64| -> Result<(f64, f64)> {
        let phi = functional.phi(norm);
        let l = optimal_lambda(phi, c, p)?;
        Ok((l, functional.value(l, phi)))
    };
    let evals: Vec<(f64, f64)> = (0..field.node_count())
        .into_par_iter()
        .map(|i| profile(field.norm(&field.node(i))))
        .collect::<Result<_>>()?;

    let mut warnings = Vec::new();
    let mut window = functional.window;
    let (lmin, lmax) = evals.iter().fold((f64::INFINITY, 0.0f64), |(a, b), (l, _)| (a.min(*l), b.max(*l)));
    if !window.contains(lmin) || !window.contains(lmax) {
        let widened = LambdaWindow::new(window.a.min(lmin / 2.0), window.b.max(2.0 * lmax))?;
        warnings.push(format!(
            "lambda* range [{lmin:.6}, {lmax:.6}] not inside [{}, {}]; window widened to [{}, {}]",
            window.a, window.b, widened.a, widened.b
        ));
        window = widened;
    }

    let mut best = 0;
    for (i, e) in evals.iter().enumerate() {
        if e.1 > evals[best].1 {
            best = i;
        }
    }
    let top = evals[best].1;
    let tol = 1e-12 * top.abs().max(1e-300);
    let degenerate = evals.iter().enumerate().any(|(i, e)| i != best && (e.1 - top).abs() <= tol);
    if degenerate {
        warnings.push("degenerate maximum: several grid nodes attain the top value; lowest index returned".into());
    }
    let (argmin_index, _) = field.argmin_node();

    // Pattern search; the constant and tabulated fields are left at the node.
    let mut q = field.node(best);
    let mut value = top;
    let mut steps = 0;
    if !degenerate && !matches!(field.spec, FieldSpec::Table { .. }) {
        let mut h = field.spacing();
        while h > 1e-8 {
            let mut moved = false;
            for a in 0..field.dim() {
                for s in [1.0, -1.0] {
                    let mut trial = q.clone();
                    trial[a] = field.wrap(trial[a] + s * h);
                    let v = profile(field.norm(&trial))?.1;
                    if v > value {
                        q = trial;
                        value = v;
                        moved = true;
                    }
                }
            }
            steps += 1;
            if !moved {
                h *= 0.5;
            }
            if steps > 100_000 {
                warnings.push("pattern search stopped at the iteration cap".into());
                break;
            }
        }
    }
    let norm_star = field.norm(&q);
    let phi_star = functional.phi(norm_star);
    let lambda_star = optimal_lambda(phi_star, c, p)?;
    Ok(SearchResult {
        q_star: q,
        lambda_star,
        value: functional.value(lambda_star, phi_star),
        phi_star,
        norm_star,
        grid_index: best,
        grid_q: field.node(best),
        grid_value: top,
        argmin_index,
        argmax_is_argmin: argmin_index == best,
        degenerate,
        window,
        refinement_steps: steps,
        warnings,
    })
}

/// Values at `a/2` and `2b` for every node, all of which must lie below `m`.
pub fn window_check(field: &ModelBoundaryField, functional: &ReducedFunctional, window: LambdaWindow, m: f64) -> bool {
    (0..field.node_count()).all(|i| {
        let phi = functional.phi(field.norm(&field.node(i)));
        functional.value(window.a / 2.0, phi) < m && functional.value(2.0 * window.b, phi) < m
    })
}
