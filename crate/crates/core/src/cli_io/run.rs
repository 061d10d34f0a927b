//! Orchestration of a configured run: integrals, corrector, energy, blow-up.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{RunConfig, Stage};
use crate::blowup::{self, DeltaScaling, FamilyOptions, ReducedFunctional};
use crate::bubble::CutOff;
use crate::corrector::checks::{
    check_orthogonality, fd_oracle, grid_convergence, pairing_from_reduced, reduced_pairing, PairingReport, ReducedPairing,
};
use crate::corrector::{solve_corrector, CorrectorField, CorrectorProfile, GridSpec};
use crate::energy::expansion::{boundary_term_expansion_check, lambda_shift};
use crate::energy::mc::{energy_direct_mc, McOptions};
use crate::energy::residual::{ansatz_residual_orders, ResidualOptions};
use crate::energy::{self, FermiMetricJet, LambdaPower};
use crate::error::{Error, Result};
use crate::exponents::{check_admissible, exponents_for, fmt_rational, ten_to_minus};
use crate::form::TracelessSymmetricForm;
use crate::special::{integral_table, sample_parameters};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Flag,
    Fail,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckRecord {
    pub name: String,
    pub status: Status,
    pub value: Option<f64>,
    pub tolerance: Option<f64>,
    pub detail: String,
}

/// A numeric table with a mandatory header; missing cells are `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Option<f64>>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self { columns: columns.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Option<f64>>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub run_id: String,
    pub config_hash: String,
    pub tool_version: String,
    pub checks: Vec<CheckRecord>,
    pub payloads: BTreeMap<String, serde_json::Value>,
    pub tables: BTreeMap<String, Table>,
}

impl ResultRecord {
    pub fn worst_status(&self) -> Status {
        self.checks.iter().map(|c| c.status).max().unwrap_or(Status::Pass)
    }

    pub fn check(&self, name: &str) -> Option<&CheckRecord> {
        self.checks.iter().find(|c| c.name == name)
    }

    fn payload<T: Serialize>(&mut self, key: &str, value: &T) -> Result<()> {
        self.payloads.insert(key.to_string(), serde_json::to_value(value)?);
        Ok(())
    }

    fn record(&mut self, name: &str, ok: bool, value: Option<f64>, tolerance: Option<f64>, detail: impl Into<String>) {
        let status = if ok { Status::Pass } else { Status::Fail };
        self.push(name, status, value, tolerance, detail);
    }

    fn push(&mut self, name: &str, status: Status, value: Option<f64>, tolerance: Option<f64>, detail: impl Into<String>) {
        self.checks.push(CheckRecord { name: name.into(), status, value, tolerance, detail: detail.into() });
    }
}

/// Reference form used wherever a single `h` is needed.
pub fn reference_form(n: usize) -> Result<TracelessSymmetricForm> {
    TracelessSymmetricForm::diagonal(n, &[1.0, -1.0])
}

/// Grid with both spacings multiplied by `factor`.
pub fn scaled_grid(spec: &GridSpec, factor: f64) -> GridSpec {
    GridSpec { dr: spec.dr * factor, dt: spec.dt * factor, ..*spec }
}

/// Pairing from the reference grid and its refinement, Richardson-extrapolated.
pub fn extrapolated_reduced_pairing(reference: &CorrectorProfile, spec: &GridSpec) -> Result<ReducedPairing> {
    let fine = solve_corrector(reference.n, &scaled_grid(spec, 0.5))?;
    Ok(ReducedPairing::richardson(&reduced_pairing(reference), &reduced_pairing(&fine)))
}

/// Corrector on `spec` and the energy coefficients built from its extrapolated pairing.
pub fn reference_coefficients(n: usize, spec: &GridSpec) -> Result<(CorrectorProfile, energy::EnergyCoefficients)> {
    let profile = solve_corrector(n, spec)?;
    let reduced = extrapolated_reduced_pairing(&profile, spec)?;
    let unit = pairing_from_reduced(&reference_form(n)?, &reduced).per_unit_norm;
    Ok((profile, energy::coefficients(n, unit)?))
}

struct Context {
    profile: Option<CorrectorProfile>,
    reduced: Option<ReducedPairing>,
    coeffs: Option<energy::EnergyCoefficients>,
}

fn wrap<T>(module: &'static str, hash: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| Error::Module { module, hash: hash.to_string(), source: Box::new(e) })
}

/// Executes the selected stages in dependency order.
pub fn run(config: &RunConfig) -> Result<ResultRecord> {
    config.validate()?;
    let hash = config.hash();
    let mut rec = ResultRecord {
        run_id: hash[..16].to_string(),
        config_hash: hash.clone(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        checks: Vec::new(),
        payloads: BTreeMap::new(),
        tables: BTreeMap::new(),
    };
    let mut ctx = Context { profile: None, reduced: None, coeffs: None };
    let wants = |s: Stage| config.stages.contains(&s);
    if wants(Stage::Integrals) {
        wrap("integrals", &hash, stage_integrals(config, &mut rec))?;
    }
    let later = wants(Stage::Energy) || wants(Stage::Blowup);
    if wants(Stage::Corrector) || later {
        wrap("corrector", &hash, stage_corrector(config, &mut rec, &mut ctx, wants(Stage::Corrector)))?;
    }
    if later {
        wrap("energy", &hash, stage_energy(config, &mut rec, &mut ctx, wants(Stage::Energy)))?;
    }
    if wants(Stage::Blowup) {
        wrap("blowup", &hash, stage_blowup(config, &mut rec, &ctx))?;
    }
    Ok(rec)
}

fn stage_integrals(config: &RunConfig, rec: &mut ResultRecord) -> Result<()> {
    let rows = integral_table(&sample_parameters())?;
    let rec_err = rows
        .iter()
        .flat_map(|r| [r.recursion1_err, r.recursion2_err, r.recursion3_err])
        .flatten()
        .fold(0.0, f64::max);
    let quad_err = rows.iter().map(|r| r.rel_err).fold(0.0, f64::max);
    rec.record("integrals.recursions", rec_err <= 1e-10, Some(rec_err), Some(1e-10), format!("{} parameter points", rows.len()));
    rec.record("integrals.closed_vs_quadrature", quad_err <= 1e-8, Some(quad_err), Some(1e-8), "");
    let mut t = Table::new(&["m", "alpha", "closed_form", "quadrature", "rel_err", "recursion1_err", "recursion2_err", "recursion3_err"]);
    for r in &rows {
        t.push(vec![Some(r.m), Some(r.alpha), Some(r.closed_form), Some(r.quadrature), Some(r.rel_err), r.recursion1_err, r.recursion2_err, r.recursion3_err]);
    }
    rec.tables.insert("integrals".into(), t);

    let mut eps_set = vec![num_rational::BigRational::from_integer(0.into())];
    eps_set.extend((1..=6).map(ten_to_minus));
    for e in config.eps_rational()? {
        if !eps_set.contains(&e) {
            eps_set.push(e);
        }
    }
    let mut reports = Vec::new();
    let mut all = true;
    for e in &eps_set {
        let x = exponents_for(config.n as u32, e)?;
        let adm = check_admissible(&x);
        all &= x.identities_hold() && adm.admissible;
        reports.push(adm);
    }
    let listed: Vec<String> = eps_set.iter().map(fmt_rational).collect();
    rec.record("exponents.identities", all, None, None, format!("n = {}, eps in {{{}}}", config.n, listed.join(", ")));
    rec.payload("exponents", &reports)
}

fn stage_corrector(config: &RunConfig, rec: &mut ResultRecord, ctx: &mut Context, checks: bool) -> Result<()> {
    let n = config.n;
    let profile = solve_corrector(n, &config.grid)?;
    let reduced = extrapolated_reduced_pairing(&profile, &config.grid)?;
    if checks {
        let h = reference_form(n)?;
        let seed = config.seeds[0];
        rec.record("corrector.solve_residual", profile.residual <= 1e-10, Some(profile.residual), Some(1e-10), "");
        let field = CorrectorField::new(&h, &profile)?;
        let fd = fd_oracle(&field, 50, 1e-3, seed)?;
        rec.record("corrector.fd_oracle", fd.rel_residual <= 5e-2, Some(fd.rel_residual), Some(5e-2), "50 random interior points");
        let coarse = solve_corrector(n, &scaled_grid(&config.grid, 2.0))?;
        let fd_coarse = fd_oracle(&CorrectorField::new(&h, &coarse)?, 50, 1e-3, seed)?;
        let ratio = fd_coarse.rel_residual / fd.rel_residual;
        rec.record("corrector.fd_halving_ratio", (3.5..=4.5).contains(&ratio), Some(ratio), Some(0.5), "coarse / reference residual, target 4");
        let conv = grid_convergence(n, &coarse.grid)?;
        rec.record(
            "corrector.grid_convergence",
            (conv.ratio - 4.0).abs() <= 0.5,
            Some(conv.ratio),
            Some(0.5),
            format!("successive differences on {:?} intervals", conv.intervals),
        );
        let orth = check_orthogonality(&field, 1_000_000, seed);
        rec.record("corrector.orthogonality", orth.passed, Some(orth.mc_mean), Some(1e-3 * orth.norm), "");
        let pairing: PairingReport = pairing_from_reduced(&h, &reduced);
        rec.record("corrector.pairing_sign", pairing.direct <= 0.0, Some(pairing.direct), None, "");
        rec.record("corrector.pairing_forms", pairing.rel_diff <= 1e-4, Some(pairing.rel_diff), Some(1e-4), "Richardson-extrapolated pair of grids");
        rec.payload("corrector.diagnostics", &profile.diagnostics())?;
        rec.payload("corrector.fd_oracle", &fd)?;
        rec.payload("corrector.grid_convergence", &conv)?;
        rec.payload("corrector.orthogonality", &orth)?;
        rec.payload("corrector.pairing", &pairing)?;
        let mut t = Table::new(&["r", "t", "w"]);
        for (r, tt, w) in profile.table() {
            t.push(vec![Some(r), Some(tt), Some(w)]);
        }
        rec.tables.insert("corrector_w".into(), t);
    }
    ctx.profile = Some(profile);
    ctx.reduced = Some(reduced);
    Ok(())
}

fn stage_energy(config: &RunConfig, rec: &mut ResultRecord, ctx: &mut Context, checks: bool) -> Result<()> {
    let n = config.n;
    let h = reference_form(n)?;
    let reduced = ctx.reduced.as_ref().expect("corrector stage ran");
    let pairing_unit = pairing_from_reduced(&h, reduced).per_unit_norm;
    let coeffs = energy::coefficients(n, pairing_unit)?;
    if checks {
        let (a, aq) = (energy::a_closed_form(n)?, energy::a_quadrature(n)?);
        let (c, cb) = (energy::c_closed_form(n)?, energy::c_via_boundary_mass(n)?);
        let dev = ((a - aq) / a).abs().max(((c - cb) / c).abs());
        rec.record("energy.constants", dev <= 1e-10 && a > 0.0 && c > 0.0, Some(dev), Some(1e-10), "A and C two ways");

        let mut rng = ChaCha8Rng::seed_from_u64(config.seeds[0]);
        let mut worst: f64 = 0.0;
        let mut signs = true;
        for _ in 0..20 {
            let hr = TracelessSymmetricForm::random(n, &mut rng);
            let direct = energy::phi(&hr, &coeffs);
            let assembled = energy::phi_from_pairing(&hr, pairing_from_reduced(&hr, reduced).direct, &coeffs);
            let doubled = energy::phi(&hr.scaled(2.0), &coeffs);
            signs &= direct <= 0.0;
            worst = worst.max(((doubled - 4.0 * direct) / direct).abs()).max(((assembled - direct) / direct).abs());
        }
        rec.record("energy.phi", signs && worst <= 1e-6, Some(worst), Some(1e-6), "20 random traceless forms");

        let eps = config.expansion_eps_f64()?;
        let r = config.cutoff_radius;
        let base = boundary_term_expansion_check(n, 1.0, &eps, r)?;
        let doubled = boundary_term_expansion_check(n, 2.0, &eps, r)?;
        let shift = lambda_shift(&base, &doubled)?;
        let c1 = base.c1_rel_err.max(doubled.c1_rel_err);
        rec.record("energy.expansion_log_coefficient", c1 <= 0.05, Some(c1), Some(0.05), "lambda in {1, 2}");
        rec.record("energy.expansion_lambda_shift", shift.rel_err <= 0.05, Some(shift.rel_err), Some(0.05), "");
        rec.payload("energy.expansion", &[&base, &doubled])?;
        rec.payload("energy.lambda_shift", &shift)?;

        let profile = ctx.profile.as_ref().expect("corrector stage ran");
        let jet = FermiMetricJet::from_form(h.clone());
        let res = ansatz_residual_orders(&jet, Some(profile), &config.residual_deltas, &CutOff::new(r)?, &ResidualOptions::default())?;
        let (s1, s2) = (res.slope_without().unwrap_or(f64::NAN), res.slope_with().unwrap_or(f64::NAN));
        let ok = (s1 - 1.0).abs() <= 0.2 && (s2 - 2.0).abs() <= 0.2;
        let status = if res.flagged { Status::Flag } else if ok { Status::Pass } else { Status::Fail };
        rec.push("energy.residual_orders", status, Some(s2 - s1), Some(0.2), format!("slopes {s1:.4} without, {s2:.4} with corrector"));
        let mut t = Table::new(&["delta", "norm_without", "norm_with"]);
        for ((d, a), b) in res.deltas.iter().zip(&res.norm_without).zip(&res.norm_with) {
            t.push(vec![Some(*d), Some(*a), Some(*b)]);
        }
        rec.tables.insert("residual_sweep".into(), t);
        rec.payload("energy.residual_orders", &res)?;

        if let Some(samples) = config.mc_samples {
            let flat = FermiMetricJet::flat(n);
            let opts = McOptions { samples, seed: config.seeds[0], stderr_budget: None, control_variate: false };
            let est = energy_direct_mc(&flat, None, &coeffs, 1.0, 1e-8, LambdaPower::Two, &CutOff::new(r)?, &opts)?;
            let z = est.z_score(coeffs.a);
            rec.record("energy.mc_flat_limit", z <= 3.0, Some(z), Some(3.0), "standard errors from A at eps = 1e-8");
            rec.payload("energy.mc", &est)?;
        }
    }
    rec.payload("energy.coefficients", &coeffs)?;
    ctx.coeffs = Some(coeffs);
    Ok(())
}

fn stage_blowup(config: &RunConfig, rec: &mut ResultRecord, ctx: &Context) -> Result<()> {
    let coeffs = ctx.coeffs.clone().expect("energy stage ran");
    let profile = ctx.profile.as_ref().expect("corrector stage ran");
    let field = config.field.build(config.n)?;
    let p = config.power()?;
    let functional = ReducedFunctional::new(coeffs, p, config.window()?)?;
    let s = blowup::search(&field, &functional)?;
    rec.record("blowup.argmax_is_argmin", s.argmax_is_argmin, None, None, format!("grid index {}", s.grid_index));
    if s.degenerate {
        rec.push("blowup.degenerate_maximum", Status::Flag, None, None, "several nodes attain the maximum");
    }
    let c = functional.coeffs.c;
    let closed = match p {
        LambdaPower::Two => (c / (-2.0 * s.phi_star)).sqrt(),
        LambdaPower::One => c / -s.phi_star,
    };
    let scan = blowup::scan_lambda(s.phi_star, c, p, closed * 0.5, closed * 1.5, 1e-6 * closed);
    let lam_err = ((scan - s.lambda_star) / s.lambda_star).abs().max(((closed - s.lambda_star) / closed).abs());
    rec.record("blowup.lambda_star", lam_err <= 1e-6, Some(lam_err), Some(1e-6), "closed form vs 1D scan");
    let level = s.value.min(0.0) - 1.0;
    let phi_max = (0..field.node_count()).map(|i| functional.phi(field.norm(&field.node(i)))).fold(f64::NEG_INFINITY, f64::max);
    let window = blowup::window_for_level(level, c, p, phi_max)?;
    rec.record("blowup.window", blowup::window_check(&field, &functional, window, level), Some(level), None, format!("[a, b] = [{}, {}]", window.a, window.b));

    let eps = config.eps_f64()?;
    let cutoff = CutOff::new(config.cutoff_radius)?;
    let fam = blowup::family(&s.q_star, s.lambda_star, &eps, &field, profile, &cutoff, &FamilyOptions::default())?;
    let cert = blowup::certify_blowup(&fam)?;
    rec.record("blowup.rate", cert.passed, Some(cert.slope), Some(0.01 * cert.expected_slope.abs()), format!("expected slope {}", cert.expected_slope));
    let wrong = FamilyOptions { scaling: DeltaScaling::Linear, ..Default::default() };
    let control = blowup::family(&s.q_star, s.lambda_star, &eps, &field, profile, &cutoff, &wrong)?;
    let control_cert = blowup::certify_blowup(&control)?;
    rec.record("blowup.negative_control", !control_cert.passed, Some(control_cert.slope), None, "delta = eps must fail the rate check");

    let mut rate = Table::new(&["eps", "sup_u", "log_fit_residual"]);
    for row in &cert.rate_table {
        rate.push(vec![Some(row.eps), Some(row.sup_u), Some(row.log_fit_residual)]);
    }
    rec.tables.insert("rate_table".into(), rate);
    for (key, rays) in [("profiles_normal", &fam.normal_profiles), ("profiles_tangential", &fam.tangential_profiles)] {
        let mut t = Table::new(&["eps", "delta", "coordinate", "u_value"]);
        for ((e, d), ray) in fam.eps_list.iter().zip(&fam.deltas).zip(rays.iter()) {
            for (x, u) in ray {
                t.push(vec![Some(*e), Some(*d), Some(*x), Some(*u)]);
            }
        }
        rec.tables.insert(key.into(), t);
    }
    rec.payload("blowup.search", &s)?;
    rec.payload("blowup.certificate", &cert)?;
    rec.payload("blowup.negative_control", &control_cert)
}
