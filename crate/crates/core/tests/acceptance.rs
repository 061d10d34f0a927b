//! Acceptance criteria, one PASS/FAIL line each. Runs without the libtest
//! harness so the lines are always printed.
//!
//! Criteria 3, 5, 6 and 7 read the checks of one full run under the reference
//! configuration; 1, 2 and 4 are computed here over the wider parameter ranges.

use std::time::Instant;

use num_rational::BigRational;
use num_traits::Zero;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use yamabe_lab::cli_io::run::reference_form;
use yamabe_lab::cli_io::{run, ResultRecord, RunConfig, Status};
use yamabe_lab::corrector::checks::{pairing_from_reduced, reduced_pairing};
use yamabe_lab::corrector::solve_corrector;
use yamabe_lab::energy::{self, mc::flat_energy_exact};
use yamabe_lab::exponents::{exponents_for, ten_to_minus};
use yamabe_lab::form::TracelessSymmetricForm;
use yamabe_lab::special::{check_recursions, integral_row, sample_parameters};

const RECURSION_TOL: f64 = 1e-10;
const CLOSED_VS_QUAD_TOL: f64 = 1e-8;
const FD_RESIDUAL_TOL: f64 = 5e-2;
const HALVING_RATIO: (f64, f64) = (3.5, 4.5);
const PAIRING_FORMS_TOL: f64 = 1e-4;
const CONSTANTS_TOL: f64 = 1e-10;
const PHI_TOL: f64 = 1e-6;
const EXPANSION_TOL: f64 = 0.05;
const SLOPE_TOL: f64 = 0.2;
const LAMBDA_STAR_TOL: f64 = 1e-6;
const RATE_TOL: f64 = 0.01;
const MC_Z: f64 = 3.0;
const MC_SAMPLES: usize = 1_000_000;

struct Outcome {
    lines: Vec<String>,
    ok: bool,
}

impl Outcome {
    fn line(&mut self, id: &str, pass: bool, detail: String) {
        self.ok &= pass;
        let line = format!("{} criterion {id}: {detail}", if pass { "PASS" } else { "FAIL" });
        println!("{line}");
        self.lines.push(line);
    }
}

fn passed(rec: &ResultRecord, name: &str) -> bool {
    rec.check(name).is_some_and(|c| c.status == Status::Pass)
}

fn value(rec: &ResultRecord, name: &str) -> f64 {
    rec.check(name).and_then(|c| c.value).unwrap_or(f64::NAN)
}

fn criterion_1(out: &mut Outcome) {
    let start = Instant::now();
    let params = sample_parameters();
    let mut rec_err: f64 = 0.0;
    let mut quad_err: f64 = 0.0;
    for &(m, a) in &params {
        let rep = check_recursions(m, a);
        rec_err = rec_err.max(rep.max_rel_err);
        quad_err = quad_err.max(integral_row(m, a).unwrap().rel_err);
    }
    let secs = start.elapsed().as_secs_f64();
    out.line(
        "1 (integral identities)",
        params.len() == 50 && rec_err <= RECURSION_TOL && quad_err <= CLOSED_VS_QUAD_TOL && secs < 10.0,
        format!("{} points, recursions {rec_err:.2e} <= {RECURSION_TOL:e}, closed vs quadrature {quad_err:.2e} <= {CLOSED_VS_QUAD_TOL:e}, {secs:.2} s", params.len()),
    );
}

fn criterion_2(out: &mut Outcome) {
    let mut eps: Vec<BigRational> = vec![BigRational::zero()];
    eps.extend((1..=6).map(ten_to_minus));
    let mut failures = Vec::new();
    for n in 7..=12u32 {
        for e in &eps {
            match exponents_for(n, e) {
                Ok(x) if x.identities_hold() => {}
                _ => failures.push(format!("n={n}, eps={e}")),
            }
        }
    }
    out.line(
        "2 (exponent algebra)",
        failures.is_empty(),
        format!("both identities exact in rationals for n in 7..=12, eps in {{0, 1e-1..1e-6}}; failures {failures:?}"),
    );
}

fn criterion_3(out: &mut Outcome, rec: &ResultRecord) {
    let names = [
        "corrector.solve_residual",
        "corrector.fd_oracle",
        "corrector.fd_halving_ratio",
        "corrector.orthogonality",
        "corrector.pairing_sign",
        "corrector.pairing_forms",
    ];
    let ratio = value(rec, "corrector.fd_halving_ratio");
    out.line(
        "3 (corrector validity)",
        names.iter().all(|c| passed(rec, c)),
        format!(
            "fd residual {:.2e} <= {FD_RESIDUAL_TOL:e}, halving ratio {ratio:.3} in [{}, {}], orthogonality {:?}, pairing {:.6e} <= 0, forms rel diff {:.2e} <= {PAIRING_FORMS_TOL:e}",
            value(rec, "corrector.fd_oracle"),
            HALVING_RATIO.0,
            HALVING_RATIO.1,
            rec.check("corrector.orthogonality").map(|c| c.status),
            value(rec, "corrector.pairing_sign"),
            value(rec, "corrector.pairing_forms"),
        ),
    );
}

fn criterion_4(out: &mut Outcome) {
    let mut dev: f64 = 0.0;
    let mut positive = true;
    for n in 7..=30 {
        let (a, aq) = (energy::a_closed_form(n).unwrap(), energy::a_quadrature(n).unwrap());
        let (c, cb) = (energy::c_closed_form(n).unwrap(), energy::c_via_boundary_mass(n).unwrap());
        positive &= a > 0.0 && c > 0.0;
        dev = dev.max(((a - aq) / a).abs()).max(((c - cb) / c).abs());
    }
    let n = 7;
    let profile = solve_corrector(n, &RunConfig::default_for(n).grid).unwrap();
    let red = reduced_pairing(&profile);
    let unit = pairing_from_reduced(&reference_form(n).unwrap(), &red).per_unit_norm;
    let coeffs = energy::coefficients(n, unit).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut signs = true;
    let mut homog: f64 = 0.0;
    for _ in 0..20 {
        let h = TracelessSymmetricForm::random(n, &mut rng);
        let p1 = energy::phi_from_pairing(&h, pairing_from_reduced(&h, &red).direct, &coeffs);
        let p2 = energy::phi_from_pairing(&h.scaled(2.0), pairing_from_reduced(&h.scaled(2.0), &red).direct, &coeffs);
        signs &= p1 <= 0.0;
        homog = homog.max(((p2 - 4.0 * p1) / p1).abs());
    }
    out.line(
        "4 (energy constants)",
        positive && dev <= CONSTANTS_TOL && signs && homog <= PHI_TOL,
        format!("A, C two ways for n in 7..=30: {dev:.2e} <= {CONSTANTS_TOL:e}, A, C > 0: {positive}; 20 random h: phi <= 0: {signs}, |phi(2h) - 4 phi(h)| rel {homog:.2e} <= {PHI_TOL:e}"),
    );
}

fn criterion_5(out: &mut Outcome, rec: &ResultRecord) {
    let c1 = value(rec, "energy.expansion_log_coefficient");
    let shift = value(rec, "energy.expansion_lambda_shift");
    let res = rec.payloads.get("energy.residual_orders").expect("residual payload");
    let slope = |key: &str| res[key]["slope"].as_f64().unwrap_or(f64::NAN);
    let (s1, s2) = (slope("fit_without"), slope("fit_with"));
    out.line(
        "5 (expansion fits)",
        c1 <= EXPANSION_TOL && shift <= EXPANSION_TOL && (s1 - 1.0).abs() <= SLOPE_TOL && (s2 - 2.0).abs() <= SLOPE_TOL,
        format!("eps|ln eps| coefficient rel err {c1:.2e}, lambda shift rel err {shift:.2e} (<= {EXPANSION_TOL}); residual slopes {s1:.4} and {s2:.4} (1 and 2 +- {SLOPE_TOL})"),
    );
}

fn criterion_6(out: &mut Outcome, rec: &ResultRecord) {
    let slope = value(rec, "blowup.rate");
    let expected = -(7.0 - 2.0) / 4.0;
    let rate_ok = ((slope - expected) / expected).abs() <= RATE_TOL;
    out.line(
        "6 (blow-up certificate)",
        passed(rec, "blowup.argmax_is_argmin")
            && rec.check("blowup.degenerate_maximum").is_none()
            && value(rec, "blowup.lambda_star") <= LAMBDA_STAR_TOL
            && rate_ok
            && passed(rec, "blowup.rate")
            && passed(rec, "blowup.negative_control"),
        format!(
            "argmax = argmin: {}, lambda* rel err {:.2e} <= {LAMBDA_STAR_TOL:e}, rate {slope:.5} vs {expected} within {}%, negative control slope {:.4} rejected: {}",
            passed(rec, "blowup.argmax_is_argmin"),
            value(rec, "blowup.lambda_star"),
            RATE_TOL * 100.0,
            value(rec, "blowup.negative_control"),
            passed(rec, "blowup.negative_control"),
        ),
    );
}

fn criterion_7(out: &mut Outcome, rec: &ResultRecord) {
    let z = value(rec, "energy.mc_flat_limit");
    out.line("7 (Monte Carlo energy)", z <= MC_Z, format!("flat jet, n = 7, eps = 1e-8, {MC_SAMPLES} samples: {z:.2} standard errors from A (<= {MC_Z})"));
    let (eps, a) = (1e-6, energy::a_closed_form(7).unwrap());
    let coeffs = energy::coefficients(7, 0.0).unwrap();
    let direct = flat_energy_exact(7, 1.0, eps).unwrap() - a;
    println!(
        "INFO flat energy minus A at eps = {eps:e}: direct {direct:.4e}, expansion B(eps) {:.4e}; the two disagree beyond the o(eps) remainder",
        coeffs.b_of(eps)
    );
}

fn main() {
    let mut out = Outcome { lines: Vec::new(), ok: true };
    criterion_1(&mut out);
    criterion_2(&mut out);
    let mut config = RunConfig::default_for(7);
    config.mc_samples = Some(MC_SAMPLES);
    let start = Instant::now();
    let rec = run(&config).expect("reference run");
    println!("reference run {} took {:.1} s", rec.run_id, start.elapsed().as_secs_f64());
    criterion_3(&mut out, &rec);
    criterion_4(&mut out);
    criterion_5(&mut out, &rec);
    criterion_6(&mut out, &rec);
    criterion_7(&mut out, &rec);
    let failed = out.lines.iter().filter(|l| l.starts_with("FAIL")).count();
    println!("acceptance: {} of {} criteria passed", out.lines.len() - failed, out.lines.len());
    if !out.ok {
        std::process::exit(1);
    }
}
