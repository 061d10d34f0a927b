use std::sync::OnceLock;

use num_bigint::BigInt;
use num_rational::BigRational;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use yamabe_lab::bubble::{Bubble, HalfSpacePoint};
use yamabe_lab::cli_io::RunConfig;
use yamabe_lab::corrector::checks::{pairing_from_reduced, reduced_pairing, ReducedPairing};
use yamabe_lab::corrector::{assemble_v, solve_corrector, CorrectorProfile, GridSpec};
use yamabe_lab::energy;
use yamabe_lab::exponents::exponents_for;
use yamabe_lab::form::TracelessSymmetricForm;
use yamabe_lab::special::{angular_moment_quadratic_closed_form, check_recursions, radial_integral, radial_integral_quadrature};

fn profile() -> &'static (CorrectorProfile, ReducedPairing) {
    static P: OnceLock<(CorrectorProfile, ReducedPairing)> = OnceLock::new();
    P.get_or_init(|| {
        let spec = GridSpec { r_max: 15.0, t_max: 15.0, dr: 0.1, dt: 0.1, grading: 3.0 };
        let p = solve_corrector(7, &spec).unwrap();
        let red = reduced_pairing(&p);
        (p, red)
    })
}

fn form(n: usize, seed: u64) -> TracelessSymmetricForm {
    TracelessSymmetricForm::random(n, &mut ChaCha8Rng::seed_from_u64(seed))
}

fn point(n: usize) -> impl Strategy<Value = HalfSpacePoint> {
    (prop::collection::vec(-4.0..4.0f64, n - 1), 0.0..4.0f64).prop_map(|(z, t)| HalfSpacePoint { z, t })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn exponent_identities_are_exact(n in 7u32..=30, num in 0i64..1000, k in 0u32..=8) {
        let eps = BigRational::new(BigInt::from(num), BigInt::from(10).pow(k + 3));
        let e = exponents_for(n, &eps).unwrap();
        prop_assert!(e.identities_hold());
    }

    #[test]
    fn trace_exponent_increases_with_eps(n in 7u32..=30, a in 0i64..10_000, b in 1i64..10_000) {
        let den = BigInt::from(100_000);
        let lo = BigRational::new(BigInt::from(a), den.clone());
        let hi = BigRational::new(BigInt::from(a + b), den);
        prop_assert!(exponents_for(n, &lo).unwrap().s_eps < exponents_for(n, &hi).unwrap().s_eps);
    }

    #[test]
    fn radial_integral_recursions_and_quadrature(m in 1.5f64..12.0, frac in 0.0f64..1.0) {
        let alpha = frac * (2.0 * m - 2.0);
        prop_assert!(check_recursions(m, alpha).max_rel_err <= 1e-10);
        let closed = radial_integral(m, alpha).unwrap();
        let quad = radial_integral_quadrature(m, alpha).unwrap().value;
        prop_assert!(((closed - quad) / closed).abs() <= 1e-8);
    }

    #[test]
    fn bubble_is_harmonic_and_scaling_covariant(y in point(7), delta in 0.01f64..2.0) {
        let u = Bubble::standard(7).unwrap();
        let scale = u.hessian(&y).amax().max(1.0);
        prop_assert!(u.laplacian(&y).abs() <= 1e-10 * scale);
        let ud = Bubble::new(7, delta).unwrap();
        let expect = delta.powf(-2.5) * u.value(&y.scaled(1.0 / delta));
        prop_assert!((ud.value(&y) - expect).abs() <= 1e-12 * expect);
    }

    #[test]
    fn angular_moment_is_quadratic(seed in any::<u64>(), c in -5.0f64..5.0) {
        let h = form(7, seed);
        let m = angular_moment_quadratic_closed_form(&h);
        prop_assert!(m > 0.0);
        prop_assert!((angular_moment_quadratic_closed_form(&h.scaled(c)) - c * c * m).abs() <= 1e-12 * m.max(1.0) * c * c + 1e-15);
    }

    #[test]
    fn corrector_is_linear_in_h(s1 in any::<u64>(), s2 in any::<u64>(), a in -3.0f64..3.0, b in -3.0f64..3.0, y in point(7)) {
        let (p, _) = profile();
        let (h1, h2) = (form(7, s1), form(7, s2));
        let sum = TracelessSymmetricForm::new(7, h1.entries() * a + h2.entries() * b).unwrap();
        let lhs = assemble_v(&sum, p, &y).unwrap();
        let rhs = a * assemble_v(&h1, p, &y).unwrap() + b * assemble_v(&h2, p, &y).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (lhs.abs() + rhs.abs()).max(1e-300));
    }

    #[test]
    fn phi_is_nonpositive_and_quadratic(seed in any::<u64>(), c in 0.1f64..10.0) {
        let (_, red) = profile();
        let h = form(7, seed);
        let unit = pairing_from_reduced(&TracelessSymmetricForm::diagonal(7, &[1.0, -1.0]).unwrap(), red).per_unit_norm;
        let coeffs = energy::coefficients(7, unit).unwrap();
        let hc = h.scaled(c);
        let p1 = energy::phi_from_pairing(&h, pairing_from_reduced(&h, red).direct, &coeffs);
        let pc = energy::phi_from_pairing(&hc, pairing_from_reduced(&hc, red).direct, &coeffs);
        prop_assert!(p1 <= 0.0);
        prop_assert!(pairing_from_reduced(&h, red).direct <= 0.0);
        prop_assert!((pc - c * c * p1).abs() <= 1e-10 * (c * c * p1).abs());
    }

    #[test]
    fn config_round_trips_and_hash_tracks_changes(dr in 1e-3f64..0.5, grading in 0.0f64..6.0, seed in any::<u64>()) {
        let mut c = RunConfig::default_for(7);
        c.grid.dr = dr;
        c.grid.grading = grading;
        c.seeds = vec![seed];
        let back = RunConfig::from_toml_str(&c.to_toml_string().unwrap()).unwrap();
        prop_assert_eq!(&back, &c);
        prop_assert_eq!(back.hash(), c.hash());
        let mut d = c.clone();
        d.seeds = vec![seed.wrapping_add(1)];
        prop_assert_ne!(d.hash(), c.hash());
        let mut e = c.clone();
        e.grid.dr = f64::from_bits(dr.to_bits() + 1);
        prop_assert_ne!(e.hash(), c.hash());
    }
}
