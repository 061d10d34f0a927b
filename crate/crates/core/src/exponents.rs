//! Exact bookkeeping of the trace-space exponent `s_eps` and of the
//! regularity exponents `(q, r)` for the Robin problem solved by `i*`.
//!
//! Everything is carried in arbitrary-precision rationals so that the two
//! defining identities can be asserted with `==`.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::Serialize;

use crate::error::{Error, Result};

fn int(v: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(v))
}

/// Parses `P/Q`, an integer, a plain decimal (`0.001`) or a decimal in
/// scientific notation (`1e-3`) into an exact rational.
pub fn parse_rational(s: &str) -> Result<BigRational> {
    let s = s.trim();
    let bad = || Error::InvalidArgument(format!("not a rational number: {s:?}"));
    if let Some((p, q)) = s.split_once('/') {
        let p: BigInt = p.trim().parse().map_err(|_| bad())?;
        let q: BigInt = q.trim().parse().map_err(|_| bad())?;
        if q.is_zero() {
            return Err(bad());
        }
        return Ok(BigRational::new(p, q));
    }
    let (mantissa, exp) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], s[i + 1..].parse::<i32>().map_err(|_| bad())?),
        None => (s, 0),
    };
    let (neg, mantissa) = match mantissa.strip_prefix('-') {
        Some(m) => (true, m),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (whole, frac) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    if whole.is_empty() && frac.is_empty() {
        return Err(bad());
    }
    if !whole.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let digits: BigInt = format!("{whole}{frac}").parse().map_err(|_| bad())?;
    let scale = exp - frac.len() as i32;
    let ten = BigInt::from(10);
    let mut value = BigRational::from_integer(digits);
    if scale >= 0 {
        value *= BigRational::from_integer(num_traits::pow(ten, scale as usize));
    } else {
        value /= BigRational::from_integer(num_traits::pow(ten, (-scale) as usize));
    }
    Ok(if neg { -value } else { value })
}

/// Renders a rational as `p/q` (or `p` when integral).
pub fn fmt_rational(x: &BigRational) -> String {
    if x.is_integer() {
        x.numer().to_string()
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}

fn to_f64(x: &BigRational) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// Sobolev trace exponent and the matching regularity exponents.
#[derive(Debug, Clone, PartialEq)]
pub struct SobolevExponents {
    pub n: u32,
    pub eps: BigRational,
    pub s_eps: BigRational,
    pub q: BigRational,
    pub r: BigRational,
}

impl SobolevExponents {
    /// Left-hand side of the first identity, `(n-1) q / (n - 2q)`.
    pub fn first_identity_lhs(&self) -> BigRational {
        let n = int(self.n as i64);
        (&n - int(1)) * &self.q / (&n - int(2) * &self.q)
    }

    /// `(n-1) q / (n - q) + r`.
    pub fn second_identity_lhs(&self) -> BigRational {
        let n = int(self.n as i64);
        (&n - int(1)) * &self.q / (&n - &self.q) + &self.r
    }

    /// `(2(n-1) + n(n-2) eps) / (n + (n-2) eps)`, the Lebesgue exponent that
    /// `f_eps(u)` lands in when `u` lies in `L^{s_eps}`.
    pub fn second_identity_rhs(&self) -> BigRational {
        let n = int(self.n as i64);
        let nm2 = &n - int(2);
        (int(2) * (&n - int(1)) + &n * &nm2 * &self.eps) / (&n + &nm2 * &self.eps)
    }

    /// True iff both identities hold exactly.
    pub fn identities_hold(&self) -> bool {
        self.first_identity_lhs() == self.s_eps && self.second_identity_lhs() == self.second_identity_rhs()
    }
}

/// Closed-form exponents for dimension `n` and supercriticality `eps`.
pub fn exponents_for(n: u32, eps: &BigRational) -> Result<SobolevExponents> {
    if n < 3 {
        return Err(Error::InvalidArgument(format!("dimension n = {n} must be >= 3")));
    }
    if eps.is_negative() {
        return Err(Error::InvalidArgument(format!("eps = {} must be >= 0", fmt_rational(eps))));
    }
    let nn = int(n as i64);
    let one = int(1);
    let two = int(2);
    let nm1 = &nn - &one;
    let nm2 = &nn - &two;
    let k = &nm2 / &nm1 * eps;

    let s_eps = &two * &nm1 / &nm2 + &nn * eps;
    let q = (&two * &nn + &nn * &nn * &k) / (&nn + &two + &two * &nn * &k);
    let numer = &two * &nm1 + &nn * &nm2 * eps;
    let r = &numer / (&nn + &nm2 * eps) - &numer / (&nn + &nm2 * (&nn / &nm1) * eps);

    if q >= &nn / &two {
        return Err(Error::ExponentRange(format!(
            "q = {} >= n/2 for n = {n}, eps = {}",
            fmt_rational(&q),
            fmt_rational(eps)
        )));
    }
    Ok(SobolevExponents {
        n,
        eps: eps.clone(),
        s_eps,
        q,
        r,
    })
}

/// One inequality of the admissibility check together with its margin.
#[derive(Debug, Clone, Serialize)]
pub struct Margin {
    pub inequality: &'static str,
    pub margin: String,
    pub margin_f64: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct AdmissibilityReport {
    pub n: u32,
    pub eps: String,
    pub admissible: bool,
    /// Set when eps = 0: r = 0 is accepted as the critical base point.
    pub critical_boundary: bool,
    pub margins: Vec<Margin>,
}

/// Checks `2n/(n+2) <= q < n/2` and `r > 0` (or `r = 0` when `eps = 0`).
pub fn check_admissible(e: &SobolevExponents) -> AdmissibilityReport {
    let n = int(e.n as i64);
    let lower = &e.q - int(2) * &n / (&n + int(2));
    let upper = &n / int(2) - &e.q;
    let critical = e.eps.is_zero();
    let r_ok = e.r.is_positive() || (critical && e.r.is_zero());

    let margin = |inequality, m: &BigRational, holds| Margin {
        inequality,
        margin: fmt_rational(m),
        margin_f64: to_f64(m),
        holds,
    };
    let margins = vec![
        margin("q >= 2n/(n+2)", &lower, !lower.is_negative()),
        margin("q < n/2", &upper, upper.is_positive()),
        margin("r > 0", &e.r, r_ok),
    ];
    AdmissibilityReport {
        n: e.n,
        eps: fmt_rational(&e.eps),
        admissible: margins.iter().all(|m| m.holds),
        critical_boundary: critical,
        margins,
    }
}

impl SobolevExponents {
    pub fn s_eps_f64(&self) -> f64 {
        to_f64(&self.s_eps)
    }
    pub fn q_f64(&self) -> f64 {
        to_f64(&self.q)
    }
    pub fn r_f64(&self) -> f64 {
        to_f64(&self.r)
    }
}

/// `10^{-k}` as an exact rational.
pub fn ten_to_minus(k: u32) -> BigRational {
    BigRational::new(One::one(), num_traits::pow(BigInt::from(10), k as usize))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rat(p: i64, q: i64) -> BigRational {
        BigRational::new(BigInt::from(p), BigInt::from(q))
    }

    #[test]
    fn critical_case_n7() {
        let e = exponents_for(7, &rat(0, 1)).unwrap();
        assert_eq!(e.s_eps, rat(12, 5));
        assert_eq!(e.q, rat(14, 9));
        assert!(e.r.is_zero());
        assert!(e.identities_hold());
    }

    #[test]
    fn critical_case_n10() {
        let e = exponents_for(10, &rat(0, 1)).unwrap();
        assert_eq!(e.s_eps, rat(9, 4));
        assert_eq!(e.q, rat(5, 3));
        assert!(e.r.is_zero());
    }

    #[test]
    fn n7_eps_one_hundredth_matches_closed_form() {
        let eps = rat(1, 100);
        let e = exponents_for(7, &eps).unwrap();
        let five_sixths = rat(5, 6);
        let expected = (int(14) + int(49) * &five_sixths / int(100)) / (int(9) + int(14) * &five_sixths / int(100));
        assert_eq!(e.q, expected);
        // Substitute back into both identities independently of the struct helpers.
        let q = &e.q;
        assert_eq!(int(6) * q / (int(7) - int(2) * q), rat(12, 5) + int(7) * &eps);
        let rhs = (int(12) + int(35) * &eps) / (int(7) + int(5) * &eps);
        assert_eq!(int(6) * q / (int(7) - q) + &e.r, rhs);
    }

    #[test]
    fn admissibility_examples() {
        let rep = check_admissible(&exponents_for(7, &rat(1, 100)).unwrap());
        assert!(rep.admissible);
        assert!(!rep.critical_boundary);

        let rep = check_admissible(&exponents_for(7, &rat(0, 1)).unwrap());
        assert!(rep.admissible);
        assert!(rep.critical_boundary);
        assert_eq!(rep.margins[2].margin, "0");
    }

    #[test]
    fn large_eps_stays_below_half_n() {
        // q increases monotonically towards n/2 but never reaches it for n >= 3.
        let e = exponents_for(7, &rat(10, 1)).unwrap();
        assert!(e.q_f64() < 3.5 && e.q_f64() > 3.3);
        assert!(check_admissible(&e).admissible);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(exponents_for(2, &rat(0, 1)).is_err());
        assert!(exponents_for(7, &rat(-1, 100)).is_err());
    }

    #[test]
    fn parses_rationals() {
        assert_eq!(parse_rational("1/100").unwrap(), rat(1, 100));
        assert_eq!(parse_rational("0.001").unwrap(), rat(1, 1000));
        assert_eq!(parse_rational("1e-3").unwrap(), rat(1, 1000));
        assert_eq!(parse_rational("2.5E1").unwrap(), rat(25, 1));
        assert_eq!(parse_rational("3").unwrap(), rat(3, 1));
        assert_eq!(parse_rational("-1/4").unwrap(), rat(-1, 4));
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("abc").is_err());
    }

    #[test]
    fn f64_view_of_tiny_rationals() {
        let e = exponents_for(30, &ten_to_minus(6)).unwrap();
        assert!((e.s_eps_f64() - (58.0 / 28.0 + 30e-6)).abs() < 1e-14);
        assert!(e.r_f64() > 0.0 && e.r_f64() < 1e-5);
    }
}
