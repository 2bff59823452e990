//! Number formatting for delimited outputs.
//!
//! Reals are written like C's `%.17g`, which is enough digits for every `f64`
//! to parse back to the identical value. The `ADOPTION_PATHS_DIGITS`
//! environment variable lowers (or raises, up to 17) the number of significant
//! digits.

use std::sync::OnceLock;

pub const DIGITS_ENV: &str = "ADOPTION_PATHS_DIGITS";
pub const DEFAULT_DIGITS: usize = 17;

fn digits() -> usize {
    static DIGITS: OnceLock<usize> = OnceLock::new();
    *DIGITS.get_or_init(|| {
        std::env::var(DIGITS_ENV)
            .ok()
            .and_then(|v| v.trim().parse::<usize>().ok())
            .filter(|d| (1..=DEFAULT_DIGITS).contains(d))
            .unwrap_or(DEFAULT_DIGITS)
    })
}

/// Formats `x` with the configured number of significant digits.
pub fn fmt_real(x: f64) -> String {
    fmt_real_with(x, digits())
}

/// `%.{digits}g` formatting.
pub fn fmt_real_with(x: f64, digits: usize) -> String {
    if x.is_nan() {
        return "NaN".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() {
            "-0".into()
        } else {
            "0".into()
        };
    }
    let digits = digits.max(1);
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= digits as i32 {
        format!("{}e{}", trim_fraction(mantissa), exp)
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim_fraction(&format!("{:.*}", decimals, x)).to_string()
    }
}

fn trim_fraction(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Parses a real written by [`fmt_real`].
pub fn parse_real(s: &str) -> Option<f64> {
    match s.trim() {
        "NaN" => Some(f64::NAN),
        "inf" => Some(f64::INFINITY),
        "-inf" => Some(f64::NEG_INFINITY),
        other => other.parse().ok(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn general_format() {
        assert_eq!(fmt_real_with(100.0, 17), "100");
        assert_eq!(fmt_real_with(0.1, 17), "0.10000000000000001");
        assert_eq!(fmt_real_with(1.0 / 3.0, 17), "0.33333333333333331");
        assert_eq!(fmt_real_with(1.5e-7, 17), "1.4999999999999999e-7");
        assert_eq!(fmt_real_with(2.5e20, 17), "2.5e20");
        assert_eq!(fmt_real_with(0.0, 17), "0");
        assert_eq!(fmt_real_with(-2.0, 17), "-2");
        assert_eq!(fmt_real_with(116.66666666666667, 6), "116.667");
    }

    proptest! {
        #[test]
        fn seventeen_digits_round_trip(x in proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO) {
            let s = fmt_real_with(x, 17);
            prop_assert_eq!(parse_real(&s).unwrap().to_bits(), x.to_bits());
        }
    }
}
