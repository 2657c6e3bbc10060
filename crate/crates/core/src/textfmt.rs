//! Number and column formatting shared by the text reports.
//!
//! The rules mirror R's default printing closely enough that report
//! blocks line up the way the reference output does: fixed decimals for
//! probability tables, significant digits for quantiles, and scientific
//! notation with a two-digit exponent for standard errors.

/// `x` with `dp` decimal places.
pub(crate) fn fixed(x: f64, dp: usize) -> String {
    format!("{x:.dp$}")
}

/// `x` with `digits` significant digits, in plain decimal notation when
/// the exponent is moderate and scientific notation otherwise.
pub(crate) fn sig(x: f64, digits: usize) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    let exp = x.abs().log10().floor() as i32;
    if !(-5..=9).contains(&exp) {
        return sci(x, digits);
    }
    let dp = (digits as i32 - 1 - exp).max(0) as usize;
    format!("{x:.dp$}")
}

/// `x` in scientific notation with `digits` significant digits and a
/// sign-and-two-digit exponent, e.g. `6.845e-05`.
pub(crate) fn sci(x: f64, digits: usize) -> String {
    if x == 0.0 {
        return "0e+00".to_string();
    }
    let raw = format!("{:.*e}", digits.saturating_sub(1), x);
    let (mantissa, exp) = raw.split_once('e').expect("{:e} always contains e");
    let exp: i32 = exp.parse().expect("exponent is an integer");
    format!("{mantissa}e{}{:02}", if exp < 0 { '-' } else { '+' }, exp.abs())
}

/// `s` right-aligned in a field of `width` characters.
pub(crate) fn pad_left(s: &str, width: usize) -> String {
    format!("{s:>width$}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixed_decimals() {
        assert_eq!(fixed(0.151035271, 6), "0.151035");
        assert_eq!(fixed(2.2916666, 2), "2.29");
        assert_eq!(fixed(-1.5, 0), "-2");
    }

    #[test]
    fn significant_digits_switch_notation_when_tiny() {
        assert_eq!(sig(0.3487387, 7), "0.3487387");
        assert_eq!(sig(0.017400142, 7), "0.01740014");
        assert_eq!(sig(123.456789, 7), "123.4568");
        assert_eq!(sig(3.545035e-7, 7), "3.545035e-07");
        assert_eq!(sig(0.0, 7), "0");
    }

    #[test]
    fn scientific_uses_two_digit_exponent() {
        assert_eq!(sci(6.845e-5, 4), "6.845e-05");
        assert_eq!(sci(0.013689, 4), "1.369e-02");
        assert_eq!(sci(-15.0, 4), "-1.500e+01");
        assert_eq!(sci(9.9999e-5, 2), "1.0e-04");
    }

    #[test]
    fn padding() {
        assert_eq!(pad_left("0.5", 6), "   0.5");
    }
}
