//! Number formatting for CSV cells.
//!
//! Shortest decimal that parses back to the same `f64`; scientific notation
//! when `|x| < 1e-3` or `|x| >= 1e6`, plain decimal otherwise. Zero is `0`.

pub fn format_number(x: f64) -> String {
    if x == 0.0 {
        return String::from("0");
    }
    if x.is_nan() {
        return String::from("NaN");
    }
    if x.is_infinite() {
        return String::from(if x > 0.0 { "inf" } else { "-inf" });
    }
    let a = x.abs();
    if a < 1e-3 || a >= 1e6 {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}

pub fn parse_number(s: &str) -> Option<f64> {
    match s.trim() {
        "inf" => Some(f64::INFINITY),
        "-inf" => Some(f64::NEG_INFINITY),
        "NaN" => Some(f64::NAN),
        // `f64::from_str` also takes words like "infinity"; stay strict.
        t if !t.is_empty() && t.bytes().all(|b| b.is_ascii_digit() || b"+-.eE".contains(&b)) => t.parse().ok(),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn notation_switches_at_thresholds() {
        assert_eq!(format_number(0.0), "0");
        assert_eq!(format_number(-0.0), "0");
        assert_eq!(format_number(0.001), "0.001");
        assert_eq!(format_number(0.000999), "9.99e-4");
        assert_eq!(format_number(999999.5), "999999.5");
        assert_eq!(format_number(1e6), "1e6");
        assert_eq!(format_number(4.55e17), "4.55e17");
        assert_eq!(format_number(36.0), "36");
        assert_eq!(format_number(0.1), "0.1");
        assert_eq!(format_number(-2.5e-7), "-2.5e-7");
        assert_eq!(format_number(f64::INFINITY), "inf");
        assert_eq!(format_number(f64::NEG_INFINITY), "-inf");
        assert_eq!(format_number(f64::NAN), "NaN");
    }

    #[test]
    fn parse_rejects_words() {
        assert_eq!(parse_number("n/a"), None);
        assert_eq!(parse_number("true"), None);
        assert_eq!(parse_number("infinity"), None);
        assert_eq!(parse_number("1e10"), Some(1e10));
        assert_eq!(parse_number("-inf"), Some(f64::NEG_INFINITY));
        assert!(parse_number("NaN").unwrap().is_nan());
    }

    #[test]
    fn round_trips() {
        for &x in &[1.0 / 3.0, 2.0f64.sqrt() * 1e-9, 6.02e23, -123.456, 5e-324, f64::MAX, 0.3] {
            assert_eq!(parse_number(&format_number(x)), Some(x));
        }
    }
}
