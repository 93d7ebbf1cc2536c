//! Number rendering for the text outputs.

/// Renders `v` with `sig` significant digits in the style of C's `%g`:
/// fixed notation for exponents in `[-4, sig)`, scientific otherwise,
/// trailing zeros trimmed. Non-finite values render as `nan`, `inf`, `-inf`.
pub fn fmt_sig(v: f64, sig: usize) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    let sig = sig.max(1);
    // Rounding to `sig` digits first fixes the exponent (9.999995 -> 1e1).
    let sci = format!("{:.*e}", sig - 1, v);
    let (mantissa, exp) = sci.split_once('e').expect("exponent marker");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= sig as i32 {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (sig as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{v:.decimals$}")).to_string()
    }
}

/// Six significant digits.
pub fn g6(v: f64) -> String {
    fmt_sig(v, 6)
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}
