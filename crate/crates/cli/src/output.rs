//! Locale-free CSV formatting.

/// `x` with 12 significant digits, fixed notation for moderate magnitudes
/// and scientific otherwise, trailing zeros removed.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.11e}", x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..12).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        trim(&format!("{:.*}", decimals, x))
    } else {
        format!("{}e{}", trim(mantissa), exp)
    }
}

fn trim(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

/// Inclusive grid `start:stop:step`.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>, String> {
    let parts: Vec<&str> = spec.split(':').collect();
    let [a, b, h] = parts.as_slice() else {
        return Err(format!("grid '{spec}' must look like start:stop:step"));
    };
    let value = |s: &str| s.trim().parse::<f64>().map_err(|_| format!("grid '{spec}': '{s}' is not a number"));
    let (a, b, h) = (value(a)?, value(b)?, value(h)?);
    if !(a.is_finite() && b.is_finite() && h.is_finite()) || h <= 0.0 || b < a {
        return Err(format!("grid '{spec}' needs finite start <= stop and a positive step"));
    }
    let steps = ((b - a) / h + 1e-9).floor();
    if steps > 1e7 {
        return Err(format!("grid '{spec}' has too many points"));
    }
    Ok((0..=steps as u64).map(|k| a + k as f64 * h).collect())
}

/// Comma-separated list of reals.
pub fn parse_list(spec: &str) -> Result<Vec<f64>, String> {
    spec.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| s.trim().parse::<f64>().map_err(|_| format!("'{s}' is not a number")))
        .collect()
}
