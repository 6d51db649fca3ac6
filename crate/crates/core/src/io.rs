//! Shared text formatting for CSV artifacts.

/// Seventeen significant digits: enough for an exact `f64` round trip.
pub fn fmt_f64(v: f64) -> String {
    if v == 0.0 {
        // Normalise -0.0 so that symmetric curves print identically.
        return format!("{:.16e}", 0.0_f64);
    }
    format!("{v:.16e}")
}

pub(crate) fn parse_f64(field: &str, line: usize) -> crate::Result<f64> {
    field
        .trim()
        .parse::<f64>()
        .map_err(|e| crate::Error::Format(format!("line {line}: cannot parse '{field}' as a number: {e}")))
}
