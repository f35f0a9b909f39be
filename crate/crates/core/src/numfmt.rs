//! Round-trip-safe number formatting for every file the crate writes, and
//! the matching header parsing.

use crate::meshes::LogMeshSpec;

/// Scientific notation with 17 significant digits.
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

/// Fixed two-decimal exponent label used in artifact names, e.g. `0.50`.
pub fn gamma_label(gamma: f64) -> String {
    format!("{gamma:.2}")
}

/// `key=value` pairs of a whitespace-separated header line.
pub(crate) fn header_fields(header: &str) -> Vec<(&str, &str)> {
    header
        .split_whitespace()
        .filter_map(|kv| kv.split_once('='))
        .collect()
}

/// Inverse of the `log(lo,hi,ppd)` mesh display.
pub(crate) fn parse_log_mesh(text: &str) -> Option<LogMeshSpec> {
    let inner = text.strip_prefix("log(")?.strip_suffix(')')?;
    let mut parts = inner.split(',');
    let lo = parts.next()?.parse().ok()?;
    let hi = parts.next()?.parse().ok()?;
    let points_per_decade = parts.next()?.parse().ok()?;
    if parts.next().is_some() {
        return None;
    }
    Some(LogMeshSpec {
        lo,
        hi,
        points_per_decade,
    })
}
