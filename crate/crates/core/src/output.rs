//! Stable text encodings shared by every exporter.
//!
//! Floats are written with 17 significant digits so they re-parse to the same
//! `f64`; JSON objects are emitted with sorted keys on a single line.

use std::io::Write;

use serde::Serialize;

use crate::error::Result;

/// 17 significant digits, positional for moderate magnitudes, scientific otherwise.
pub fn format_float(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return if x.is_nan() {
            "NaN".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let magnitude = x.abs();
    if !(1e-4..1e16).contains(&magnitude) {
        return format!("{x:.16e}");
    }
    let exponent = magnitude.log10().floor() as i32;
    let decimals = (16 - exponent).max(0) as usize;
    format!("{x:.decimals$}")
}

/// Single-line JSON with object keys in sorted order.
pub fn to_sorted_json<T: Serialize>(value: &T) -> Result<String> {
    // `serde_json::Value` keeps objects in a BTreeMap, which sorts the keys.
    let tree = serde_json::to_value(value)?;
    Ok(serde_json::to_string(&tree)?)
}

/// Writes one LF-terminated CSV record. Fields must not need quoting.
pub fn write_record<W: Write + ?Sized>(out: &mut W, fields: &[String]) -> Result<()> {
    out.write_all(fields.join(",").as_bytes())?;
    out.write_all(b"\n")?;
    Ok(())
}

/// Metadata line placed above a CSV header: `# {json}`.
pub fn write_comment_json<W: Write + ?Sized, T: Serialize>(out: &mut W, value: &T) -> Result<()> {
    writeln!(out, "# {}", to_sorted_json(value)?)?;
    Ok(())
}
