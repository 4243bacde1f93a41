//! Canonical serialization of run outputs: JSON with sorted keys and fixed
//! 17-significant-digit float formatting, and plain CSV with the same number
//! format. Identical inputs produce byte-identical files.

use serde::Serialize;
use std::io::Write;
use std::path::Path;

pub const SCHEMA_VERSION: &str = "1";

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("schema violation: {0}")]
    Schema(String),
    #[error("serialization failed: {0}")]
    Serialize(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// 17 significant digits in scientific notation: enough to round-trip any
/// f64 exactly through parsing.
pub fn format_float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        // JSON has no non-finite numbers
        "null".to_string()
    }
}

fn write_value(value: &serde_json::Value, out: &mut String) {
    match value {
        serde_json::Value::Null => out.push_str("null"),
        serde_json::Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        serde_json::Value::Number(n) => {
            if let Some(f) = n.as_f64() {
                if n.is_f64() {
                    out.push_str(&format_float(f));
                } else {
                    // integers print as integers
                    out.push_str(&n.to_string());
                }
            } else {
                out.push_str(&n.to_string());
            }
        }
        serde_json::Value::String(s) => {
            out.push_str(&serde_json::to_string(s).expect("string serializes"));
        }
        serde_json::Value::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_value(item, out);
            }
            out.push(']');
        }
        serde_json::Value::Object(map) => {
            // serde_json's default map is BTree-backed: keys iterate sorted
            out.push('{');
            for (i, (k, v)) in map.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&serde_json::to_string(k).expect("key serializes"));
                out.push(':');
                write_value(v, out);
            }
            out.push('}');
        }
    }
}

/// Canonical JSON text of any serializable value.
pub fn canonical_json<T: Serialize>(value: &T) -> Result<String, ReportError> {
    let v = serde_json::to_value(value).map_err(|e| ReportError::Serialize(e.to_string()))?;
    let mut out = String::new();
    write_value(&v, &mut out);
    out.push('\n');
    Ok(out)
}

const CHECK_KINDS: [&str; 3] = ["transversality-property", "d-regular", "d_h-regular"];

/// Reject reports missing the stable schema fields before anything touches
/// disk.
pub fn validate_report(value: &serde_json::Value) -> Result<(), ReportError> {
    let obj = value
        .as_object()
        .ok_or_else(|| ReportError::Schema("report must be a JSON object".into()))?;
    for key in ["kind", "seed", "version"] {
        if !obj.contains_key(key) {
            return Err(ReportError::Schema(format!("missing required field '{key}'")));
        }
    }
    let kind = obj["kind"].as_str().unwrap_or_default();
    if CHECK_KINDS.contains(&kind) {
        for key in [
            "germ",
            "epsilon",
            "delta",
            "alpha",
            "eta",
            "tolerance_profile",
            "samples",
            "pass",
            "failures",
        ] {
            if !obj.contains_key(key) {
                return Err(ReportError::Schema(format!(
                    "{kind} report missing required field '{key}'"
                )));
            }
        }
    }
    Ok(())
}

/// Validate and write a report as canonical JSON.
pub fn write_report<T: Serialize>(report: &T, path: &Path) -> Result<(), ReportError> {
    let value = serde_json::to_value(report).map_err(|e| ReportError::Serialize(e.to_string()))?;
    validate_report(&value)?;
    let mut out = String::new();
    write_value(&value, &mut out);
    out.push('\n');
    let mut file = std::fs::File::create(path)?;
    file.write_all(out.as_bytes())?;
    Ok(())
}

/// One CSV line of floats in canonical formatting.
pub fn csv_line(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| format_float(*v))
        .collect::<Vec<_>>()
        .join(",")
}

/// Write a CSV file: header line, then one canonical line per row.
pub fn write_csv(path: &Path, header: &str, rows: &[Vec<f64>]) -> Result<(), ReportError> {
    let mut out = String::new();
    out.push_str(header);
    out.push('\n');
    for row in rows {
        out.push_str(&csv_line(row));
        out.push('\n');
    }
    let mut file = std::fs::File::create(path)?;
    file.write_all(out.as_bytes())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn floats_round_trip_through_the_canonical_format() {
        for x in [
            0.1,
            -0.0,
            1.0 / 3.0,
            std::f64::consts::PI,
            1e-300,
            -2.5e17,
            f64::MIN_POSITIVE,
        ] {
            let s = format_float(x);
            let back: f64 = s.parse().unwrap();
            assert_eq!(back.to_bits(), x.to_bits(), "{x} -> {s} -> {back}");
        }
    }

    #[test]
    fn keys_are_sorted_and_output_is_stable() {
        let v = json!({"zeta": 1, "alpha": 2.5, "mid": [1.5, 2]});
        let a = canonical_json(&v).unwrap();
        let b = canonical_json(&v).unwrap();
        assert_eq!(a, b);
        let ka = a.find("\"alpha\"").unwrap();
        let km = a.find("\"mid\"").unwrap();
        let kz = a.find("\"zeta\"").unwrap();
        assert!(ka < km && km < kz);
    }

    #[test]
    fn missing_seed_is_rejected() {
        let v = json!({"kind": "d-regular", "version": "1"});
        assert!(validate_report(&v).is_err());
        let v = json!({"kind": "demo", "version": "1", "seed": 7});
        assert!(validate_report(&v).is_ok());
    }

    #[test]
    fn check_reports_need_their_full_schema() {
        let v = json!({"kind": "d-regular", "version": "1", "seed": 7});
        let err = validate_report(&v).unwrap_err();
        assert!(err.to_string().contains("missing required field"));
    }

    #[test]
    fn csv_line_uses_canonical_floats() {
        let line = csv_line(&[1.0, 0.5]);
        assert_eq!(line, "1.0000000000000000e0,5.0000000000000000e-1");
    }
}
