//! Canonical JSON output: identical values always serialize to identical
//! bytes, so reruns and thread-count changes are diffable.

use crate::error::CliError;
use serde::Serialize;
use std::path::Path;

/// Serializes through `serde_json::Value`, whose object maps are ordered,
/// so keys come out sorted regardless of struct field order; floats use
/// the shortest round-trip decimal. Ends with a newline.
pub fn canonical_json<T: Serialize>(value: &T) -> Result<String, CliError> {
    let value = serde_json::to_value(value)?;
    let mut text = serde_json::to_string_pretty(&value)?;
    text.push('\n');
    Ok(text)
}

/// Writes canonical JSON to the path, or to stdout when no path is given.
pub fn emit_json<T: Serialize>(out: Option<&Path>, value: &T) -> Result<(), CliError> {
    let text = canonical_json(value)?;
    match out {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Serialize)]
    struct Unordered {
        zeta: f64,
        alpha: u32,
    }

    #[test]
    fn keys_are_sorted_and_a_newline_terminates() {
        let text = canonical_json(&Unordered {
            zeta: 0.5,
            alpha: 3,
        })
        .unwrap();
        assert!(text.find("alpha").unwrap() < text.find("zeta").unwrap());
        assert!(text.ends_with('\n'));
    }

    #[test]
    fn equal_values_are_equal_bytes() {
        let a = canonical_json(&vec![0.1f64, 2.0 / 3.0]).unwrap();
        let b = canonical_json(&vec![0.1f64, 2.0 / 3.0]).unwrap();
        assert_eq!(a, b);
    }
}
