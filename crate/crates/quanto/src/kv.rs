//! Flat `key = value` text format used for market config files and run
//! manifests. One pair per line; `#` starts a comment; blank lines ignored.

use crate::error::{Error, Result};

/// Parse the format into ordered pairs. Duplicate keys are an error, as is
/// any line that is not blank, comment, or `key = value`.
pub fn parse(text: &str) -> Result<Vec<(String, String)>> {
    let mut pairs: Vec<(String, String)> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(Error::Config(format!(
                "line {}: expected `key = value`, got `{raw}`",
                idx + 1
            )));
        };
        let key = k.trim().to_string();
        let val = v.trim().to_string();
        if key.is_empty() {
            return Err(Error::Config(format!("line {}: empty key", idx + 1)));
        }
        if pairs.iter().any(|(existing, _)| *existing == key) {
            return Err(Error::Config(format!(
                "line {}: duplicate key `{key}`",
                idx + 1
            )));
        }
        pairs.push((key, val));
    }
    Ok(pairs)
}

/// Render pairs back to the text format, one `key = value` per line.
pub fn render(pairs: &[(String, String)]) -> String {
    let mut out = String::new();
    for (k, v) in pairs {
        out.push_str(k);
        out.push_str(" = ");
        out.push_str(v);
        out.push('\n');
    }
    out
}
