//! Deterministic text output: provenance headers, CSV and flat JSON, atomic file writes.

use std::io::Write;
use std::path::Path;

use serde_json::{Map, Value};

use crate::error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// `klab <version> <command> seed=<seed> key=value ...`.
pub fn provenance(command: &str, echo: &str) -> String {
    format!("klab {VERSION} {command} {echo}")
}

/// Shortest round-trip decimal, switching to exponent form for very large or small values.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x == 0.0 {
        "0".into()
    } else if (1e-4..1e15).contains(&x.abs()) || x.is_infinite() {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

/// CSV text with a `#` provenance line, a column header and one line per row.
pub fn csv(header: &str, columns: &[&str], rows: &[Vec<f64>]) -> String {
    let mut out = format!("# {header}\n{}\n", columns.join(","));
    for row in rows {
        out.push_str(&row.iter().map(|v| num(*v)).collect::<Vec<_>>().join(","));
        out.push('\n');
    }
    out
}

/// Flattens nested objects into `parent_child` keys. Arrays of scalars are kept.
pub fn flatten(value: Value) -> Map<String, Value> {
    fn go(prefix: &str, v: Value, out: &mut Map<String, Value>) {
        match v {
            Value::Object(m) => {
                for (k, v) in m {
                    let key = if prefix.is_empty() { k } else { format!("{prefix}_{k}") };
                    go(&key, v, out);
                }
            }
            other => {
                out.insert(prefix.to_string(), other);
            }
        }
    }
    let mut out = Map::new();
    go("", value, &mut out);
    out
}

/// Pretty JSON of `fields` with the provenance line under the key `provenance`.
pub fn json(header: &str, mut fields: Map<String, Value>) -> Result<String> {
    fields.insert("provenance".into(), Value::String(header.to_string()));
    let mut s = serde_json::to_string_pretty(&Value::Object(fields)).map_err(|e| Error::Io(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

/// Writes through a temporary file in the target directory, then renames it into place.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .map_err(|e| Error::Io(format!("cannot create a temporary file in {}: {e}", dir.display())))?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path)
        .map_err(|e| Error::Io(format!("cannot write {}: {}", path.display(), e.error)))?;
    Ok(())
}

/// Writes to `path`, or to standard output when absent.
pub fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => atomic_write(p, text.as_bytes()),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()?;
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn numbers_round_trip() {
        for x in [0.0, 1.25, -3.5e-9, 1e300, 123456.789, f64::MIN_POSITIVE] {
            assert_eq!(num(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(num(0.5), "0.5");
        assert_eq!(num(1e-7), "1e-7");
    }

    #[test]
    fn flatten_nested_objects() {
        let m = flatten(json!({"params": {"d": 3, "s": 1.0}, "x": [1, 2], "y": null}));
        assert_eq!(m.len(), 4);
        assert_eq!(m["params_d"], json!(3));
        assert_eq!(m["x"], json!([1, 2]));
    }

    #[test]
    fn atomic_write_replaces_contents() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("out.csv");
        atomic_write(&p, b"one").unwrap();
        atomic_write(&p, b"two").unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "two");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
