//! Flat `key = value` configuration shared by every subcommand.
//!
//! Values come from a config file, from command-line flags (which win), or from documented
//! defaults. Every value remembers where it came from so errors can point at a line.

use std::collections::HashMap;

use crate::constants::ModelParams;
use crate::error::{Error, Result};
use crate::sim::{InitialCondition, SimConfig};

/// One accepted key and its default, if it has one.
#[derive(Debug, Clone, Copy)]
pub struct KeySpec {
    pub key: &'static str,
    pub default: Option<&'static str>,
}

pub const fn required(key: &'static str) -> KeySpec {
    KeySpec { key, default: None }
}

pub const fn optional(key: &'static str, default: &'static str) -> KeySpec {
    KeySpec {
        key,
        default: Some(default),
    }
}

/// `key = value` lines with blank lines and `#` comments skipped. Keys are normalized to
/// `snake_case`; repeated keys are rejected.
pub fn parse_key_values(text: &str) -> Result<Vec<(String, String, usize)>> {
    let mut out: Vec<(String, String, usize)> = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let (k, v) = body
            .split_once('=')
            .ok_or_else(|| Error::config(line, format!("expected `key = value`, got `{body}`")))?;
        let key = k.trim().replace('-', "_");
        if key.is_empty() || !key.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
            return Err(Error::config(line, format!("invalid key `{}`", k.trim())));
        }
        let value = v.trim();
        if value.is_empty() {
            return Err(Error::config(line, format!("missing value for `{key}`")));
        }
        if let Some(first) = seen.insert(key.clone(), line) {
            return Err(Error::config(line, format!("duplicate key `{key}` (first set on line {first})")));
        }
        out.push((key, value.to_string(), line));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
struct Entry {
    key: &'static str,
    value: String,
    /// Config-file line, or 0 for flags and defaults.
    line: usize,
}

/// Validated values for one subcommand, in schema order.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolved {
    entries: Vec<Entry>,
}

impl Resolved {
    /// Merges file entries and flags against `schema`. Unknown file keys are errors.
    pub fn new(schema: &[KeySpec], file: &[(String, String, usize)], flags: &[(&str, Option<String>)]) -> Result<Self> {
        for (k, _, line) in file {
            if !schema.iter().any(|s| s.key == k) {
                let known: Vec<&str> = schema.iter().map(|s| s.key).collect();
                return Err(Error::config(
                    *line,
                    format!("unknown key `{k}` (expected one of: {})", known.join(", ")),
                ));
            }
        }
        let mut entries = Vec::with_capacity(schema.len());
        for spec in schema {
            let flag = flags.iter().find(|(k, _)| *k == spec.key).and_then(|(_, v)| v.clone());
            let from_file = file.iter().find(|(k, _, _)| k == spec.key);
            let (value, line) = match (flag, from_file, spec.default) {
                (Some(v), _, _) => (v, 0),
                (None, Some((_, v, l)), _) => (v.clone(), *l),
                (None, None, Some(d)) => (d.to_string(), 0),
                (None, None, None) => {
                    return Err(Error::config(0, format!("missing required key `{}`", spec.key)));
                }
            };
            entries.push(Entry {
                key: spec.key,
                value,
                line,
            });
        }
        Ok(Resolved { entries })
    }

    fn entry(&self, key: &str) -> &Entry {
        self.entries
            .iter()
            .find(|e| e.key == key)
            .unwrap_or_else(|| panic!("key `{key}` is not in the schema"))
    }

    pub fn raw(&self, key: &str) -> &str {
        &self.entry(key).value
    }

    /// Error attached to `key`, echoing its value.
    pub fn error(&self, key: &str, msg: impl std::fmt::Display) -> Error {
        let e = self.entry(key);
        Error::config(e.line, format!("{key} = {}: {msg}", e.value))
    }

    fn parse<T: std::str::FromStr>(&self, key: &str, what: &str) -> Result<T> {
        self.raw(key).parse().map_err(|_| self.error(key, format!("expected {what}")))
    }

    pub fn f64(&self, key: &str) -> Result<f64> {
        let v: f64 = self.parse(key, "a number")?;
        if !v.is_finite() {
            return Err(self.error(key, "expected a finite number"));
        }
        Ok(v)
    }

    pub fn usize(&self, key: &str) -> Result<usize> {
        self.parse(key, "a nonnegative integer")
    }

    pub fn u64(&self, key: &str) -> Result<u64> {
        self.parse(key, "a nonnegative integer")
    }

    /// Comma-separated numbers.
    pub fn f64_list(&self, key: &str) -> Result<Vec<f64>> {
        self.raw(key)
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| self.error(key, format!("`{}` is not a finite number", t.trim())))
            })
            .collect()
    }

    /// `d`, `s` and `alpha` with their range constraints.
    pub fn model_params(&self) -> Result<ModelParams> {
        let d = self.usize("d")?;
        if d < 2 {
            return Err(self.error("d", "violates d >= 2"));
        }
        let alpha = self.f64("alpha")?;
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(self.error("alpha", "violates 0 < α < 1"));
        }
        let s = self.f64("s")?;
        if s <= 0.0 {
            return Err(self.error("s", "violates s > 0"));
        }
        ModelParams::new(d, s, alpha)
    }

    /// `key=value` pairs separated by spaces, for provenance headers.
    pub fn echo(&self) -> String {
        self.entries
            .iter()
            .map(|e| format!("{}={}", e.key, compact(&e.value)))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

/// Drops blanks after commas and joins the remaining words with `_`.
fn compact(v: &str) -> String {
    let mut out = String::new();
    for w in v.split_whitespace() {
        if !out.is_empty() && !out.ends_with(',') && !w.starts_with(',') {
            out.push('_');
        }
        out.push_str(w);
    }
    out
}

pub const SIMULATE_KEYS: &[KeySpec] = &[
    required("d"),
    required("n_max"),
    required("s"),
    required("alpha"),
    required("nu"),
    required("dt"),
    required("t_final"),
    required("n_paths"),
    optional("seed", "0"),
    required("output_times"),
    required("init"),
];

/// Builds and range-checks a simulation config.
pub fn sim_config(r: &Resolved) -> Result<SimConfig> {
    let params = r.model_params()?;
    if params.s >= 0.5 * params.df() {
        return Err(r.error("s", format!("violates s < d/2 = {}", 0.5 * params.df())));
    }
    let n_max = r.usize("n_max")?;
    if n_max == 0 {
        return Err(r.error("n_max", "violates n_max >= 1"));
    }
    let nu = r.f64("nu")?;
    if nu < 0.0 {
        return Err(r.error("nu", "violates nu >= 0"));
    }
    let dt = r.f64("dt")?;
    if dt <= 0.0 {
        return Err(r.error("dt", "violates dt > 0"));
    }
    let t_final = r.f64("t_final")?;
    if t_final <= 0.0 {
        return Err(r.error("t_final", "violates t_final > 0"));
    }
    let n_paths = r.usize("n_paths")?;
    if n_paths < 2 || n_paths % 2 != 0 {
        return Err(r.error("n_paths", "must be even and >= 2 (paths run in antithetic pairs)"));
    }
    let output_times = r.f64_list("output_times")?;
    if let Some(t) = output_times.iter().find(|t| !(**t >= 0.0 && **t <= t_final)) {
        return Err(r.error("output_times", format!("{t} violates 0 <= t <= t_final = {t_final}")));
    }
    if output_times.windows(2).any(|w| w[1] < w[0]) {
        return Err(r.error("output_times", "must be nondecreasing"));
    }
    let init = parse_init(r, params.d)?;
    Ok(SimConfig {
        params,
        n_max,
        nu,
        dt,
        t_final,
        n_paths,
        seed: r.u64("seed")?,
        output_times,
        init,
    })
}

/// `single_mode k1,k2,...` or `broadband gamma`.
fn parse_init(r: &Resolved, d: usize) -> Result<InitialCondition> {
    let raw = r.raw("init");
    let (kind, rest) = raw.split_once(char::is_whitespace).unwrap_or((raw, ""));
    let rest = rest.trim();
    match kind {
        "single_mode" => {
            let k: Vec<i32> = rest
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|t| !t.is_empty())
                .map(|t| t.parse::<i32>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| r.error("init", "single_mode needs integer components"))?;
            if k.len() != d {
                return Err(r.error("init", format!("single_mode needs {d} components, got {}", k.len())));
            }
            if k.iter().all(|&c| c == 0) {
                return Err(r.error("init", "single_mode needs a nonzero wavevector"));
            }
            Ok(InitialCondition::SingleMode(k))
        }
        "broadband" => {
            let g: f64 = rest
                .parse()
                .ok()
                .filter(|g: &f64| g.is_finite())
                .ok_or_else(|| r.error("init", "broadband needs a spectral exponent gamma"))?;
            Ok(InitialCondition::Broadband(g))
        }
        _ => Err(r.error("init", "expected `single_mode k1,...,kd` or `broadband gamma`")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SCHEMA: &[KeySpec] = &[required("d"), required("s"), required("alpha"), optional("seed", "0")];

    fn resolve(text: &str) -> Result<Resolved> {
        Resolved::new(SCHEMA, &parse_key_values(text)?, &[])
    }

    #[test]
    fn valid_file_with_defaults() {
        let r = resolve("d = 3\ns = 1.25\nalpha = 0.25").unwrap();
        let p = r.model_params().unwrap();
        assert_eq!((p.d, p.s, p.alpha), (3, 1.25, 0.25));
        assert_eq!(r.u64("seed").unwrap(), 0);
        assert_eq!(r.echo(), "d=3 s=1.25 alpha=0.25 seed=0");
    }

    #[test]
    fn range_errors_cite_the_constraint_and_line() {
        let err = resolve("d = 3\ns = 1.25\n\nalpha = 1.5").unwrap().model_params().unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 4") && msg.contains("0 < α < 1"), "{msg}");
    }

    #[test]
    fn missing_unknown_and_duplicate_keys() {
        let msg = resolve("d = 3\nalpha = 0.2").unwrap_err().to_string();
        assert!(msg.contains("`s`"), "{msg}");
        let msg = resolve("d = 3\ns = 1\nalpha = 0.2\nbeta = 1").unwrap_err().to_string();
        assert!(msg.contains("line 4") && msg.contains("unknown key `beta`"), "{msg}");
        let msg = resolve("d = 3\nd = 4").unwrap_err().to_string();
        assert!(msg.contains("line 2") && msg.contains("line 1"), "{msg}");
        let msg = resolve("d 3").unwrap_err().to_string();
        assert!(msg.contains("line 1"), "{msg}");
    }

    #[test]
    fn flags_override_file_values() {
        let file = parse_key_values("d = 3\ns = 1.25\nalpha = 0.25 # comment").unwrap();
        let r = Resolved::new(SCHEMA, &file, &[("alpha", Some("0.3".into())), ("seed", None)]).unwrap();
        assert_eq!(r.f64("alpha").unwrap(), 0.3);
        let err = r.error("alpha", "x");
        assert_eq!(err, Error::config(0, "alpha = 0.3: x"));
    }

    #[test]
    fn simulation_config() {
        let text = "d = 2\nn_max = 4\ns = 0.75\nalpha = 0.5\nnu = 0\ndt = 1e-4\nt_final = 0.01\n\
                    n_paths = 4\noutput_times = 0, 0.005, 0.01\ninit = single_mode 1,2";
        let r = Resolved::new(SIMULATE_KEYS, &parse_key_values(text).unwrap(), &[]).unwrap();
        let c = sim_config(&r).unwrap();
        assert_eq!(c.init, InitialCondition::SingleMode(vec![1, 2]));
        assert_eq!(c.output_times, vec![0.0, 0.005, 0.01]);
        assert!(r.echo().ends_with("output_times=0,0.005,0.01 init=single_mode_1,2"), "{}", r.echo());
        let bad = text.replace("n_paths = 4", "n_paths = 3");
        let r = Resolved::new(SIMULATE_KEYS, &parse_key_values(&bad).unwrap(), &[]).unwrap();
        assert!(sim_config(&r).unwrap_err().to_string().contains("line 8"));
        let bad = text.replace("single_mode 1,2", "broadband x");
        let r = Resolved::new(SIMULATE_KEYS, &parse_key_values(&bad).unwrap(), &[]).unwrap();
        assert!(sim_config(&r).is_err());
    }
}
