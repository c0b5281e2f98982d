//! Comparison checks, input digests and output writers.

use std::io::Write;
use std::path::Path;

use anyhow::Context;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

/// How a computed value is compared to its reference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Criterion {
    /// `|value − reference| ≤ bound`.
    Absolute { bound: f64 },
    /// `|value − reference| ≤ bound·|reference|`.
    Relative { bound: f64 },
    /// `|value − reference| ≤ bound·stderr`.
    Sigma { bound: f64, stderr: f64 },
    /// Relative bound and sigma bound together.
    RelativeAndSigma { rel: f64, sigma: f64, stderr: f64 },
}

/// One pass/fail comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub reference: f64,
    pub criterion: Criterion,
    /// Absolute deviation, or its ratio to the standard error for sigma bounds.
    pub deviation: f64,
    pub passed: bool,
}

impl Check {
    pub fn new(name: impl Into<String>, value: f64, reference: f64, criterion: Criterion) -> Self {
        let err = (value - reference).abs();
        let sigmas = |stderr: f64| if err == 0.0 { 0.0 } else { err / stderr };
        let (deviation, passed) = match criterion {
            Criterion::Absolute { bound } => (err, err <= bound),
            Criterion::Relative { bound } => (err, err <= bound * reference.abs()),
            Criterion::Sigma { bound, stderr } => (sigmas(stderr), sigmas(stderr) <= bound),
            Criterion::RelativeAndSigma { rel, sigma, stderr } => {
                (sigmas(stderr), sigmas(stderr) <= sigma && err <= rel * reference.abs())
            }
        };
        Check { name: name.into(), value, reference, criterion, deviation, passed: passed && value.is_finite() }
    }

    /// A check on a boolean condition, recorded as 1 against 1.
    pub fn flag(name: impl Into<String>, ok: bool) -> Self {
        Check::new(name, if ok { 1.0 } else { 0.0 }, 1.0, Criterion::Absolute { bound: 0.0 })
    }

    /// One-line human summary.
    pub fn line(&self) -> String {
        let bound = match self.criterion {
            Criterion::Absolute { bound } => format!("|d| <= {bound:e}"),
            Criterion::Relative { bound } => format!("|d|/|ref| <= {bound:e}"),
            Criterion::Sigma { bound, .. } => format!("{:.2} sigma <= {bound}", self.deviation),
            Criterion::RelativeAndSigma { rel, sigma, .. } => {
                format!("{:.2} sigma <= {sigma}, |d|/|ref| <= {rel:e}", self.deviation)
            }
        };
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        format!("{verdict} {}: {:.10e} vs {:.10e} ({bound})", self.name, self.value, self.reference)
    }
}

/// Hex SHA-256 of the canonical JSON form of `inputs`.
pub fn digest<T: Serialize>(inputs: &T) -> String {
    let canonical = serde_json::to_vec(&serde_json::to_value(inputs).expect("inputs serialize"))
        .expect("JSON values serialize");
    hex::encode(Sha256::digest(canonical))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    /// One pretty-printed JSON document.
    #[default]
    Json,
    /// One flat row per line, as JSON.
    Jsonl,
    /// One flat row per line, as CSV with a header.
    Csv,
}

/// Result of a command: a JSON document plus its flat table form.
#[derive(Debug, Clone, PartialEq)]
pub struct Output {
    pub document: Value,
    pub rows: Vec<Map<String, Value>>,
}

impl Output {
    pub fn render(&self, format: Format) -> anyhow::Result<Vec<u8>> {
        let mut out = Vec::new();
        match format {
            Format::Json => {
                serde_json::to_writer_pretty(&mut out, &self.document)?;
                out.push(b'\n');
            }
            Format::Jsonl => {
                for row in &self.rows {
                    serde_json::to_writer(&mut out, row)?;
                    out.push(b'\n');
                }
            }
            Format::Csv => {
                let mut header: Vec<&str> = Vec::new();
                for row in &self.rows {
                    for k in row.keys() {
                        if !header.contains(&k.as_str()) {
                            header.push(k);
                        }
                    }
                }
                let mut w = csv::Writer::from_writer(&mut out);
                w.write_record(&header)?;
                for row in &self.rows {
                    w.write_record(header.iter().map(|k| row.get(*k).map(cell).unwrap_or_default()))?;
                }
                w.flush()?;
            }
        }
        Ok(out)
    }

    /// Writes to `path`, or standard output when absent.
    pub fn write(&self, format: Format, path: Option<&Path>) -> anyhow::Result<()> {
        let bytes = self.render(format)?;
        match path {
            Some(p) => std::fs::write(p, bytes).with_context(|| format!("writing {}", p.display())),
            None => Ok(std::io::stdout().lock().write_all(&bytes)?),
        }
    }
}

fn cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// Flattens nested objects into `a.b` keys; arrays stay JSON-encoded.
pub fn flatten(v: &Value) -> Map<String, Value> {
    fn go(prefix: &str, v: &Value, out: &mut Map<String, Value>) {
        match v {
            Value::Object(m) => {
                for (k, x) in m {
                    let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                    go(&key, x, out);
                }
            }
            other => {
                out.insert(prefix.to_owned(), other.clone());
            }
        }
    }
    let mut out = Map::new();
    go("", v, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn criteria() {
        assert!(Check::new("a", 1.0 + 1e-7, 1.0, Criterion::Relative { bound: 1e-6 }).passed);
        assert!(!Check::new("a", 1.0 + 1e-5, 1.0, Criterion::Relative { bound: 1e-6 }).passed);
        assert!(Check::new("zero", 0.0, 0.0, Criterion::Relative { bound: 1e-6 }).passed);
        assert!(!Check::new("nan", f64::NAN, 0.0, Criterion::Absolute { bound: 1.0 }).passed);
        let s = Check::new("s", 1.03, 1.0, Criterion::Sigma { bound: 4.0, stderr: 0.01 });
        assert!((s.deviation - 3.0).abs() < 1e-9 && s.passed);
        let rs = Check::new("rs", 1.03, 1.0, Criterion::RelativeAndSigma { rel: 0.01, sigma: 4.0, stderr: 0.01 });
        assert!(!rs.passed);
        assert!(Check::flag("ok", true).passed && !Check::flag("bad", false).passed);
    }

    #[test]
    fn digest_is_stable_and_sensitive() {
        let a = digest(&json!({"x": 1, "y": [1.5, 2]}));
        assert_eq!(a, digest(&json!({"x": 1, "y": [1.5, 2]})));
        assert_ne!(a, digest(&json!({"x": 2, "y": [1.5, 2]})));
        assert_eq!(a.len(), 64);
    }

    #[test]
    fn renders_all_formats() {
        let o = Output {
            document: json!({"a": 1}),
            rows: vec![flatten(&json!({"a": 1, "b": {"c": "x"}})), flatten(&json!({"a": 2, "d": null}))],
        };
        assert_eq!(String::from_utf8(o.render(Format::Json).unwrap()).unwrap(), "{\n  \"a\": 1\n}\n");
        let jl = String::from_utf8(o.render(Format::Jsonl).unwrap()).unwrap();
        assert_eq!(jl, "{\"a\":1,\"b.c\":\"x\"}\n{\"a\":2,\"d\":null}\n");
        let csv = String::from_utf8(o.render(Format::Csv).unwrap()).unwrap();
        assert_eq!(csv, "a,b.c,d\n1,x,\n2,,\n");
    }
}
