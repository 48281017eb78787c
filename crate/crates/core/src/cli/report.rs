//! Tabular reports with fixed float formatting, written atomically.

use std::io::Write;
use std::path::Path;

use serde_json::{json, Value as Json};

use super::config::Format;

pub const HEADER: &str = "# tuned-source v1";

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Float(f64),
    Int(i64),
    Text(String),
    Empty,
}

impl Value {
    fn csv(&self) -> String {
        match self {
            Value::Float(v) => format!("{v:.16e}"),
            Value::Int(v) => v.to_string(),
            Value::Text(s) => s.clone(),
            Value::Empty => String::new(),
        }
    }

    fn json(&self) -> Json {
        match self {
            Value::Float(v) if v.is_finite() => json!(v),
            Value::Float(_) | Value::Empty => Json::Null,
            Value::Int(v) => json!(v),
            Value::Text(s) => json!(s),
        }
    }
}

impl From<f64> for Value {
    fn from(v: f64) -> Self {
        Value::Float(v)
    }
}

impl From<Option<f64>> for Value {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Value::Empty, Value::Float)
    }
}

impl From<&str> for Value {
    fn from(v: &str) -> Self {
        Value::Text(v.to_string())
    }
}

impl From<String> for Value {
    fn from(v: String) -> Self {
        Value::Text(v)
    }
}

impl From<u32> for Value {
    fn from(v: u32) -> Self {
        Value::Int(v as i64)
    }
}

impl From<u8> for Value {
    fn from(v: u8) -> Self {
        Value::Int(v as i64)
    }
}

/// Pass/fail flag of one assertion; `Skip` when it does not apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Check {
    Pass,
    Fail,
    Skip,
}

impl Check {
    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Check::Pass
        } else {
            Check::Fail
        }
    }
}

impl From<Check> for Value {
    fn from(c: Check) -> Self {
        Value::Text(
            match c {
                Check::Pass => "pass",
                Check::Fail => "fail",
                Check::Skip => "skip",
            }
            .into(),
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub command: &'static str,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Value>>,
    pub failures: usize,
}

impl Report {
    pub fn new(command: &'static str, columns: &[&'static str]) -> Self {
        Report {
            command,
            columns: columns.to_vec(),
            rows: Vec::new(),
            failures: 0,
        }
    }

    pub fn push(&mut self, row: Vec<Value>, checks: &[Check]) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.failures += checks.iter().filter(|c| **c == Check::Fail).count();
        self.rows.push(row);
    }

    pub fn render(&self, format: Format) -> std::io::Result<Vec<u8>> {
        match format {
            Format::Csv => {
                let mut buf = Vec::new();
                writeln!(buf, "{HEADER}")?;
                {
                    let mut w = csv::Writer::from_writer(&mut buf);
                    w.write_record(&self.columns)?;
                    for row in &self.rows {
                        w.write_record(row.iter().map(Value::csv))?;
                    }
                    w.flush()?;
                }
                Ok(buf)
            }
            Format::Json => {
                let rows: Vec<Json> = self
                    .rows
                    .iter()
                    .map(|r| Json::Array(r.iter().map(Value::json).collect()))
                    .collect();
                let doc = json!({
                    "format": HEADER.trim_start_matches("# "),
                    "command": self.command,
                    "status": if self.failures == 0 { "pass" } else { "fail" },
                    "failures": self.failures,
                    "columns": self.columns,
                    "rows": rows,
                });
                let mut buf = serde_json::to_vec_pretty(&doc)?;
                buf.push(b'\n');
                Ok(buf)
            }
        }
    }
}

/// Write `bytes` to `path` through a temporary file in the same directory,
/// so the target is either absent/unchanged or complete.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Report {
        let mut r = Report::new("verify", &["j", "chi", "note", "flag"]);
        r.push(vec![1u8.into(), 0.1.into(), "a,b".into(), Check::Pass.into()], &[Check::Pass]);
        r.push(vec![2u8.into(), None.into(), "".into(), Check::Fail.into()], &[Check::Fail]);
        r
    }

    #[test]
    fn csv_layout() {
        let text = String::from_utf8(sample().render(Format::Csv).unwrap()).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], HEADER);
        assert_eq!(lines[1], "j,chi,note,flag");
        assert_eq!(lines[2], "1,1.0000000000000001e-1,\"a,b\",pass");
        assert_eq!(lines[3], "2,,,fail");
    }

    #[test]
    fn json_layout() {
        let r = sample();
        let doc: Json = serde_json::from_slice(&r.render(Format::Json).unwrap()).unwrap();
        assert_eq!(doc["status"], "fail");
        assert_eq!(doc["failures"], 1);
        assert_eq!(doc["rows"][1][1], Json::Null);
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("out.csv");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), b"two");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
