//! Run reports and CSV artifacts.
//!
//! Numbers are written in the shortest decimal form that parses back to
//! the same `f64`; non-finite values become the token `inf` (or `-inf`).

use std::fmt::Write as _;
use std::io;
use std::path::Path;

use serde_json::{json, Map, Value};

use crate::config::Command;

pub const SCHEMA: &str = "invctl.report/1";

/// Shortest round-trip decimal, `inf` for non-finite values.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v == f64::INFINITY {
        "inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else if v == 0.0 {
        // fold -0 into 0
        "0".into()
    } else {
        format!("{v}")
    }
}

/// JSON number, or the `inf` token as a string.
pub fn num(v: f64) -> Value {
    if v.is_finite() {
        json!(if v == 0.0 { 0.0 } else { v })
    } else {
        Value::String(fmt_f64(v))
    }
}

pub fn nums(vs: &[f64]) -> Value {
    Value::Array(vs.iter().map(|&v| num(v)).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Warning {
    pub kind: &'static str,
    pub message: String,
    /// Grid level of the state, when the warning refers to one.
    pub state: Option<f64>,
    /// Order quantity, when the warning refers to a (state, action) pair.
    pub action: Option<f64>,
    /// Belief-tree node, for tree warnings.
    pub node: Option<usize>,
}

impl Warning {
    fn to_json(&self) -> Value {
        let mut m = Map::new();
        m.insert("kind".into(), json!(self.kind));
        m.insert("message".into(), json!(self.message));
        if let Some(s) = self.state {
            m.insert("state".into(), num(s));
        }
        if let Some(a) = self.action {
            m.insert("action".into(), num(a));
        }
        if let Some(n) = self.node {
            m.insert("node".into(), json!(n));
        }
        Value::Object(m)
    }
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub command: Command,
    pub inputs: Value,
    pub outputs: Map<String, Value>,
    pub warnings: Vec<Warning>,
}

impl RunReport {
    pub fn new(command: Command, inputs: Value) -> Self {
        RunReport { command, inputs, outputs: Map::new(), warnings: Vec::new() }
    }

    pub fn set(&mut self, key: &str, value: Value) {
        self.outputs.insert(key.into(), value);
    }

    pub fn warn(&mut self, w: Warning) {
        self.warnings.push(w);
    }

    pub fn to_json(&self) -> Value {
        json!({
            "schema": SCHEMA,
            "command": self.command.name(),
            "inputs": self.inputs,
            "outputs": Value::Object(self.outputs.clone()),
            "warnings": self.warnings.iter().map(Warning::to_json).collect::<Vec<_>>(),
        })
    }

    pub fn write(&self, dir: &Path) -> io::Result<()> {
        let mut text = serde_json::to_string_pretty(&self.to_json()).map_err(io::Error::other)?;
        text.push('\n');
        std::fs::write(dir.join("report.json"), text)
    }
}

/// A CSV table with a fixed header. Cells are preformatted strings.
pub struct Table {
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&'static str]) -> Self {
        Table { header: header.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(&self.header.join(","));
        out.push('\n');
        for row in &self.rows {
            for (i, cell) in row.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(cell);
            }
            out.push('\n');
        }
        out
    }

    pub fn write(&self, dir: &Path, name: &str) -> io::Result<()> {
        std::fs::write(dir.join(name), self.render())
    }
}

/// Action set as `a1;a2;...` in order quantities.
pub fn set_cell(actions: &[usize], step: f64) -> String {
    let mut s = String::new();
    for (i, &a) in actions.iter().enumerate() {
        if i > 0 {
            s.push(';');
        }
        let _ = write!(s, "{}", fmt_f64(a as f64 * step));
    }
    s
}
