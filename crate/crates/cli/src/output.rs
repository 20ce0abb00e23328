//! Headers, tables and file emission.
//!
//! Output must be a function of the command line and the seed, so the
//! recorded argv drops flags that cannot change the numbers: thread count
//! and destination paths.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use anyhow::{Context, Result};
use serde_json::{json, Map, Value};

const PATH_FLAGS: [&str; 4] = ["--out", "--json", "--csv", "--save"];

pub fn normalize_argv<I: IntoIterator<Item = String>>(args: I) -> Vec<String> {
    let mut out = Vec::new();
    let mut it = args.into_iter().skip(1);
    out.push("treelab".to_string());
    while let Some(a) = it.next() {
        let flag = a.split('=').next().unwrap_or("");
        if flag == "--threads" || PATH_FLAGS.contains(&flag) {
            if !a.contains('=') {
                it.next();
            }
            continue;
        }
        out.push(a);
    }
    out
}

#[derive(Debug, Clone)]
pub struct Header {
    pub argv: Vec<String>,
    pub seed: u64,
}

impl Header {
    pub fn new(seed: u64) -> Self {
        Self { argv: normalize_argv(std::env::args()), seed }
    }

    pub fn comment(&self) -> String {
        format!("# treelab {}\n# argv: {}\n# seed: {}\n", env!("CARGO_PKG_VERSION"), self.argv.join(" "), self.seed)
    }

    pub fn json(&self) -> Value {
        json!({ "version": env!("CARGO_PKG_VERSION"), "argv": self.argv, "seed": self.seed })
    }

    /// A JSON document `{header, <key>: body}`, pretty printed.
    pub fn wrap_json(&self, key: &str, body: Value) -> String {
        let mut doc = Map::new();
        doc.insert("header".into(), self.json());
        doc.insert(key.into(), body);
        let mut s = serde_json::to_string_pretty(&Value::Object(doc)).expect("serializable");
        s.push('\n');
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Default)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Self { columns: columns.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn render(&self, format: Format, header: &Header) -> String {
        match format {
            Format::Csv => {
                let mut s = header.comment();
                s.push_str(&self.columns.join(","));
                s.push('\n');
                for row in &self.rows {
                    let cells: Vec<String> = row.iter().map(csv_cell).collect();
                    s.push_str(&cells.join(","));
                    s.push('\n');
                }
                s
            }
            Format::Json => {
                let rows: Vec<Value> = self
                    .rows
                    .iter()
                    .map(|r| Value::Object(self.columns.iter().cloned().zip(r.iter().cloned()).collect()))
                    .collect();
                header.wrap_json("rows", Value::Array(rows))
            }
        }
    }
}

fn csv_cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) if s.contains([',', '"', '\n']) => format!("\"{}\"", s.replace('"', "\"\"")),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// Writes to `path`, or to stdout when no path is given.
pub fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut out = io::stdout().lock();
            out.write_all(text.as_bytes()).context("writing to stdout")?;
            out.flush().context("flushing stdout")
        }
    }
}
