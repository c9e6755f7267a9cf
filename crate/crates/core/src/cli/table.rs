use std::io::Write;

use serde_json::{Map, Value};

use super::{OutputFormat, RunConfig};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Int(u64),
    Real(f64),
    Text(String),
    Empty,
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            // shortest round-trip form, '.' separator, no locale
            Cell::Real(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Int(v) => Value::from(*v),
            Cell::Real(v) => serde_json::Number::from_f64(*v).map_or(Value::Null, Value::Number),
            Cell::Text(s) => Value::from(s.clone()),
            Cell::Empty => Value::Null,
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Real(v)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v)
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Empty, Cell::Real)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResultTable {
    pub metadata: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl ResultTable {
    /// Table whose metadata echoes `config` plus the command name and version.
    pub fn new(command: &str, config: &RunConfig, columns: &[&str]) -> Self {
        let mut metadata = vec![
            ("command".to_string(), command.to_string()),
            ("version".to_string(), env!("CARGO_PKG_VERSION").to_string()),
        ];
        metadata.extend(config.to_pairs());
        ResultTable {
            metadata,
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn meta(&mut self, key: &str, value: impl ToString) {
        self.metadata.push((key.to_string(), value.to_string()));
    }

    pub fn push(&mut self, row: Vec<Cell>) -> Result<()> {
        if row.len() != self.columns.len() {
            return Err(Error::domain(format!(
                "row has {} cells but the table has {} columns",
                row.len(),
                self.columns.len()
            )));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn to_csv(&self) -> String {
        let mut out = Vec::new();
        for (k, v) in &self.metadata {
            writeln!(out, "# {k}={v}").expect("write to Vec");
        }
        {
            let mut w = csv::WriterBuilder::new()
                .terminator(csv::Terminator::Any(b'\n'))
                .from_writer(&mut out);
            w.write_record(&self.columns).expect("write to Vec");
            for row in &self.rows {
                w.write_record(row.iter().map(Cell::csv)).expect("write to Vec");
            }
            w.flush().expect("flush Vec");
        }
        String::from_utf8(out).expect("utf-8 output")
    }

    pub fn to_json(&self) -> String {
        let metadata: Map<String, Value> =
            self.metadata.iter().map(|(k, v)| (k.clone(), Value::from(v.clone()))).collect();
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|r| {
                Value::Object(self.columns.iter().cloned().zip(r.iter().map(Cell::json)).collect())
            })
            .collect();
        let mut root = Map::new();
        root.insert("metadata".into(), Value::Object(metadata));
        root.insert("columns".into(), Value::from(self.columns.clone()));
        root.insert("rows".into(), Value::Array(rows));
        let mut s = serde_json::to_string_pretty(&Value::Object(root)).expect("serializable");
        s.push('\n');
        s
    }

    pub fn render(&self, format: OutputFormat) -> String {
        match format {
            OutputFormat::Csv => self.to_csv(),
            OutputFormat::Json => self.to_json(),
        }
    }

    /// Recovers the echoed configuration from CSV metadata lines.
    pub fn config_from_csv(text: &str) -> Result<RunConfig> {
        let known: Vec<String> = RunConfig::default().to_pairs().into_iter().map(|p| p.0).collect();
        let pairs: Vec<(String, String)> = text
            .lines()
            .take_while(|l| l.starts_with('#'))
            .filter_map(|l| l.trim_start_matches('#').trim_start().split_once('='))
            .filter(|(k, _)| known.iter().any(|q| q == k))
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect();
        let mut c = RunConfig::default();
        c.apply(&pairs)?;
        Ok(c)
    }
}
