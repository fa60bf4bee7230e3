//! Tables with a `key=value` preamble, written as CSV or JSON.
//!
//! CSV layout: preamble lines `# key=value`, then a header row, then data
//! rows. JSON layout: `{"config": {...}, "columns": [...], "rows": [[...]]}`
//! with non-finite numbers spelled as the strings `"inf"`, `"-inf"`, `"NaN"`.

use std::fmt;

use serde_json::{json, Map, Value};

use crate::error::{CliError, Result};
use crate::numfmt::{format_number, parse_number};

#[derive(Clone, Debug)]
pub enum Cell {
    Num(f64),
    Text(String),
}

impl PartialEq for Cell {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Cell::Num(a), Cell::Num(b)) => a.to_bits() == b.to_bits() || (a == b),
            (Cell::Text(a), Cell::Text(b)) => a == b,
            _ => false,
        }
    }
}

impl Cell {
    pub fn text(s: impl Into<String>) -> Self {
        Cell::Text(s.into())
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Num(x) => Some(*x),
            Cell::Text(_) => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Cell::Text(s) => Some(s),
            Cell::Num(_) => None,
        }
    }

    fn from_csv(s: &str) -> Self {
        match parse_number(s) {
            Some(x) => Cell::Num(x),
            None => Cell::Text(s.to_string()),
        }
    }

    fn to_json(&self) -> Value {
        match self {
            Cell::Num(x) => num_json(*x),
            Cell::Text(s) => Value::String(s.clone()),
        }
    }

    fn from_json(v: &Value) -> Result<Self> {
        match v {
            Value::Number(n) => n.as_f64().map(Cell::Num).ok_or_else(|| CliError::format("JSON table", "number out of range")),
            Value::String(s) => Ok(match s.as_str() {
                "inf" => Cell::Num(f64::INFINITY),
                "-inf" => Cell::Num(f64::NEG_INFINITY),
                "NaN" => Cell::Num(f64::NAN),
                _ => Cell::Text(s.clone()),
            }),
            Value::Bool(b) => Ok(Cell::Text(b.to_string())),
            other => Err(CliError::format("JSON table", format!("unexpected cell {other}"))),
        }
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::Num(x) => f.write_str(&format_number(*x)),
            Cell::Text(s) => f.write_str(s),
        }
    }
}

/// JSON value for a float; non-finite values become strings.
pub fn num_json(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        Value::String(format_number(x))
    }
}

/// Float from a JSON value written by [`num_json`].
pub fn json_num(v: &Value) -> Option<f64> {
    match v {
        Value::Number(n) => n.as_f64(),
        Value::String(s) => match s.as_str() {
            "inf" => Some(f64::INFINITY),
            "-inf" => Some(f64::NEG_INFINITY),
            "NaN" => Some(f64::NAN),
            _ => None,
        },
        _ => None,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct Table {
    pub preamble: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: Vec<String>) -> Self {
        Self { preamble: Vec::new(), columns, rows: Vec::new() }
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        let value = value.to_string();
        match self.preamble.iter_mut().find(|(k, _)| k == key) {
            Some(slot) => slot.1 = value,
            None => self.preamble.push((key.to_string(), value)),
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.preamble.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn push_row(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Row whose first cell is the number `key`.
    pub fn row_by_key(&self, key: f64) -> Option<&[Cell]> {
        self.rows.iter().find(|r| r.first().and_then(Cell::as_f64) == Some(key)).map(|r| r.as_slice())
    }

    /// Row whose first cell is the text `key`.
    pub fn row_by_name(&self, key: &str) -> Option<&[Cell]> {
        self.rows.iter().find(|r| r.first().and_then(Cell::as_str) == Some(key)).map(|r| r.as_slice())
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Csv => self.to_csv(),
            Format::Json => self.to_json(),
        }
    }

    pub fn parse(text: &str, format: Format) -> Result<Self> {
        match format {
            Format::Csv => Self::from_csv(text),
            Format::Json => Self::from_json(text),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.preamble {
            out.push_str("# ");
            out.push_str(k);
            out.push('=');
            out.push_str(v);
            out.push('\n');
        }
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record(&self.columns).expect("writing to memory");
        for row in &self.rows {
            w.write_record(row.iter().map(|c| c.to_string())).expect("writing to memory");
        }
        out.push_str(&String::from_utf8(w.into_inner().expect("writing to memory")).expect("utf-8 input"));
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut preamble = Vec::new();
        let mut body_start = 0;
        for line in text.split_inclusive('\n') {
            let Some(rest) = line.strip_prefix('#') else { break };
            body_start += line.len();
            let rest = rest.trim_end_matches(['\n', '\r']);
            let rest = rest.strip_prefix(' ').unwrap_or(rest);
            let (k, v) = rest
                .split_once('=')
                .ok_or_else(|| CliError::format("CSV preamble", format!("expected key=value, got `{rest}`")))?;
            preamble.push((k.to_string(), v.to_string()));
        }
        let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(text[body_start..].as_bytes());
        let columns: Vec<String> = r
            .headers()
            .map_err(|e| CliError::format("CSV header", e.to_string()))?
            .iter()
            .map(str::to_string)
            .collect();
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec.map_err(|e| CliError::format("CSV row", e.to_string()))?;
            rows.push(rec.iter().map(Cell::from_csv).collect());
        }
        Ok(Self { preamble, columns, rows })
    }

    pub fn to_json(&self) -> String {
        let config: Map<String, Value> = self.preamble.iter().map(|(k, v)| (k.clone(), Value::String(v.clone()))).collect();
        let rows: Vec<Value> = self.rows.iter().map(|r| Value::Array(r.iter().map(Cell::to_json).collect())).collect();
        let doc = json!({ "config": config, "columns": self.columns, "rows": rows });
        let mut s = serde_json::to_string_pretty(&doc).expect("serializable");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: Value = serde_json::from_str(text).map_err(|e| CliError::format("JSON table", e.to_string()))?;
        let bad = |m: &str| CliError::format("JSON table", m.to_string());
        let config = doc.get("config").and_then(Value::as_object).ok_or_else(|| bad("missing config"))?;
        let preamble = config
            .iter()
            .map(|(k, v)| Ok((k.clone(), v.as_str().ok_or_else(|| bad("config values must be strings"))?.to_string())))
            .collect::<Result<Vec<_>>>()?;
        let columns = doc
            .get("columns")
            .and_then(Value::as_array)
            .ok_or_else(|| bad("missing columns"))?
            .iter()
            .map(|c| c.as_str().map(str::to_string).ok_or_else(|| bad("column names must be strings")))
            .collect::<Result<Vec<_>>>()?;
        let rows = doc
            .get("rows")
            .and_then(Value::as_array)
            .ok_or_else(|| bad("missing rows"))?
            .iter()
            .map(|r| r.as_array().ok_or_else(|| bad("rows must be arrays"))?.iter().map(Cell::from_json).collect())
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { preamble, columns, rows })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Table {
        let mut t = Table::new(vec!["scheme".into(), "max_value".into(), "note".into()]);
        t.set("command", "bounds");
        t.set("degrees", "50,100");
        t.push_row(vec![Cell::text("SVD-Taylor"), Cell::Num(4.55e17), Cell::text("a, b")]);
        t.push_row(vec![Cell::text("SVD"), Cell::Num(f64::INFINITY), Cell::text("n/a")]);
        t.push_row(vec![Cell::text("x"), Cell::Num(0.25), Cell::text("say \"hi\"")]);
        t
    }

    #[test]
    fn csv_layout() {
        let s = sample().to_csv();
        assert!(s.starts_with("# command=bounds\n# degrees=50,100\nscheme,max_value,note\nSVD-Taylor,4.55e17,\"a, b\"\n"));
    }

    #[test]
    fn round_trip_both_formats() {
        let t = sample();
        for f in [Format::Csv, Format::Json] {
            assert_eq!(Table::parse(&t.render(f), f).unwrap(), t, "{f:?}");
        }
    }

    #[test]
    fn preamble_without_equals_is_rejected() {
        assert!(Table::from_csv("# nothing here\na,b\n1,2\n").is_err());
    }
}
