//! Command results rendered as CSV or JSON. Floats are written with six
//! decimals in CSV and as plain numbers in JSON.

use std::io::Write;

use serde_json::{Map, Value};

use crate::config::Format;

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(u64),
    Text(String),
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Num(x) => {
                let s = format!("{x:.6}");
                if s == "-0.000000" {
                    "0.000000".into()
                } else {
                    s
                }
            }
            Cell::Int(n) => n.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Num(x) => serde_json::Number::from_f64(*x).map(Value::Number).unwrap_or(Value::Null),
            Cell::Int(n) => Value::from(*n),
            Cell::Text(s) => Value::from(s.clone()),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<u64> for Cell {
    fn from(n: u64) -> Self {
        Cell::Int(n)
    }
}

impl From<u32> for Cell {
    fn from(n: u32) -> Self {
        Cell::Int(n as u64)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Text(s)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Report {
    /// Named scalar results; CSV columns `quantity,value`.
    Summary(Vec<(String, Cell)>),
    Table { columns: Vec<String>, rows: Vec<Vec<Cell>> },
    /// A fixed-column CSV report with a richer JSON document.
    Dual { csv: Box<Report>, json: Value },
}

impl Report {
    pub fn summary() -> Self {
        Report::Summary(Vec::new())
    }

    pub fn with(mut self, key: &str, value: impl Into<Cell>) -> Self {
        if let Report::Summary(items) = &mut self {
            items.push((key.to_string(), value.into()));
        }
        self
    }

    pub fn table(columns: &[&str]) -> Self {
        Report::Table {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push_row(&mut self, row: Vec<Cell>) {
        if let Report::Table { columns, rows } = self {
            assert_eq!(row.len(), columns.len());
            rows.push(row);
        }
    }

    pub fn get(&self, key: &str) -> Option<&Cell> {
        match self {
            Report::Summary(items) => items.iter().find(|(k, _)| k == key).map(|(_, v)| v),
            Report::Table { .. } => None,
            Report::Dual { csv, .. } => csv.get(key),
        }
    }

    pub fn write<W: Write>(&self, out: W, format: Format) -> std::io::Result<()> {
        match format {
            Format::Csv => self.write_csv(out).map_err(std::io::Error::other),
            Format::Json => {
                let mut out = out;
                serde_json::to_writer_pretty(&mut out, &self.to_json())?;
                writeln!(out)
            }
        }
    }

    fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        if let Report::Dual { csv, .. } = self {
            return csv.write_csv(out);
        }
        let mut w = csv::Writer::from_writer(out);
        match self {
            Report::Summary(items) => {
                w.write_record(["quantity", "value"])?;
                for (k, v) in items {
                    w.write_record([k.clone(), v.csv()])?;
                }
            }
            Report::Table { columns, rows } => {
                w.write_record(columns)?;
                for row in rows {
                    w.write_record(row.iter().map(Cell::csv))?;
                }
            }
            Report::Dual { .. } => unreachable!(),
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_json(&self) -> Value {
        match self {
            Report::Summary(items) => {
                let map: Map<String, Value> = items.iter().map(|(k, v)| (k.clone(), v.json())).collect();
                Value::Object(map)
            }
            Report::Table { columns, rows } => Value::Array(
                rows.iter()
                    .map(|row| {
                        let map: Map<String, Value> =
                            columns.iter().cloned().zip(row.iter().map(Cell::json)).collect();
                        Value::Object(map)
                    })
                    .collect(),
            ),
            Report::Dual { json, .. } => json.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summary_csv() {
        let r = Report::summary().with("success_probability", 1.0 / 32.0).with("branches", 8u64);
        let mut buf = Vec::new();
        r.write(&mut buf, Format::Csv).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "quantity,value\nsuccess_probability,0.031250\nbranches,8\n");
    }

    #[test]
    fn table_json() {
        let mut r = Report::table(&["eta", "r"]);
        r.push_row(vec![Cell::Num(0.5), Cell::Num(1.0 / 3.0)]);
        let v = r.to_json();
        assert_eq!(v[0]["eta"], 0.5);
    }
}
