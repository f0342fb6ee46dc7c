use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};
use serde_json::Value;

use spinbatt_core::units::Energy;

use crate::error::CliError;

/// Unit for every energy in a payload.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnergyUnit {
    Ev,
    Joule,
}

impl EnergyUnit {
    pub fn value(self, e: Energy) -> f64 {
        match self {
            EnergyUnit::Ev => e.ev(),
            EnergyUnit::Joule => e.joules(),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            EnergyUnit::Ev => "eV",
            EnergyUnit::Joule => "J",
        }
    }

    /// Column-name suffix, `ev` or `j`.
    pub fn suffix(self) -> &'static str {
        match self {
            EnergyUnit::Ev => "ev",
            EnergyUnit::Joule => "j",
        }
    }
}

/// Formats a float with 17 significant digits, the shortest width that
/// round-trips every `f64`.
pub fn format_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "NaN".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// A JSON number, or the [`format_f64`] text for non-finite values.
pub fn json_f64(x: f64) -> Value {
    serde_json::Number::from_f64(x).map_or_else(|| Value::String(format_f64(x)), Value::Number)
}

/// Pretty JSON with fixed 17-significant-digit floats.
struct FixedFloat(PrettyFormatter<'static>);

impl Formatter for FixedFloat {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        w.write_all(format_f64(value).as_bytes())
    }
    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, value as f64)
    }
    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }
    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }
    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }
    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }
    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }
    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

/// Serialises `value` as pretty JSON with fixed float formatting.
pub fn to_json<T: Serialize + ?Sized>(value: &T) -> String {
    let mut buf = Vec::new();
    let mut ser =
        serde_json::Serializer::with_formatter(&mut buf, FixedFloat(PrettyFormatter::new()));
    value
        .serialize(&mut ser)
        .expect("JSON serialisation of in-memory values");
    String::from_utf8(buf).expect("serde_json writes UTF-8")
}

/// A numeric table destined for CSV and for the JSON payload.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Text(String),
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Table {
            name: name.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_value(&self) -> Value {
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|r| {
                Value::Array(
                    r.iter()
                        .map(|c| match c {
                            Cell::Num(x) => json_f64(*x),
                            Cell::Text(s) => Value::String(s.clone()),
                        })
                        .collect(),
                )
            })
            .collect();
        serde_json::json!({ "columns": self.columns, "rows": rows })
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), CliError> {
        let mut w = csv::Writer::from_path(path)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let io = |e: csv::Error| CliError::Io(format!("{}: {e}", path.display()));
        w.write_record(&self.columns).map_err(io)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|c| match c {
                Cell::Num(x) => format_f64(*x),
                Cell::Text(s) => s.clone(),
            }))
            .map_err(io)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// One command's output record.
#[derive(Debug, Clone, Serialize)]
pub struct ResultRecord {
    pub run_id: String,
    pub timestamp: String,
    pub config_hash: String,
    pub command: String,
    /// Kept last so the payload is a contiguous suffix of the file.
    pub payload: Value,
}

/// Files written by a run.
#[derive(Debug, Clone, Default)]
pub struct Written {
    pub record: PathBuf,
    pub tables: Vec<PathBuf>,
}

pub fn write_outputs(
    dir: &Path,
    record: &ResultRecord,
    tables: &[Table],
    csv: bool,
) -> Result<Written, CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    let record_path = dir.join(format!("{}.json", record.command));
    let mut text = to_json(record);
    text.push('\n');
    std::fs::write(&record_path, text)
        .map_err(|e| CliError::Io(format!("{}: {e}", record_path.display())))?;
    let mut written = Written {
        record: record_path,
        tables: Vec::new(),
    };
    if csv {
        for t in tables {
            let p = dir.join(format!("{}.csv", t.name));
            t.write_csv(&p)?;
            written.tables.push(p);
        }
    }
    Ok(written)
}
