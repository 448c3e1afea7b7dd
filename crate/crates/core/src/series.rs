//! Column tables sampled on a common axis (time, delay or coupling strength).

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::Result;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    /// `None` marks a masked sample (written as an empty CSV field).
    pub values: Vec<Option<f64>>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub axis_name: String,
    pub axis: Vec<f64>,
    pub columns: Vec<Column>,
    #[serde(default)]
    pub metadata: Map<String, Value>,
}

impl TimeSeries {
    pub fn new(axis_name: impl Into<String>, axis: Vec<f64>) -> Self {
        Self { axis_name: axis_name.into(), axis, columns: Vec::new(), metadata: Map::new() }
    }

    pub fn len(&self) -> usize {
        self.axis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.axis.is_empty()
    }

    pub fn push_column(&mut self, name: impl Into<String>, values: Vec<f64>) {
        self.push_masked_column(name, values.into_iter().map(Some).collect());
    }

    pub fn push_masked_column(&mut self, name: impl Into<String>, values: Vec<Option<f64>>) {
        assert_eq!(values.len(), self.axis.len(), "column length must match the axis");
        self.columns.push(Column { name: name.into(), values });
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.name == name)
    }

    /// Unmasked values of a column; masked samples become NaN.
    pub fn values(&self, name: &str) -> Option<Vec<f64>> {
        self.column(name).map(|c| c.values.iter().map(|v| v.unwrap_or(f64::NAN)).collect())
    }

    pub fn set_meta(&mut self, key: impl Into<String>, value: impl Serialize) {
        let value = serde_json::to_value(value).unwrap_or(Value::Null);
        self.metadata.insert(key.into(), value);
    }

    /// Writes the table as CSV. Metadata entries are emitted first as
    /// `# key: json` comment lines, followed by the header row.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        for (key, value) in &self.metadata {
            writeln!(out, "# {key}: {}", serde_json::to_string(value)?)?;
        }
        let mut writer = csv::Writer::from_writer(out);
        let mut header = vec![self.axis_name.clone()];
        header.extend(self.columns.iter().map(|c| c.name.clone()));
        writer.write_record(&header)?;
        for (i, x) in self.axis.iter().enumerate() {
            let mut row = vec![format_value(*x)];
            for col in &self.columns {
                row.push(col.values[i].map(format_value).unwrap_or_default());
            }
            writer.write_record(&row)?;
        }
        writer.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(file))
    }

    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path)?;
        serde_json::to_writer_pretty(std::io::BufWriter::new(file), self)?;
        Ok(())
    }

    /// Parses a table written by [`TimeSeries::write_csv`].
    pub fn read_csv(text: &str) -> Result<Self> {
        let mut metadata = Map::new();
        let mut body = String::new();
        for line in text.lines() {
            if let Some(rest) = line.strip_prefix("# ") {
                if let Some((key, json)) = rest.split_once(": ") {
                    metadata.insert(key.to_string(), serde_json::from_str(json)?);
                }
            } else {
                body.push_str(line);
                body.push('\n');
            }
        }
        let mut reader = csv::Reader::from_reader(body.as_bytes());
        let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
        let mut axis = Vec::new();
        let mut cols: Vec<Vec<Option<f64>>> = vec![Vec::new(); header.len().saturating_sub(1)];
        for record in reader.records() {
            let record = record?;
            axis.push(parse_field(&record[0]).unwrap_or(f64::NAN));
            for (k, col) in cols.iter_mut().enumerate() {
                col.push(parse_field(&record[k + 1]));
            }
        }
        let columns = header
            .iter()
            .skip(1)
            .cloned()
            .zip(cols)
            .map(|(name, values)| Column { name, values })
            .collect();
        Ok(Self { axis_name: header.first().cloned().unwrap_or_default(), axis, columns, metadata })
    }
}

fn format_value(x: f64) -> String {
    // shortest representation that round-trips exactly
    format!("{x:?}")
}

fn parse_field(s: &str) -> Option<f64> {
    if s.is_empty() {
        None
    } else {
        s.parse().ok()
    }
}

/// Uniform grid of `points` samples covering `[start, end]` inclusive.
pub fn uniform_grid(start: f64, end: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![start],
        _ => {
            let step = (end - start) / (points - 1) as f64;
            (0..points).map(|i| start + step * i as f64).collect()
        }
    }
}
