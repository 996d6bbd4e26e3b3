//! CSV input and output with a metadata preamble.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use covfloor::FeatureMatrix;

use crate::error::{CliError, CliResult};

/// Covariates `x1..xp` and, when present, the outcome column `y`. Other
/// columns are ignored.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub x: FeatureMatrix,
    pub y: Option<Vec<f64>>,
}

pub fn read_table(path: &Path) -> CliResult<Table> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    parse_table(file, &path.display().to_string())
}

pub fn parse_table<R: std::io::Read>(input: R, source: &str) -> CliResult<Table> {
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(input);
    let headers = reader
        .headers()
        .map_err(|e| CliError::Data(format!("{source}: {e}")))?
        .clone();
    let mut x_cols: Vec<(usize, usize)> = Vec::new();
    let mut y_col = None;
    for (c, name) in headers.iter().enumerate() {
        let name = name.trim();
        if name == "y" {
            y_col = Some(c);
        } else if let Some(k) = name.strip_prefix('x').and_then(|d| d.parse::<usize>().ok()) {
            x_cols.push((k, c));
        }
    }
    x_cols.sort_unstable();
    if x_cols.is_empty() {
        return Err(CliError::Data(format!("{source}: no covariate columns x1..xp in the header")));
    }
    for (i, &(k, _)) in x_cols.iter().enumerate() {
        if k != i + 1 {
            return Err(CliError::Data(format!(
                "{source}: covariate columns must be x1..x{}, found x{k} in position {}",
                x_cols.len(),
                i + 1
            )));
        }
    }
    let p = x_cols.len();
    let mut values = Vec::new();
    let mut y = Vec::new();
    let mut n = 0;
    for (r, record) in reader.records().enumerate() {
        // data rows are numbered from 1, the header is row 0
        let row = r + 1;
        let record = record.map_err(|e| CliError::Data(format!("{source}: row {row}: {e}")))?;
        let field = |c: usize| -> CliResult<f64> {
            let raw = record.get(c).unwrap_or("").trim();
            let v: f64 = raw.parse().map_err(|_| {
                CliError::Data(format!(
                    "{source}: row {row}, column {}: cannot read `{raw}` as a number",
                    &headers[c]
                ))
            })?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(CliError::Data(format!(
                    "{source}: row {row}, column {}: value is not finite",
                    &headers[c]
                )))
            }
        };
        for &(_, c) in &x_cols {
            values.push(field(c)?);
        }
        if let Some(c) = y_col {
            y.push(field(c)?);
        }
        n += 1;
    }
    if n == 0 {
        return Err(CliError::Data(format!("{source}: no data rows")));
    }
    Ok(Table {
        x: FeatureMatrix::new(n, p, values)?,
        y: y_col.map(|_| y),
    })
}

/// Lines written before every emitted table.
#[derive(Debug, Clone, PartialEq)]
pub struct Metadata {
    pub config_hash: String,
    pub seed: u64,
    pub extra: Vec<(String, String)>,
}

impl Metadata {
    pub fn write<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "# covfloor {}", env!("CARGO_PKG_VERSION"))?;
        writeln!(out, "# config_hash={}", self.config_hash)?;
        writeln!(out, "# seed={}", self.seed)?;
        for (k, v) in &self.extra {
            writeln!(out, "# {k}={v}")?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> serde_json::Value {
        let mut m = serde_json::Map::new();
        m.insert("tool".into(), format!("covfloor {}", env!("CARGO_PKG_VERSION")).into());
        m.insert("config_hash".into(), self.config_hash.clone().into());
        m.insert("seed".into(), self.seed.into());
        for (k, v) in &self.extra {
            m.insert(k.clone(), v.clone().into());
        }
        serde_json::Value::Object(m)
    }
}

/// Writes a CSV file whose body is produced by `body`, after the metadata.
pub fn write_csv_file(
    path: &Path,
    meta: &Metadata,
    body: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
) -> CliResult<()> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = BufWriter::new(file);
    meta.write(&mut w)
        .and_then(|_| body(&mut w))
        .and_then(|_| w.flush())
        .map_err(|e| CliError::io(path, e))
}

pub fn write_json_file(path: &Path, value: &serde_json::Value) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).expect("JSON value serializes");
    text.push('\n');
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}
