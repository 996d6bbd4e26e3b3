//! Covariate matrices, column kinds and outcome kinds.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{data_err, Result};

/// Measurement type of a covariate column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    Continuous,
    Binary,
    /// Integer level codes `0..levels`.
    Categorical { levels: u8 },
}

impl ColumnKind {
    pub fn is_continuous(self) -> bool {
        matches!(self, ColumnKind::Continuous)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeKind {
    Continuous,
    Binary,
}

impl OutcomeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            OutcomeKind::Continuous => "continuous",
            OutcomeKind::Binary => "binary",
        }
    }

    /// Checks that every outcome is admissible for this kind.
    pub fn validate(self, y: &[f64]) -> Result<()> {
        for (i, &v) in y.iter().enumerate() {
            if !v.is_finite() {
                return data_err(format!("outcome at row {} is not finite", i + 1));
            }
            if self == OutcomeKind::Binary && v != 0.0 && v != 1.0 {
                return data_err(format!(
                    "binary outcome at row {} is {v}, expected 0 or 1",
                    i + 1
                ));
            }
        }
        Ok(())
    }
}

impl std::str::FromStr for OutcomeKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "continuous" => Ok(OutcomeKind::Continuous),
            "binary" => Ok(OutcomeKind::Binary),
            other => Err(format!("unknown outcome kind `{other}`")),
        }
    }
}

/// Dense row-major matrix of covariates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    n_rows: usize,
    n_cols: usize,
    values: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(n_rows: usize, n_cols: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n_rows * n_cols {
            return data_err(format!(
                "matrix of shape {n_rows}x{n_cols} needs {} values, got {}",
                n_rows * n_cols,
                values.len()
            ));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return data_err(format!(
                "non-finite covariate at row {}, column {}",
                pos / n_cols.max(1) + 1,
                pos % n_cols.max(1) + 1
            ));
        }
        Ok(FeatureMatrix {
            n_rows,
            n_cols,
            values,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n_cols = rows.first().map_or(0, Vec::len);
        if let Some(i) = rows.iter().position(|r| r.len() != n_cols) {
            return data_err(format!(
                "row {} has {} columns, expected {n_cols}",
                i + 1,
                rows[i].len()
            ));
        }
        let values = rows.iter().flatten().copied().collect();
        Self::new(rows.len(), n_cols, values)
    }

    /// Builds a matrix from column vectors of equal length.
    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        let n_cols = columns.len();
        let n_rows = columns.first().map_or(0, Vec::len);
        if columns.iter().any(|c| c.len() != n_rows) {
            return data_err("columns have unequal lengths");
        }
        let mut values = vec![0.0; n_rows * n_cols];
        for (j, col) in columns.iter().enumerate() {
            for (i, &v) in col.iter().enumerate() {
                values[i * n_cols + j] = v;
            }
        }
        Self::new(n_rows, n_cols, values)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n_cols..(i + 1) * self.n_cols]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n_cols + j]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n_rows).map(|i| self.get(i, j)).collect()
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.n_cols.max(1)).take(self.n_rows)
    }

    /// Matrix made of the given rows, in order (duplicates allowed).
    pub fn select_rows(&self, idx: &[usize]) -> FeatureMatrix {
        let mut values = Vec::with_capacity(idx.len() * self.n_cols);
        for &i in idx {
            values.extend_from_slice(self.row(i));
        }
        FeatureMatrix {
            n_rows: idx.len(),
            n_cols: self.n_cols,
            values,
        }
    }

    /// Leading `k` columns.
    pub fn leading_columns(&self, k: usize) -> FeatureMatrix {
        assert!(k <= self.n_cols, "requested {k} of {} columns", self.n_cols);
        let mut values = Vec::with_capacity(self.n_rows * k);
        for r in self.rows() {
            values.extend_from_slice(&r[..k]);
        }
        FeatureMatrix {
            n_rows: self.n_rows,
            n_cols: k,
            values,
        }
    }
}

/// Observed covariates paired with an outcome vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: FeatureMatrix,
    pub y: Vec<f64>,
}

impl Dataset {
    pub fn new(x: FeatureMatrix, y: Vec<f64>) -> Result<Self> {
        if x.n_rows() != y.len() {
            return data_err(format!(
                "{} covariate rows but {} outcomes",
                x.n_rows(),
                y.len()
            ));
        }
        Ok(Dataset { x, y })
    }

    /// Writes `x1,...,xp,y` with one header line.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        write_matrix_csv(&mut out, &self.x, Some(&self.y))
    }
}

/// Writes a matrix as CSV with header `x1..xp` and an optional `y` column.
pub fn write_matrix_csv<W: Write>(
    out: &mut W,
    x: &FeatureMatrix,
    y: Option<&[f64]>,
) -> std::io::Result<()> {
    let mut header: Vec<String> = (1..=x.n_cols()).map(|j| format!("x{j}")).collect();
    if y.is_some() {
        header.push("y".into());
    }
    writeln!(out, "{}", header.join(","))?;
    for (i, row) in x.rows().enumerate() {
        let mut fields: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        if let Some(y) = y {
            fields.push(y[i].to_string());
        }
        writeln!(out, "{}", fields.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_errors_are_reported() {
        assert!(FeatureMatrix::new(2, 2, vec![0.0; 3]).is_err());
        let err = FeatureMatrix::new(2, 2, vec![0.0, 1.0, f64::NAN, 2.0]).unwrap_err();
        assert!(err.to_string().contains("row 2, column 1"), "{err}");
        assert!(FeatureMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0]]).is_err());
    }

    #[test]
    fn row_and_column_access_agree() {
        let m = FeatureMatrix::from_columns(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]).unwrap();
        assert_eq!(m.row(1), &[2.0, 5.0]);
        assert_eq!(m.column(1), vec![4.0, 5.0, 6.0]);
        assert_eq!(m.select_rows(&[2, 2]).row(1), &[3.0, 6.0]);
        assert_eq!(m.leading_columns(1).column(0), vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn binary_validation_rejects_other_values() {
        assert!(OutcomeKind::Binary.validate(&[0.0, 1.0, 1.0]).is_ok());
        let err = OutcomeKind::Binary.validate(&[0.0, 2.0]).unwrap_err();
        assert!(err.to_string().contains("row 2"));
        assert!(OutcomeKind::Continuous.validate(&[0.3, -2.0]).is_ok());
    }

    #[test]
    fn csv_has_header_and_rows() {
        let x = FeatureMatrix::from_rows(&[vec![0.5, 1.0], vec![-1.0, 0.0]]).unwrap();
        let d = Dataset::new(x, vec![1.5, 2.0]).unwrap();
        let mut buf = Vec::new();
        d.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "x1,x2,y\n0.5,1,1.5\n-1,0,2\n");
    }
}
