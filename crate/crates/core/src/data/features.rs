use std::collections::HashSet;
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    LabAggregate,
    DemographicIndicator,
    ComorbidityIndicator,
    Diagnostic,
}

impl ColumnKind {
    pub fn is_indicator(self) -> bool {
        matches!(
            self,
            ColumnKind::DemographicIndicator | ColumnKind::ComorbidityIndicator
        )
    }
}

/// Row-major table of named numeric columns. `NaN` marks a missing value
/// until imputation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    row_ids: Vec<String>,
    column_names: Vec<String>,
    kinds: Vec<ColumnKind>,
    values: Array2<f64>,
}

impl FeatureMatrix {
    pub fn new(
        row_ids: Vec<String>,
        column_names: Vec<String>,
        kinds: Vec<ColumnKind>,
        values: Array2<f64>,
    ) -> Result<Self> {
        let (rows, cols) = values.dim();
        if row_ids.len() != rows {
            return Err(Error::DimensionMismatch {
                expected: rows,
                got: row_ids.len(),
            });
        }
        if column_names.len() != cols || kinds.len() != cols {
            return Err(Error::DimensionMismatch {
                expected: cols,
                got: column_names.len().min(kinds.len()),
            });
        }
        let mut seen = HashSet::new();
        for name in &column_names {
            if !seen.insert(name.as_str()) {
                return Err(Error::InvalidData(format!("duplicate column `{name}`")));
            }
        }
        for (j, kind) in kinds.iter().enumerate() {
            for &v in values.column(j) {
                if v.is_infinite() {
                    return Err(Error::InvalidData(format!(
                        "column `{}` contains an infinite value",
                        column_names[j]
                    )));
                }
                if kind.is_indicator() && !v.is_nan() && v != 0.0 && v != 1.0 {
                    return Err(Error::InvalidData(format!(
                        "indicator column `{}` contains {v}",
                        column_names[j]
                    )));
                }
            }
        }
        Ok(Self {
            row_ids,
            column_names,
            kinds,
            values,
        })
    }

    /// All-lab matrix with generated row ids; handy for tests and synthetic data.
    pub fn from_array(column_names: Vec<String>, values: Array2<f64>) -> Result<Self> {
        let rows = values.nrows();
        let kinds = vec![ColumnKind::LabAggregate; column_names.len()];
        let row_ids = (0..rows).map(|i| i.to_string()).collect();
        Self::new(row_ids, column_names, kinds, values)
    }

    pub fn n_rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_cols(&self) -> usize {
        self.values.ncols()
    }

    pub fn row_ids(&self) -> &[String] {
        &self.row_ids
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    pub fn kinds(&self) -> &[ColumnKind] {
        &self.kinds
    }

    pub fn values(&self) -> ArrayView2<'_, f64> {
        self.values.view()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.column_names.iter().position(|c| c == name)
    }

    pub fn is_complete(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn select_rows(&self, rows: &[usize]) -> Self {
        Self {
            row_ids: rows.iter().map(|&i| self.row_ids[i].clone()).collect(),
            column_names: self.column_names.clone(),
            kinds: self.kinds.clone(),
            values: self.values.select(Axis(0), rows),
        }
    }

    pub fn select_columns<S: AsRef<str>>(&self, names: &[S]) -> Result<Self> {
        let idx = names
            .iter()
            .map(|n| {
                self.column_index(n.as_ref())
                    .ok_or_else(|| Error::UnknownColumn(n.as_ref().to_string()))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            row_ids: self.row_ids.clone(),
            column_names: idx.iter().map(|&j| self.column_names[j].clone()).collect(),
            kinds: idx.iter().map(|&j| self.kinds[j]).collect(),
            values: self.values.select(Axis(1), &idx),
        })
    }

    pub fn with_values(&self, values: Array2<f64>) -> Result<Self> {
        Self::new(
            self.row_ids.clone(),
            self.column_names.clone(),
            self.kinds.clone(),
            values,
        )
    }

    pub fn values_mut(&mut self) -> &mut Array2<f64> {
        &mut self.values
    }

    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(file)
    }

    /// Reads a feature CSV (first column `subject_id`, empty cells missing).
    /// Columns whose observed values are all 0/1 are typed as comorbidity
    /// indicators; everything else is a lab aggregate.
    pub fn read_csv<R: std::io::Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.len() < 2 || headers[0].trim() != "subject_id" {
            return Err(Error::Parse {
                line: 1,
                message: "feature CSV must start with `subject_id` followed by feature columns"
                    .into(),
            });
        }
        let column_names: Vec<String> = headers.iter().skip(1).map(|h| h.trim().to_string()).collect();
        let cols = column_names.len();
        let mut row_ids = Vec::new();
        let mut flat = Vec::new();
        for record in rdr.records() {
            let record = record.map_err(|e| Error::Parse {
                line: e.position().map_or(0, |p| p.line()),
                message: e.to_string(),
            })?;
            let line = record.position().map_or(0, |p| p.line());
            row_ids.push(record[0].trim().to_string());
            for (j, cell) in record.iter().skip(1).enumerate() {
                let cell = cell.trim();
                let v = if cell.is_empty() {
                    f64::NAN
                } else {
                    cell.parse::<f64>().map_err(|_| Error::Parse {
                        line,
                        message: format!("column `{}`: `{cell}` is not a number", column_names[j]),
                    })?
                };
                flat.push(v);
            }
        }
        if row_ids.is_empty() {
            return Err(Error::Empty("feature file has no rows".into()));
        }
        let values = Array2::from_shape_vec((row_ids.len(), cols), flat)
            .map_err(|e| Error::InvalidData(e.to_string()))?;
        let kinds = (0..cols)
            .map(|j| {
                let binary = values
                    .column(j)
                    .iter()
                    .filter(|v| !v.is_nan())
                    .all(|&v| v == 0.0 || v == 1.0);
                if binary {
                    ColumnKind::ComorbidityIndicator
                } else {
                    ColumnKind::LabAggregate
                }
            })
            .collect();
        Self::new(row_ids, column_names, kinds, values)
    }

    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["subject_id".to_string()];
        header.extend(self.column_names.iter().cloned());
        w.write_record(&header)?;
        for (i, row) in self.values.rows().into_iter().enumerate() {
            let mut rec = vec![self.row_ids[i].clone()];
            rec.extend(row.iter().map(|v| if v.is_nan() { String::new() } else { v.to_string() }));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io("<feature csv>", e))?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImputationPolicy {
    /// Median imputation and z-scoring for lab/diagnostic columns, zero fill
    /// for indicators.
    #[default]
    MedianStandardize,
    /// Median imputation only.
    MedianOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnTransform {
    pub name: String,
    pub kind: ColumnKind,
    pub fill: f64,
    pub center: f64,
    pub scale: f64,
}

/// Imputation and scaling statistics fitted on a training fold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub policy: ImputationPolicy,
    pub columns: Vec<ColumnTransform>,
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.total_cmp(b));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

impl Standardizer {
    pub fn fit(matrix: &FeatureMatrix, policy: ImputationPolicy) -> Result<Self> {
        let columns = (0..matrix.n_cols())
            .map(|j| {
                let name = matrix.column_names[j].clone();
                let kind = matrix.kinds[j];
                let mut observed: Vec<f64> = matrix
                    .values
                    .column(j)
                    .iter()
                    .copied()
                    .filter(|v| !v.is_nan())
                    .collect();
                if observed.is_empty() {
                    return Err(Error::AllMissing(name));
                }
                if kind.is_indicator() {
                    return Ok(ColumnTransform {
                        name,
                        kind,
                        fill: 0.0,
                        center: 0.0,
                        scale: 1.0,
                    });
                }
                let fill = median(&mut observed);
                let (center, scale) = match policy {
                    ImputationPolicy::MedianOnly => (0.0, 1.0),
                    ImputationPolicy::MedianStandardize => {
                        let n = matrix.n_rows() as f64;
                        let filled = || {
                            matrix
                                .values
                                .column(j)
                                .into_iter()
                                .map(move |&v| if v.is_nan() { fill } else { v })
                        };
                        let mean = filled().sum::<f64>() / n;
                        let var = filled().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
                        let sd = var.sqrt();
                        (mean, if sd > 0.0 { sd } else { 1.0 })
                    }
                };
                Ok(ColumnTransform {
                    name,
                    kind,
                    fill,
                    center,
                    scale,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { policy, columns })
    }

    pub fn transform(&self, matrix: &FeatureMatrix) -> Result<FeatureMatrix> {
        crate::error::ensure_dim(self.columns.len(), matrix.n_cols())?;
        let mut values = matrix.values.clone();
        for (j, col) in self.columns.iter().enumerate() {
            if matrix.column_names[j] != col.name {
                return Err(Error::UnknownColumn(matrix.column_names[j].clone()));
            }
            for v in values.column_mut(j) {
                if v.is_nan() {
                    *v = col.fill;
                }
                if !col.kind.is_indicator() {
                    *v = (*v - col.center) / col.scale;
                }
            }
        }
        matrix.with_values(values)
    }

    pub fn transform_row(&self, row: &[f64]) -> Result<Array1<f64>> {
        crate::error::ensure_dim(self.columns.len(), row.len())?;
        Ok(row
            .iter()
            .zip(&self.columns)
            .map(|(&v, c)| {
                let v = if v.is_nan() { c.fill } else { v };
                if c.kind.is_indicator() {
                    v
                } else {
                    (v - c.center) / c.scale
                }
            })
            .collect())
    }
}

/// Fits on `matrix` and returns the transformed matrix with the fitted transform.
pub fn impute_and_standardize(
    matrix: &FeatureMatrix,
    policy: ImputationPolicy,
) -> Result<(FeatureMatrix, Standardizer)> {
    let fitted = Standardizer::fit(matrix, policy)?;
    let out = fitted.transform(matrix)?;
    Ok((out, fitted))
}
