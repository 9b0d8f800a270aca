use std::collections::HashMap;
use std::path::Path;

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use super::features::FeatureMatrix;
use super::timeline::ProgressionLabel;
use crate::error::{Error, Result};

/// Duration assigned to progression recorded on the index date.
pub const ZERO_DURATION_SHIFT: f64 = 0.5;

/// Right-censored survival outcomes aligned row-for-row with a feature matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalDataset {
    durations: Vec<f64>,
    events: Vec<bool>,
    features: FeatureMatrix,
}

impl SurvivalDataset {
    pub fn new(durations: Vec<f64>, events: Vec<bool>, features: FeatureMatrix) -> Result<Self> {
        if durations.len() != events.len() {
            return Err(Error::DimensionMismatch {
                expected: durations.len(),
                got: events.len(),
            });
        }
        if durations.len() != features.n_rows() {
            return Err(Error::DimensionMismatch {
                expected: durations.len(),
                got: features.n_rows(),
            });
        }
        if let Some((i, d)) = durations
            .iter()
            .enumerate()
            .find(|(_, d)| !(d.is_finite() && **d > 0.0))
        {
            return Err(Error::InvalidData(format!(
                "duration at row {i} must be positive and finite, got {d}"
            )));
        }
        Ok(Self {
            durations,
            events,
            features,
        })
    }

    /// Builds outcomes from progression labels; zero durations become
    /// [`ZERO_DURATION_SHIFT`] days.
    pub fn from_labels(labels: &[ProgressionLabel], features: FeatureMatrix) -> Result<Self> {
        let durations = labels
            .iter()
            .map(|l| {
                if l.duration_days <= 0 {
                    ZERO_DURATION_SHIFT
                } else {
                    l.duration_days as f64
                }
            })
            .collect();
        let events = labels.iter().map(|l| l.progressed).collect();
        Self::new(durations, events, features)
    }

    pub fn len(&self) -> usize {
        self.durations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.durations.is_empty()
    }

    pub fn durations(&self) -> &[f64] {
        &self.durations
    }

    pub fn events(&self) -> &[bool] {
        &self.events
    }

    pub fn n_events(&self) -> usize {
        self.events.iter().filter(|e| **e).count()
    }

    pub fn features(&self) -> &FeatureMatrix {
        &self.features
    }

    pub fn x(&self) -> ArrayView2<'_, f64> {
        self.features.values()
    }

    pub fn feature_names(&self) -> &[String] {
        self.features.column_names()
    }

    pub fn select_rows(&self, rows: &[usize]) -> Self {
        Self {
            durations: rows.iter().map(|&i| self.durations[i]).collect(),
            events: rows.iter().map(|&i| self.events[i]).collect(),
            features: self.features.select_rows(rows),
        }
    }

    pub fn select_columns<S: AsRef<str>>(&self, names: &[S]) -> Result<Self> {
        Ok(Self {
            durations: self.durations.clone(),
            events: self.events.clone(),
            features: self.features.select_columns(names)?,
        })
    }

    pub fn with_features(&self, features: FeatureMatrix) -> Result<Self> {
        Self::new(self.durations.clone(), self.events.clone(), features)
    }

    /// Writes `subject_id,duration_days,event`.
    pub fn write_outcomes_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        write_outcomes(
            writer,
            self.features
                .row_ids()
                .iter()
                .zip(&self.durations)
                .zip(&self.events)
                .map(|((id, d), e)| (id.as_str(), *d, *e)),
        )
    }
}

pub fn write_outcomes<'a, W: std::io::Write>(
    writer: W,
    rows: impl Iterator<Item = (&'a str, f64, bool)>,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["subject_id", "duration_days", "event"])?;
    for (id, d, e) in rows {
        w.write_record([id.to_string(), d.to_string(), u8::from(e).to_string()])?;
    }
    w.flush().map_err(|e| Error::io("<outcome csv>", e))?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeRow {
    pub subject_id: String,
    pub duration: f64,
    pub event: bool,
}

pub fn read_outcomes<R: std::io::Read>(reader: R) -> Result<Vec<OutcomeRow>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let headers = rdr.headers()?.clone();
    let expected = ["subject_id", "duration_days", "event"];
    for h in headers.iter() {
        if !expected.contains(&h.trim()) {
            return Err(Error::UnknownColumn(h.trim().to_string()));
        }
    }
    let pos = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::Parse {
                line: 1,
                message: format!("missing column `{name}`"),
            })
    };
    let (pi, pd, pe) = (pos("subject_id")?, pos("duration_days")?, pos("event")?);
    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let duration = record[pd].trim().parse::<f64>().map_err(|_| Error::Parse {
            line,
            message: format!("bad duration `{}`", &record[pd]),
        })?;
        let event = match record[pe].trim() {
            "1" | "true" => true,
            "0" | "false" => false,
            other => {
                return Err(Error::Parse {
                    line,
                    message: format!("event must be 0/1, got `{other}`"),
                })
            }
        };
        rows.push(OutcomeRow {
            subject_id: record[pi].trim().to_string(),
            duration,
            event,
        });
    }
    if rows.is_empty() {
        return Err(Error::Empty("outcome file has no rows".into()));
    }
    Ok(rows)
}

/// Joins an outcome CSV to a feature CSV on `subject_id`, keeping the order
/// of the feature file and dropping subjects without outcomes.
pub fn load_survival_dataset(
    features_path: impl AsRef<Path>,
    outcomes_path: impl AsRef<Path>,
) -> Result<SurvivalDataset> {
    let features = FeatureMatrix::load_csv(features_path)?;
    let path = outcomes_path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let outcomes = read_outcomes(file)?;
    join_outcomes(features, &outcomes)
}

pub fn join_outcomes(features: FeatureMatrix, outcomes: &[OutcomeRow]) -> Result<SurvivalDataset> {
    let by_id: HashMap<&str, &OutcomeRow> = outcomes
        .iter()
        .map(|o| (o.subject_id.as_str(), o))
        .collect();
    let keep: Vec<usize> = features
        .row_ids()
        .iter()
        .enumerate()
        .filter(|(_, id)| by_id.contains_key(id.as_str()))
        .map(|(i, _)| i)
        .collect();
    if keep.is_empty() {
        return Err(Error::Empty("no subject appears in both feature and outcome files".into()));
    }
    let features = features.select_rows(&keep);
    let rows: Vec<&OutcomeRow> = features.row_ids().iter().map(|id| by_id[id.as_str()]).collect();
    SurvivalDataset::new(
        rows.iter().map(|o| o.duration).collect(),
        rows.iter().map(|o| o.event).collect(),
        features,
    )
}
