use serde::{Deserialize, Serialize};

use super::discrimination::DynamicAucPoint;
use crate::error::Result;

/// Per-fold evaluation results.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    /// Held-out classifier AUROC per fold (absent for the KFRE-8 baseline).
    pub auroc: Vec<Option<f64>>,
    /// Held-out classifier accuracy at the configured threshold.
    pub accuracy: Vec<Option<f64>>,
    pub c_index: Vec<f64>,
    /// Per fold, `(horizon_days, brier)`.
    pub brier: Vec<Vec<(f64, f64)>>,
    pub dynamic_auc: Vec<Vec<DynamicAucPoint>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub metric: String,
    pub fold: String,
    pub horizon_days: Option<f64>,
    pub value: f64,
}

pub fn mean_sd(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = if values.len() > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    Some((mean, sd))
}

impl MetricReport {
    /// Tidy rows (`metric,fold,horizon_days,value`), per fold then `mean`
    /// and `sd` across folds.
    pub fn rows(&self) -> Vec<MetricRow> {
        let mut rows = Vec::new();
        let mut push_series = |metric: &str, horizon: Option<f64>, per_fold: Vec<(usize, f64)>| {
            for (f, v) in &per_fold {
                rows.push(MetricRow {
                    metric: metric.into(),
                    fold: f.to_string(),
                    horizon_days: horizon,
                    value: *v,
                });
            }
            let vals: Vec<f64> = per_fold.iter().map(|(_, v)| *v).collect();
            if let Some((mean, sd)) = mean_sd(&vals) {
                for (tag, v) in [("mean", mean), ("sd", sd)] {
                    rows.push(MetricRow {
                        metric: metric.into(),
                        fold: tag.into(),
                        horizon_days: horizon,
                        value: v,
                    });
                }
            }
        };
        push_series(
            "auroc",
            None,
            self.auroc.iter().enumerate().filter_map(|(f, v)| v.map(|v| (f, v))).collect(),
        );
        push_series(
            "accuracy",
            None,
            self.accuracy.iter().enumerate().filter_map(|(f, v)| v.map(|v| (f, v))).collect(),
        );
        push_series("c_index", None, self.c_index.iter().copied().enumerate().collect());
        for h in self.brier_horizons() {
            let series = self
                .brier
                .iter()
                .enumerate()
                .filter_map(|(f, pts)| pts.iter().find(|(t, _)| *t == h).map(|(_, v)| (f, *v)))
                .collect();
            push_series("brier", Some(h), series);
        }
        for h in self.dynamic_auc_times() {
            let series = self
                .dynamic_auc
                .iter()
                .enumerate()
                .filter_map(|(f, pts)| pts.iter().find(|p| p.time == h).and_then(|p| p.value.map(|v| (f, v))))
                .collect();
            push_series("dynamic_auc", Some(h), series);
        }
        rows
    }

    fn brier_horizons(&self) -> Vec<f64> {
        self.brier.first().map(|pts| pts.iter().map(|(t, _)| *t).collect()).unwrap_or_default()
    }

    fn dynamic_auc_times(&self) -> Vec<f64> {
        self.dynamic_auc.first().map(|pts| pts.iter().map(|p| p.time).collect()).unwrap_or_default()
    }

    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["metric", "fold", "horizon_days", "value"])?;
        for r in self.rows() {
            w.write_record([
                r.metric,
                r.fold,
                r.horizon_days.map(|h| h.to_string()).unwrap_or_default(),
                r.value.to_string(),
            ])?;
        }
        w.flush().map_err(|e| crate::Error::io("<metrics csv>", e))?;
        Ok(())
    }
}
