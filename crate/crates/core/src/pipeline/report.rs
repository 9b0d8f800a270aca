use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::run::{RunReport, SelectedFeature};
use crate::error::{Error, Result};
use crate::metrics::mean_sd;
use crate::survival::{CoxCoefficient, PhTest};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub file: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub files: Vec<ManifestEntry>,
}

pub const REPORT_FILES: [&str; 6] = [
    "metrics.json",
    "metrics.csv",
    "selected_features.csv",
    "cox_summary.csv",
    "brier_curve.csv",
    "dynamic_auc_curve.csv",
];

fn csv_bytes<F>(header: &[&str], fill: F) -> Result<Vec<u8>>
where
    F: FnOnce(&mut csv::Writer<&mut Vec<u8>>) -> Result<()>,
{
    let mut buf = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(header)?;
        fill(&mut w)?;
        w.flush().map_err(|e| Error::io("<report csv>", e))?;
    }
    Ok(buf)
}

fn opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// Coefficient table joined with the proportional-hazards tests by feature.
pub fn cox_summary_csv(summary: &[CoxCoefficient], ph_tests: &[PhTest]) -> Result<Vec<u8>> {
    csv_bytes(
        &[
            "feature", "beta", "se", "hazard_ratio", "ci_lower", "ci_upper", "z", "p_value", "ph_correlation", "ph_p_value",
        ],
        |w| {
            for c in summary {
                let ph = ph_tests.iter().find(|p| p.feature == c.feature);
                w.write_record([
                    c.feature.clone(),
                    c.beta.to_string(),
                    c.se.to_string(),
                    c.hazard_ratio.to_string(),
                    c.ci_lower.to_string(),
                    c.ci_upper.to_string(),
                    c.z.to_string(),
                    c.p_value.to_string(),
                    opt(ph.map(|p| p.correlation)),
                    opt(ph.map(|p| p.p_value)),
                ])?;
            }
            Ok(())
        },
    )
}

/// `feature,rank,mean_abs_shap,kfre8` for one selected set.
pub fn selected_features_csv(selected: &[SelectedFeature]) -> Result<Vec<u8>> {
    csv_bytes(&["feature", "rank", "mean_abs_shap", "kfre8"], |w| {
        for s in selected {
            w.write_record([
                s.feature.clone(),
                s.rank.map(|r| r.to_string()).unwrap_or_default(),
                opt(s.mean_abs_shap),
                s.kfre8.to_string(),
            ])?;
        }
        Ok(())
    })
}

/// Serializes each report file without touching the filesystem.
pub fn render_report(report: &RunReport) -> Result<Vec<(&'static str, Vec<u8>)>> {
    let mut json = serde_json::to_vec_pretty(report)?;
    json.push(b'\n');

    let mut metrics = Vec::new();
    report.metrics.write_csv(&mut metrics)?;

    let selected = csv_bytes(&["fold", "feature", "rank", "mean_abs_shap", "kfre8"], |w| {
        for f in &report.folds {
            for s in &f.selected {
                w.write_record([
                    f.fold.to_string(),
                    s.feature.clone(),
                    s.rank.map(|r| r.to_string()).unwrap_or_default(),
                    opt(s.mean_abs_shap),
                    s.kfre8.to_string(),
                ])?;
            }
        }
        Ok(())
    })?;

    let cox = cox_summary_csv(&report.cox_summary, &report.schoenfeld)?;

    let brier = csv_bytes(&["fold", "horizon_days", "brier"], |w| {
        for f in &report.folds {
            for (h, b) in &f.brier {
                w.write_record([f.fold.to_string(), h.to_string(), b.to_string()])?;
            }
        }
        for &h in &report.config.horizons_days {
            let vals: Vec<f64> = report
                .folds
                .iter()
                .filter_map(|f| f.brier.iter().find(|(t, _)| *t == h).map(|(_, b)| *b))
                .collect();
            if let Some((m, _)) = mean_sd(&vals) {
                w.write_record(["mean".to_string(), h.to_string(), m.to_string()])?;
            }
        }
        Ok(())
    })?;

    let dyn_auc = csv_bytes(&["fold", "time_days", "auc", "n_cases", "n_controls"], |w| {
        for f in &report.folds {
            for p in &f.dynamic_auc {
                w.write_record([
                    f.fold.to_string(),
                    p.time.to_string(),
                    opt(p.value),
                    p.n_cases.to_string(),
                    p.n_controls.to_string(),
                ])?;
            }
        }
        for &h in &report.config.horizons_days {
            let vals: Vec<f64> = report
                .folds
                .iter()
                .filter_map(|f| f.dynamic_auc.iter().find(|p| p.time == h).and_then(|p| p.value))
                .collect();
            if let Some((m, _)) = mean_sd(&vals) {
                w.write_record(["mean".to_string(), h.to_string(), m.to_string(), String::new(), String::new()])?;
            }
        }
        Ok(())
    })?;

    Ok(vec![
        (REPORT_FILES[0], json),
        (REPORT_FILES[1], metrics),
        (REPORT_FILES[2], selected),
        (REPORT_FILES[3], cox),
        (REPORT_FILES[4], brier),
        (REPORT_FILES[5], dyn_auc),
    ])
}

/// Writes the six report files into `out_dir` and returns their hashes.
pub fn emit_report(report: &RunReport, out_dir: impl AsRef<Path>) -> Result<Manifest> {
    let dir = out_dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = Vec::new();
    for (name, bytes) in render_report(report)? {
        let path = dir.join(name);
        std::fs::write(&path, &bytes).map_err(|e| Error::io(&path, e))?;
        files.push(ManifestEntry {
            file: name.to_string(),
            bytes: bytes.len() as u64,
            sha256: hex::encode(Sha256::digest(&bytes)),
        });
    }
    Ok(Manifest { files })
}

pub fn load_report(path: impl AsRef<Path>) -> Result<RunReport> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}
