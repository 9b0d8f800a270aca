//! Diagnosis timelines and the CKD stage-progression labeler.

use std::collections::BTreeMap;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Days since 1970-01-01.
pub type Day = i64;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiagnosisEvent {
    pub subject_id: String,
    pub code: String,
    pub date: Day,
}

/// ICD-9 CKD stage codes and their rank. `5859` (unspecified) has no rank.
pub const STAGED_CODES: [(&str, u8); 6] = [
    ("5851", 1),
    ("5852", 2),
    ("5853", 3),
    ("5854", 4),
    ("5855", 5),
    ("5856", 6),
];

pub const UNSPECIFIED_CKD: &str = "5859";

pub fn stage_rank(code: &str) -> Option<u8> {
    let code = code.trim().replace('.', "");
    STAGED_CODES
        .iter()
        .find(|(c, _)| *c == code)
        .map(|(_, rank)| *rank)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubjectTimeline {
    subject_id: String,
    events: Vec<DiagnosisEvent>,
}

impl SubjectTimeline {
    /// Builds a timeline, stably sorting events by date.
    pub fn new(subject_id: impl Into<String>, mut events: Vec<DiagnosisEvent>) -> Result<Self> {
        let subject_id = subject_id.into();
        if events.is_empty() {
            return Err(Error::Empty(format!("timeline for subject {subject_id}")));
        }
        if let Some(bad) = events.iter().find(|e| e.date < 0) {
            return Err(Error::InvalidData(format!(
                "subject {subject_id}: negative date {} for code {}",
                bad.date, bad.code
            )));
        }
        events.sort_by_key(|e| e.date);
        Ok(Self { subject_id, events })
    }

    /// Convenience constructor from `(code, day)` pairs.
    pub fn from_codes(subject_id: &str, codes: &[(&str, Day)]) -> Result<Self> {
        let events = codes
            .iter()
            .map(|(code, date)| DiagnosisEvent {
                subject_id: subject_id.to_string(),
                code: code.to_string(),
                date: *date,
            })
            .collect();
        Self::new(subject_id, events)
    }

    pub fn subject_id(&self) -> &str {
        &self.subject_id
    }

    pub fn events(&self) -> &[DiagnosisEvent] {
        &self.events
    }

    pub fn last_date(&self) -> Day {
        self.events.last().map(|e| e.date).unwrap_or(0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProgressionLabel {
    pub progressed: bool,
    pub duration_days: i64,
    pub index_date: Day,
}

/// Labels stage progression on one timeline.
///
/// The index date is the first staged diagnosis. Progression is the first
/// date on which a staged code ranks strictly above a staged code recorded
/// on a strictly earlier date; same-day codes collapse to the highest stage
/// and never progress against each other. Without progression the subject is
/// censored at the last event of any kind.
pub fn label_progression(timeline: &SubjectTimeline) -> Result<ProgressionLabel> {
    let staged: Vec<(Day, u8)> = timeline
        .events
        .iter()
        .filter_map(|e| stage_rank(&e.code).map(|r| (e.date, r)))
        .collect();
    let index_date = staged
        .first()
        .map(|(d, _)| *d)
        .ok_or_else(|| Error::NotStageable(timeline.subject_id.clone()))?;

    let mut min_prior: Option<u8> = None;
    let mut i = 0;
    while i < staged.len() {
        let day = staged[i].0;
        let mut j = i;
        let (mut lo, mut hi) = (u8::MAX, 0u8);
        while j < staged.len() && staged[j].0 == day {
            lo = lo.min(staged[j].1);
            hi = hi.max(staged[j].1);
            j += 1;
        }
        if let Some(prior) = min_prior {
            if hi > prior {
                return Ok(ProgressionLabel {
                    progressed: true,
                    duration_days: day - index_date,
                    index_date,
                });
            }
        }
        min_prior = Some(min_prior.map_or(lo, |p| p.min(lo)));
        i = j;
    }

    Ok(ProgressionLabel {
        progressed: false,
        duration_days: timeline.last_date() - index_date,
        index_date,
    })
}

pub fn parse_iso_date(s: &str) -> Option<Day> {
    let date = NaiveDate::parse_from_str(s.trim(), "%Y-%m-%d").ok()?;
    let epoch = NaiveDate::from_ymd_opt(1970, 1, 1)?;
    Some((date - epoch).num_days())
}

pub fn format_iso_date(day: Day) -> String {
    let epoch = NaiveDate::from_ymd_opt(1970, 1, 1).expect("valid epoch");
    (epoch + chrono::Duration::days(day))
        .format("%Y-%m-%d")
        .to_string()
}

const DIAGNOSIS_COLUMNS: [&str; 3] = ["subject_id", "icd9_code", "date"];

/// Reads a `subject_id,icd9_code,date` CSV into per-subject timelines,
/// ordered by subject id. Duplicate rows are kept.
pub fn load_cohort_events(path: impl AsRef<Path>) -> Result<Vec<SubjectTimeline>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_cohort_events(file)
}

pub fn read_cohort_events<R: std::io::Read>(reader: R) -> Result<Vec<SubjectTimeline>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.is_empty() || (headers.len() == 1 && headers[0].trim().is_empty()) {
        return Err(Error::Empty("diagnosis file has no header".into()));
    }
    let mut positions = [usize::MAX; 3];
    for (i, name) in headers.iter().enumerate() {
        let name = name.trim();
        match DIAGNOSIS_COLUMNS.iter().position(|c| *c == name) {
            Some(k) => positions[k] = i,
            None => return Err(Error::UnknownColumn(name.to_string())),
        }
    }
    if let Some(k) = positions.iter().position(|p| *p == usize::MAX) {
        return Err(Error::Parse {
            line: 1,
            message: format!("missing column `{}`", DIAGNOSIS_COLUMNS[k]),
        });
    }

    let mut by_subject: BTreeMap<String, Vec<DiagnosisEvent>> = BTreeMap::new();
    for record in rdr.records() {
        let record = record.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let field = |k: usize| record.get(positions[k]).unwrap_or("").trim();
        let subject_id = field(0);
        if subject_id.is_empty() {
            return Err(Error::Parse {
                line,
                message: "empty subject_id".into(),
            });
        }
        let code = field(1);
        if code.is_empty() {
            return Err(Error::Parse {
                line,
                message: "empty icd9_code".into(),
            });
        }
        let date = parse_iso_date(field(2)).ok_or_else(|| Error::Parse {
            line,
            message: format!("invalid date `{}` (expected YYYY-MM-DD)", field(2)),
        })?;
        if date < 0 {
            return Err(Error::Parse {
                line,
                message: format!("date `{}` precedes 1970-01-01", field(2)),
            });
        }
        by_subject
            .entry(subject_id.to_string())
            .or_default()
            .push(DiagnosisEvent {
                subject_id: subject_id.to_string(),
                code: code.to_string(),
                date,
            });
    }
    if by_subject.is_empty() {
        return Err(Error::Empty("diagnosis file has no rows".into()));
    }
    by_subject
        .into_iter()
        .map(|(id, events)| SubjectTimeline::new(id, events))
        .collect()
}
