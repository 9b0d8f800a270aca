use serde::{Deserialize, Serialize};

use crate::error::{ensure_dim, Error, Result};

/// How a tie in predicted risk between a comparable pair is credited.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TieCredit {
    /// Half credit.
    #[default]
    Half,
    /// No credit, the literal indicator form.
    Strict,
}

/// Mann-Whitney AUROC: probability that a random positive outscores a
/// random negative, ties credited one half.
pub fn auroc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    ensure_dim(scores.len(), labels.len())?;
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::InvalidData("scores contain NaN".into()));
    }
    let n_pos = labels.iter().filter(|l| **l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::Undefined("AUROC needs both classes".into()));
    }
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // rank sum of positives with midranks for ties, in doubled units
    let mut pos_rank2: u128 = 0;
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && scores[idx[j + 1]] == scores[idx[i]] {
            j += 1;
        }
        let midrank2 = (i + j + 2) as u128; // 2 * mean of 1-based ranks i+1..=j+1
        let pos_in_group = idx[i..=j].iter().filter(|&&k| labels[k]).count() as u128;
        pos_rank2 += midrank2 * pos_in_group;
        i = j + 1;
    }
    let (np, nn) = (n_pos as u128, n_neg as u128);
    let u2 = pos_rank2 - np * (np + 1);
    Ok(u2 as f64 / (2 * np * nn) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairCounts {
    pub concordant: u64,
    pub tied: u64,
    pub comparable: u64,
}

/// Counts pairs with `T_i < T_j` and `delta_i = 1`; concordant means
/// `risk_i > risk_j`.
pub fn concordance_counts(risk: &[f64], durations: &[f64], events: &[bool]) -> Result<PairCounts> {
    ensure_dim(risk.len(), durations.len())?;
    ensure_dim(risk.len(), events.len())?;
    let mut c = PairCounts {
        concordant: 0,
        tied: 0,
        comparable: 0,
    };
    for i in 0..risk.len() {
        if !events[i] {
            continue;
        }
        for j in 0..risk.len() {
            if durations[i] < durations[j] {
                c.comparable += 1;
                if risk[i] > risk[j] {
                    c.concordant += 1;
                } else if risk[i] == risk[j] {
                    c.tied += 1;
                }
            }
        }
    }
    Ok(c)
}

/// Harrell's C-index with higher risk meaning earlier failure.
pub fn concordance_index(risk: &[f64], durations: &[f64], events: &[bool], ties: TieCredit) -> Result<f64> {
    let c = concordance_counts(risk, durations, events)?;
    if c.comparable == 0 {
        return Err(Error::Undefined("no comparable pairs".into()));
    }
    let num2 = 2 * c.concordant
        + match ties {
            TieCredit::Half => c.tied,
            TieCredit::Strict => 0,
        };
    Ok(num2 as f64 / (2 * c.comparable) as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynamicAucPoint {
    pub time: f64,
    /// `None` when the time has no cases or no controls.
    pub value: Option<f64>,
    pub n_cases: usize,
    pub n_controls: usize,
}

/// Cumulative/dynamic AUROC: at `t`, cases have an observed event by `t`
/// and controls are still at risk after `t`; subjects censored by `t` drop out.
pub fn dynamic_auc(
    risk: &[f64],
    durations: &[f64],
    events: &[bool],
    eval_times: &[f64],
) -> Result<Vec<DynamicAucPoint>> {
    ensure_dim(risk.len(), durations.len())?;
    ensure_dim(risk.len(), events.len())?;
    Ok(eval_times
        .iter()
        .map(|&t| {
            let cases: Vec<f64> = (0..risk.len())
                .filter(|&i| durations[i] <= t && events[i])
                .map(|i| risk[i])
                .collect();
            let controls: Vec<f64> = (0..risk.len())
                .filter(|&j| durations[j] > t)
                .map(|j| risk[j])
                .collect();
            let value = if cases.is_empty() || controls.is_empty() {
                log::warn!(
                    "dynamic AUC at t={t} omitted ({} cases, {} controls)",
                    cases.len(),
                    controls.len()
                );
                None
            } else {
                let mut num2: u64 = 0;
                for a in &cases {
                    for b in &controls {
                        num2 += if a > b { 2 } else { u64::from(a == b) };
                    }
                }
                Some(num2 as f64 / (2 * cases.len() * controls.len()) as f64)
            };
            DynamicAucPoint {
                time: t,
                value,
                n_cases: cases.len(),
                n_controls: controls.len(),
            }
        })
        .collect())
}
