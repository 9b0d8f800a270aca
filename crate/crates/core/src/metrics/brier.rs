use ndarray::ArrayView1;
use serde::{Deserialize, Serialize};

use crate::data::SurvivalDataset;
use crate::error::{ensure_dim, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BrierMode {
    /// `(1/N) sum (1[T_i > t] - S(t|x_i))^2` with no censoring adjustment.
    #[default]
    Literal,
    /// Inverse probability of censoring weights from the Kaplan-Meier
    /// estimate of the censoring distribution.
    Ipcw,
}

impl std::str::FromStr for BrierMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "literal" => Ok(BrierMode::Literal),
            "ipcw" => Ok(BrierMode::Ipcw),
            other => Err(Error::InvalidConfig(format!("unknown Brier mode `{other}`"))),
        }
    }
}

/// Brier score at `t` from precomputed survival probabilities `S(t | x_i)`.
pub fn brier_from_predictions(
    predicted: &[f64],
    durations: &[f64],
    events: &[bool],
    t: f64,
    mode: BrierMode,
) -> Result<f64> {
    ensure_dim(predicted.len(), durations.len())?;
    ensure_dim(predicted.len(), events.len())?;
    if !(t > 0.0) {
        return Err(Error::InvalidData(format!("Brier horizon must be positive, got {t}")));
    }
    let n = predicted.len();
    if n == 0 {
        return Err(Error::Empty("Brier score of an empty sample".into()));
    }
    let total: f64 = match mode {
        BrierMode::Literal => predicted
            .iter()
            .zip(durations)
            .map(|(s, &d)| {
                let alive = if d > t { 1.0 } else { 0.0 };
                (alive - s).powi(2)
            })
            .sum(),
        BrierMode::Ipcw => {
            let km = CensoringKm::fit(durations, events);
            let g_t = km.survival(t, false);
            let mut acc = 0.0;
            for i in 0..n {
                let s = predicted[i];
                if durations[i] <= t && events[i] {
                    let g = km.survival(durations[i], true);
                    if g > 0.0 {
                        acc += s * s / g;
                    }
                } else if durations[i] > t && g_t > 0.0 {
                    acc += (1.0 - s).powi(2) / g_t;
                }
            }
            acc
        }
    };
    Ok(total / n as f64)
}

/// Brier score at `t` for an arbitrary survival function over the dataset rows.
pub fn brier_score<F>(survival_fn: F, dataset: &SurvivalDataset, t: f64, mode: BrierMode) -> Result<f64>
where
    F: Fn(ArrayView1<'_, f64>, f64) -> f64,
{
    let predicted: Vec<f64> = dataset.x().rows().into_iter().map(|x| survival_fn(x, t)).collect();
    brier_from_predictions(&predicted, dataset.durations(), dataset.events(), t, mode)
}

/// Kaplan-Meier estimate of the censoring survival `G(t) = P(C > t)`.
struct CensoringKm {
    times: Vec<f64>,
    surv: Vec<f64>,
}

impl CensoringKm {
    fn fit(durations: &[f64], events: &[bool]) -> Self {
        let mut idx: Vec<usize> = (0..durations.len()).collect();
        idx.sort_by(|&a, &b| durations[a].total_cmp(&durations[b]));
        let mut at_risk = durations.len();
        let mut g = 1.0;
        let (mut times, mut surv) = (Vec::new(), Vec::new());
        let mut i = 0;
        while i < idx.len() {
            let t = durations[idx[i]];
            let mut j = i;
            let mut censored = 0;
            while j < idx.len() && durations[idx[j]] == t {
                censored += usize::from(!events[idx[j]]);
                j += 1;
            }
            if censored > 0 {
                g *= 1.0 - censored as f64 / at_risk as f64;
                times.push(t);
                surv.push(g);
            }
            at_risk -= j - i;
            i = j;
        }
        Self { times, surv }
    }

    /// `G(t)`, or `G(t-)` when `left_limit`.
    fn survival(&self, t: f64, left_limit: bool) -> f64 {
        let k = if left_limit {
            self.times.partition_point(|&s| s < t)
        } else {
            self.times.partition_point(|&s| s <= t)
        };
        if k == 0 {
            1.0
        } else {
            self.surv[k - 1]
        }
    }
}
