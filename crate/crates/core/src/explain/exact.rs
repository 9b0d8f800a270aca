use ndarray::{Array1, ArrayView1, ArrayView2};

use super::{coalition_values, Background, Explanation};
use crate::error::{ensure_dim, Error, Result};

/// Largest feature count the `2^N` enumeration accepts.
pub const MAX_EXACT_FEATURES: usize = 20;

/// Shapley values by enumerating all `2^N` coalitions:
/// `phi_j = sum_{A not containing j} |A|! (N-|A|-1)! / N! * (v(A + j) - v(A))`.
pub fn exact_shapley<F>(model_fn: F, x: ArrayView1<'_, f64>, background: &Background) -> Result<Explanation>
where
    F: Fn(ArrayView2<'_, f64>) -> Result<Array1<f64>>,
{
    let n = x.len();
    if n > MAX_EXACT_FEATURES {
        return Err(Error::Capacity {
            n,
            max: MAX_EXACT_FEATURES,
        });
    }
    ensure_dim(n, background.n_features())?;
    if n == 0 {
        let v = coalition_values(&model_fn, x, background, 1, |_, _| false)?;
        return Ok(Explanation {
            values: Vec::new(),
            base_value: v[0],
        });
    }
    let v = coalition_values(&model_fn, x, background, 1 << n, |c, j| c >> j & 1 == 1)?;
    // weight(s) = 1 / (N * C(N-1, s))
    let mut weight = vec![0.0; n];
    let mut binom = 1.0;
    for (s, w) in weight.iter_mut().enumerate() {
        *w = 1.0 / (n as f64 * binom);
        binom = binom * (n - 1 - s) as f64 / (s + 1) as f64;
    }
    let mut phi = vec![0.0; n];
    for mask in 0..1u64 << n {
        let s = mask.count_ones() as usize;
        for (j, p) in phi.iter_mut().enumerate() {
            if mask >> j & 1 == 0 {
                *p += weight[s] * (v[(mask | 1 << j) as usize] - v[mask as usize]);
            }
        }
    }
    Ok(Explanation {
        values: phi,
        base_value: v[0],
    })
}
