//! Kernel SHAP: weighted least squares over coalitions with the Shapley
//! kernel, efficiency imposed exactly by eliminating the last feature.

use std::collections::BTreeMap;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::seq::index::sample;
use rand::Rng as _;

use super::{coalition_values, Background, Explanation};
use crate::error::{ensure_dim, Error, Result};
use crate::linalg;
use crate::rng::rng;

/// Enumerates every proper non-empty coalition when `n_coalitions >= 2^N - 2`;
/// otherwise samples coalition sizes with probability proportional to
/// `(N-1) / (s (N-s))` and adds each sample with its complement.
pub fn kernel_shap<F>(model_fn: F, x: ArrayView1<'_, f64>, background: &Background, n_coalitions: usize, seed: u64) -> Result<Explanation>
where
    F: Fn(ArrayView2<'_, f64>) -> Result<Array1<f64>>,
{
    let n = x.len();
    ensure_dim(n, background.n_features())?;
    if n_coalitions < n + 2 {
        return Err(Error::InvalidConfig(format!(
            "kernel explainer needs at least N + 2 = {} coalitions, got {n_coalitions}",
            n + 2
        )));
    }
    let ends = coalition_values(&model_fn, x, background, 2, |c, _| c == 1)?;
    let (base, fx) = (ends[0], ends[1]);
    if n <= 1 {
        return Ok(Explanation {
            values: vec![fx - base; n],
            base_value: base,
        });
    }

    let full = n < 63 && n_coalitions as u128 >= (1u128 << n) - 2;
    let (masks, weights): (Vec<Vec<bool>>, Vec<f64>) = if full {
        (1..(1u64 << n) - 1)
            .map(|m| {
                let z: Vec<bool> = (0..n).map(|j| m >> j & 1 == 1).collect();
                let s = m.count_ones() as usize;
                (z, shapley_kernel(n, s))
            })
            .unzip()
    } else {
        sampled_coalitions(n, n_coalitions, seed).into_iter().unzip()
    };

    let v = coalition_values(&model_fn, x, background, masks.len(), |c, j| masks[c][j])?;
    let delta = fx - base;
    let m = n - 1;
    let mut a = Array2::<f64>::zeros((m, m));
    let mut b = Array1::<f64>::zeros(m);
    let mut row = vec![0.0; m];
    for ((z, w), vi) in masks.iter().zip(&weights).zip(&v) {
        let zl = f64::from(u8::from(z[m]));
        for j in 0..m {
            row[j] = f64::from(u8::from(z[j])) - zl;
        }
        let target = vi - base - zl * delta;
        for r in 0..m {
            if row[r] == 0.0 {
                continue;
            }
            b[r] += w * row[r] * target;
            for c in 0..m {
                a[[r, c]] += w * row[r] * row[c];
            }
        }
    }
    // too few distinct coalitions leave the system rank deficient; the
    // minimum-norm solution still satisfies the efficiency constraint
    let phi = linalg::solve_spd(a.view(), b.view())
        .or_else(|| linalg::solve_lu(a.view(), b.view()))
        .or_else(|| {
            log::debug!("kernel regression over {} coalitions is rank deficient", masks.len());
            linalg::solve_min_norm(a.view(), b.view())
        })
        .ok_or_else(|| Error::Singular(format!("kernel regression over {} coalitions", masks.len())))?;
    let mut values = phi.to_vec();
    values.push(delta - values.iter().sum::<f64>());
    Ok(Explanation { values, base_value: base })
}

/// `(N-1) / (C(N, s) s (N-s))`
fn shapley_kernel(n: usize, s: usize) -> f64 {
    let mut binom = 1.0;
    for i in 0..s {
        binom = binom * (n - i) as f64 / (i + 1) as f64;
    }
    (n - 1) as f64 / (binom * s as f64 * (n - s) as f64)
}

fn sampled_coalitions(n: usize, budget: usize, seed: u64) -> Vec<(Vec<bool>, f64)> {
    let mut r = rng(seed);
    let size_w: Vec<f64> = (1..n).map(|s| 1.0 / (s * (n - s)) as f64).collect();
    let total: f64 = size_w.iter().sum();
    let mut counts: BTreeMap<Vec<bool>, f64> = BTreeMap::new();
    for _ in 0..budget / 2 {
        let mut u = r.random::<f64>() * total;
        let mut s = n - 1;
        for (k, w) in size_w.iter().enumerate() {
            if u < *w {
                s = k + 1;
                break;
            }
            u -= w;
        }
        let mut z = vec![false; n];
        for j in sample(&mut r, n, s) {
            z[j] = true;
        }
        let complement: Vec<bool> = z.iter().map(|v| !v).collect();
        *counts.entry(z).or_default() += 1.0;
        *counts.entry(complement).or_default() += 1.0;
    }
    counts.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::explain::exact_shapley;
    use ndarray::array;

    #[test]
    fn full_enumeration_is_exact() {
        let f = |x: ArrayView2<'_, f64>| {
            Ok(x.rows().into_iter().map(|r| (r[0] * r[1]).tanh() + r[2] * r[2] - 0.5 * r[3]).collect())
        };
        let bg = Background::new(array![[0.1, -0.3, 0.5, 1.0], [1.2, 0.4, -0.7, 0.0]]).unwrap();
        let x = array![0.9, 1.1, -0.2, 2.0];
        let k = kernel_shap(f, x.view(), &bg, 14, 0).unwrap();
        let e = exact_shapley(f, x.view(), &bg).unwrap();
        for (a, b) in k.values.iter().zip(&e.values) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
    }

    #[test]
    fn rank_deficient_sample_keeps_efficiency() {
        let f = |x: ArrayView2<'_, f64>| Ok(x.rows().into_iter().map(|r| r[0] * r[1] + r[2]).collect());
        let bg = Background::new(array![[0.0, 0.0, 0.0]]).unwrap();
        let x = array![1.0, 2.0, 3.0];
        let e = kernel_shap(f, x.view(), &bg, 5, 3).unwrap();
        assert!((e.output() - 5.0).abs() < 1e-12);
    }

    #[test]
    fn sampled_efficiency_is_exact() {
        let f = |x: ArrayView2<'_, f64>| Ok(x.rows().into_iter().map(|r| r.iter().map(|v| v.sin()).product::<f64>() + r[0]).collect());
        let bg = Background::new(array![[0.0; 12], [0.5; 12]]).unwrap();
        let x = Array1::from_shape_fn(12, |j| j as f64 / 5.0);
        let e = kernel_shap(f, x.view(), &bg, 300, 3).unwrap();
        let fx = f(x.view().insert_axis(ndarray::Axis(0))).unwrap()[0];
        assert!((e.output() - fx).abs() < 1e-10);
        assert_eq!(e, kernel_shap(f, x.view(), &bg, 300, 3).unwrap());
    }

    #[test]
    fn too_few_coalitions_rejected() {
        let f = |x: ArrayView2<'_, f64>| Ok(x.column(0).to_owned());
        let bg = Background::new(array![[0.0, 0.0, 0.0]]).unwrap();
        assert!(kernel_shap(f, array![1.0, 1.0, 1.0].view(), &bg, 4, 0).is_err());
    }
}
