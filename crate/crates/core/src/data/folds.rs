use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::rng::rng;

/// Shuffles `0..n` with `seed` and cuts it into `k` folds whose sizes differ
/// by at most one. Each fold is returned sorted.
pub fn split_folds(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::InvalidConfig(format!("need at least 2 folds, got {k}")));
    }
    if k > n {
        return Err(Error::InvalidConfig(format!("{k} folds requested for {n} rows")));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng(seed));
    let (base, extra) = (n / k, n % k);
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let len = base + usize::from(f < extra);
        let mut fold = idx[start..start + len].to_vec();
        fold.sort_unstable();
        folds.push(fold);
        start += len;
    }
    Ok(folds)
}

/// Complement of fold `f`, sorted.
pub fn train_indices(folds: &[Vec<usize>], f: usize) -> Vec<usize> {
    let mut out: Vec<usize> = folds
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != f)
        .flat_map(|(_, fold)| fold.iter().copied())
        .collect();
    out.sort_unstable();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn even_and_uneven_sizes() {
        let folds = split_folds(10, 5, 1).unwrap();
        assert!(folds.iter().all(|f| f.len() == 2));
        let mut sizes: Vec<_> = split_folds(11, 5, 1).unwrap().iter().map(Vec::len).collect();
        sizes.sort_unstable();
        assert_eq!(sizes, vec![2, 2, 2, 2, 3]);
    }

    #[test]
    fn deterministic_and_validated() {
        assert_eq!(split_folds(37, 5, 9).unwrap(), split_folds(37, 5, 9).unwrap());
        assert!(split_folds(3, 5, 0).is_err());
        assert!(split_folds(10, 1, 0).is_err());
    }

    proptest! {
        #[test]
        fn folds_partition_indices(n in 2usize..200, k in 2usize..10, seed in any::<u64>()) {
            prop_assume!(k <= n);
            let folds = split_folds(n, k, seed).unwrap();
            let mut all: Vec<usize> = folds.iter().flatten().copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
            let max = folds.iter().map(Vec::len).max().unwrap();
            let min = folds.iter().map(Vec::len).min().unwrap();
            prop_assert!(max - min <= 1);
            let train = train_indices(&folds, 0);
            prop_assert_eq!(train.len() + folds[0].len(), n);
        }
    }
}
