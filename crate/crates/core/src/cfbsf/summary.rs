//! Per-band order-preserving samples and cross-band correlations.

use nalgebra::DMatrix;
use rand::Rng;

use crate::stats::pearson;

/// Sorted sample indices: without replacement when the series is long
/// enough, otherwise with replacement.
pub fn sample_indices<R: Rng + ?Sized>(n: usize, sample_len: usize, rng: &mut R) -> Vec<usize> {
    let mut idx: Vec<usize> = if n >= sample_len {
        rand::seq::index::sample(rng, n, sample_len).into_vec()
    } else {
        (0..sample_len).map(|_| rng.random_range(0..n)).collect()
    };
    idx.sort_unstable();
    idx
}

/// Order-preserving random sample of `sample_len` values from `series`.
pub fn band_summary<R: Rng + ?Sized>(series: &[f64], sample_len: usize, rng: &mut R) -> Vec<f64> {
    assert!(!series.is_empty(), "band series is empty");
    sample_indices(series.len(), sample_len, rng)
        .into_iter()
        .map(|i| series[i])
        .collect()
}

/// Pearson correlation of each band with every band after it, and with
/// itself when `include_self`, in `(b, b')` lexicographic order.
/// Zero-variance samples correlate 0, including with themselves.
pub fn band_correlations(samples: &DMatrix<f64>, include_self: bool) -> Vec<f64> {
    let n = samples.nrows();
    let rows: Vec<Vec<f64>> = (0..n).map(|b| samples.row(b).iter().copied().collect()).collect();
    let mut out = Vec::with_capacity(n * (n + 1) / 2);
    for b in 0..n {
        let start = if include_self { b } else { b + 1 };
        for b2 in start..n {
            out.push(pearson(&rows[b], &rows[b2]));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn exhaustive_sample_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s: Vec<f64> = (0..20).map(|i| (i * i) as f64).collect();
        assert_eq!(band_summary(&s, 20, &mut rng), s);
        assert_eq!(band_summary(&[4.0; 7], 20, &mut rng), vec![4.0; 20]);
    }

    #[test]
    fn samples_keep_time_order() {
        let s: Vec<f64> = (0..100).map(|i| i as f64).collect();
        for seed in 0..20 {
            let v = band_summary(&s, 20, &mut ChaCha8Rng::seed_from_u64(seed));
            assert!(v.windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn correlation_conventions() {
        let row: Vec<f64> = (0..20).map(|i| ((i * 7) % 5) as f64).collect();
        let same = DMatrix::from_fn(3, 20, |_, j| row[j]);
        assert_eq!(band_correlations(&same, true), vec![1.0; 6]);
        assert_eq!(band_correlations(&same, false), vec![1.0; 3]);
        let mut m = same.clone();
        m.row_mut(1).fill(2.0);
        let c = band_correlations(&m, true);
        // (0,0) (0,1) (0,2) (1,1) (1,2) (2,2)
        assert_eq!(c, vec![1.0, 0.0, 1.0, 0.0, 0.0, 1.0]);
    }
}
