//! Inputs shared by the benchmarks.

use nalgebra::DMatrix;
use plurisem_core::eval::{GoldEntry, GoldIndex};
use plurisem_core::corpus::Number;
use plurisem_core::seed;
use rand::Rng;

pub fn random_matrix(seed_value: u64, rows: usize, cols: usize) -> DMatrix<f64> {
    let mut rng = seed::rng(seed_value);
    DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

/// Gold space of `n_lexemes` singular/plural pairs.
pub fn gold_index(n_lexemes: usize, dim: usize) -> GoldIndex {
    let v = random_matrix(1, 2 * n_lexemes, dim);
    let entries = (0..2 * n_lexemes)
        .map(|i| GoldEntry {
            type_id: format!("w{i:05}"),
            number: if i % 2 == 0 { Number::Sg } else { Number::Pl },
            lexeme_id: format!("l{}", i / 2),
            vector: v.row(i).iter().copied().collect(),
        })
        .collect();
    GoldIndex::new(entries).expect("distinct ids")
}

/// Gaussian-enveloped harmonic tone with `bursts` loudness peaks.
pub fn burst_signal(bursts: usize, seconds: f64) -> Vec<f64> {
    let sr = 16000.0;
    (0..(seconds * sr) as usize)
        .map(|i| {
            let t = i as f64 / sr;
            let env: f64 = (1..=bursts)
                .map(|b| {
                    let c = seconds * b as f64 / (bursts + 1) as f64;
                    (-0.5 * ((t - c) / (seconds / 12.0)).powi(2)).exp()
                })
                .sum();
            0.3 * env * (2.0 * std::f64::consts::PI * 140.0 * t).sin()
        })
        .collect()
}
