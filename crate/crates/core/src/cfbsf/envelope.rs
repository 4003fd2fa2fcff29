//! Hilbert amplitude envelope and envelope-maxima chunking.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::CfbsfConfig;
use crate::error::{Error, Result};

/// Magnitude of the analytic signal, smoothed by a centred moving average of
/// `envelope_smoothing_window_s`. Near the edges the average runs over the
/// samples that exist.
pub fn amplitude_envelope(signal: &[f64], cfg: &CfbsfConfig) -> Result<Vec<f64>> {
    if signal.is_empty() {
        return Err(Error::EmptySignal);
    }
    let raw = analytic_magnitude(signal);
    let width = cfg.samples(cfg.envelope_smoothing_window_s).max(1);
    Ok(moving_average(&raw, width))
}

pub fn analytic_magnitude(signal: &[f64]) -> Vec<f64> {
    let n = signal.len();
    let mut planner = FftPlanner::<f64>::new();
    let mut buf: Vec<Complex<f64>> = signal.iter().map(|&x| Complex::new(x, 0.0)).collect();
    planner.plan_fft_forward(n).process(&mut buf);
    // Zero the negative frequencies and double the positive ones.
    for (k, c) in buf.iter_mut().enumerate() {
        let h = if k == 0 || (n % 2 == 0 && k == n / 2) {
            1.0
        } else if k < n.div_ceil(2) {
            2.0
        } else {
            0.0
        };
        *c *= h;
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    buf.iter().map(|c| c.norm() / n as f64).collect()
}

pub fn moving_average(x: &[f64], width: usize) -> Vec<f64> {
    let n = x.len();
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0);
    for v in x {
        prefix.push(prefix.last().unwrap() + v);
    }
    let before = (width - 1) / 2;
    let after = width - 1 - before;
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(before);
            let hi = (i + after + 1).min(n);
            ((prefix[hi] - prefix[lo]) / (hi - lo) as f64).max(0.0)
        })
        .collect()
}

/// Indices of local maxima. A flat top counts once, at its middle sample.
/// Endpoints are never maxima.
pub fn local_maxima(x: &[f64]) -> Vec<usize> {
    let mut peaks = Vec::new();
    let n = x.len();
    let mut i = 1;
    while i + 1 < n {
        if x[i - 1] < x[i] {
            let mut ahead = i + 1;
            while ahead + 1 < n && x[ahead] == x[i] {
                ahead += 1;
            }
            if x[ahead] < x[i] {
                peaks.push((i + ahead - 1) / 2);
                i = ahead;
            }
        }
        i += 1;
    }
    peaks
}

/// Topographic prominence of the peak at `p`.
pub fn prominence(x: &[f64], p: usize) -> f64 {
    let h = x[p];
    let mut left_min = h;
    for &v in x[..p].iter().rev() {
        if v > h {
            break;
        }
        left_min = left_min.min(v);
    }
    let mut right_min = h;
    for &v in &x[p + 1..] {
        if v > h {
            break;
        }
        right_min = right_min.min(v);
    }
    h - left_min.max(right_min)
}

/// Chunk layout of one token: `boundaries` are interior sample indices, so
/// there are `boundaries.len() + 1` chunks.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Chunking {
    pub boundaries: Vec<usize>,
    pub len: usize,
}

impl Chunking {
    pub fn n_chunks(&self) -> usize {
        self.boundaries.len() + 1
    }

    pub fn ranges(&self) -> Vec<std::ops::Range<usize>> {
        let mut edges = Vec::with_capacity(self.boundaries.len() + 2);
        edges.push(0);
        edges.extend(&self.boundaries);
        edges.push(self.len);
        edges.windows(2).map(|w| w[0]..w[1]).collect()
    }

    pub fn boundary_times(&self, sample_rate: u32) -> Vec<f64> {
        self.boundaries
            .iter()
            .map(|&b| b as f64 / sample_rate as f64)
            .collect()
    }
}

/// Splits at envelope maxima whose prominence is at least
/// `peak_min_prominence` times the envelope maximum. Chunks shorter than one
/// FFT window are merged into the preceding chunk (the first one into the
/// next).
pub fn chunk_boundaries(envelope: &[f64], cfg: &CfbsfConfig) -> Chunking {
    let max = envelope.iter().cloned().fold(0.0, f64::max);
    let mut cuts: Vec<usize> = if max > 0.0 {
        let floor = cfg.peak_min_prominence * max;
        local_maxima(envelope)
            .into_iter()
            .filter(|&p| prominence(envelope, p) >= floor)
            .collect()
    } else {
        Vec::new()
    };
    let min_len = cfg.samples(cfg.fft_window_s).max(1);
    let len = envelope.len();
    // A short chunk disappears by dropping the boundary that opens it, which
    // folds it into its predecessor. The first chunk has none, so it loses
    // its closing boundary instead.
    loop {
        let mut edges = vec![0];
        edges.extend(&cuts);
        edges.push(len);
        let short = edges.windows(2).position(|w| w[1] - w[0] < min_len);
        match short {
            Some(_) if cuts.is_empty() => break,
            Some(0) => {
                cuts.remove(0);
            }
            Some(i) => {
                cuts.remove(i - 1);
            }
            None => break,
        }
    }
    Chunking {
        boundaries: cuts,
        len,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn cfg() -> CfbsfConfig {
        CfbsfConfig::default()
    }

    #[test]
    fn sine_envelope_is_flat() {
        let x: Vec<f64> = (0..8000)
            .map(|i| 0.7 * (2.0 * PI * 440.0 * i as f64 / 16000.0).sin())
            .collect();
        let env = amplitude_envelope(&x, &cfg()).unwrap();
        assert_eq!(env.len(), x.len());
        for v in &env[800..7200] {
            assert!((v - 0.7).abs() < 0.035, "{v}");
        }
        assert!(amplitude_envelope(&[], &cfg()).is_err());
        assert!(amplitude_envelope(&[0.0; 100], &cfg()).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn am_tone_tracks_modulator() {
        let sr = 16000.0;
        let a = |t: f64| 0.5 + 0.3 * (2.0 * PI * 3.0 * t).sin();
        let x: Vec<f64> = (0..16000)
            .map(|i| {
                let t = i as f64 / sr;
                a(t) * (2.0 * PI * 1000.0 * t).sin()
            })
            .collect();
        let env = amplitude_envelope(&x, &cfg()).unwrap();
        let (mut se, mut sa) = (0.0, 0.0);
        for (i, v) in env.iter().enumerate().take(15000).skip(1000) {
            let t = i as f64 / sr;
            se += (v - a(t)).powi(2);
            sa += a(t).powi(2);
        }
        assert!((se / sa).sqrt() < 0.05);
    }

    #[test]
    fn maxima_scan() {
        assert_eq!(local_maxima(&[0.0, 1.0, 0.0, 2.0, 2.0, 2.0, 1.0]), vec![1, 4]);
        assert_eq!(local_maxima(&[0.0, 1.0, 2.0, 3.0]), Vec::<usize>::new());
        assert_eq!(local_maxima(&[0.0, 1.0, 1.0, 0.0]), vec![1]);
        let x = [0.0, 5.0, 1.0, 2.0, 1.5, 4.0, 0.0];
        assert_eq!(prominence(&x, 1), 5.0);
        assert_eq!(prominence(&x, 3), 0.5);
        assert_eq!(prominence(&x, 5), 3.0);
    }

    #[test]
    fn monotone_envelope_is_one_chunk() {
        let env: Vec<f64> = (0..3000).map(|i| i as f64).collect();
        let c = chunk_boundaries(&env, &cfg());
        assert_eq!(c.n_chunks(), 1);
        assert_eq!(c.ranges(), vec![0..3000]);
    }

    #[test]
    fn short_chunks_merge_backwards() {
        let mut env = vec![0.0; 1000];
        for (p, h) in [(40usize, 1.0), (500, 1.0), (540, 1.0)] {
            env[p] = h;
        }
        let c = chunk_boundaries(&env, &cfg());
        // 0..40 folds forward, then 500..540 folds into the chunk before it.
        assert_eq!(c.boundaries, vec![540]);
    }
}
