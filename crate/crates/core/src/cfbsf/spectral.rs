//! Short-time power spectrum and triangular MEL filterbank.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use super::CfbsfConfig;
use crate::error::{Error, Result};

pub const LOG_FLOOR: f64 = 1e-10;

pub fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

pub fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// `n_bands` triangular filters with edges equally spaced on the MEL scale
/// from 0 Hz to Nyquist, applied to a one-sided power spectrum.
#[derive(Clone, Debug)]
pub struct MelFilterbank {
    /// `n_bands × (fft_size/2 + 1)` weights.
    pub weights: DMatrix<f64>,
    pub centers_hz: Vec<f64>,
}

impl MelFilterbank {
    pub fn new(n_bands: usize, fft_size: usize, sample_rate: u32) -> Self {
        let nyquist = sample_rate as f64 / 2.0;
        let top = hz_to_mel(nyquist);
        let edges: Vec<f64> = (0..n_bands + 2)
            .map(|i| mel_to_hz(top * i as f64 / (n_bands + 1) as f64))
            .collect();
        let n_bins = fft_size / 2 + 1;
        let bin_hz = sample_rate as f64 / fft_size as f64;
        let weights = DMatrix::from_fn(n_bands, n_bins, |b, k| {
            let f = k as f64 * bin_hz;
            let (lo, c, hi) = (edges[b], edges[b + 1], edges[b + 2]);
            if f <= lo || f >= hi {
                0.0
            } else if f <= c {
                (f - lo) / (c - lo)
            } else {
                (hi - f) / (hi - c)
            }
        });
        MelFilterbank {
            weights,
            centers_hz: edges[1..=n_bands].to_vec(),
        }
    }

    pub fn n_bands(&self) -> usize {
        self.weights.nrows()
    }
}

/// Reusable spectrogram state for one configuration.
pub struct Spectrogram {
    window: Vec<f64>,
    hop: usize,
    fft: Arc<dyn Fft<f64>>,
    fft_size: usize,
    pub filterbank: MelFilterbank,
}

impl Spectrogram {
    pub fn new(cfg: &CfbsfConfig) -> Self {
        let win = cfg.samples(cfg.fft_window_s).max(1);
        let hop = cfg.samples(cfg.hop_s).max(1);
        let fft_size = cfg.fft_size.max(win);
        // Periodic Hann.
        let window = (0..win)
            .map(|n| 0.5 - 0.5 * (2.0 * PI * n as f64 / win as f64).cos())
            .collect();
        Spectrogram {
            window,
            hop,
            fft: FftPlanner::new().plan_fft_forward(fft_size),
            fft_size,
            filterbank: MelFilterbank::new(cfg.n_bands, fft_size, cfg.target_sample_rate),
        }
    }

    pub fn window_len(&self) -> usize {
        self.window.len()
    }

    pub fn n_frames(&self, len: usize) -> usize {
        if len < self.window.len() {
            0
        } else {
            (len - self.window.len()) / self.hop + 1
        }
    }

    /// `n_bands × n_frames` natural-log MEL energies.
    pub fn log_mel(&self, chunk: &[f64]) -> Result<DMatrix<f64>> {
        let win = self.window.len();
        if chunk.len() < win {
            return Err(Error::ChunkTooShort {
                len: chunk.len(),
                window: win,
            });
        }
        let n_frames = self.n_frames(chunk.len());
        let n_bins = self.fft_size / 2 + 1;
        let mut power = DMatrix::zeros(n_bins, n_frames);
        let mut buf = vec![Complex::new(0.0, 0.0); self.fft_size];
        for t in 0..n_frames {
            let frame = &chunk[t * self.hop..t * self.hop + win];
            buf.iter_mut().for_each(|c| *c = Complex::new(0.0, 0.0));
            for ((b, x), w) in buf.iter_mut().zip(frame).zip(&self.window) {
                b.re = x * w;
            }
            self.fft.process(&mut buf);
            for k in 0..n_bins {
                power[(k, t)] = buf[k].norm_sqr();
            }
        }
        let mut mel = &self.filterbank.weights * power;
        mel.apply(|e| *e = (*e + LOG_FLOOR).ln());
        Ok(mel)
    }
}

/// Log MEL spectrogram of one chunk at `cfg`.
pub fn mel_log_spectrogram(chunk: &[f64], cfg: &CfbsfConfig) -> Result<DMatrix<f64>> {
    Spectrogram::new(cfg).log_mel(chunk)
}
