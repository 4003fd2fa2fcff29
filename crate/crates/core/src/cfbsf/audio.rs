//! WAV decoding, mono mixdown, offset slicing and resampling.

use std::f64::consts::PI;
use std::path::Path;

use crate::error::{Error, Result};

/// Reads `path`, averages channels, keeps `[start_s, end_s)` and resamples to
/// `target_rate`. Samples are scaled to [-1, 1].
pub fn read_wav(
    path: impl AsRef<Path>,
    start_s: Option<f64>,
    end_s: Option<f64>,
    target_rate: u32,
) -> Result<Vec<f64>> {
    let path = path.as_ref();
    let fail = |reason: String| Error::AudioReadFailure {
        path: path.to_path_buf(),
        reason,
    };
    let mut reader = hound::WavReader::open(path).map_err(|e| fail(e.to_string()))?;
    let spec = reader.spec();
    let channels = spec.channels.max(1) as usize;
    let interleaved: Vec<f64> = match spec.sample_format {
        hound::SampleFormat::Float => reader
            .samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| fail(e.to_string()))?,
        hound::SampleFormat::Int => {
            let scale = (1u64 << (spec.bits_per_sample - 1)) as f64;
            reader
                .samples::<i32>()
                .map(|s| s.map(|v| v as f64 / scale))
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| fail(e.to_string()))?
        }
    };
    let mono: Vec<f64> = interleaved
        .chunks_exact(channels)
        .map(|frame| frame.iter().sum::<f64>() / channels as f64)
        .collect();

    let rate = spec.sample_rate as f64;
    let to_index = |t: f64| ((t * rate).round().max(0.0) as usize).min(mono.len());
    let lo = start_s.map_or(0, to_index);
    let hi = end_s.map_or(mono.len(), to_index);
    if hi <= lo {
        return Err(fail(format!("empty segment [{lo}, {hi}) of {} samples", mono.len())));
    }
    Ok(resample(&mono[lo..hi], spec.sample_rate, target_rate))
}

/// Writes 16-bit mono PCM.
pub fn write_wav_i16(path: impl AsRef<Path>, samples: &[f64], rate: u32) -> Result<()> {
    let path = path.as_ref();
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let fail = |e: hound::Error| Error::AudioReadFailure {
        path: path.to_path_buf(),
        reason: e.to_string(),
    };
    let mut w = hound::WavWriter::create(path, spec).map_err(fail)?;
    for s in samples {
        let v = (s.clamp(-1.0, 1.0) * i16::MAX as f64).round() as i16;
        w.write_sample(v).map_err(fail)?;
    }
    w.finalize().map_err(fail)
}

const SINC_ZEROS: f64 = 16.0;

/// Band-limited resampling with a Hann-windowed sinc kernel.
pub fn resample(x: &[f64], from: u32, to: u32) -> Vec<f64> {
    if from == to || x.is_empty() {
        return x.to_vec();
    }
    let ratio = to as f64 / from as f64;
    let cutoff = ratio.min(1.0);
    let half = SINC_ZEROS / cutoff;
    let n_out = ((x.len() as f64) * ratio).round().max(1.0) as usize;
    (0..n_out)
        .map(|n| {
            let t = n as f64 / ratio;
            let lo = (t - half).ceil().max(0.0) as usize;
            let hi = ((t + half).floor() as usize).min(x.len() - 1);
            let mut acc = 0.0;
            for (k, &xk) in x.iter().enumerate().take(hi + 1).skip(lo) {
                let d = t - k as f64;
                let w = 0.5 + 0.5 * (PI * d / half).cos();
                acc += xk * cutoff * sinc(cutoff * d) * w;
            }
            acc
        })
        .collect()
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}
