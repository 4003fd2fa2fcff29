//! Continuous Frequency Band Summary Features.
//!
//! A token is split into chunks at the maxima of its smoothed Hilbert
//! envelope. Each chunk gets a log MEL spectrogram; every band contributes an
//! order-preserving random sample of its frame energies, followed by the
//! correlations between band samples. Chunks are concatenated in time order
//! and the result is zero-padded to a common width.

pub mod audio;
mod cache;
mod envelope;
mod spectral;
mod summary;

use std::path::PathBuf;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::corpus::{AudioToken, Corpus};
use crate::error::{Error, Result};
use crate::seed;

pub use cache::{read_feature_cache, write_feature_cache};
pub use envelope::{
    amplitude_envelope, analytic_magnitude, chunk_boundaries, local_maxima, moving_average,
    prominence, Chunking,
};
pub use spectral::{hz_to_mel, mel_log_spectrogram, mel_to_hz, MelFilterbank, Spectrogram, LOG_FLOOR};
pub use summary::{band_correlations, band_summary, sample_indices};

/// Padding target: the dataset maximum or a fixed chunk count.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum MaxChunks {
    #[default]
    Auto,
    Fixed(usize),
}

impl Serialize for MaxChunks {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            MaxChunks::Auto => s.serialize_str("auto"),
            MaxChunks::Fixed(n) => s.serialize_u64(*n as u64),
        }
    }
}

impl<'de> Deserialize<'de> for MaxChunks {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            N(u64),
            S(String),
        }
        match Repr::deserialize(d)? {
            Repr::N(n) => Ok(MaxChunks::Fixed(n as usize)),
            Repr::S(s) if s.eq_ignore_ascii_case("auto") => Ok(MaxChunks::Auto),
            Repr::S(s) => Err(serde::de::Error::custom(format!(
                "max_chunks must be an integer or \"auto\", got {s:?}"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CfbsfConfig {
    pub n_bands: usize,
    pub sample_len: usize,
    pub fft_window_s: f64,
    pub hop_s: f64,
    /// FFT length; frames are zero-padded up to it.
    pub fft_size: usize,
    pub include_self_correlation: bool,
    pub envelope_smoothing_window_s: f64,
    pub peak_min_prominence: f64,
    pub target_sample_rate: u32,
    pub max_chunks: MaxChunks,
    /// Master seed of the per-token band sampling streams.
    pub seed: u64,
}

impl Default for CfbsfConfig {
    fn default() -> Self {
        CfbsfConfig {
            n_bands: 21,
            sample_len: 20,
            fft_window_s: 0.005,
            hop_s: 0.005,
            fft_size: 256,
            include_self_correlation: true,
            envelope_smoothing_window_s: 0.02,
            peak_min_prominence: 0.1,
            target_sample_rate: 16000,
            max_chunks: MaxChunks::Auto,
            seed: 0,
        }
    }
}

impl CfbsfConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.n_bands == 0 {
            return bad("n_bands must be positive");
        }
        if self.sample_len < 2 {
            return bad("sample_len must be at least 2");
        }
        for (name, v) in [
            ("fft_window_s", self.fft_window_s),
            ("hop_s", self.hop_s),
            ("envelope_smoothing_window_s", self.envelope_smoothing_window_s),
            ("peak_min_prominence", self.peak_min_prominence),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return bad(&format!("{name} must be positive"));
            }
        }
        if self.target_sample_rate == 0 {
            return bad("target_sample_rate must be positive");
        }
        if self.samples(self.fft_window_s) < 2 || self.samples(self.hop_s) < 1 {
            return bad("analysis window shorter than two samples");
        }
        if self.max_chunks == MaxChunks::Fixed(0) {
            return bad("max_chunks must be positive");
        }
        Ok(())
    }

    /// Seconds to samples at the target rate.
    pub fn samples(&self, seconds: f64) -> usize {
        (seconds * self.target_sample_rate as f64).round() as usize
    }

    pub fn per_chunk_dim(&self) -> usize {
        let n = self.n_bands;
        let corr = if self.include_self_correlation {
            n * (n + 1) / 2
        } else {
            n * (n - 1) / 2
        };
        n * self.sample_len + corr
    }

    /// Stable hash of the configuration, stored in feature caches.
    pub fn hash(&self) -> u64 {
        seed::content_hash(&serde_json::to_vec(self).expect("config serializes"))
    }
}

/// One token's feature row.
#[derive(Clone, Debug, PartialEq)]
pub struct CfbsfVector {
    pub token_id: String,
    pub values: Vec<f64>,
    pub n_chunks: usize,
    pub unpadded_len: usize,
}

impl CfbsfVector {
    /// Zero-pads (never truncates) to `width`.
    pub fn pad_to(&mut self, width: usize) {
        if self.values.len() < width {
            self.values.resize(width, 0.0);
        }
    }
}

/// Features of a mono signal already at the target rate. `token_key`
/// selects the sampling stream; the padding follows `cfg.max_chunks`, with
/// `Auto` leaving the vector unpadded.
pub fn extract_signal(signal: &[f64], token_key: &str, cfg: &CfbsfConfig) -> Result<CfbsfVector> {
    let spec = Spectrogram::new(cfg);
    extract_with(signal, token_key, cfg, &spec)
}

fn extract_with(
    signal: &[f64],
    token_key: &str,
    cfg: &CfbsfConfig,
    spec: &Spectrogram,
) -> Result<CfbsfVector> {
    let env = amplitude_envelope(signal, cfg)?;
    let chunking = chunk_boundaries(&env, cfg);
    let n_chunks = chunking.n_chunks();
    if let MaxChunks::Fixed(max) = cfg.max_chunks {
        if n_chunks > max {
            return Err(Error::TooManyChunks {
                token_id: token_key.to_string(),
                n_chunks,
                max_chunks: max,
            });
        }
    }
    let per_chunk = cfg.per_chunk_dim();
    let mut values = Vec::with_capacity(n_chunks * per_chunk);
    let stream = seed::derive(cfg.seed, &format!("cfbsf/{token_key}"));
    for (c, range) in chunking.ranges().into_iter().enumerate() {
        let mel = spec.log_mel(&signal[range])?;
        let mut sampled = DMatrix::zeros(cfg.n_bands, cfg.sample_len);
        for b in 0..cfg.n_bands {
            let mut rng = seed::rng(seed::derive_indexed(stream, "band", &[c as u64, b as u64]));
            let series: Vec<f64> = mel.row(b).iter().copied().collect();
            let s = band_summary(&series, cfg.sample_len, &mut rng);
            sampled.row_mut(b).copy_from_slice(&s);
            values.extend_from_slice(&s);
        }
        values.extend(band_correlations(&sampled, cfg.include_self_correlation));
    }
    let unpadded_len = values.len();
    debug_assert_eq!(unpadded_len, n_chunks * per_chunk);
    let mut v = CfbsfVector {
        token_id: token_key.to_string(),
        values,
        n_chunks,
        unpadded_len,
    };
    if let MaxChunks::Fixed(max) = cfg.max_chunks {
        v.pad_to(max * per_chunk);
    }
    Ok(v)
}

/// Reads and extracts one token.
pub fn extract(token: &AudioToken, path: impl Into<PathBuf>, cfg: &CfbsfConfig) -> Result<CfbsfVector> {
    let signal = audio::read_wav(path.into(), token.start_s, token.end_s, cfg.target_sample_rate)?;
    extract_signal(&signal, &token.token_id, cfg)
}

/// Token-level feature rows in input order, plus per-row chunk metadata.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix {
    pub token_ids: Vec<String>,
    pub n_chunks: Vec<usize>,
    pub unpadded_len: Vec<usize>,
    pub cols: usize,
    /// Row-major values.
    pub data: Vec<f64>,
    pub cfg_hash: u64,
}

impl FeatureMatrix {
    pub fn rows(&self) -> usize {
        self.token_ids.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn index_of(&self) -> std::collections::HashMap<&str, usize> {
        self.token_ids
            .iter()
            .enumerate()
            .map(|(i, t)| (t.as_str(), i))
            .collect()
    }

    /// Builds a matrix from dense rows of equal width.
    pub fn from_rows(token_ids: Vec<String>, rows: &[Vec<f64>], cfg_hash: u64) -> Result<Self> {
        if token_ids.len() != rows.len() {
            return Err(Error::LengthMismatch {
                left: token_ids.len(),
                right: rows.len(),
            });
        }
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(Error::dim(cols, r.len()));
            }
            data.extend_from_slice(r);
        }
        Ok(FeatureMatrix {
            n_chunks: vec![1; rows.len()],
            unpadded_len: vec![cols; rows.len()],
            token_ids,
            cols,
            data,
            cfg_hash,
        })
    }
}

/// Result of a corpus-wide extraction. Tokens whose extraction failed are
/// listed in `failures` and have no row.
#[derive(Debug)]
pub struct FormMatrix {
    pub features: FeatureMatrix,
    pub max_chunks: usize,
    pub failures: Vec<(String, Error)>,
}

/// Extracts every token in parallel and pads all rows to the common width.
pub fn build_form_matrix(corpus: &Corpus, tokens: &[AudioToken], cfg: &CfbsfConfig) -> Result<FormMatrix> {
    cfg.validate()?;
    let spec = Spectrogram::new(cfg);
    let results: Vec<Result<CfbsfVector>> = tokens
        .par_iter()
        .map(|t| {
            let signal = audio::read_wav(corpus.audio_path(t), t.start_s, t.end_s, cfg.target_sample_rate)?;
            extract_with(&signal, &t.token_id, cfg, &spec)
        })
        .collect();
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (t, r) in tokens.iter().zip(results) {
        match r {
            Ok(v) => rows.push(v),
            Err(e) => failures.push((t.token_id.clone(), e)),
        }
    }
    if rows.is_empty() {
        return Err(Error::NoUsableTokens);
    }
    let max_chunks = match cfg.max_chunks {
        MaxChunks::Fixed(n) => n,
        MaxChunks::Auto => rows.iter().map(|v| v.n_chunks).max().unwrap_or(1),
    };
    let cols = max_chunks * cfg.per_chunk_dim();
    let mut data = Vec::with_capacity(rows.len() * cols);
    let mut token_ids = Vec::with_capacity(rows.len());
    let mut n_chunks = Vec::with_capacity(rows.len());
    let mut unpadded_len = Vec::with_capacity(rows.len());
    for mut v in rows {
        v.pad_to(cols);
        data.extend_from_slice(&v.values);
        token_ids.push(v.token_id);
        n_chunks.push(v.n_chunks);
        unpadded_len.push(v.unpadded_len);
    }
    Ok(FormMatrix {
        features: FeatureMatrix {
            token_ids,
            n_chunks,
            unpadded_len,
            cols,
            data,
            cfg_hash: cfg.hash(),
        },
        max_chunks,
        failures,
    })
}
