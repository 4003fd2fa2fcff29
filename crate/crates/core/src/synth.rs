//! Deterministic synthetic corpora with class-structured semantics.
//!
//! Singulars scatter around class centroids; each plural is its singular
//! plus the class shift plus Gaussian noise of `residual_scale`. Tokens
//! follow a Zipf law above a per-type floor. Audio is either absent, a
//! sequence of harmonic bursts per token, or replaced by a feature cache
//! holding a noisy linear image of each token's semantic vector.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::cfbsf::{self, audio, FeatureMatrix};
use crate::corpus::{self, AudioToken, Corpus, EmbeddingTable, Number, WordType};
use crate::error::{Error, Result};
use crate::seed;

pub const SAMPLE_RATE: u32 = 16000;
pub const EMBEDDINGS_FILE: &str = "embeddings.txt";
pub const FEATURES_FILE: &str = "features.bin";
pub const SPEC_FILE: &str = "synth_spec.json";

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum AudioMode {
    #[default]
    None,
    Waveform,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum FeatureMode {
    #[default]
    None,
    /// Token features are `v A + noise` for the type's semantic vector `v`.
    Linear,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureMap {
    /// Entries of `A` are standard normal.
    #[default]
    Gaussian,
    /// `A` has orthonormal rows, so distances are preserved.
    Isometric,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub n_lexemes: usize,
    pub n_classes: usize,
    pub dim: usize,
    pub centroid_scale: f64,
    pub within_class_scale: f64,
    pub class_shift_scale: f64,
    pub residual_scale: f64,
    /// Scale every embedding to unit length after generation.
    pub normalize_embeddings: bool,
    /// Shares of lexemes with both numbers, only a singular, only a plural.
    pub coverage_both: f64,
    pub coverage_sg_only: f64,
    pub coverage_pl_only: f64,
    pub zipf_exponent: f64,
    pub min_tokens_per_type: usize,
    /// Tokens distributed by the Zipf law on top of the floor.
    pub extra_tokens: usize,
    pub audio_mode: AudioMode,
    pub feature_mode: FeatureMode,
    pub feature_map: FeatureMap,
    pub feature_dim: usize,
    pub feature_noise: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            n_lexemes: 50,
            n_classes: 5,
            dim: 20,
            centroid_scale: 1.0,
            within_class_scale: 0.5,
            class_shift_scale: 1.0,
            residual_scale: 0.1,
            normalize_embeddings: false,
            coverage_both: 1.0,
            coverage_sg_only: 0.0,
            coverage_pl_only: 0.0,
            zipf_exponent: 1.0,
            min_tokens_per_type: 10,
            extra_tokens: 500,
            audio_mode: AudioMode::None,
            feature_mode: FeatureMode::None,
            feature_map: FeatureMap::Gaussian,
            feature_dim: 40,
            feature_noise: 0.0,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidSpec(m));
        if self.n_lexemes == 0 || self.n_classes == 0 || self.dim == 0 {
            return bad("n_lexemes, n_classes and dim must be positive".into());
        }
        if self.min_tokens_per_type == 0 {
            return bad("min_tokens_per_type must be positive".into());
        }
        for (name, v) in [
            ("centroid_scale", self.centroid_scale),
            ("within_class_scale", self.within_class_scale),
            ("class_shift_scale", self.class_shift_scale),
            ("residual_scale", self.residual_scale),
            ("zipf_exponent", self.zipf_exponent),
            ("feature_noise", self.feature_noise),
            ("coverage_both", self.coverage_both),
            ("coverage_sg_only", self.coverage_sg_only),
            ("coverage_pl_only", self.coverage_pl_only),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("{name} must be finite and non-negative, got {v}"));
            }
        }
        let cov = self.coverage_both + self.coverage_sg_only + self.coverage_pl_only;
        if (cov - 1.0).abs() > 1e-9 {
            return bad(format!("coverage shares must sum to 1, got {cov}"));
        }
        if self.feature_mode == FeatureMode::Linear {
            if self.feature_dim == 0 {
                return bad("feature_dim must be positive".into());
            }
            if self.feature_map == FeatureMap::Isometric && self.feature_dim < self.dim {
                return bad("an isometric feature map needs feature_dim >= dim".into());
            }
        }
        Ok(())
    }
}

/// A generated corpus held in memory.
#[derive(Clone, Debug)]
pub struct SynthCorpus {
    pub spec: SynthSpec,
    pub corpus: Corpus,
    /// Semantic vectors keyed by type id.
    pub embeddings: EmbeddingTable,
    /// True class shifts before noise.
    pub class_shifts: BTreeMap<String, Vec<f64>>,
    pub features: Option<FeatureMatrix>,
    /// One waveform per token, in token order.
    pub waveforms: Option<Vec<Vec<f64>>>,
}

const PHONES: [&str; 24] = [
    "AA", "AE", "AH", "AO", "EH", "ER", "IH", "IY", "OW", "UW", "B", "D", "F", "G", "K", "L", "M", "N", "P", "R",
    "S", "T", "V", "W",
];

fn gaussian_vec(rng: &mut ChaCha8Rng, dim: usize, scale: f64) -> Vec<f64> {
    (0..dim)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            scale * z
        })
        .collect()
}

fn normalize(v: &mut [f64]) {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Coverage {
    Both,
    SgOnly,
    PlOnly,
}

/// Token counts: `floor + round(extra · r^-s / Σ)` over a random rank order.
fn zipf_counts(n: usize, floor: usize, extra: usize, s: f64, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut ranks: Vec<usize> = (1..=n).collect();
    ranks.shuffle(rng);
    let w: Vec<f64> = ranks.iter().map(|&r| (r as f64).powf(-s)).collect();
    let total: f64 = w.iter().sum();
    w.iter()
        .map(|wi| floor + (extra as f64 * wi / total).round() as usize)
        .collect()
}

pub fn generate(spec: &SynthSpec) -> Result<SynthCorpus> {
    spec.validate()?;
    let sem_rng = &mut seed::rng(seed::derive(spec.seed, "synth/semantics"));
    let form_rng = &mut seed::rng(seed::derive(spec.seed, "synth/forms"));

    let centroids: Vec<Vec<f64>> = (0..spec.n_classes)
        .map(|_| gaussian_vec(sem_rng, spec.dim, spec.centroid_scale))
        .collect();
    let shifts: Vec<Vec<f64>> = (0..spec.n_classes)
        .map(|_| gaussian_vec(sem_rng, spec.dim, spec.class_shift_scale))
        .collect();

    let n_both = (spec.coverage_both * spec.n_lexemes as f64).round() as usize;
    let n_sg = ((spec.coverage_sg_only * spec.n_lexemes as f64).round() as usize).min(spec.n_lexemes - n_both.min(spec.n_lexemes));
    let mut coverage: Vec<Coverage> = (0..spec.n_lexemes)
        .map(|i| {
            if i < n_both {
                Coverage::Both
            } else if i < n_both + n_sg {
                Coverage::SgOnly
            } else {
                Coverage::PlOnly
            }
        })
        .collect();
    coverage.shuffle(sem_rng);

    let mut types = Vec::new();
    let mut vectors: Vec<Vec<f64>> = Vec::new();
    for l in 0..spec.n_lexemes {
        let class = l % spec.n_classes;
        let mut v_sg: Vec<f64> = gaussian_vec(sem_rng, spec.dim, spec.within_class_scale)
            .iter()
            .zip(&centroids[class])
            .map(|(a, b)| a + b)
            .collect();
        let noise = gaussian_vec(sem_rng, spec.dim, spec.residual_scale);
        let mut v_pl: Vec<f64> = (0..spec.dim).map(|j| v_sg[j] + shifts[class][j] + noise[j]).collect();
        if spec.normalize_embeddings {
            normalize(&mut v_sg);
            normalize(&mut v_pl);
        }
        let n_phones = form_rng.random_range(2..=7);
        let phones: Vec<String> = (0..n_phones)
            .map(|_| PHONES[form_rng.random_range(0..PHONES.len())].to_string())
            .collect();
        let lexeme_id = format!("L{l:04}");
        let class_label = format!("class{class:02}");
        let mut push = |number: Number, v: Vec<f64>| {
            let mut ph = phones.clone();
            let suffix = match number {
                Number::Sg => "",
                Number::Pl => {
                    ph.push("Z".into());
                    "s"
                }
            };
            types.push(WordType {
                type_id: format!("{lexeme_id}.{}", number.as_str().to_lowercase()),
                orth: format!("w{l:04}{suffix}"),
                lexeme_id: lexeme_id.clone(),
                number,
                phones: ph,
                semantic_class: Some(class_label.clone()),
                has_embedding: true,
            });
            vectors.push(v);
        };
        match coverage[l] {
            Coverage::Both => {
                push(Number::Sg, v_sg);
                push(Number::Pl, v_pl);
            }
            Coverage::SgOnly => push(Number::Sg, v_sg),
            Coverage::PlOnly => push(Number::Pl, v_pl),
        }
    }

    let mut embeddings = EmbeddingTable::new(spec.dim);
    for (t, v) in types.iter().zip(&vectors) {
        embeddings.insert(t.type_id.clone(), v.clone())?;
    }

    let count_rng = &mut seed::rng(seed::derive(spec.seed, "synth/counts"));
    let counts = zipf_counts(types.len(), spec.min_tokens_per_type, spec.extra_tokens, spec.zipf_exponent, count_rng);
    let mut tokens = Vec::new();
    let mut token_type = Vec::new();
    for (ti, (t, &c)) in types.iter().zip(&counts).enumerate() {
        for _ in 0..c {
            let id = format!("t{:06}", tokens.len());
            tokens.push(AudioToken {
                audio_path: PathBuf::from(format!("audio/{id}.wav")),
                token_id: id,
                type_id: t.type_id.clone(),
                start_s: None,
                end_s: None,
                sample_rate: SAMPLE_RATE,
            });
            token_type.push(ti);
        }
    }

    let waveforms = match spec.audio_mode {
        AudioMode::None => None,
        AudioMode::Waveform => {
            let voices: Vec<Voice> = types
                .iter()
                .map(|t| Voice::for_type(spec.seed, t))
                .collect();
            Some(
                tokens
                    .iter()
                    .zip(&token_type)
                    .map(|(tok, &ti)| voices[ti].render(spec.seed, &tok.token_id))
                    .collect(),
            )
        }
    };

    let features = match spec.feature_mode {
        FeatureMode::None => None,
        FeatureMode::Linear => Some(linear_features(spec, &tokens, &token_type, &vectors)?),
    };

    let class_shifts = shifts
        .into_iter()
        .enumerate()
        .map(|(c, s)| (format!("class{c:02}"), s))
        .collect();
    Ok(SynthCorpus {
        spec: spec.clone(),
        corpus: Corpus::new(types, tokens)?,
        embeddings,
        class_shifts,
        features,
        waveforms,
    })
}

/// The map `A` of the linear feature mode.
pub fn feature_map(spec: &SynthSpec) -> DMatrix<f64> {
    let rng = &mut seed::rng(seed::derive(spec.seed, "synth/feature-map"));
    match spec.feature_map {
        FeatureMap::Gaussian => {
            let scale = 1.0 / (spec.dim as f64).sqrt();
            DMatrix::from_fn(spec.dim, spec.feature_dim, |_, _| {
                scale * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng)
            })
        }
        FeatureMap::Isometric => {
            let g = DMatrix::from_fn(spec.feature_dim, spec.feature_dim, |_, _| {
                <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng)
            });
            let q = g.qr().q();
            q.rows(0, spec.dim).into_owned()
        }
    }
}

fn linear_features(
    spec: &SynthSpec,
    tokens: &[AudioToken],
    token_type: &[usize],
    vectors: &[Vec<f64>],
) -> Result<FeatureMatrix> {
    let a = feature_map(spec);
    let noise_rng = &mut seed::rng(seed::derive(spec.seed, "synth/feature-noise"));
    let normal = Normal::new(0.0, spec.feature_noise.max(f64::MIN_POSITIVE))
        .map_err(|e| Error::InvalidSpec(e.to_string()))?;
    let rows: Vec<Vec<f64>> = token_type
        .iter()
        .map(|&ti| {
            let v = &vectors[ti];
            (0..spec.feature_dim)
                .map(|j| {
                    let clean: f64 = (0..spec.dim).map(|i| v[i] * a[(i, j)]).sum();
                    if spec.feature_noise > 0.0 {
                        clean + normal.sample(noise_rng)
                    } else {
                        clean
                    }
                })
                .collect()
        })
        .collect();
    let hash = seed::content_hash(&serde_json::to_vec(spec)?);
    FeatureMatrix::from_rows(tokens.iter().map(|t| t.token_id.clone()).collect(), &rows, hash)
}

/// Per-type acoustic identity: syllable count, pitch and harmonic profile.
struct Voice {
    n_bursts: usize,
    f0: f64,
    harmonics: [f64; 5],
}

impl Voice {
    fn for_type(master: u64, t: &WordType) -> Voice {
        let rng = &mut seed::rng(seed::derive(master, &format!("synth/voice/{}", t.type_id)));
        Voice {
            n_bursts: syllables(&t.phones),
            f0: rng.random_range(100.0..250.0),
            harmonics: std::array::from_fn(|h| rng.random_range(0.5..1.0) / ((h + 1) * (h + 1)) as f64),
        }
    }

    fn render(&self, master: u64, token_id: &str) -> Vec<f64> {
        let rng = &mut seed::rng(seed::derive(master, &format!("synth/token/{token_id}")));
        burst_train(self.n_bursts, self.f0 * rng.random_range(0.95..1.05), &self.harmonics, rng)
    }
}

/// One pseudo-syllable per two phones, between one and four.
pub fn syllables(phones: &[String]) -> usize {
    phones.len().div_ceil(2).clamp(1, 4)
}

/// Amplitude-modulated harmonic bursts, 16 kHz, 0.2–0.6 s long. Each burst
/// is a raised-cosine swell, so the envelope has one maximum per burst.
pub fn burst_train(n_bursts: usize, f0: f64, harmonics: &[f64; 5], rng: &mut ChaCha8Rng) -> Vec<f64> {
    let n_bursts = n_bursts.max(1);
    let lead = rng.random_range(0.02..0.04);
    let tail = rng.random_range(0.02..0.04);
    let burst = ((0.56 - lead - tail) / n_bursts as f64).min(0.16) * rng.random_range(0.9..1.0);
    let dur = (lead + tail + burst * n_bursts as f64).clamp(0.2, 0.6);
    let n = (dur * SAMPLE_RATE as f64).round() as usize;
    let heights: Vec<f64> = (0..n_bursts).map(|_| rng.random_range(0.6..1.0)).collect();
    let norm: f64 = harmonics.iter().sum();
    (0..n)
        .map(|i| {
            let t = i as f64 / SAMPLE_RATE as f64;
            let k = ((t - lead) / burst).floor();
            let amp = if k >= 0.0 && (k as usize) < n_bursts {
                let phase = (t - lead) / burst - k;
                heights[k as usize] * 0.5 * (1.0 - (2.0 * PI * phase).cos())
            } else {
                0.0
            };
            let carrier: f64 = harmonics
                .iter()
                .enumerate()
                .map(|(h, a)| a * (2.0 * PI * f0 * (h + 1) as f64 * t).sin())
                .sum();
            0.8 * amp * carrier / norm
        })
        .collect()
}

impl SynthCorpus {
    /// Writes `types.csv`, `tokens.csv`, `embeddings.txt` (keyed by orth),
    /// the resolved spec and, depending on the modes, `audio/*.wav` and the
    /// feature cache.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        corpus::write_manifest(dir, &self.corpus)?;
        let rows: Vec<(&str, &[f64])> = self
            .corpus
            .types()
            .iter()
            .filter_map(|t| self.embeddings.get(&t.type_id).map(|v| (t.orth.as_str(), v)))
            .collect();
        corpus::write_embeddings(dir.join(EMBEDDINGS_FILE), self.embeddings.dim(), rows)?;
        let spec_path = dir.join(SPEC_FILE);
        std::fs::write(&spec_path, serde_json::to_string_pretty(&self.spec)? + "\n")
            .map_err(|e| Error::io(&spec_path, e))?;
        if let Some(waves) = &self.waveforms {
            let adir = dir.join("audio");
            std::fs::create_dir_all(&adir).map_err(|e| Error::io(&adir, e))?;
            for (tok, w) in self.corpus.tokens().iter().zip(waves) {
                audio::write_wav_i16(dir.join(&tok.audio_path), w, SAMPLE_RATE)?;
            }
        }
        if let Some(f) = &self.features {
            cfbsf::write_feature_cache(dir.join(FEATURES_FILE), f)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zipf_floor_and_uniform_case() {
        let rng = &mut seed::rng(1);
        let c = zipf_counts(10, 10, 100, 0.0, rng);
        assert!(c.iter().all(|&k| k == 20));
        let c = zipf_counts(10, 10, 1000, 1.0, rng);
        assert!(c.iter().all(|&k| k >= 10));
        assert_eq!(c.iter().max().unwrap() - 10, (1000.0 / 2.9289682539682538f64).round() as usize);
    }

    #[test]
    fn invalid_specs() {
        let s = SynthSpec {
            n_classes: 0,
            ..SynthSpec::default()
        };
        assert!(matches!(generate(&s), Err(Error::InvalidSpec(_))));
        let s = SynthSpec {
            coverage_both: 0.5,
            ..SynthSpec::default()
        };
        assert!(generate(&s).is_err());
    }

    #[test]
    fn coverage_shares_and_partners() {
        let s = SynthSpec {
            n_lexemes: 20,
            coverage_both: 0.5,
            coverage_sg_only: 0.25,
            coverage_pl_only: 0.25,
            ..SynthSpec::default()
        };
        let c = generate(&s).unwrap();
        assert_eq!(c.corpus.types().len(), 30);
        let pl = c.corpus.types().iter().filter(|t| t.number == Number::Pl).count();
        assert_eq!(pl, 15);
    }
}
