//! Form/meaning distance correlations: phone edit distances and audio
//! Euclidean distances against semantic cosine distances.

use std::collections::{BTreeMap, HashMap};
use std::hash::Hash;
use std::path::Path;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;
use crate::stats;
use crate::xval::{GoldSpace, GoldSpaceName};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EditVariant {
    /// Optimal string alignment: a transposed pair is not edited again.
    #[default]
    Osa,
    /// Unrestricted Damerau–Levenshtein.
    Full,
}

/// Edit distance over symbol sequences with insertions, deletions,
/// substitutions and adjacent transpositions (optimal string alignment).
pub fn damerau_levenshtein<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let (n, m) = (a.len(), b.len());
    let mut d = vec![vec![0usize; m + 1]; n + 1];
    for (i, row) in d.iter_mut().enumerate() {
        row[0] = i;
    }
    for j in 0..=m {
        d[0][j] = j;
    }
    for i in 1..=n {
        for j in 1..=m {
            let cost = usize::from(a[i - 1] != b[j - 1]);
            let mut v = (d[i - 1][j] + 1).min(d[i][j - 1] + 1).min(d[i - 1][j - 1] + cost);
            if i > 1 && j > 1 && a[i - 1] == b[j - 2] && a[i - 2] == b[j - 1] {
                v = v.min(d[i - 2][j - 2] + 1);
            }
            d[i][j] = v;
        }
    }
    d[n][m]
}

/// Unrestricted Damerau–Levenshtein distance (Lowrance–Wagner).
pub fn damerau_levenshtein_full<T: Eq + Hash>(a: &[T], b: &[T]) -> usize {
    let (n, m) = (a.len(), b.len());
    let inf = n + m;
    let mut last_row: HashMap<&T, usize> = HashMap::new();
    let mut d = vec![vec![0usize; m + 2]; n + 2];
    d[0][0] = inf;
    for i in 0..=n {
        d[i + 1][0] = inf;
        d[i + 1][1] = i;
    }
    for j in 0..=m {
        d[0][j + 1] = inf;
        d[1][j + 1] = j;
    }
    for i in 1..=n {
        let mut last_col = 0;
        for j in 1..=m {
            let i1 = last_row.get(&b[j - 1]).copied().unwrap_or(0);
            let j1 = last_col;
            let cost = if a[i - 1] == b[j - 1] {
                last_col = j;
                0
            } else {
                1
            };
            d[i + 1][j + 1] = (d[i][j] + cost)
                .min(d[i + 1][j] + 1)
                .min(d[i][j + 1] + 1)
                .min(d[i1][j1] + (i - i1 - 1) + 1 + (j - j1 - 1));
        }
        last_row.insert(&a[i - 1], i);
    }
    d[n + 1][m + 1]
}

pub fn edit_distance<T: Eq + Hash>(a: &[T], b: &[T], variant: EditVariant) -> usize {
    match variant {
        EditVariant::Osa => damerau_levenshtein(a, b),
        EditVariant::Full => damerau_levenshtein_full(a, b),
    }
}

/// `1 − cos(u, v)`, with the flag set when either vector is zero (the
/// distance is then 1).
pub fn cosine_distance_flagged(u: &[f64], v: &[f64]) -> (f64, bool) {
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    let nu = u.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if nu == 0.0 || nv == 0.0 {
        return (1.0, true);
    }
    ((1.0 - dot / (nu * nv)).clamp(0.0, 2.0), false)
}

pub fn cosine_distance(u: &[f64], v: &[f64]) -> f64 {
    cosine_distance_flagged(u, v).0
}

/// Pairwise cosine distances between the rows of `m`.
pub fn cosine_distance_matrix(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    let rows: Vec<Vec<f64>> = (0..n).map(|i| m.row(i).iter().copied().collect()).collect();
    let mut d = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            let v = cosine_distance(&rows[i], &rows[j]);
            d[(i, j)] = v;
            d[(j, i)] = v;
        }
    }
    d
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum StudyMode {
    Phone,
    Audio,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpaceCorrelation {
    /// Mean correlation over trials (the single correlation in phone mode).
    pub r_mean: f64,
    pub sd: f64,
    pub n_significant: usize,
    pub n_trials: usize,
    pub n_pairs: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistanceStudyReport {
    pub mode: StudyMode,
    pub alpha: f64,
    pub seed: u64,
    pub per_space: BTreeMap<GoldSpaceName, SpaceCorrelation>,
    pub permuted_baseline: BTreeMap<GoldSpaceName, SpaceCorrelation>,
}

impl DistanceStudyReport {
    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }
}

fn upper_pairs(n: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..n).flat_map(move |i| (i + 1..n).map(move |j| (i, j)))
}

fn summarize(rs: &[f64], ps: &[f64], alpha: f64, n_pairs: usize) -> SpaceCorrelation {
    SpaceCorrelation {
        r_mean: stats::mean(rs),
        sd: stats::sd(rs),
        n_significant: ps.iter().filter(|&&p| p < alpha).count(),
        n_trials: rs.len(),
        n_pairs,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhoneStudyConfig {
    pub variant: EditVariant,
    /// Drop singular/plural pairs of the same lexeme.
    pub exclude_same_lexeme: bool,
    pub alpha: f64,
    pub seed: u64,
}

impl Default for PhoneStudyConfig {
    fn default() -> Self {
        PhoneStudyConfig {
            variant: EditVariant::Osa,
            exclude_same_lexeme: false,
            alpha: 0.05,
            seed: 0,
        }
    }
}

/// Phone transcription and lexeme of each row of the semantic spaces.
pub struct TypeForms<'a> {
    pub phones: Vec<&'a [String]>,
    pub lexemes: Vec<&'a str>,
}

/// Correlation between phone edit distance and cosine distance over all
/// unordered type pairs, per space, plus a permuted-vector baseline.
pub fn phone_study(forms: &TypeForms<'_>, spaces: &[&GoldSpace], cfg: &PhoneStudyConfig) -> Result<DistanceStudyReport> {
    let n = forms.phones.len();
    let pairs: Vec<(usize, usize)> = upper_pairs(n)
        .filter(|&(i, j)| !(cfg.exclude_same_lexeme && forms.lexemes[i] == forms.lexemes[j]))
        .collect();
    if pairs.len() < 3 {
        return Err(Error::TooFewTypes(pairs.len()));
    }
    let edit: Vec<f64> = pairs
        .par_iter()
        .map(|&(i, j)| edit_distance(forms.phones[i], forms.phones[j], cfg.variant) as f64)
        .collect();
    let mut per_space = BTreeMap::new();
    let mut permuted_baseline = BTreeMap::new();
    for space in spaces {
        if space.vectors.nrows() != n {
            return Err(Error::LengthMismatch {
                left: n,
                right: space.vectors.nrows(),
            });
        }
        let cos = cosine_distance_matrix(&space.vectors);
        let sem: Vec<f64> = pairs.iter().map(|&(i, j)| cos[(i, j)]).collect();
        let r = stats::pearson(&edit, &sem);
        let p = stats::pearson_p_value(r, pairs.len());
        per_space.insert(space.name, summarize(&[r], &[p], cfg.alpha, pairs.len()));

        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut seed::rng(seed::derive(cfg.seed, &format!("phone-perm/{}", space.name))));
        let sem_p: Vec<f64> = pairs.iter().map(|&(i, j)| cos[(perm[i], perm[j])]).collect();
        let rp = stats::pearson(&edit, &sem_p);
        let pp = stats::pearson_p_value(rp, pairs.len());
        permuted_baseline.insert(space.name, summarize(&[rp], &[pp], cfg.alpha, pairs.len()));
    }
    Ok(DistanceStudyReport {
        mode: StudyMode::Phone,
        alpha: cfg.alpha,
        seed: cfg.seed,
        per_space,
        permuted_baseline,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AudioStudyConfig {
    pub n_trials: usize,
    pub alpha: f64,
    pub seed: u64,
}

impl Default for AudioStudyConfig {
    fn default() -> Self {
        AudioStudyConfig {
            n_trials: 1000,
            alpha: 0.05,
            seed: 0,
        }
    }
}

/// One trial's correlations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub trial: usize,
    pub space: GoldSpaceName,
    pub r: f64,
    pub p_value: f64,
    pub permuted_r: f64,
    pub permuted_p_value: f64,
}

pub struct AudioStudy {
    pub report: DistanceStudyReport,
    pub trials: Vec<TrialRow>,
}

/// Squared-norm trick for all pairwise Euclidean distances between rows.
fn euclidean_matrix(x: &DMatrix<f64>) -> DMatrix<f64> {
    let g = x * x.transpose();
    let n = x.nrows();
    DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            0.0
        } else {
            (g[(i, i)] + g[(j, j)] - 2.0 * g[(i, j)]).max(0.0).sqrt()
        }
    })
}

/// Repeated trials: one random token per type, audio Euclidean distance of
/// every type pair against its semantic cosine distance.
///
/// `features` has one row per token and `type_of` indexes the rows of the
/// spaces' vectors. Types without tokens are left out.
pub fn audio_study(
    features: &DMatrix<f64>,
    type_of: &[usize],
    spaces: &[&GoldSpace],
    cfg: &AudioStudyConfig,
) -> Result<AudioStudy> {
    if features.nrows() != type_of.len() {
        return Err(Error::LengthMismatch {
            left: features.nrows(),
            right: type_of.len(),
        });
    }
    let mut tokens_of: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &t) in type_of.iter().enumerate() {
        tokens_of.entry(t).or_default().push(i);
    }
    let types: Vec<usize> = tokens_of.keys().copied().collect();
    let n = types.len();
    let n_pairs = n * n.saturating_sub(1) / 2;
    if n_pairs < 3 {
        return Err(Error::TooFewTypes(n_pairs));
    }
    let sem: Vec<DMatrix<f64>> = spaces
        .iter()
        .map(|s| {
            let sub = s.vectors.select_rows(&types);
            cosine_distance_matrix(&sub)
        })
        .collect();

    let per_trial: Vec<Vec<TrialRow>> = (0..cfg.n_trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = seed::rng(seed::derive_indexed(cfg.seed, "audio-trial", &[trial as u64]));
            let picked: Vec<usize> = types
                .iter()
                .map(|t| {
                    let toks = &tokens_of[t];
                    toks[rng.random_range(0..toks.len())]
                })
                .collect();
            let dist = euclidean_matrix(&features.select_rows(&picked));
            let form: Vec<f64> = upper_pairs(n).map(|(i, j)| dist[(i, j)]).collect();
            let mut perm: Vec<usize> = (0..n).collect();
            perm.shuffle(&mut rng);
            spaces
                .iter()
                .zip(&sem)
                .map(|(s, cos)| {
                    let y: Vec<f64> = upper_pairs(n).map(|(i, j)| cos[(i, j)]).collect();
                    let yp: Vec<f64> = upper_pairs(n).map(|(i, j)| cos[(perm[i], perm[j])]).collect();
                    let r = stats::pearson(&form, &y);
                    let rp = stats::pearson(&form, &yp);
                    TrialRow {
                        trial,
                        space: s.name,
                        r,
                        p_value: stats::pearson_p_value(r, n_pairs),
                        permuted_r: rp,
                        permuted_p_value: stats::pearson_p_value(rp, n_pairs),
                    }
                })
                .collect()
        })
        .collect();
    let trials: Vec<TrialRow> = per_trial.into_iter().flatten().collect();

    let mut per_space = BTreeMap::new();
    let mut permuted_baseline = BTreeMap::new();
    for s in spaces {
        let rows: Vec<&TrialRow> = trials.iter().filter(|t| t.space == s.name).collect();
        let r: Vec<f64> = rows.iter().map(|t| t.r).collect();
        let p: Vec<f64> = rows.iter().map(|t| t.p_value).collect();
        let rp: Vec<f64> = rows.iter().map(|t| t.permuted_r).collect();
        let pp: Vec<f64> = rows.iter().map(|t| t.permuted_p_value).collect();
        per_space.insert(s.name, summarize(&r, &p, cfg.alpha, n_pairs));
        permuted_baseline.insert(s.name, summarize(&rp, &pp, cfg.alpha, n_pairs));
    }
    Ok(AudioStudy {
        report: DistanceStudyReport {
            mode: StudyMode::Audio,
            alpha: cfg.alpha,
            seed: cfg.seed,
            per_space,
            permuted_baseline,
        },
        trials,
    })
}

pub fn write_trials_csv(path: impl AsRef<Path>, trials: &[TrialRow]) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    for t in trials {
        w.serialize(t)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistanceBin {
    pub edit_distance: usize,
    pub mean: f64,
    pub sd: f64,
    pub count: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AudioVsPhone {
    /// `None` when either distance has no variance.
    pub r: Option<f64>,
    pub n_pairs: u64,
    pub bins: Vec<DistanceBin>,
}

#[derive(Clone, Default)]
struct Sums {
    n: u64,
    x: f64,
    y: f64,
    xx: f64,
    yy: f64,
    xy: f64,
    bins: BTreeMap<usize, (u64, f64, f64)>,
}

impl Sums {
    fn add(&mut self, e: usize, d: f64) {
        let x = e as f64;
        self.n += 1;
        self.x += x;
        self.y += d;
        self.xx += x * x;
        self.yy += d * d;
        self.xy += x * d;
        let b = self.bins.entry(e).or_default();
        b.0 += 1;
        b.1 += d;
        b.2 += d * d;
    }

    fn merge(mut self, o: &Sums) -> Sums {
        self.n += o.n;
        self.x += o.x;
        self.y += o.y;
        self.xx += o.xx;
        self.yy += o.yy;
        self.xy += o.xy;
        for (k, v) in &o.bins {
            let b = self.bins.entry(*k).or_default();
            b.0 += v.0;
            b.1 += v.1;
            b.2 += v.2;
        }
        self
    }
}

/// Audio Euclidean distance against phone edit distance over all token
/// pairs, with per-edit-distance bins.
pub fn audio_vs_phone(
    features: &DMatrix<f64>,
    type_of: &[usize],
    phones: &[&[String]],
    variant: EditVariant,
) -> Result<AudioVsPhone> {
    if features.nrows() != type_of.len() {
        return Err(Error::LengthMismatch {
            left: features.nrows(),
            right: type_of.len(),
        });
    }
    let nt = phones.len();
    let mut edit = vec![0usize; nt * nt];
    for (a, b) in upper_pairs(nt) {
        let e = edit_distance(phones[a], phones[b], variant);
        edit[a * nt + b] = e;
        edit[b * nt + a] = e;
    }
    let norms: Vec<f64> = (0..features.nrows())
        .map(|i| features.row(i).norm_squared())
        .collect();
    let n = features.nrows();
    let partial: Vec<Sums> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut s = Sums::default();
            let xi = features.row(i);
            for j in i + 1..n {
                let d = (norms[i] + norms[j] - 2.0 * xi.dot(&features.row(j))).max(0.0).sqrt();
                s.add(edit[type_of[i] * nt + type_of[j]], d);
            }
            s
        })
        .collect();
    let s = partial.iter().fold(Sums::default(), |acc, p| acc.merge(p));
    let nf = s.n as f64;
    let vx = s.xx - s.x * s.x / nf;
    let vy = s.yy - s.y * s.y / nf;
    let cov = s.xy - s.x * s.y / nf;
    let r = (s.n >= 2 && vx > 1e-12 * s.xx.max(1.0) && vy > 1e-12 * s.yy.max(1.0))
        .then(|| (cov / (vx * vy).sqrt()).clamp(-1.0, 1.0));
    let bins = s
        .bins
        .iter()
        .map(|(&e, &(c, sum, sq))| {
            let mean = sum / c as f64;
            let var = if c > 1 {
                ((sq - sum * sum / c as f64) / (c - 1) as f64).max(0.0)
            } else {
                0.0
            };
            DistanceBin {
                edit_distance: e,
                mean,
                sd: var.sqrt(),
                count: c,
            }
        })
        .collect();
    Ok(AudioVsPhone { r, n_pairs: s.n, bins })
}

pub fn write_bins_csv(path: impl AsRef<Path>, bins: &[DistanceBin]) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    for b in bins {
        w.serialize(b)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
