//! Evaluation of predicted semantic vectors against a type-level gold space.
//!
//! Candidates are ranked by Pearson correlation with the prediction. Ties go
//! to the candidate earlier in gold row order, which is sorted by type id.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{LexemeGroups, Number, WordGroup};
use crate::error::{Error, Result};
use crate::stats;

pub const MAX_N: usize = 5;

const RANK_BLOCK: usize = 512;

/// Deduplicated gold vectors, one row per word type, sorted by type id.
#[derive(Clone, Debug)]
pub struct GoldIndex {
    type_ids: Vec<String>,
    vectors: DMatrix<f64>,
    number_of: Vec<Number>,
    lexeme_of: Vec<String>,
    row_of: HashMap<String, usize>,
    /// One column per gold row, centred and scaled to unit norm; zero for
    /// constant vectors.
    standardized: DMatrix<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GoldEntry {
    pub type_id: String,
    pub number: Number,
    pub lexeme_id: String,
    pub vector: Vec<f64>,
}

/// Centred, unit-norm copy of `v`, or `None` when `v` is constant.
fn standardize(v: &[f64]) -> Option<Vec<f64>> {
    if v.is_empty() || v.iter().all(|&x| x == v[0]) {
        return None;
    }
    let m = stats::mean(v);
    let c: Vec<f64> = v.iter().map(|x| x - m).collect();
    let norm = c.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        return None;
    }
    Some(c.into_iter().map(|x| x / norm).collect())
}

impl GoldIndex {
    pub fn new(mut entries: Vec<GoldEntry>) -> Result<Self> {
        entries.sort_by(|a, b| a.type_id.cmp(&b.type_id));
        for w in entries.windows(2) {
            if w[0].type_id == w[1].type_id {
                return Err(Error::DuplicateId {
                    kind: "gold type",
                    id: w[0].type_id.clone(),
                });
            }
        }
        let dim = entries.first().map_or(0, |e| e.vector.len());
        for e in &entries {
            if e.vector.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: e.vector.len(),
                    context: Some(format!("gold vector of {}", e.type_id)),
                });
            }
        }
        let n = entries.len();
        let vectors = DMatrix::from_fn(n, dim, |i, j| entries[i].vector[j]);
        let mut standardized = DMatrix::zeros(dim, n);
        for (i, e) in entries.iter().enumerate() {
            if let Some(z) = standardize(&e.vector) {
                standardized.column_mut(i).copy_from_slice(&z);
            }
        }
        let row_of = entries
            .iter()
            .enumerate()
            .map(|(i, e)| (e.type_id.clone(), i))
            .collect();
        Ok(GoldIndex {
            type_ids: entries.iter().map(|e| e.type_id.clone()).collect(),
            number_of: entries.iter().map(|e| e.number).collect(),
            lexeme_of: entries.iter().map(|e| e.lexeme_id.clone()).collect(),
            vectors,
            row_of,
            standardized,
        })
    }

    pub fn len(&self) -> usize {
        self.type_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.type_ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.vectors.ncols()
    }

    pub fn type_ids(&self) -> &[String] {
        &self.type_ids
    }

    pub fn vectors(&self) -> &DMatrix<f64> {
        &self.vectors
    }

    pub fn row(&self, type_id: &str) -> Option<usize> {
        self.row_of.get(type_id).copied()
    }

    pub fn vector(&self, type_id: &str) -> Option<Vec<f64>> {
        self.row(type_id)
            .map(|i| self.vectors.row(i).iter().copied().collect())
    }

    pub fn number(&self, row: usize) -> Number {
        self.number_of[row]
    }

    pub fn lexeme(&self, row: usize) -> &str {
        &self.lexeme_of[row]
    }

    /// Pearson correlation of `predicted` with every gold row.
    pub fn correlations(&self, predicted: &[f64]) -> Result<Vec<f64>> {
        if predicted.len() != self.dim() {
            return Err(Error::dim(self.dim(), predicted.len()));
        }
        Ok(match standardize(predicted) {
            None => vec![0.0; self.len()],
            Some(z) => (0..self.len())
                .map(|i| self.standardized.column(i).iter().zip(&z).map(|(a, b)| a * b).sum())
                .collect(),
        })
    }
}

/// Gold rows ordered from best to worst match.
pub fn rank_candidates(predicted: &[f64], gold: &GoldIndex) -> Result<Vec<String>> {
    let r = gold.correlations(predicted)?;
    let mut order: Vec<usize> = (0..gold.len()).collect();
    order.sort_by(|&a, &b| r[b].total_cmp(&r[a]).then(a.cmp(&b)));
    Ok(order.into_iter().map(|i| gold.type_ids[i].clone()).collect())
}

/// Zero-based rank of row `target` given its correlations, without sorting.
fn rank_of(r: &[f64], target: usize) -> usize {
    let rt = r[target];
    r.iter()
        .enumerate()
        .filter(|&(j, &rj)| rj > rt || (rj == rt && j < target))
        .count()
}

fn argmax_first(r: &[f64]) -> usize {
    let mut best = 0;
    for (j, &v) in r.iter().enumerate() {
        if v > r[best] {
            best = j;
        }
    }
    best
}

/// Per-token ranking outcome.
#[derive(Clone, Debug, PartialEq)]
pub struct Ranked {
    /// Zero-based rank of the target.
    pub target_rank: usize,
    /// Best-ranked gold row.
    pub predicted_row: usize,
}

/// Ranks every prediction row against `gold`. `targets` are gold type ids.
pub fn rank_predictions(predictions: &DMatrix<f64>, targets: &[String], gold: &GoldIndex) -> Result<Vec<Ranked>> {
    if predictions.nrows() != targets.len() {
        return Err(Error::LengthMismatch {
            left: predictions.nrows(),
            right: targets.len(),
        });
    }
    if predictions.ncols() != gold.dim() {
        return Err(Error::dim(gold.dim(), predictions.ncols()));
    }
    let target_rows = targets
        .iter()
        .map(|t| gold.row(t).ok_or_else(|| Error::UnknownTarget(t.clone())))
        .collect::<Result<Vec<_>>>()?;
    if gold.is_empty() {
        return Ok(Vec::new());
    }
    let mut out = Vec::with_capacity(predictions.nrows());
    for start in (0..predictions.nrows()).step_by(RANK_BLOCK) {
        let rows = RANK_BLOCK.min(predictions.nrows() - start);
        let mut z = DMatrix::zeros(rows, gold.dim());
        for i in 0..rows {
            let p: Vec<f64> = predictions.row(start + i).iter().copied().collect();
            if let Some(zi) = standardize(&p) {
                z.row_mut(i).copy_from_slice(&zi);
            }
        }
        // rows × gold correlations, transposed so each prediction is a column.
        let r = (z * &gold.standardized).transpose();
        let block: Vec<Ranked> = (0..rows)
            .into_par_iter()
            .map(|i| {
                let ri = r.column(i);
                let ri = ri.as_slice();
                Ranked {
                    target_rank: rank_of(ri, target_rows[start + i]),
                    predicted_row: argmax_first(ri),
                }
            })
            .collect();
        out.extend(block);
    }
    Ok(out)
}

/// Fraction of rows whose target is among the first `n` candidates.
pub fn top_n_accuracy(predictions: &DMatrix<f64>, targets: &[String], gold: &GoldIndex, n: usize) -> Result<f64> {
    let ranked = rank_predictions(predictions, targets, gold)?;
    Ok(top_n_from_ranks(&ranked, n))
}

fn top_n_from_ranks(ranked: &[Ranked], n: usize) -> f64 {
    if ranked.is_empty() {
        return 0.0;
    }
    ranked.iter().filter(|r| r.target_rank < n).count() as f64 / ranked.len() as f64
}

/// Per-type F1 averaged with true-instance weights.
pub fn weighted_f1<S: AsRef<str>>(predicted: &[S], target: &[S]) -> Result<f64> {
    if predicted.len() != target.len() {
        return Err(Error::LengthMismatch {
            left: predicted.len(),
            right: target.len(),
        });
    }
    // (true positives, predicted count, true count)
    let mut counts: BTreeMap<&str, (usize, usize, usize)> = BTreeMap::new();
    for (p, t) in predicted.iter().zip(target) {
        let (p, t) = (p.as_ref(), t.as_ref());
        counts.entry(p).or_default().1 += 1;
        let e = counts.entry(t).or_default();
        e.2 += 1;
        if p == t {
            e.0 += 1;
        }
    }
    let total = target.len();
    if total == 0 {
        return Ok(0.0);
    }
    let mut acc = 0.0;
    for (tp, pred, truth) in counts.values().copied() {
        if truth == 0 || tp == 0 {
            continue;
        }
        let precision = tp as f64 / pred as f64;
        let recall = tp as f64 / truth as f64;
        acc += truth as f64 * 2.0 * precision * recall / (precision + recall);
    }
    Ok(acc / total as f64)
}

/// Columns of the number-confusion matrix.
pub const CONFUSION_COLUMNS: [&str; 4] = [
    "SG correct lexeme",
    "SG wrong lexeme",
    "PL correct lexeme",
    "PL wrong lexeme",
];

/// Target number (rows SG, PL) by predicted number and lexeme correctness.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NumberConfusion {
    pub counts: [[usize; 4]; 2],
}

impl NumberConfusion {
    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn row_total(&self, target: Number) -> usize {
        self.counts[number_row(target)].iter().sum()
    }

    /// Counts as fractions of their row.
    pub fn row_fractions(&self) -> [[Option<f64>; 4]; 2] {
        let mut out = [[None; 4]; 2];
        for (r, row) in self.counts.iter().enumerate() {
            let total: usize = row.iter().sum();
            if total > 0 {
                for (c, &k) in row.iter().enumerate() {
                    out[r][c] = Some(k as f64 / total as f64);
                }
            }
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["target", "predicted", "count", "row_fraction"])?;
        let fr = self.row_fractions();
        for (r, target) in ["SG", "PL"].iter().enumerate() {
            for (c, col) in CONFUSION_COLUMNS.iter().enumerate() {
                w.write_record([
                    target.to_string(),
                    col.to_string(),
                    self.counts[r][c].to_string(),
                    fr[r][c].map_or(String::new(), |f| f.to_string()),
                ])?;
            }
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

fn number_row(n: Number) -> usize {
    match n {
        Number::Sg => 0,
        Number::Pl => 1,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NumberAnalysis {
    pub confusion: NumberConfusion,
    /// Share of all predictions with the target's number.
    pub number_match_rate: f64,
    /// Same, restricted to wrongly recognized tokens.
    pub number_match_rate_errors: Option<f64>,
    pub n_number_match: usize,
    pub n_errors: usize,
    pub n_errors_number_match: usize,
}

/// Number-confusion counts and number-match rates. Types are gold ids.
pub fn number_confusion<S: AsRef<str>>(predicted: &[S], target: &[S], gold: &GoldIndex) -> Result<NumberAnalysis> {
    if predicted.len() != target.len() {
        return Err(Error::LengthMismatch {
            left: predicted.len(),
            right: target.len(),
        });
    }
    let row = |t: &str| gold.row(t).ok_or_else(|| Error::UnknownTarget(t.to_string()));
    let mut confusion = NumberConfusion::default();
    let (mut matches, mut errors, mut error_matches) = (0, 0, 0);
    for (p, t) in predicted.iter().zip(target) {
        let (pr, tr) = (row(p.as_ref())?, row(t.as_ref())?);
        let same_lexeme = gold.lexeme(pr) == gold.lexeme(tr);
        let (pn, tn) = (gold.number(pr), gold.number(tr));
        let col = number_row(pn) * 2 + usize::from(!same_lexeme);
        confusion.counts[number_row(tn)][col] += 1;
        let number_match = pn == tn;
        matches += usize::from(number_match);
        if pr != tr {
            errors += 1;
            error_matches += usize::from(number_match);
        }
    }
    let n = target.len();
    Ok(NumberAnalysis {
        confusion,
        number_match_rate: if n == 0 { 0.0 } else { matches as f64 / n as f64 },
        number_match_rate_errors: (errors > 0).then(|| error_matches as f64 / errors as f64),
        n_number_match: matches,
        n_errors: errors,
        n_errors_number_match: error_matches,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoProportionTest {
    pub chi_square: f64,
    pub p_value: f64,
    /// `k1/n1 − k2/n2`.
    pub diff: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

const Z_975: f64 = 1.959963984540054;

/// Pearson chi-square test (1 df, no continuity correction) for equal
/// proportions, with a 95% Wald interval on the difference.
pub fn two_proportion_test(k1: u64, n1: u64, k2: u64, n2: u64) -> Result<TwoProportionTest> {
    if n1 == 0 || n2 == 0 || k1 > n1 || k2 > n2 {
        return Err(Error::InvalidCounts(format!("{k1}/{n1} vs {k2}/{n2}")));
    }
    let (p1, p2) = (k1 as f64 / n1 as f64, k2 as f64 / n2 as f64);
    let pooled = (k1 + k2) as f64 / (n1 + n2) as f64;
    let var = pooled * (1.0 - pooled) * (1.0 / n1 as f64 + 1.0 / n2 as f64);
    let diff = p1 - p2;
    let chi_square = if var > 0.0 { diff * diff / var } else { 0.0 };
    let se = (p1 * (1.0 - p1) / n1 as f64 + p2 * (1.0 - p2) / n2 as f64).sqrt();
    Ok(TwoProportionTest {
        chi_square,
        p_value: stats::chi_square_sf(chi_square, 1.0),
        diff,
        ci_low: (diff - Z_975 * se).max(-1.0),
        ci_high: (diff + Z_975 * se).min(1.0),
    })
}

/// Top-1 accuracy per word group of the target; `None` for empty groups.
pub fn group_accuracy<S: AsRef<str>>(
    predicted: &[S],
    target: &[S],
    groups: &LexemeGroups,
) -> Result<BTreeMap<WordGroup, Option<f64>>> {
    if predicted.len() != target.len() {
        return Err(Error::LengthMismatch {
            left: predicted.len(),
            right: target.len(),
        });
    }
    let mut tally: BTreeMap<WordGroup, (usize, usize)> = BTreeMap::new();
    for (p, t) in predicted.iter().zip(target) {
        if let Some(g) = groups.group_of(t.as_ref()) {
            let e = tally.entry(g).or_default();
            e.1 += 1;
            e.0 += usize::from(p.as_ref() == t.as_ref());
        }
    }
    Ok(WordGroup::ALL
        .iter()
        .map(|&g| {
            let acc = tally
                .get(&g)
                .filter(|(_, n)| *n > 0)
                .map(|(k, n)| *k as f64 / *n as f64);
            (g, acc)
        })
        .collect())
}

mod absent {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Value(f64),
        Tag(String),
    }

    pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(x) => Repr::Value(*x),
            None => Repr::Tag("ABSENT".into()),
        }
        .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
        Ok(match Repr::deserialize(d)? {
            Repr::Value(x) => Some(x),
            Repr::Tag(_) => None,
        })
    }
}

/// Group accuracy entry; serialized as a number or `"ABSENT"`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GroupScore(#[serde(with = "absent")] pub Option<f64>);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n_tokens: usize,
    /// Keys are N = 1..5.
    pub top_n_accuracy: BTreeMap<usize, f64>,
    pub weighted_f1: f64,
    pub confusion: NumberConfusion,
    pub confusion_row_fractions: [[Option<f64>; 4]; 2],
    pub group_accuracy: BTreeMap<WordGroup, GroupScore>,
    pub number_match_rate: f64,
    pub number_match_rate_errors: GroupScore,
    pub n_number_match: usize,
    pub n_errors: usize,
    pub n_errors_number_match: usize,
}

impl EvalReport {
    pub fn top1(&self) -> f64 {
        self.top_n_accuracy[&1]
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn read_json(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Full report for `predictions` (one row per token) against `gold`.
/// Group accuracies need `groups`; without it every group is absent.
pub fn evaluate(
    predictions: &DMatrix<f64>,
    targets: &[String],
    gold: &GoldIndex,
    groups: Option<&LexemeGroups>,
) -> Result<EvalReport> {
    let ranked = rank_predictions(predictions, targets, gold)?;
    let predicted: Vec<&str> = ranked
        .iter()
        .map(|r| gold.type_ids[r.predicted_row].as_str())
        .collect();
    let target: Vec<&str> = targets.iter().map(String::as_str).collect();
    let top_n_accuracy = (1..=MAX_N).map(|n| (n, top_n_from_ranks(&ranked, n))).collect();
    let numbers = number_confusion(&predicted, &target, gold)?;
    let group_accuracy = match groups {
        Some(g) => group_accuracy(&predicted, &target, g)?,
        None => WordGroup::ALL.iter().map(|&g| (g, None)).collect(),
    };
    Ok(EvalReport {
        n_tokens: targets.len(),
        top_n_accuracy,
        weighted_f1: weighted_f1(&predicted, &target)?,
        confusion_row_fractions: numbers.confusion.row_fractions(),
        confusion: numbers.confusion,
        group_accuracy: group_accuracy
            .into_iter()
            .map(|(g, v)| (g, GroupScore(v)))
            .collect(),
        number_match_rate: numbers.number_match_rate,
        number_match_rate_errors: GroupScore(numbers.number_match_rate_errors),
        n_number_match: numbers.n_number_match,
        n_errors: numbers.n_errors,
        n_errors_number_match: numbers.n_errors_number_match,
    })
}
