//! Stratified k-fold cross-validation of the form→meaning mapping.
//!
//! For every fold the mapping `F` solving `CF = S` is fit on the training
//! tokens, where `S` repeats the gold vector of each token's word type. The
//! training Gram matrix and its pseudoinverse are shared by all gold spaces
//! of a fold; only `CᵀS` differs between them.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cfbsf::FeatureMatrix;
use crate::conceptualizer::{fit_cca, lexeme_pairs, FracssMap};
use crate::corpus::{pair_lexemes, Corpus, EmbeddingTable, Number, WordType};
use crate::error::{Error, Result};
use crate::eval::{self, EvalReport, GoldEntry, GoldIndex, TwoProportionTest};
use crate::linmap::{self, DesignFactor, LinearMap, SolveOptions};
use crate::seed;
use crate::stats;

/// Token → fold assignment.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub seed: u64,
    pub assignment: BTreeMap<String, usize>,
}

/// Deals each type's tokens round-robin over `k` folds after a seeded
/// shuffle. The starting fold rotates from type to type so fold sizes stay
/// within one token of each other.
pub fn make_folds<T: AsRef<str>, U: AsRef<str>>(tokens: &[(T, U)], k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::InvalidConfig(format!("need at least 2 folds, got {k}")));
    }
    let mut by_type: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    let mut seen = BTreeSet::new();
    for (tok, ty) in tokens {
        if !seen.insert(tok.as_ref()) {
            return Err(Error::DuplicateId {
                kind: "token",
                id: tok.as_ref().to_string(),
            });
        }
        by_type.entry(ty.as_ref()).or_default().push(tok.as_ref());
    }
    let rare: Vec<String> = by_type
        .iter()
        .filter(|(_, v)| v.len() < k)
        .map(|(t, _)| t.to_string())
        .collect();
    if !rare.is_empty() {
        return Err(Error::TypeTooRare { k, types: rare });
    }
    let mut assignment = BTreeMap::new();
    let mut offset = 0;
    for (ty, mut toks) in by_type {
        toks.sort_unstable();
        toks.shuffle(&mut seed::rng(seed::derive(seed, &format!("folds/{ty}"))));
        for (j, t) in toks.iter().enumerate() {
            assignment.insert(t.to_string(), (offset + j) % k);
        }
        offset = (offset + toks.len()) % k;
    }
    Ok(FoldPlan { k, seed, assignment })
}

impl FoldPlan {
    pub fn fold_of(&self, token_id: &str) -> Option<usize> {
        self.assignment.get(token_id).copied()
    }

    pub fn test_size(&self, fold: usize) -> usize {
        self.assignment.values().filter(|&&f| f == fold).count()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum GoldSpaceName {
    Word2vec,
    Cca,
    Fracss,
}

impl GoldSpaceName {
    pub const ALL: [GoldSpaceName; 3] = [GoldSpaceName::Word2vec, GoldSpaceName::Cca, GoldSpaceName::Fracss];

    pub fn as_str(self) -> &'static str {
        match self {
            GoldSpaceName::Word2vec => "WORD2VEC",
            GoldSpaceName::Cca => "CCA",
            GoldSpaceName::Fracss => "FRACSS",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        GoldSpaceName::ALL
            .into_iter()
            .find(|n| n.as_str().eq_ignore_ascii_case(s))
    }
}

impl fmt::Display for GoldSpaceName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Type-level gold vectors of one space. Singulars always carry their
/// embedding; plurals carry the embedding (WORD2VEC) or the conceptualized
/// prediction from their singular (CCA, FRACSS).
#[derive(Clone, Debug)]
pub struct GoldSpace {
    pub name: GoldSpaceName,
    pub type_ids: Vec<String>,
    pub vectors: DMatrix<f64>,
    /// Training pairs the conceptualizer was fit on.
    pub n_pairs: usize,
    /// Plurals without a usable singular, which keep their embedding.
    pub n_plural_fallback: usize,
    /// CCA plurals whose class had no training pair.
    pub n_class_fallback: usize,
}

/// Builds gold vectors for `type_ids` (sorted). The conceptualizer is fit on
/// pairs whose two members are both in `reference` when given.
pub fn build_gold_space(
    name: GoldSpaceName,
    corpus: &Corpus,
    embeddings: &EmbeddingTable,
    type_ids: &[String],
    reference: Option<&BTreeSet<String>>,
    fracss_ridge: f64,
) -> Result<GoldSpace> {
    let dim = embeddings.dim();
    let emb = |t: &str| {
        embeddings
            .get(t)
            .ok_or_else(|| Error::UnknownTarget(t.to_string()))
    };
    let pairs = match name {
        GoldSpaceName::Word2vec => Vec::new(),
        _ => lexeme_pairs(corpus, embeddings, reference),
    };
    let cca = match name {
        GoldSpaceName::Cca => Some(fit_cca(&pairs)?),
        _ => None,
    };
    let fracss = match name {
        GoldSpaceName::Fracss => Some(FracssMap::fit_pairs(&pairs, fracss_ridge)?),
        _ => None,
    };
    let mut vectors = DMatrix::zeros(type_ids.len(), dim);
    let (mut n_plural_fallback, mut n_class_fallback) = (0, 0);
    for (i, t) in type_ids.iter().enumerate() {
        let wt = corpus
            .type_by_id(t)
            .ok_or_else(|| Error::UnknownTarget(t.clone()))?;
        let own = emb(t)?;
        let singular = match (wt.number, name) {
            (Number::Sg, _) | (_, GoldSpaceName::Word2vec) => None,
            (Number::Pl, _) => corpus
                .partner(t)
                .and_then(|sg| embeddings.get(&sg.type_id).map(|v| (sg, v))),
        };
        let row = match singular {
            None => {
                if wt.number == Number::Pl && name != GoldSpaceName::Word2vec {
                    n_plural_fallback += 1;
                }
                own.to_vec()
            }
            Some((sg, v_sg)) => {
                let class = class_of(sg, wt);
                if let Some(table) = &cca {
                    let p = table.predict(v_sg, class)?;
                    n_class_fallback += usize::from(p.fallback);
                    p.vector
                } else {
                    fracss.as_ref().expect("fracss fitted").predict(v_sg)?
                }
            }
        };
        vectors.row_mut(i).copy_from_slice(&row);
    }
    Ok(GoldSpace {
        name,
        type_ids: type_ids.to_vec(),
        vectors,
        n_pairs: pairs.len(),
        n_plural_fallback,
        n_class_fallback,
    })
}

fn class_of<'a>(sg: &'a WordType, pl: &'a WordType) -> Option<&'a str> {
    sg.semantic_class
        .as_deref()
        .or(pl.semantic_class.as_deref())
}

impl GoldSpace {
    pub fn index(&self, corpus: &Corpus) -> Result<GoldIndex> {
        let entries = self
            .type_ids
            .iter()
            .enumerate()
            .map(|(i, t)| {
                let wt = corpus
                    .type_by_id(t)
                    .ok_or_else(|| Error::UnknownTarget(t.clone()))?;
                Ok(GoldEntry {
                    type_id: t.clone(),
                    number: wt.number,
                    lexeme_id: wt.lexeme_id.clone(),
                    vector: self.vectors.row(i).iter().copied().collect(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        GoldIndex::new(entries)
    }
}

/// Tokens with both a feature row and an embedded type.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub token_ids: Vec<String>,
    /// Index into `type_ids` per token.
    pub type_of: Vec<usize>,
    /// Sorted ids of the types with at least one token.
    pub type_ids: Vec<String>,
    pub features: DMatrix<f64>,
    pub dropped_no_features: usize,
    pub dropped_no_embedding: usize,
}

impl Dataset {
    pub fn assemble(corpus: &Corpus, features: &FeatureMatrix, embeddings: &EmbeddingTable) -> Result<Self> {
        let rows = features.index_of();
        let mut kept: Vec<(&str, &str, usize)> = Vec::new();
        let (mut no_feat, mut no_emb) = (0, 0);
        for t in corpus.tokens() {
            match (rows.get(t.token_id.as_str()), embeddings.get(&t.type_id)) {
                (None, _) => no_feat += 1,
                (_, None) => no_emb += 1,
                (Some(&r), Some(_)) => kept.push((&t.token_id, &t.type_id, r)),
            }
        }
        if kept.is_empty() {
            return Err(Error::NoUsableTokens);
        }
        let type_ids: Vec<String> = kept
            .iter()
            .map(|k| k.1)
            .collect::<BTreeSet<_>>()
            .into_iter()
            .map(String::from)
            .collect();
        let pos: BTreeMap<&str, usize> = type_ids
            .iter()
            .enumerate()
            .map(|(i, t)| (t.as_str(), i))
            .collect();
        let p = features.cols;
        let mut data = DMatrix::zeros(kept.len(), p);
        for (i, (_, _, r)) in kept.iter().enumerate() {
            data.row_mut(i).copy_from_slice(features.row(*r));
        }
        Ok(Dataset {
            token_ids: kept.iter().map(|k| k.0.to_string()).collect(),
            type_of: kept.iter().map(|k| pos[k.1]).collect(),
            type_ids,
            features: data,
            dropped_no_features: no_feat,
            dropped_no_embedding: no_emb,
        })
    }

    pub fn len(&self) -> usize {
        self.token_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.token_ids.is_empty()
    }

    pub fn plan(&self, k: usize, seed: u64) -> Result<FoldPlan> {
        let pairs: Vec<(&str, &str)> = self
            .token_ids
            .iter()
            .zip(&self.type_of)
            .map(|(t, &i)| (t.as_str(), self.type_ids[i].as_str()))
            .collect();
        make_folds(&pairs, k, seed)
    }

    fn split(&self, plan: &FoldPlan, fold: usize) -> (Vec<usize>, Vec<usize>) {
        (0..self.len()).partition(|&i| plan.fold_of(&self.token_ids[i]) != Some(fold))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CvConfig {
    pub k: usize,
    pub seed: u64,
    pub spaces: Vec<GoldSpaceName>,
    /// Folds to run (zero-based); all when empty.
    pub folds: Vec<usize>,
    pub solve: SolveOptions,
    pub fracss_ridge: f64,
    pub permutation: bool,
    /// `(trained_with, evaluated_against)` pairs.
    pub cross_gold: Vec<(GoldSpaceName, GoldSpaceName)>,
}

impl Default for CvConfig {
    fn default() -> Self {
        CvConfig {
            k: 10,
            seed: 0,
            spaces: GoldSpaceName::ALL.to_vec(),
            folds: Vec::new(),
            solve: SolveOptions::default(),
            fracss_ridge: 0.0,
            permutation: true,
            cross_gold: vec![
                (GoldSpaceName::Cca, GoldSpaceName::Word2vec),
                (GoldSpaceName::Fracss, GoldSpaceName::Word2vec),
            ],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PermutationControl {
    pub permuted_train: EvalReport,
    pub permuted_test: EvalReport,
    pub delta_accuracy_train: f64,
    pub delta_accuracy_test: f64,
    pub delta_f1_train: f64,
    pub delta_f1_test: f64,
}

#[derive(Clone, Debug)]
pub struct SpaceOutcome {
    pub map: LinearMap,
    pub train: EvalReport,
    pub test: EvalReport,
    pub permutation: Option<PermutationControl>,
    pub n_pairs: usize,
    pub n_plural_fallback: usize,
    pub n_class_fallback: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossGold {
    pub trained_with: GoldSpaceName,
    pub evaluated_against: GoldSpaceName,
    pub test: EvalReport,
}

#[derive(Clone, Debug)]
pub struct FoldOutcome {
    pub fold: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub rank: usize,
    pub spaces: BTreeMap<GoldSpaceName, SpaceOutcome>,
    pub cross: Vec<CrossGold>,
}

fn select_rows(m: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    m.select_rows(idx)
}

/// Evaluates `predictions` (token rows) against `gold_index`.
pub fn cross_gold_eval(
    predictions: &DMatrix<f64>,
    targets: &[String],
    gold_index: &GoldIndex,
    corpus: &Corpus,
    reference: &BTreeSet<String>,
) -> Result<EvalReport> {
    let types: Vec<WordType> = gold_index
        .type_ids()
        .iter()
        .filter_map(|t| corpus.type_by_id(t).cloned())
        .collect();
    let groups = pair_lexemes(&types, Some(reference));
    eval::evaluate(predictions, targets, gold_index, Some(&groups))
}

/// Seeded permutation of token indices used by the permuted-gold control.
pub fn token_permutation(n: usize, seed: u64) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(&mut seed::rng(seed::derive(seed, "permutation")));
    p
}

/// Fits and evaluates every configured gold space on one fold.
pub fn run_fold(
    ds: &Dataset,
    corpus: &Corpus,
    embeddings: &EmbeddingTable,
    plan: &FoldPlan,
    fold: usize,
    cfg: &CvConfig,
) -> Result<FoldOutcome> {
    let (train, test) = ds.split(plan, fold);
    if train.is_empty() || test.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    let x_train = select_rows(&ds.features, &train);
    let x_test = select_rows(&ds.features, &test);
    let factor = DesignFactor::new(&x_train, cfg.solve)?;

    let train_types: BTreeSet<String> = train
        .iter()
        .map(|&i| ds.type_ids[ds.type_of[i]].clone())
        .collect();
    let types: Vec<WordType> = ds
        .type_ids
        .iter()
        .filter_map(|t| corpus.type_by_id(t).cloned())
        .collect();
    let groups = pair_lexemes(&types, Some(&train_types));

    let targets = |idx: &[usize], type_of: &[usize]| -> Vec<String> {
        idx.iter().map(|&i| ds.type_ids[type_of[i]].clone()).collect()
    };
    let perm_type_of: Option<Vec<usize>> = cfg.permutation.then(|| {
        token_permutation(ds.len(), cfg.seed)
            .into_iter()
            .map(|j| ds.type_of[j])
            .collect()
    });

    let mut spaces = BTreeMap::new();
    let mut indices = BTreeMap::new();
    let mut test_predictions = BTreeMap::new();
    for &name in &cfg.spaces {
        let gold = build_gold_space(name, corpus, embeddings, &ds.type_ids, Some(&train_types), cfg.fracss_ridge)?;
        let index = gold.index(corpus)?;
        debug_assert_eq!(index.type_ids(), &ds.type_ids[..]);
        let fit = |type_of: &[usize]| -> Result<(LinearMap, EvalReport, EvalReport, DMatrix<f64>)> {
            let groups_train: Vec<usize> = train.iter().map(|&i| type_of[i]).collect();
            let map = factor.solve_grouped(&x_train, &groups_train, &gold.vectors)?;
            let pred_train = linmap::predict(&map, &x_train)?;
            let pred_test = linmap::predict(&map, &x_test)?;
            let r_train = eval::evaluate(&pred_train, &targets(&train, type_of), &index, Some(&groups))?;
            let r_test = eval::evaluate(&pred_test, &targets(&test, type_of), &index, Some(&groups))?;
            Ok((map, r_train, r_test, pred_test))
        };
        let (map, r_train, r_test, pred_test) = fit(&ds.type_of)?;
        let permutation = match &perm_type_of {
            None => None,
            Some(pt) => {
                let (_, p_train, p_test, _) = fit(pt)?;
                Some(PermutationControl {
                    delta_accuracy_train: r_train.top1() - p_train.top1(),
                    delta_accuracy_test: r_test.top1() - p_test.top1(),
                    delta_f1_train: r_train.weighted_f1 - p_train.weighted_f1,
                    delta_f1_test: r_test.weighted_f1 - p_test.weighted_f1,
                    permuted_train: p_train,
                    permuted_test: p_test,
                })
            }
        };
        spaces.insert(
            name,
            SpaceOutcome {
                map,
                train: r_train,
                test: r_test,
                permutation,
                n_pairs: gold.n_pairs,
                n_plural_fallback: gold.n_plural_fallback,
                n_class_fallback: gold.n_class_fallback,
            },
        );
        indices.insert(name, index);
        test_predictions.insert(name, pred_test);
    }

    let test_targets = targets(&test, &ds.type_of);
    let mut cross = Vec::new();
    for &(trained, evaluated) in &cfg.cross_gold {
        let Some(pred) = test_predictions.get(&trained) else {
            continue;
        };
        let index = match indices.get(&evaluated) {
            Some(ix) => ix.clone(),
            None => build_gold_space(evaluated, corpus, embeddings, &ds.type_ids, Some(&train_types), cfg.fracss_ridge)?
                .index(corpus)?,
        };
        cross.push(CrossGold {
            trained_with: trained,
            evaluated_against: evaluated,
            test: eval::evaluate(pred, &test_targets, &index, Some(&groups))?,
        });
    }

    Ok(FoldOutcome {
        fold,
        n_train: train.len(),
        n_test: test.len(),
        rank: factor.rank(),
        spaces,
        cross,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub per_fold: Vec<f64>,
    pub median: f64,
    pub sd: f64,
}

impl MetricSummary {
    pub fn from_values(per_fold: Vec<f64>) -> Self {
        MetricSummary {
            median: stats::median(&per_fold),
            sd: stats::sd(&per_fold),
            per_fold,
        }
    }

    pub fn mean(&self) -> f64 {
        stats::mean(&self.per_fold)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpaceSummary {
    pub test_top_n: BTreeMap<usize, MetricSummary>,
    pub train_top1: MetricSummary,
    pub test_weighted_f1: MetricSummary,
    pub train_weighted_f1: MetricSummary,
    pub test_number_match_rate: MetricSummary,
    pub permuted_test_top1: Option<MetricSummary>,
    pub delta_accuracy_train: Option<MetricSummary>,
    pub delta_accuracy_test: Option<MetricSummary>,
    pub delta_f1_train: Option<MetricSummary>,
    pub delta_f1_test: Option<MetricSummary>,
    /// Test tokens pooled over folds.
    pub test_tokens: u64,
    pub test_number_matches: u64,
    pub conceptualizer_pairs: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvSummary {
    pub k: usize,
    pub seed: u64,
    pub folds: Vec<usize>,
    pub n_tokens: usize,
    pub n_types: usize,
    pub dropped_no_features: usize,
    pub dropped_no_embedding: usize,
    pub test_sizes: Vec<usize>,
    pub ranks: Vec<usize>,
    /// Conceptualizers are refit on each fold's training pairs.
    pub conceptualizer_fit: String,
    pub spaces: BTreeMap<GoldSpaceName, SpaceSummary>,
    /// Keyed `TRAINED->EVALUATED`, test top-1 accuracy.
    pub cross_gold_top1: BTreeMap<String, MetricSummary>,
    /// Pooled test number-match counts of CCA versus FRACSS.
    pub number_match_cca_vs_fracss: Option<TwoProportionTest>,
}

pub struct CvRun {
    pub plan: FoldPlan,
    pub folds: Vec<FoldOutcome>,
    pub summary: CvSummary,
}

/// Runs the configured folds in parallel and aggregates them.
pub fn run_cv(ds: &Dataset, corpus: &Corpus, embeddings: &EmbeddingTable, cfg: &CvConfig) -> Result<CvRun> {
    let plan = ds.plan(cfg.k, cfg.seed)?;
    let folds: Vec<usize> = if cfg.folds.is_empty() {
        (0..cfg.k).collect()
    } else {
        cfg.folds.clone()
    };
    if let Some(&f) = folds.iter().find(|&&f| f >= cfg.k) {
        return Err(Error::InvalidConfig(format!("fold {f} out of range for k = {}", cfg.k)));
    }
    let outcomes = folds
        .par_iter()
        .map(|&f| run_fold(ds, corpus, embeddings, &plan, f, cfg))
        .collect::<Result<Vec<_>>>()?;
    let summary = summarize(ds, cfg, &plan, &outcomes)?;
    Ok(CvRun {
        plan,
        folds: outcomes,
        summary,
    })
}

fn summarize(ds: &Dataset, cfg: &CvConfig, plan: &FoldPlan, outcomes: &[FoldOutcome]) -> Result<CvSummary> {
    let collect = |f: &dyn Fn(&FoldOutcome) -> Option<f64>| -> Option<MetricSummary> {
        let v: Option<Vec<f64>> = outcomes.iter().map(f).collect();
        v.map(MetricSummary::from_values)
    };
    let mut spaces = BTreeMap::new();
    for &name in &cfg.spaces {
        let outs: Vec<&SpaceOutcome> = outcomes.iter().map(|o| &o.spaces[&name]).collect();
        let metric = |f: &dyn Fn(&SpaceOutcome) -> f64| {
            MetricSummary::from_values(outs.iter().map(|s| f(s)).collect())
        };
        let perm = |f: &dyn Fn(&PermutationControl) -> f64| {
            let v: Option<Vec<f64>> = outs.iter().map(|s| s.permutation.as_ref().map(f)).collect();
            v.map(MetricSummary::from_values)
        };
        spaces.insert(
            name,
            SpaceSummary {
                test_top_n: (1..=eval::MAX_N)
                    .map(|n| (n, metric(&|s| s.test.top_n_accuracy[&n])))
                    .collect(),
                train_top1: metric(&|s| s.train.top1()),
                test_weighted_f1: metric(&|s| s.test.weighted_f1),
                train_weighted_f1: metric(&|s| s.train.weighted_f1),
                test_number_match_rate: metric(&|s| s.test.number_match_rate),
                permuted_test_top1: perm(&|p| p.permuted_test.top1()),
                delta_accuracy_train: perm(&|p| p.delta_accuracy_train),
                delta_accuracy_test: perm(&|p| p.delta_accuracy_test),
                delta_f1_train: perm(&|p| p.delta_f1_train),
                delta_f1_test: perm(&|p| p.delta_f1_test),
                test_tokens: outs.iter().map(|s| s.test.n_tokens as u64).sum(),
                test_number_matches: outs.iter().map(|s| s.test.n_number_match as u64).sum(),
                conceptualizer_pairs: outs.iter().map(|s| s.n_pairs).collect(),
            },
        );
    }
    let mut cross_gold_top1 = BTreeMap::new();
    for &(a, b) in &cfg.cross_gold {
        if let Some(m) = collect(&|o: &FoldOutcome| {
            o.cross
                .iter()
                .find(|c| c.trained_with == a && c.evaluated_against == b)
                .map(|c| c.test.top1())
        }) {
            cross_gold_top1.insert(format!("{a}->{b}"), m);
        }
    }
    let number_match_cca_vs_fracss = match (spaces.get(&GoldSpaceName::Cca), spaces.get(&GoldSpaceName::Fracss)) {
        (Some(c), Some(f)) if c.test_tokens > 0 && f.test_tokens > 0 => Some(eval::two_proportion_test(
            c.test_number_matches,
            c.test_tokens,
            f.test_number_matches,
            f.test_tokens,
        )?),
        _ => None,
    };
    Ok(CvSummary {
        k: cfg.k,
        seed: cfg.seed,
        folds: outcomes.iter().map(|o| o.fold).collect(),
        n_tokens: ds.len(),
        n_types: ds.type_ids.len(),
        dropped_no_features: ds.dropped_no_features,
        dropped_no_embedding: ds.dropped_no_embedding,
        test_sizes: outcomes.iter().map(|o| plan.test_size(o.fold)).collect(),
        ranks: outcomes.iter().map(|o| o.rank).collect(),
        conceptualizer_fit: "per-fold, training pairs only".into(),
        spaces,
        cross_gold_top1,
        number_match_cca_vs_fracss,
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

/// Writes `fold<k>/<SPACE>/{map.bin, report_train.json, report_test.json,
/// confusion_test.csv, permutation.json}`, `fold<k>/cross_gold.json`,
/// `folds.json` and `summary.json` under `dir`. Folds are numbered from 1.
pub fn write_run(dir: &Path, run: &CvRun) -> Result<()> {
    create_dir(dir)?;
    for o in &run.folds {
        let fdir = dir.join(format!("fold{}", o.fold + 1));
        for (name, s) in &o.spaces {
            let sdir = fdir.join(name.as_str());
            create_dir(&sdir)?;
            s.map.save(sdir.join("map.bin"))?;
            s.train.write_json(sdir.join("report_train.json"))?;
            s.test.write_json(sdir.join("report_test.json"))?;
            s.test.confusion.write_csv(sdir.join("confusion_test.csv"))?;
            if let Some(p) = &s.permutation {
                write_json(&sdir.join("permutation.json"), p)?;
            }
        }
        if !o.cross.is_empty() {
            write_json(&fdir.join("cross_gold.json"), &o.cross)?;
        }
    }
    write_json(&dir.join("folds.json"), &run.plan)?;
    write_json(&dir.join("summary.json"), &run.summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pigeonhole_and_round_robin_counts() {
        let toks: Vec<(String, String)> = (0..10).map(|i| (format!("t{i}"), "a".to_string())).collect();
        let plan = make_folds(&toks, 10, 3).unwrap();
        let folds: BTreeSet<usize> = plan.assignment.values().copied().collect();
        assert_eq!(folds.len(), 10);

        let toks: Vec<(String, String)> = (0..25).map(|i| (format!("t{i}"), "a".to_string())).collect();
        let plan = make_folds(&toks, 10, 3).unwrap();
        let mut counts: Vec<usize> = (0..10).map(|f| plan.test_size(f)).collect();
        counts.sort_unstable();
        assert_eq!(counts, vec![2, 2, 2, 2, 2, 3, 3, 3, 3, 3]);
    }

    #[test]
    fn rare_types_are_named() {
        let toks = vec![("a1", "a"), ("a2", "a"), ("b1", "b")];
        match make_folds(&toks, 2, 0) {
            Err(Error::TypeTooRare { k: 2, types }) => assert_eq!(types, vec!["b"]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn same_seed_same_plan() {
        let toks: Vec<(String, String)> = (0..60)
            .map(|i| (format!("t{i}"), format!("w{}", i % 4)))
            .collect();
        assert_eq!(make_folds(&toks, 5, 9).unwrap(), make_folds(&toks, 5, 9).unwrap());
        assert_ne!(make_folds(&toks, 5, 9).unwrap(), make_folds(&toks, 5, 10).unwrap());
    }
}
