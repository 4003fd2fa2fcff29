use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use anyhow::Context;
use plurisem_core::cfbsf;
use plurisem_core::conceptualizer::{self, Conceptualizer, Method};
use plurisem_core::corpus::{self, Corpus, EmbeddingTable, Number};
use plurisem_core::isomorphy::{self, StudyMode, TypeForms};
use plurisem_core::stats;
use plurisem_core::synth::{self, SynthSpec};
use plurisem_core::xval::{self, Dataset, GoldSpace};
use plurisem_core::Error;
use serde::Serialize;

use crate::config::{
    require_path, ConceptualizeConfig, CvCommandConfig, DistanceStudyConfig, ExportShiftsConfig, ExtractConfig,
    LexiconInput,
};
use crate::UsageError;

pub const FEATURES_FILE: &str = "features.bin";
pub const FAILURES_FILE: &str = "failures.csv";
pub const PREDICTED_FILE: &str = "predicted_plurals.txt";
pub const RESIDUALS_FILE: &str = "residuals.csv";
pub const RESIDUAL_SUMMARY_FILE: &str = "residual_summary.json";
pub const REPORT_FILE: &str = "report.json";
pub const SHIFTS_FILE: &str = "shifts.csv";
pub const CLASS_SHIFTS_FILE: &str = "class_shifts.csv";

fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)? + "\n").with_context(|| format!("writing {}", path.display()))
}

/// Dimension from the `count dim` header or the first row's width.
fn sniff_dim(path: &Path) -> anyhow::Result<usize> {
    let file = File::open(path).map_err(|e| UsageError(format!("cannot open {}: {e}", path.display())))?;
    for line in BufReader::new(file).lines() {
        let line = line?;
        let fields: Vec<&str> = line.split_whitespace().collect();
        match fields.len() {
            0 => continue,
            2 if fields.iter().all(|f| f.parse::<usize>().is_ok()) => return Ok(fields[1].parse()?),
            n => return Ok(n - 1),
        }
    }
    Err(UsageError(format!("{} is empty", path.display())).into())
}

struct Lexicon {
    corpus: Corpus,
    embeddings: EmbeddingTable,
}

fn load_lexicon(input: &LexiconInput) -> anyhow::Result<Lexicon> {
    require_path(&input.manifest, "manifest")?;
    require_path(&input.embeddings, "embedding file")?;
    let mut corpus = corpus::load_manifest(&input.manifest)?;
    let dim = match input.embedding_dim {
        Some(d) => d,
        None => sniff_dim(&input.embeddings)?,
    };
    let (embeddings, stats) = corpus::load_embeddings(&input.embeddings, dim, &corpus)?;
    corpus.mark_embeddings(&embeddings);
    eprintln!(
        "loaded {} types, {} tokens, {} vectors ({} skipped)",
        corpus.types().len(),
        corpus.tokens().len(),
        stats.loaded,
        stats.skipped
    );
    Ok(Lexicon { corpus, embeddings })
}

#[derive(Serialize)]
struct ExtractSummary {
    n_tokens: usize,
    n_extracted: usize,
    n_failed: usize,
    max_chunks: usize,
    cols: usize,
    per_chunk_dim: usize,
}

pub fn extract(cfg: &ExtractConfig, out: &Path) -> anyhow::Result<()> {
    require_path(&cfg.manifest, "manifest")?;
    let corpus = corpus::load_manifest(&cfg.manifest)?;
    if corpus.tokens().is_empty() {
        return Err(Error::NoUsableTokens.into());
    }
    eprintln!("extracting {} tokens", corpus.tokens().len());
    let fm = cfbsf::build_form_matrix(&corpus, corpus.tokens(), &cfg.cfbsf)?;
    let mut w = csv::Writer::from_path(out.join(FAILURES_FILE))?;
    w.write_record(["token_id", "error"])?;
    for (tok, e) in &fm.failures {
        eprintln!("token {tok}: {e}");
        w.write_record([tok.as_str(), e.to_string().as_str()])?;
    }
    w.flush()?;
    cfbsf::write_feature_cache(out.join(FEATURES_FILE), &fm.features)?;
    let summary = ExtractSummary {
        n_tokens: corpus.tokens().len(),
        n_extracted: fm.features.rows(),
        n_failed: fm.failures.len(),
        max_chunks: fm.max_chunks,
        cols: fm.features.cols,
        per_chunk_dim: cfg.cfbsf.per_chunk_dim(),
    };
    write_json(&out.join("extract_summary.json"), &summary)?;
    eprintln!(
        "extracted {} of {} tokens ({} failed), {} columns",
        summary.n_extracted, summary.n_tokens, summary.n_failed, summary.cols
    );
    Ok(())
}

#[derive(Serialize)]
struct ResidualSummary {
    method: Method,
    n_pairs: usize,
    n_predicted: usize,
    median_norm: f64,
    mean_norm: f64,
    max_norm: f64,
}

fn method_name(m: Method) -> &'static str {
    match m {
        Method::Cca => "cca",
        Method::Fracss => "fracss",
    }
}

pub fn conceptualize(cfg: &ConceptualizeConfig, out: &Path) -> anyhow::Result<()> {
    let lex = load_lexicon(&cfg.input)?;
    let pairs = conceptualizer::lexeme_pairs(&lex.corpus, &lex.embeddings, None);
    if pairs.is_empty() {
        return Err(Error::EmptyTrainingSet.into());
    }
    let types = lex.corpus.types();
    let mut summaries = Vec::new();
    for &method in &cfg.methods {
        let model = Conceptualizer::fit(method, &pairs, cfg.fracss_ridge)?;
        let dir = out.join(method_name(method));
        std::fs::create_dir_all(&dir)?;

        let mut w = csv::Writer::from_path(dir.join(RESIDUALS_FILE))?;
        w.write_record(["lexeme_id", "semantic_class", "residual_norm"])?;
        let mut norms = Vec::with_capacity(pairs.len());
        for p in &pairs {
            let pred = model.predict(&p.sg, p.class.as_deref())?;
            let r = conceptualizer::decompose(&p.pl, &pred)?;
            w.write_record([
                p.lexeme_id.clone(),
                p.class.clone().unwrap_or_default(),
                r.norm.to_string(),
            ])?;
            norms.push(r.norm);
        }
        w.flush()?;

        // Every embedded singular gets a predicted plural, keyed by the
        // plural's orth form when the manifest has one.
        let mut rows: Vec<(String, Vec<f64>)> = Vec::new();
        for lexeme in lex.corpus.lexemes().values() {
            let Some(sg) = lexeme.sg.map(|i| &types[i]) else { continue };
            let Some(v) = lex.embeddings.get(&sg.type_id) else { continue };
            let pl = lexeme.pl.map(|i| &types[i]);
            let class = sg.semantic_class.as_deref().or(pl.and_then(|p| p.semantic_class.as_deref()));
            let key = pl.map_or_else(|| format!("{}+PL", sg.orth), |p| p.orth.clone());
            rows.push((key, model.predict(v, class)?));
        }
        corpus::write_embeddings(
            dir.join(PREDICTED_FILE),
            lex.embeddings.dim(),
            rows.iter().map(|(k, v)| (k.as_str(), v.as_slice())),
        )?;
        let s = ResidualSummary {
            method,
            n_pairs: pairs.len(),
            n_predicted: rows.len(),
            median_norm: stats::median(&norms),
            mean_norm: stats::mean(&norms),
            max_norm: norms.iter().copied().fold(0.0, f64::max),
        };
        eprintln!("{}: median residual norm {:.6} over {} pairs", method_name(method), s.median_norm, s.n_pairs);
        summaries.push(s);
    }
    write_json(&out.join(RESIDUAL_SUMMARY_FILE), &summaries)
}

pub fn cv(cfg: &CvCommandConfig, out: &Path) -> anyhow::Result<()> {
    require_path(&cfg.features, "feature cache")?;
    let lex = load_lexicon(&cfg.input)?;
    let features = cfbsf::read_feature_cache(&cfg.features)?;
    let ds = Dataset::assemble(&lex.corpus, &features, &lex.embeddings)?;
    eprintln!("{} tokens of {} types, k = {}", ds.len(), ds.type_ids.len(), cfg.cv.k);
    let run = xval::run_cv(&ds, &lex.corpus, &lex.embeddings, &cfg.cv)?;
    xval::write_run(out, &run)?;
    for (name, s) in &run.summary.spaces {
        println!(
            "{name}: median test top-1 {:.4}, number match {:.4}",
            s.test_top_n[&1].median, s.test_number_match_rate.median
        );
    }
    Ok(())
}

fn gold_spaces(cfg: &DistanceStudyConfig, lex: &Lexicon, type_ids: &[String]) -> anyhow::Result<Vec<GoldSpace>> {
    cfg.spaces
        .iter()
        .map(|&n| {
            xval::build_gold_space(n, &lex.corpus, &lex.embeddings, type_ids, None, cfg.fracss_ridge)
                .map_err(Into::into)
        })
        .collect()
}

pub fn distance_study(cfg: &DistanceStudyConfig, out: &Path) -> anyhow::Result<()> {
    let lex = load_lexicon(&cfg.input)?;
    match cfg.mode {
        StudyMode::Phone => {
            let type_ids: Vec<String> = lex
                .corpus
                .types()
                .iter()
                .filter(|t| t.has_embedding)
                .map(|t| t.type_id.clone())
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect();
            let spaces = gold_spaces(cfg, &lex, &type_ids)?;
            let wts: Vec<_> = type_ids.iter().map(|t| lex.corpus.type_by_id(t).expect("known type")).collect();
            let forms = TypeForms {
                phones: wts.iter().map(|t| t.phones.as_slice()).collect(),
                lexemes: wts.iter().map(|t| t.lexeme_id.as_str()).collect(),
            };
            let refs: Vec<&GoldSpace> = spaces.iter().collect();
            let report = isomorphy::phone_study(&forms, &refs, &cfg.phone)?;
            report.write_json(out.join(REPORT_FILE))?;
            for (n, s) in &report.per_space {
                println!("{n}: r = {:.4} over {} pairs", s.r_mean, s.n_pairs);
            }
        }
        StudyMode::Audio => {
            require_path(&cfg.features, "feature cache")?;
            let features = cfbsf::read_feature_cache(&cfg.features)?;
            let ds = Dataset::assemble(&lex.corpus, &features, &lex.embeddings)?;
            let spaces = gold_spaces(cfg, &lex, &ds.type_ids)?;
            let refs: Vec<&GoldSpace> = spaces.iter().collect();
            let study = isomorphy::audio_study(&ds.features, &ds.type_of, &refs, &cfg.audio)?;
            study.report.write_json(out.join(REPORT_FILE))?;
            isomorphy::write_trials_csv(out.join("trials.csv"), &study.trials)?;
            let phones: Vec<&[String]> = ds
                .type_ids
                .iter()
                .map(|t| lex.corpus.type_by_id(t).expect("known type").phones.as_slice())
                .collect();
            let avp = isomorphy::audio_vs_phone(&ds.features, &ds.type_of, &phones, cfg.phone.variant)?;
            isomorphy::write_bins_csv(out.join("audio_vs_phone_bins.csv"), &avp.bins)?;
            write_json(&out.join("audio_vs_phone.json"), &avp)?;
            for (n, s) in &study.report.per_space {
                println!(
                    "{n}: mean r = {:.4}, {}/{} trials significant",
                    s.r_mean, s.n_significant, s.n_trials
                );
            }
        }
    }
    Ok(())
}

pub fn synth(spec: &SynthSpec, out: &Path) -> anyhow::Result<()> {
    let s = synth::generate(spec)?;
    s.write(out)?;
    eprintln!(
        "wrote {} types and {} tokens to {}",
        s.corpus.types().len(),
        s.corpus.tokens().len(),
        out.display()
    );
    Ok(())
}

pub fn export_shifts(cfg: &ExportShiftsConfig, out: &Path) -> anyhow::Result<()> {
    let lex = load_lexicon(&cfg.input)?;
    let pairs = conceptualizer::lexeme_pairs(&lex.corpus, &lex.embeddings, None);
    let table = conceptualizer::fit_cca(&pairs)?;
    conceptualizer::export_shifts(&pairs, &table, out.join(SHIFTS_FILE))?;
    let mut w = csv::Writer::from_path(out.join(CLASS_SHIFTS_FILE))?;
    let mut header = vec!["semantic_class".to_string(), "pair_count".to_string()];
    header.extend((0..table.dim).map(|j| format!("d{j}")));
    w.write_record(&header)?;
    for (class, s) in &table.per_class {
        let mut row = vec![class.clone(), s.pair_count.to_string()];
        row.extend(s.shift.iter().map(|x| x.to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    let n_pl = lex.corpus.types().iter().filter(|t| t.number == Number::Pl).count();
    eprintln!("{} shift vectors from {} plural types", pairs.len(), n_pl);
    Ok(())
}
