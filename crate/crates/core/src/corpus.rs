//! Lexical data model: word types, audio tokens, embedding tables, and the
//! on-disk manifest and embedding formats.
//!
//! A manifest is a directory holding two CSV files:
//!
//! * `types.csv`: `type_id,orth,lexeme_id,number,phones,semantic_class`
//! * `tokens.csv`: `token_id,type_id,audio_path,start_s,end_s,sample_rate`
//!
//! `phones` is space separated. Empty `semantic_class`, `start_s` or `end_s`
//! cells mean "absent". Relative audio paths resolve against the manifest
//! directory.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const TYPES_FILE: &str = "types.csv";
pub const TOKENS_FILE: &str = "tokens.csv";

const TYPES_HEADER: [&str; 6] = [
    "type_id",
    "orth",
    "lexeme_id",
    "number",
    "phones",
    "semantic_class",
];
const TOKENS_HEADER: [&str; 6] = [
    "token_id",
    "type_id",
    "audio_path",
    "start_s",
    "end_s",
    "sample_rate",
];

/// Grammatical number of a word type.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Number {
    #[serde(rename = "SG")]
    Sg,
    #[serde(rename = "PL")]
    Pl,
}

impl Number {
    pub fn as_str(self) -> &'static str {
        match self {
            Number::Sg => "SG",
            Number::Pl => "PL",
        }
    }

    pub fn other(self) -> Number {
        match self {
            Number::Sg => Number::Pl,
            Number::Pl => Number::Sg,
        }
    }

    fn parse(s: &str) -> Option<Number> {
        match s {
            "SG" => Some(Number::Sg),
            "PL" => Some(Number::Pl),
            _ => None,
        }
    }
}

impl fmt::Display for Number {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WordType {
    pub type_id: String,
    pub orth: String,
    pub lexeme_id: String,
    pub number: Number,
    pub phones: Vec<String>,
    pub semantic_class: Option<String>,
    /// Set once an embedding table has been attached with
    /// [`Corpus::mark_embeddings`]; never read from the manifest.
    pub has_embedding: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AudioToken {
    pub token_id: String,
    pub type_id: String,
    pub audio_path: PathBuf,
    pub start_s: Option<f64>,
    pub end_s: Option<f64>,
    pub sample_rate: u32,
}

/// Singular and plural members of one lexeme, as indices into
/// [`Corpus::types`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Lexeme {
    pub sg: Option<usize>,
    pub pl: Option<usize>,
}

/// Validated set of word types and audio tokens.
#[derive(Clone, Debug, Default)]
pub struct Corpus {
    types: Vec<WordType>,
    tokens: Vec<AudioToken>,
    type_index: HashMap<String, usize>,
    lexemes: BTreeMap<String, Lexeme>,
    root: PathBuf,
}

impl Corpus {
    pub fn new(types: Vec<WordType>, tokens: Vec<AudioToken>) -> Result<Self> {
        let mut type_index = HashMap::with_capacity(types.len());
        let mut orths = HashMap::with_capacity(types.len());
        let mut lexemes: BTreeMap<String, Lexeme> = BTreeMap::new();
        for (i, t) in types.iter().enumerate() {
            if type_index.insert(t.type_id.clone(), i).is_some() {
                return Err(Error::DuplicateId {
                    kind: "type",
                    id: t.type_id.clone(),
                });
            }
            if orths.insert(t.orth.clone(), i).is_some() {
                return Err(Error::DuplicateId {
                    kind: "orth",
                    id: t.orth.clone(),
                });
            }
            let lex = lexemes.entry(t.lexeme_id.clone()).or_default();
            let slot = match t.number {
                Number::Sg => &mut lex.sg,
                Number::Pl => &mut lex.pl,
            };
            if slot.is_some() {
                return Err(Error::InvalidLexeme {
                    lexeme_id: t.lexeme_id.clone(),
                    reason: format!("more than one {} type", t.number),
                });
            }
            *slot = Some(i);
        }
        // Distinct orth strings within a lexeme already follow from global
        // orth uniqueness.

        let mut token_ids = BTreeSet::new();
        for tok in &tokens {
            if !token_ids.insert(tok.token_id.as_str()) {
                return Err(Error::DuplicateId {
                    kind: "token",
                    id: tok.token_id.clone(),
                });
            }
            if !type_index.contains_key(&tok.type_id) {
                return Err(Error::DanglingTypeReference {
                    token_id: tok.token_id.clone(),
                    type_id: tok.type_id.clone(),
                });
            }
            if let (Some(s), Some(e)) = (tok.start_s, tok.end_s) {
                if e <= s {
                    return Err(Error::InvalidConfig(format!(
                        "token {} has non-positive duration ({s}..{e})",
                        tok.token_id
                    )));
                }
            }
        }

        Ok(Corpus {
            types,
            tokens,
            type_index,
            lexemes,
            root: PathBuf::new(),
        })
    }

    pub fn with_root(mut self, root: impl Into<PathBuf>) -> Self {
        self.root = root.into();
        self
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn types(&self) -> &[WordType] {
        &self.types
    }

    pub fn tokens(&self) -> &[AudioToken] {
        &self.tokens
    }

    pub fn type_by_id(&self, type_id: &str) -> Option<&WordType> {
        self.type_index.get(type_id).map(|&i| &self.types[i])
    }

    pub fn type_index(&self, type_id: &str) -> Option<usize> {
        self.type_index.get(type_id).copied()
    }

    pub fn lexemes(&self) -> &BTreeMap<String, Lexeme> {
        &self.lexemes
    }

    /// The other-number member of `type_id`'s lexeme, if present.
    pub fn partner(&self, type_id: &str) -> Option<&WordType> {
        let t = self.type_by_id(type_id)?;
        let lex = self.lexemes.get(&t.lexeme_id)?;
        let idx = match t.number {
            Number::Sg => lex.pl,
            Number::Pl => lex.sg,
        }?;
        Some(&self.types[idx])
    }

    /// Absolute (or root-relative) location of a token's audio file.
    pub fn audio_path(&self, token: &AudioToken) -> PathBuf {
        if token.audio_path.is_absolute() {
            token.audio_path.clone()
        } else {
            self.root.join(&token.audio_path)
        }
    }

    /// Sets `has_embedding` on every type according to `table`.
    pub fn mark_embeddings(&mut self, table: &EmbeddingTable) {
        for t in &mut self.types {
            t.has_embedding = table.get(&t.type_id).is_some();
        }
    }

    /// Map from orthographic form to type id.
    pub fn orth_lookup(&self) -> HashMap<&str, &str> {
        self.types
            .iter()
            .map(|t| (t.orth.as_str(), t.type_id.as_str()))
            .collect()
    }
}

fn line_of(record: &csv::StringRecord) -> u64 {
    record.position().map(|p| p.line()).unwrap_or(0)
}

fn check_header(path: &Path, found: &csv::StringRecord, expected: &[&str]) -> Result<()> {
    let ok = found.len() == expected.len()
        && found.iter().zip(expected).all(|(a, b)| a.trim() == *b);
    if ok {
        Ok(())
    } else {
        Err(Error::MalformedRow {
            path: path.to_path_buf(),
            line: 1,
            reason: format!("expected header `{}`", expected.join(",")),
        })
    }
}

fn opt_cell(s: &str) -> Option<&str> {
    let s = s.trim();
    (!s.is_empty()).then_some(s)
}

fn csv_reader(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(file))
}

fn read_types(path: &Path) -> Result<Vec<WordType>> {
    let mut rdr = csv_reader(path)?;
    check_header(path, rdr.headers()?, &TYPES_HEADER)?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = line_of(&rec);
        let bad = |reason: String| Error::MalformedRow {
            path: path.to_path_buf(),
            line,
            reason,
        };
        if rec.len() != TYPES_HEADER.len() {
            return Err(bad(format!(
                "expected {} fields, found {}",
                TYPES_HEADER.len(),
                rec.len()
            )));
        }
        let type_id = opt_cell(&rec[0]).ok_or_else(|| bad("empty type_id".into()))?;
        let orth = opt_cell(&rec[1]).ok_or_else(|| bad("empty orth".into()))?;
        let lexeme_id = opt_cell(&rec[2]).ok_or_else(|| bad("empty lexeme_id".into()))?;
        let number = Number::parse(rec[3].trim())
            .ok_or_else(|| bad(format!("number must be SG or PL, got `{}`", &rec[3])))?;
        out.push(WordType {
            type_id: type_id.to_string(),
            orth: orth.to_string(),
            lexeme_id: lexeme_id.to_string(),
            number,
            phones: rec[4].split_whitespace().map(str::to_string).collect(),
            semantic_class: opt_cell(&rec[5]).map(str::to_string),
            has_embedding: false,
        });
    }
    Ok(out)
}

fn read_tokens(path: &Path) -> Result<Vec<AudioToken>> {
    let mut rdr = csv_reader(path)?;
    check_header(path, rdr.headers()?, &TOKENS_HEADER)?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = line_of(&rec);
        let bad = |reason: String| Error::MalformedRow {
            path: path.to_path_buf(),
            line,
            reason,
        };
        if rec.len() != TOKENS_HEADER.len() {
            return Err(bad(format!(
                "expected {} fields, found {}",
                TOKENS_HEADER.len(),
                rec.len()
            )));
        }
        let parse_time = |cell: &str, name: &str| -> Result<Option<f64>> {
            match opt_cell(cell) {
                None => Ok(None),
                Some(s) => match s.parse::<f64>() {
                    Ok(v) if v.is_finite() && v >= 0.0 => Ok(Some(v)),
                    _ => Err(bad(format!("invalid {name} `{s}`"))),
                },
            }
        };
        let token_id = opt_cell(&rec[0]).ok_or_else(|| bad("empty token_id".into()))?;
        let type_id = opt_cell(&rec[1]).ok_or_else(|| bad("empty type_id".into()))?;
        let audio_path = opt_cell(&rec[2]).ok_or_else(|| bad("empty audio_path".into()))?;
        let start_s = parse_time(&rec[3], "start_s")?;
        let end_s = parse_time(&rec[4], "end_s")?;
        let sample_rate = rec[5]
            .trim()
            .parse::<u32>()
            .ok()
            .filter(|&r| r > 0)
            .ok_or_else(|| bad(format!("invalid sample_rate `{}`", &rec[5])))?;
        if let (Some(s), Some(e)) = (start_s, end_s) {
            if e <= s {
                return Err(bad(format!("end_s {e} is not after start_s {s}")));
            }
        }
        out.push(AudioToken {
            token_id: token_id.to_string(),
            type_id: type_id.to_string(),
            audio_path: PathBuf::from(audio_path),
            start_s,
            end_s,
            sample_rate,
        });
    }
    Ok(out)
}

/// Reads `types.csv` and `tokens.csv` from the manifest directory.
pub fn load_manifest(dir: impl AsRef<Path>) -> Result<Corpus> {
    let dir = dir.as_ref();
    let types = read_types(&dir.join(TYPES_FILE))?;
    let tokens = read_tokens(&dir.join(TOKENS_FILE))?;
    Ok(Corpus::new(types, tokens)?.with_root(dir))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes the corpus in manifest form. Loading the result yields a corpus
/// with the same field values.
pub fn write_manifest(dir: impl AsRef<Path>, corpus: &Corpus) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let path = dir.join(TYPES_FILE);
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(TYPES_HEADER)?;
    for t in corpus.types() {
        w.write_record([
            t.type_id.as_str(),
            t.orth.as_str(),
            t.lexeme_id.as_str(),
            t.number.as_str(),
            t.phones.join(" ").as_str(),
            t.semantic_class.as_deref().unwrap_or(""),
        ])?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;

    let path = dir.join(TOKENS_FILE);
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(TOKENS_HEADER)?;
    for tok in corpus.tokens() {
        w.write_record([
            tok.token_id.clone(),
            tok.type_id.clone(),
            tok.audio_path.to_string_lossy().into_owned(),
            fmt_opt(tok.start_s),
            fmt_opt(tok.end_s),
            tok.sample_rate.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    Ok(())
}

/// Fixed-dimension semantic vectors keyed by type id.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    entries: BTreeMap<String, Vec<f64>>,
}

/// Bookkeeping from [`load_embeddings`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct EmbeddingLoadStats {
    pub loaded: usize,
    pub skipped: usize,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Self {
        EmbeddingTable {
            dim,
            entries: BTreeMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, type_id: &str) -> Option<&[f64]> {
        self.entries.get(type_id).map(Vec::as_slice)
    }

    pub fn insert(&mut self, type_id: impl Into<String>, vector: Vec<f64>) -> Result<()> {
        if vector.len() != self.dim {
            return Err(Error::dim(self.dim, vector.len()));
        }
        if vector.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFiniteInput("embedding vector".into()));
        }
        self.entries.insert(type_id.into(), vector);
        Ok(())
    }

    /// Entries in type-id order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }
}

fn parse_header(line: &str) -> Option<(usize, usize)> {
    let mut it = line.split_whitespace();
    let a = it.next()?.parse().ok()?;
    let b = it.next()?.parse().ok()?;
    it.next().is_none().then_some((a, b))
}

/// Loads a whitespace-separated text embedding file (`word f1 f2 ...` per
/// line, optional `count dim` header). Rows for words that are not orth
/// forms of `corpus` are skipped and counted.
pub fn load_embeddings(
    path: impl AsRef<Path>,
    expected_dim: usize,
    corpus: &Corpus,
) -> Result<(EmbeddingTable, EmbeddingLoadStats)> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let lookup = corpus.orth_lookup();
    let mut table = EmbeddingTable::new(expected_dim);
    let mut stats = EmbeddingLoadStats::default();
    let mut seen = BTreeSet::new();

    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let lineno = i as u64 + 1;
        if line.trim().is_empty() {
            continue;
        }
        if i == 0 {
            if let Some((_, dim)) = parse_header(&line) {
                if dim != expected_dim {
                    return Err(Error::DimensionMismatch {
                        expected: expected_dim,
                        found: dim,
                        context: Some(format!("{} header", path.display())),
                    });
                }
                continue;
            }
        }
        let mut fields = line.split_whitespace();
        let word = fields.next().expect("non-empty line has a first field");
        let values: Vec<&str> = fields.collect();
        if values.len() != expected_dim {
            return Err(Error::DimensionMismatch {
                expected: expected_dim,
                found: values.len(),
                context: Some(format!("{}:{lineno} `{word}`", path.display())),
            });
        }
        let mut vector = Vec::with_capacity(expected_dim);
        for tok in values {
            let v: f64 = tok.parse().map_err(|_| Error::UnparsableFloat {
                path: path.to_path_buf(),
                line: lineno,
                token: tok.to_string(),
            })?;
            if !v.is_finite() {
                return Err(Error::NonFiniteInput(format!(
                    "{}:{lineno} `{word}`",
                    path.display()
                )));
            }
            vector.push(v);
        }
        if !seen.insert(word.to_string()) {
            return Err(Error::DuplicateId {
                kind: "embedding word",
                id: word.to_string(),
            });
        }
        match lookup.get(word) {
            Some(type_id) => {
                table.insert(*type_id, vector)?;
                stats.loaded += 1;
            }
            None => stats.skipped += 1,
        }
    }
    Ok((table, stats))
}

/// Writes `word v1 ... vd` lines preceded by a `count dim` header.
pub fn write_embeddings<'a, I>(path: impl AsRef<Path>, dim: usize, rows: I) -> Result<()>
where
    I: IntoIterator<Item = (&'a str, &'a [f64])>,
{
    let path = path.as_ref();
    let rows: Vec<_> = rows.into_iter().collect();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(w, "{} {}", rows.len(), dim).map_err(io)?;
    for (word, v) in rows {
        if v.len() != dim {
            return Err(Error::dim(dim, v.len()));
        }
        write!(w, "{word}").map_err(io)?;
        for x in v {
            write!(w, " {x}").map_err(io)?;
        }
        writeln!(w).map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Membership of a word type relative to the availability of its
/// other-number partner.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum WordGroup {
    #[serde(rename = "sg w pl")]
    SgWithPl,
    #[serde(rename = "sg w/o pl")]
    SgWithoutPl,
    #[serde(rename = "pl w sg")]
    PlWithSg,
    #[serde(rename = "pl w/o sg")]
    PlWithoutSg,
}

impl WordGroup {
    pub const ALL: [WordGroup; 4] = [
        WordGroup::SgWithPl,
        WordGroup::SgWithoutPl,
        WordGroup::PlWithSg,
        WordGroup::PlWithoutSg,
    ];

    pub fn label(self) -> &'static str {
        match self {
            WordGroup::SgWithPl => "sg w pl",
            WordGroup::SgWithoutPl => "sg w/o pl",
            WordGroup::PlWithSg => "pl w sg",
            WordGroup::PlWithoutSg => "pl w/o sg",
        }
    }

    fn of(number: Number, partnered: bool) -> WordGroup {
        match (number, partnered) {
            (Number::Sg, true) => WordGroup::SgWithPl,
            (Number::Sg, false) => WordGroup::SgWithoutPl,
            (Number::Pl, true) => WordGroup::PlWithSg,
            (Number::Pl, false) => WordGroup::PlWithoutSg,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LexemeGroups {
    by_type: BTreeMap<String, WordGroup>,
}

impl LexemeGroups {
    pub fn group_of(&self, type_id: &str) -> Option<WordGroup> {
        self.by_type.get(type_id).copied()
    }

    pub fn members(&self, group: WordGroup) -> Vec<&str> {
        self.by_type
            .iter()
            .filter(|(_, g)| **g == group)
            .map(|(t, _)| t.as_str())
            .collect()
    }

    pub fn count(&self, group: WordGroup) -> usize {
        self.by_type.values().filter(|g| **g == group).count()
    }

    pub fn len(&self) -> usize {
        self.by_type.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_type.is_empty()
    }
}

/// Partitions `types` into the four singular/plural availability groups.
///
/// A type counts as partnered when its lexeme's other-number type is in
/// `reference` (for example the types seen in a training fold), or in
/// `types` itself when no reference set is given.
pub fn pair_lexemes(types: &[WordType], reference: Option<&BTreeSet<String>>) -> LexemeGroups {
    let mut present: HashMap<(&str, Number), &str> = HashMap::new();
    for t in types {
        present.insert((t.lexeme_id.as_str(), t.number), t.type_id.as_str());
    }
    let by_type = types
        .iter()
        .map(|t| {
            let partner = present.get(&(t.lexeme_id.as_str(), t.number.other()));
            let partnered = match (partner, reference) {
                (None, _) => false,
                (Some(_), None) => true,
                (Some(p), Some(r)) => r.contains(*p),
            };
            (t.type_id.clone(), WordGroup::of(t.number, partnered))
        })
        .collect();
    LexemeGroups { by_type }
}
