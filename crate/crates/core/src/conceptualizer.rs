//! Plural conceptualization functions: mapping a singular's semantic vector
//! to a predicted plural vector.
//!
//! * CCA adds the mean singular→plural shift of the lexeme's semantic class.
//! * FRACSS multiplies by one global matrix `M` solving `SM ≈ P`.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, EmbeddingTable};
use crate::error::{Error, Result};
use crate::linmap::{self, LinearMap, SolveOptions};

/// One singular/plural lexeme with both vectors available.
#[derive(Clone, Debug, PartialEq)]
pub struct ShiftPair {
    pub lexeme_id: String,
    pub class: Option<String>,
    pub sg: Vec<f64>,
    pub pl: Vec<f64>,
}

impl ShiftPair {
    pub fn shift(&self) -> Vec<f64> {
        self.pl.iter().zip(&self.sg).map(|(p, s)| p - s).collect()
    }
}

/// Lexemes whose singular and plural both have embeddings, sorted by
/// lexeme id. With a `reference` set only lexemes whose two type ids are in
/// it are returned (e.g. a training fold's type inventory).
pub fn lexeme_pairs(
    corpus: &Corpus,
    embeddings: &EmbeddingTable,
    reference: Option<&BTreeSet<String>>,
) -> Vec<ShiftPair> {
    let types = corpus.types();
    let allowed = |id: &str| reference.is_none_or(|r| r.contains(id));
    corpus
        .lexemes()
        .iter()
        .filter_map(|(lexeme_id, lex)| {
            let sg = &types[lex.sg?];
            let pl = &types[lex.pl?];
            if !allowed(&sg.type_id) || !allowed(&pl.type_id) {
                return None;
            }
            Some(ShiftPair {
                lexeme_id: lexeme_id.clone(),
                class: sg.semantic_class.clone().or_else(|| pl.semantic_class.clone()),
                sg: embeddings.get(&sg.type_id)?.to_vec(),
                pl: embeddings.get(&pl.type_id)?.to_vec(),
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassShift {
    pub shift: Vec<f64>,
    pub pair_count: usize,
}

/// Fitted CCA model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShiftTable {
    pub dim: usize,
    pub per_class: BTreeMap<String, ClassShift>,
    /// Mean shift over all pairs; used for classes without training pairs.
    pub global_shift: Vec<f64>,
    pub pair_count: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CcaPrediction {
    pub vector: Vec<f64>,
    /// The class had no training pairs and the global shift was used.
    pub fallback: bool,
}

fn check_dim(expected: usize, v: &[f64]) -> Result<()> {
    if v.len() == expected {
        Ok(())
    } else {
        Err(Error::dim(expected, v.len()))
    }
}

/// Per-class mean of `v_pl − v_sg`. Pairs without a class label contribute
/// to the global shift only.
pub fn fit_cca(pairs: &[ShiftPair]) -> Result<ShiftTable> {
    let first = pairs.first().ok_or(Error::EmptyTrainingSet)?;
    let dim = first.sg.len();
    let mut sums: BTreeMap<&str, (Vec<f64>, usize)> = BTreeMap::new();
    let mut global = vec![0.0; dim];
    for p in pairs {
        check_dim(dim, &p.sg)?;
        check_dim(dim, &p.pl)?;
        let d = p.shift();
        for (g, x) in global.iter_mut().zip(&d) {
            *g += x;
        }
        if let Some(c) = &p.class {
            let e = sums.entry(c.as_str()).or_insert_with(|| (vec![0.0; dim], 0));
            for (s, x) in e.0.iter_mut().zip(&d) {
                *s += x;
            }
            e.1 += 1;
        }
    }
    let n = pairs.len() as f64;
    global.iter_mut().for_each(|g| *g /= n);
    let per_class = sums
        .into_iter()
        .map(|(c, (mut s, count))| {
            s.iter_mut().for_each(|x| *x /= count as f64);
            (
                c.to_string(),
                ClassShift {
                    shift: s,
                    pair_count: count,
                },
            )
        })
        .collect();
    Ok(ShiftTable {
        dim,
        per_class,
        global_shift: global,
        pair_count: pairs.len(),
    })
}

impl ShiftTable {
    /// `v_sg + shift(class)`, falling back to the global shift for unseen or
    /// absent classes.
    pub fn predict(&self, v_sg: &[f64], class: Option<&str>) -> Result<CcaPrediction> {
        check_dim(self.dim, v_sg)?;
        let (shift, fallback) = match class.and_then(|c| self.per_class.get(c)) {
            Some(cs) => (&cs.shift, false),
            None => (&self.global_shift, true),
        };
        Ok(CcaPrediction {
            vector: v_sg.iter().zip(shift).map(|(a, b)| a + b).collect(),
            fallback,
        })
    }
}

/// Fitted FRACSS model: `v_pl ≈ v_sg · M`.
#[derive(Clone, Debug, PartialEq)]
pub struct FracssMap {
    pub map: LinearMap,
}

/// Least-squares `M` for `SM ≈ P` (rows aligned by lexeme). `ridge = 0`
/// gives the plain pseudoinverse solution.
pub fn fit_fracss(s: &DMatrix<f64>, p: &DMatrix<f64>, ridge: f64) -> Result<FracssMap> {
    if s.nrows() != p.nrows() || s.ncols() != p.ncols() {
        return Err(Error::ShapeMismatch(format!(
            "S is {}x{}, P is {}x{}",
            s.nrows(),
            s.ncols(),
            p.nrows(),
            p.ncols()
        )));
    }
    if s.nrows() == 0 {
        return Err(Error::EmptyTrainingSet);
    }
    let opts = SolveOptions {
        ridge,
        ..SolveOptions::default()
    };
    Ok(FracssMap {
        map: linmap::solve_least_squares(s, p, opts)?,
    })
}

/// Stacks pair vectors into aligned `S` and `P` matrices.
pub fn pair_matrices(pairs: &[ShiftPair]) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let first = pairs.first().ok_or(Error::EmptyTrainingSet)?;
    let dim = first.sg.len();
    for p in pairs {
        check_dim(dim, &p.sg)?;
        check_dim(dim, &p.pl)?;
    }
    let s = DMatrix::from_fn(pairs.len(), dim, |i, j| pairs[i].sg[j]);
    let p = DMatrix::from_fn(pairs.len(), dim, |i, j| pairs[i].pl[j]);
    Ok((s, p))
}

impl FracssMap {
    pub fn fit_pairs(pairs: &[ShiftPair], ridge: f64) -> Result<Self> {
        let (s, p) = pair_matrices(pairs)?;
        fit_fracss(&s, &p, ridge)
    }

    pub fn predict(&self, v_sg: &[f64]) -> Result<Vec<f64>> {
        self.map.apply(v_sg)
    }
}

/// Either conceptualization function behind one interface.
#[derive(Clone, Debug)]
pub enum Conceptualizer {
    Cca(ShiftTable),
    Fracss(FracssMap),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Cca,
    Fracss,
}

impl Conceptualizer {
    pub fn fit(method: Method, pairs: &[ShiftPair], ridge: f64) -> Result<Self> {
        Ok(match method {
            Method::Cca => Conceptualizer::Cca(fit_cca(pairs)?),
            Method::Fracss => Conceptualizer::Fracss(FracssMap::fit_pairs(pairs, ridge)?),
        })
    }

    pub fn predict(&self, v_sg: &[f64], class: Option<&str>) -> Result<Vec<f64>> {
        match self {
            Conceptualizer::Cca(t) => Ok(t.predict(v_sg, class)?.vector),
            Conceptualizer::Fracss(m) => m.predict(v_sg),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Residual {
    pub vector: Vec<f64>,
    pub norm: f64,
}

/// `gold − predicted`: the word-specific remainder of a known plural.
pub fn decompose(gold: &[f64], predicted: &[f64]) -> Result<Residual> {
    check_dim(gold.len(), predicted)?;
    let vector: Vec<f64> = gold.iter().zip(predicted).map(|(g, p)| g - p).collect();
    let norm = vector.iter().map(|x| x * x).sum::<f64>().sqrt();
    Ok(Residual { vector, norm })
}

/// Writes one row per pair: `lexeme_id, semantic_class, shift...`.
pub fn export_shifts(pairs: &[ShiftPair], table: &ShiftTable, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["lexeme_id".to_string(), "semantic_class".to_string()];
    header.extend((0..table.dim).map(|j| format!("d{j}")));
    w.write_record(&header)?;
    for p in pairs {
        check_dim(table.dim, &p.sg)?;
        check_dim(table.dim, &p.pl)?;
        let mut row = vec![p.lexeme_id.clone(), p.class.clone().unwrap_or_default()];
        row.extend(p.shift().iter().map(|x| x.to_string()));
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[derive(Clone, Debug, PartialEq)]
pub struct ShiftRow {
    pub lexeme_id: String,
    pub class: Option<String>,
    pub shift: Vec<f64>,
}

pub fn read_shifts(path: impl AsRef<Path>) -> Result<Vec<ShiftRow>> {
    let path = path.as_ref();
    let mut rdr = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let shift = rec
            .iter()
            .skip(2)
            .map(|s| {
                s.parse::<f64>().map_err(|_| Error::UnparsableFloat {
                    path: path.to_path_buf(),
                    line,
                    token: s.to_string(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        out.push(ShiftRow {
            lexeme_id: rec[0].to_string(),
            class: (!rec[1].is_empty()).then(|| rec[1].to_string()),
            shift,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair(id: &str, class: &str, sg: &[f64], pl: &[f64]) -> ShiftPair {
        ShiftPair {
            lexeme_id: id.into(),
            class: Some(class.into()),
            sg: sg.to_vec(),
            pl: pl.to_vec(),
        }
    }

    #[test]
    fn single_pair_recovers_plural_exactly() {
        let a = [0.3, -1.2, 2.5];
        let b = [1.1, 0.4, -0.7];
        let t = fit_cca(&[pair("l", "fruit", &a, &b)]).unwrap();
        assert_eq!(t.per_class["fruit"].pair_count, 1);
        let p = t.predict(&a, Some("fruit")).unwrap();
        assert!(!p.fallback);
        for (x, y) in p.vector.iter().zip(b) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn banana_gets_average_of_table_and_pen_shifts() {
        let table = [1.0, 0.0];
        let tables = [1.5, 1.0];
        let pen = [0.0, 1.0];
        let pens = [0.5, 1.5];
        let t = fit_cca(&[
            pair("table", "artifact", &table, &tables),
            pair("pen", "artifact", &pen, &pens),
        ])
        .unwrap();
        // Shifts (0.5, 1.0) and (0.5, 0.5) average to (0.5, 0.75).
        let banana = [2.0, 2.0];
        let p = t.predict(&banana, Some("artifact")).unwrap();
        assert_eq!(p.vector, vec![2.5, 2.75]);
    }

    #[test]
    fn zero_shift_is_identity_and_unknown_class_falls_back() {
        let t = fit_cca(&[pair("a", "c", &[1.0, 2.0], &[1.0, 2.0])]).unwrap();
        assert_eq!(t.predict(&[5.0, 6.0], Some("c")).unwrap().vector, vec![5.0, 6.0]);
        let t = fit_cca(&[
            pair("a", "c1", &[0.0, 0.0], &[1.0, 0.0]),
            pair("b", "c2", &[0.0, 0.0], &[0.0, 1.0]),
        ])
        .unwrap();
        let p = t.predict(&[0.0, 0.0], Some("nope")).unwrap();
        assert!(p.fallback);
        assert_eq!(p.vector, vec![0.5, 0.5]);
        assert!(t.predict(&[0.0; 3], Some("c1")).is_err());
        assert!(matches!(fit_cca(&[]), Err(Error::EmptyTrainingSet)));
    }

    #[test]
    fn fracss_identity_and_scaling() {
        let m = FracssMap {
            map: LinearMap::from_matrix(DMatrix::identity(3, 3) * 2.0).unwrap(),
        };
        assert_eq!(m.predict(&[1.0, -2.0, 0.5]).unwrap(), vec![2.0, -4.0, 1.0]);
        assert!(matches!(m.predict(&[1.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn fracss_identity_rows_read_off_p() {
        let s = DMatrix::<f64>::identity(4, 4);
        let p = DMatrix::from_fn(4, 4, |i, j| (i * 4 + j) as f64 - 3.5);
        let m = fit_fracss(&s, &p, 0.0).unwrap();
        assert!((m.map.matrix() - &p).abs().max() < 1e-12);
        assert!(matches!(
            fit_fracss(&s, &DMatrix::zeros(3, 4), 0.0),
            Err(Error::ShapeMismatch(_))
        ));
    }

    #[test]
    fn decompose_cases() {
        let r = decompose(&[1.0, 2.0], &[1.0, 2.0]).unwrap();
        assert_eq!(r.norm, 0.0);
        let r = decompose(&[2.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(r.vector, vec![1.0, 0.0, 0.0]);
        assert_eq!(r.norm, 1.0);
        assert!(decompose(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn export_arity_and_zero_row() {
        let pairs = vec![
            pair("a", "c", &[1.0, 2.0], &[1.0, 2.0]),
            pair("b", "c", &[0.0, 0.0], &[1.0, 1.0]),
            pair("d", "e", &[3.0, 0.0], &[1.0, 1.0]),
        ];
        let t = fit_cca(&pairs).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("shifts.csv");
        export_shifts(&pairs, &t, &p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 4);
        assert!(lines.iter().all(|l| l.split(',').count() == 2 + 2));
        let rows = read_shifts(&p).unwrap();
        assert_eq!(rows[0].shift, vec![0.0, 0.0]);
        assert_eq!(rows[2].shift, vec![-2.0, 1.0]);
    }
}
