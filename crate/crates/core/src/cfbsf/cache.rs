//! Feature cache: a matrix container plus a CSV sidecar with one line per
//! row (`row, token_id, n_chunks, unpadded_len`).

use std::path::{Path, PathBuf};

use super::FeatureMatrix;
use crate::error::{Error, Result};
use crate::matrix_io::MatrixFile;

pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("csv")
}

pub fn write_feature_cache(path: impl AsRef<Path>, m: &FeatureMatrix) -> Result<()> {
    let path = path.as_ref();
    MatrixFile::from_f64(m.cfg_hash, m.rows(), m.cols, |i, j| m.data[i * m.cols + j]).write(path)?;
    let side = sidecar_path(path);
    let mut w = csv::Writer::from_path(&side)?;
    w.write_record(["row", "token_id", "n_chunks", "unpadded_len"])?;
    for i in 0..m.rows() {
        w.write_record([
            i.to_string(),
            m.token_ids[i].clone(),
            m.n_chunks[i].to_string(),
            m.unpadded_len[i].to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(side, e))
}

/// Values come back as `f32` precision.
pub fn read_feature_cache(path: impl AsRef<Path>) -> Result<FeatureMatrix> {
    let path = path.as_ref();
    let file = MatrixFile::read(path)?;
    let side = sidecar_path(path);
    let mut rdr = csv::Reader::from_path(&side)?;
    let mut token_ids = Vec::with_capacity(file.rows);
    let mut n_chunks = Vec::with_capacity(file.rows);
    let mut unpadded_len = Vec::with_capacity(file.rows);
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let bad = |reason: String| Error::MalformedRow {
            path: side.clone(),
            line,
            reason,
        };
        if rec.len() != 4 {
            return Err(bad(format!("expected 4 fields, found {}", rec.len())));
        }
        let int = |k: usize| {
            rec[k]
                .parse::<usize>()
                .map_err(|_| bad(format!("not an integer: {:?}", &rec[k])))
        };
        if int(0)? != token_ids.len() {
            return Err(bad("rows out of order".into()));
        }
        token_ids.push(rec[1].to_string());
        n_chunks.push(int(2)?);
        unpadded_len.push(int(3)?);
    }
    if token_ids.len() != file.rows {
        return Err(Error::InvalidMatrixFile {
            path: path.to_path_buf(),
            reason: format!("{} rows but sidecar lists {}", file.rows, token_ids.len()),
        });
    }
    Ok(FeatureMatrix {
        token_ids,
        n_chunks,
        unpadded_len,
        cols: file.cols,
        data: file.data.iter().map(|&v| v as f64).collect(),
        cfg_hash: file.cfg_hash,
    })
}
