//! Binary matrix container shared by the feature cache and persisted maps.
//!
//! Layout, all integers little-endian:
//!
//! | offset | size | field                          |
//! |--------|------|--------------------------------|
//! | 0      | 4    | magic `PLSM`                   |
//! | 4      | 4    | format version (u32, = 1)      |
//! | 8      | 8    | configuration hash (u64)       |
//! | 16     | 8    | rows (u64)                     |
//! | 24     | 8    | cols (u64)                     |
//! | 32     | ...  | rows × cols f32, row-major     |

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub const MAGIC: [u8; 4] = *b"PLSM";
pub const VERSION: u32 = 1;
const HEADER_LEN: usize = 32;

#[derive(Clone, Debug, PartialEq)]
pub struct MatrixFile {
    pub cfg_hash: u64,
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f32>,
}

impl MatrixFile {
    pub fn from_f64(cfg_hash: u64, rows: usize, cols: usize, get: impl Fn(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(get(i, j) as f32);
            }
        }
        MatrixFile {
            cfg_hash,
            rows,
            cols,
            data,
        }
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.rows, self.cols, |i, j| self.data[i * self.cols + j] as f64)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        assert_eq!(self.data.len(), self.rows * self.cols);
        let io = |e| Error::io(path, e);
        let mut w = BufWriter::new(File::create(path).map_err(io)?);
        w.write_all(&MAGIC).map_err(io)?;
        w.write_all(&VERSION.to_le_bytes()).map_err(io)?;
        w.write_all(&self.cfg_hash.to_le_bytes()).map_err(io)?;
        w.write_all(&(self.rows as u64).to_le_bytes()).map_err(io)?;
        w.write_all(&(self.cols as u64).to_le_bytes()).map_err(io)?;
        for v in &self.data {
            w.write_all(&v.to_le_bytes()).map_err(io)?;
        }
        w.flush().map_err(io)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bad = |reason: &str| Error::InvalidMatrixFile {
            path: path.to_path_buf(),
            reason: reason.to_string(),
        };
        let mut r = BufReader::new(File::open(path).map_err(|e| Error::io(path, e))?);
        let mut header = [0u8; HEADER_LEN];
        r.read_exact(&mut header).map_err(|_| bad("truncated header"))?;
        if header[0..4] != MAGIC {
            return Err(bad("bad magic"));
        }
        let u32_at = |o: usize| u32::from_le_bytes(header[o..o + 4].try_into().unwrap());
        let u64_at = |o: usize| u64::from_le_bytes(header[o..o + 8].try_into().unwrap());
        if u32_at(4) != VERSION {
            return Err(bad(&format!("unsupported version {}", u32_at(4))));
        }
        let cfg_hash = u64_at(8);
        let rows = u64_at(16) as usize;
        let cols = u64_at(24) as usize;
        let n = rows.checked_mul(cols).ok_or_else(|| bad("size overflow"))?;
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes).map_err(|e| Error::io(path, e))?;
        if bytes.len() != n * 4 {
            return Err(bad(&format!("expected {} payload bytes, found {}", n * 4, bytes.len())));
        }
        let data = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(MatrixFile {
            cfg_hash,
            rows,
            cols,
            data,
        })
    }
}
