//! Least-squares linear maps `B = argmin ‖XB − Y‖_F (+ ridge‖B‖²)`.
//!
//! The default solver never materialises a pseudoinverse of `X`. It
//! accumulates the cross-products `XᵀX` and `XᵀY` over row blocks, then
//! applies the pseudoinverse of the (symmetric, positive semidefinite) Gram
//! matrix. For such a matrix the eigendecomposition is its singular value
//! decomposition, so eigenvalues below `rcond · λ_max` are the truncated
//! singular values. Zero-padded feature columns land there exactly.
//!
//! When `X` has more columns than rows, [`DesignFactor`] works with the
//! smaller kernel matrix `XXᵀ` instead.

use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DMatrixView, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix_io::MatrixFile;

/// Rows per block when accumulating cross-products.
const BLOCK_ROWS: usize = 512;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Solver {
    /// Pseudoinverse of the accumulated Gram matrix.
    CrossProduct,
    /// Pseudoinverse of `X` itself via its SVD. Needs all of `X` in memory.
    Svd,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    pub ridge: f64,
    pub rcond: f64,
    pub solver: Solver,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            ridge: 0.0,
            rcond: 1e-10,
            solver: Solver::CrossProduct,
        }
    }
}

impl SolveOptions {
    fn validate(&self) -> Result<()> {
        if !(self.ridge >= 0.0 && self.ridge.is_finite()) {
            return Err(Error::InvalidConfig(format!("ridge must be >= 0, got {}", self.ridge)));
        }
        if !(self.rcond >= 0.0 && self.rcond < 1.0) {
            return Err(Error::InvalidConfig(format!("rcond must be in [0, 1), got {}", self.rcond)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub solver: Solver,
    pub rcond: f64,
    pub ridge: f64,
    pub train_rows: usize,
    pub input_dim: usize,
    pub output_dim: usize,
    /// Number of singular values kept.
    pub rank: usize,
}

/// Dense real matrix mapping row vectors of one space onto another.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearMap {
    data: DMatrix<f64>,
    provenance: Provenance,
}

impl LinearMap {
    pub fn new(data: DMatrix<f64>, provenance: Provenance) -> Result<Self> {
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFiniteInput("linear map".into()));
        }
        if data.nrows() != provenance.input_dim || data.ncols() != provenance.output_dim {
            return Err(Error::ShapeMismatch(format!(
                "map data is {}x{} but provenance says {}x{}",
                data.nrows(),
                data.ncols(),
                provenance.input_dim,
                provenance.output_dim
            )));
        }
        Ok(LinearMap { data, provenance })
    }

    /// Wraps a hand-made matrix (identity, scaling, ...).
    pub fn from_matrix(data: DMatrix<f64>) -> Result<Self> {
        let provenance = Provenance {
            solver: Solver::CrossProduct,
            rcond: 0.0,
            ridge: 0.0,
            train_rows: 0,
            input_dim: data.nrows(),
            output_dim: data.ncols(),
            rank: data.nrows().min(data.ncols()),
        };
        LinearMap::new(data, provenance)
    }

    pub fn rows(&self) -> usize {
        self.data.nrows()
    }

    pub fn cols(&self) -> usize {
        self.data.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    /// Row vector times map.
    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.rows() {
            return Err(Error::dim(self.rows(), v.len()));
        }
        let out = (0..self.cols())
            .map(|j| {
                self.data
                    .column(j)
                    .iter()
                    .zip(v)
                    .map(|(m, x)| m * x)
                    .sum()
            })
            .collect();
        Ok(out)
    }

    fn sidecar(path: &Path) -> PathBuf {
        path.with_extension("json")
    }

    /// Writes the matrix container plus a JSON provenance sidecar.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let prov = serde_json::to_vec_pretty(&self.provenance)?;
        let file = MatrixFile::from_f64(
            crate::seed::content_hash(&prov),
            self.rows(),
            self.cols(),
            |i, j| self.data[(i, j)],
        );
        file.write(path)?;
        let side = Self::sidecar(path);
        std::fs::write(&side, prov).map_err(|e| Error::io(&side, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = MatrixFile::read(path)?;
        let side = Self::sidecar(path);
        let bytes = std::fs::read(&side).map_err(|e| Error::io(&side, e))?;
        let provenance: Provenance = serde_json::from_slice(&bytes)?;
        LinearMap::new(file.to_dmatrix(), provenance)
    }
}

/// `XᵀX` and `XᵀY` accumulated over rows.
#[derive(Clone, Debug, PartialEq)]
pub struct CrossProducts {
    pub xtx: DMatrix<f64>,
    pub xty: DMatrix<f64>,
    pub rows: usize,
}

impl CrossProducts {
    pub fn zeros(p: usize, q: usize) -> Self {
        CrossProducts {
            xtx: DMatrix::zeros(p, p),
            xty: DMatrix::zeros(p, q),
            rows: 0,
        }
    }

    pub fn add_block(&mut self, x: DMatrixView<'_, f64>, y: DMatrixView<'_, f64>) {
        self.xtx += x.tr_mul(&x);
        self.xty += x.tr_mul(&y);
        self.rows += x.nrows();
    }

    pub fn merge(&mut self, other: &CrossProducts) {
        self.xtx += &other.xtx;
        self.xty += &other.xty;
        self.rows += other.rows;
    }

    /// Block-parallel accumulation. Blocks are reduced in row order, so the
    /// result does not depend on the thread count.
    pub fn from_rows(x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<Self> {
        if x.nrows() != y.nrows() {
            return Err(Error::ShapeMismatch(format!(
                "X has {} rows, Y has {}",
                x.nrows(),
                y.nrows()
            )));
        }
        check_finite(x, "X")?;
        check_finite(y, "Y")?;
        let (p, q) = (x.ncols(), y.ncols());
        let partials: Vec<CrossProducts> = block_starts(x.nrows())
            .into_par_iter()
            .map(|(start, len)| {
                let mut cp = CrossProducts::zeros(p, q);
                cp.add_block(x.rows(start, len), y.rows(start, len));
                cp
            })
            .collect();
        let mut total = CrossProducts::zeros(p, q);
        for part in &partials {
            total.merge(part);
        }
        Ok(total)
    }
}

fn block_starts(n: usize) -> Vec<(usize, usize)> {
    (0..n)
        .step_by(BLOCK_ROWS)
        .map(|s| (s, BLOCK_ROWS.min(n - s)))
        .collect()
}

fn check_finite(m: &DMatrix<f64>, what: &str) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFiniteInput(what.into()))
    }
}

/// Block-parallel `XᵀX`.
pub fn gram(x: &DMatrix<f64>) -> DMatrix<f64> {
    let p = x.ncols();
    let partials: Vec<DMatrix<f64>> = block_starts(x.nrows())
        .into_par_iter()
        .map(|(start, len)| {
            let b = x.rows(start, len);
            b.tr_mul(&b)
        })
        .collect();
    partials
        .iter()
        .fold(DMatrix::zeros(p, p), |acc, m| acc + m)
}

/// `Σ_i x_iᵀ t_{g(i)}`: the cross-product of `x` with a target matrix whose
/// row `i` is row `groups[i]` of `targets`, without materialising the
/// duplicated rows.
pub fn grouped_cross(x: &DMatrix<f64>, groups: &[usize], targets: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if groups.len() != x.nrows() {
        return Err(Error::LengthMismatch {
            left: x.nrows(),
            right: groups.len(),
        });
    }
    if let Some(&g) = groups.iter().find(|&&g| g >= targets.nrows()) {
        return Err(Error::ShapeMismatch(format!(
            "group index {g} out of range for {} target rows",
            targets.nrows()
        )));
    }
    // Sum feature rows per group, then one small product.
    let mut sums = DMatrix::<f64>::zeros(targets.nrows(), x.ncols());
    for (i, &g) in groups.iter().enumerate() {
        let mut row = sums.row_mut(g);
        row += x.row(i);
    }
    Ok(sums.tr_mul(targets))
}

/// Cached pseudoinverse of a Gram matrix (plus ridge).
#[derive(Clone, Debug)]
pub struct GramPseudoInverse {
    pinv: DMatrix<f64>,
    rank: usize,
    n_rows: usize,
    opts: SolveOptions,
}

/// Pseudoinverse of a symmetric positive semidefinite matrix plus ridge,
/// dropping eigenvalues below `rcond · λ_max`. Returns it with its rank.
fn psd_pinv(m: &DMatrix<f64>, opts: &SolveOptions) -> (DMatrix<f64>, usize) {
    let mut a = m.clone();
    for i in 0..a.nrows() {
        a[(i, i)] += opts.ridge;
    }
    // Symmetrise away accumulated rounding before the eigen solver.
    let a = (&a + a.transpose()) * 0.5;
    let eig = SymmetricEigen::new(a);
    let lmax = eig.eigenvalues.iter().fold(0.0_f64, |m, &l| m.max(l.abs()));
    let cutoff = opts.rcond * lmax;
    let mut scaled = eig.eigenvectors.clone();
    let mut rank = 0;
    for (k, &l) in eig.eigenvalues.iter().enumerate() {
        let inv = if lmax > 0.0 && l > cutoff {
            rank += 1;
            1.0 / l
        } else {
            0.0
        };
        scaled.column_mut(k).scale_mut(inv);
    }
    (scaled * eig.eigenvectors.transpose(), rank)
}

impl GramPseudoInverse {
    pub fn new(xtx: &DMatrix<f64>, n_rows: usize, opts: SolveOptions) -> Result<Self> {
        opts.validate()?;
        if !xtx.is_square() {
            return Err(Error::ShapeMismatch("Gram matrix must be square".into()));
        }
        check_finite(xtx, "Gram matrix")?;
        let (pinv, rank) = psd_pinv(xtx, &opts);
        Ok(GramPseudoInverse {
            pinv,
            rank,
            n_rows,
            opts,
        })
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn solve(&self, xty: &DMatrix<f64>) -> Result<LinearMap> {
        if xty.nrows() != self.pinv.nrows() {
            return Err(Error::ShapeMismatch(format!(
                "XᵀY has {} rows, Gram matrix is {}x{}",
                xty.nrows(),
                self.pinv.nrows(),
                self.pinv.ncols()
            )));
        }
        let data = &self.pinv * xty;
        LinearMap::new(
            data,
            Provenance {
                solver: Solver::CrossProduct,
                rcond: self.opts.rcond,
                ridge: self.opts.ridge,
                train_rows: self.n_rows,
                input_dim: xty.nrows(),
                output_dim: xty.ncols(),
                rank: self.rank,
            },
        )
    }
}

/// Factorisation of one design matrix, reused for many target matrices.
///
/// Tall designs use the `p × p` Gram matrix. Wide designs (more columns
/// than rows) use the `n × n` kernel `XXᵀ` instead, through
/// `(XᵀX + λI)⁺Xᵀ = Xᵀ(XXᵀ + λI)⁺`; both give the minimum-norm solution.
#[derive(Clone, Debug)]
pub struct DesignFactor {
    inner: Factor,
    n_rows: usize,
    n_cols: usize,
}

#[derive(Clone, Debug)]
enum Factor {
    Primal(GramPseudoInverse),
    Dual {
        xt: DMatrix<f64>,
        kpinv: DMatrix<f64>,
        rank: usize,
        opts: SolveOptions,
    },
}

impl DesignFactor {
    pub fn new(x: &DMatrix<f64>, opts: SolveOptions) -> Result<Self> {
        opts.validate()?;
        if x.nrows() == 0 {
            return Err(Error::EmptyTrainingSet);
        }
        check_finite(x, "X")?;
        let inner = if x.ncols() > x.nrows() {
            let xt = x.transpose();
            let k = gram(&xt);
            let (kpinv, rank) = psd_pinv(&k, &opts);
            Factor::Dual { xt, kpinv, rank, opts }
        } else {
            Factor::Primal(GramPseudoInverse::new(&gram(x), x.nrows(), opts)?)
        };
        Ok(DesignFactor {
            inner,
            n_rows: x.nrows(),
            n_cols: x.ncols(),
        })
    }

    pub fn rank(&self) -> usize {
        match &self.inner {
            Factor::Primal(g) => g.rank(),
            Factor::Dual { rank, .. } => *rank,
        }
    }

    /// Map for targets `Y` with one row per design row.
    pub fn solve(&self, x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<LinearMap> {
        let groups: Vec<usize> = (0..y.nrows()).collect();
        self.solve_grouped(x, &groups, y)
    }

    /// Map for targets whose row `i` is row `groups[i]` of `targets`; `x`
    /// must be the matrix the factor was built from.
    pub fn solve_grouped(&self, x: &DMatrix<f64>, groups: &[usize], targets: &DMatrix<f64>) -> Result<LinearMap> {
        if x.nrows() != self.n_rows || x.ncols() != self.n_cols {
            return Err(Error::ShapeMismatch(format!(
                "design is {}x{}, factor was built for {}x{}",
                x.nrows(),
                x.ncols(),
                self.n_rows,
                self.n_cols
            )));
        }
        check_finite(targets, "Y")?;
        match &self.inner {
            Factor::Primal(g) => g.solve(&grouped_cross(x, groups, targets)?),
            Factor::Dual { xt, kpinv, rank, opts } => {
                if groups.len() != self.n_rows {
                    return Err(Error::LengthMismatch {
                        left: self.n_rows,
                        right: groups.len(),
                    });
                }
                if let Some(&g) = groups.iter().find(|&&g| g >= targets.nrows()) {
                    return Err(Error::ShapeMismatch(format!(
                        "group index {g} out of range for {} target rows",
                        targets.nrows()
                    )));
                }
                let y = targets.select_rows(groups);
                let data = xt * (kpinv * y);
                LinearMap::new(
                    data,
                    Provenance {
                        solver: Solver::CrossProduct,
                        rcond: opts.rcond,
                        ridge: opts.ridge,
                        train_rows: self.n_rows,
                        input_dim: self.n_cols,
                        output_dim: targets.ncols(),
                        rank: *rank,
                    },
                )
            }
        }
    }
}

/// Solves `XB ≈ Y` in the least-squares sense.
pub fn solve_least_squares(x: &DMatrix<f64>, y: &DMatrix<f64>, opts: SolveOptions) -> Result<LinearMap> {
    opts.validate()?;
    if x.nrows() != y.nrows() {
        return Err(Error::ShapeMismatch(format!(
            "X has {} rows, Y has {}",
            x.nrows(),
            y.nrows()
        )));
    }
    if x.nrows() == 0 {
        return Err(Error::EmptyTrainingSet);
    }
    match opts.solver {
        Solver::CrossProduct if x.ncols() > x.nrows() => {
            check_finite(y, "Y")?;
            DesignFactor::new(x, opts)?.solve(x, y)
        }
        Solver::CrossProduct => {
            let cp = CrossProducts::from_rows(x, y)?;
            GramPseudoInverse::new(&cp.xtx, cp.rows, opts)?.solve(&cp.xty)
        }
        Solver::Svd => solve_svd(x, y, opts),
    }
}

fn solve_svd(x: &DMatrix<f64>, y: &DMatrix<f64>, opts: SolveOptions) -> Result<LinearMap> {
    check_finite(x, "X")?;
    check_finite(y, "Y")?;
    let svd = x.clone().svd(true, true);
    let (u, vt) = (svd.u.expect("u requested"), svd.v_t.expect("v_t requested"));
    let smax = svd.singular_values.iter().fold(0.0_f64, |m, &s| m.max(s));
    let cutoff = opts.rcond * smax;
    let uty = u.tr_mul(y);
    let mut scaled = uty;
    let mut rank = 0;
    for (k, &s) in svd.singular_values.iter().enumerate() {
        // Ridge filter factor s / (s² + λ); plain 1/s when λ = 0.
        let f = if smax > 0.0 && s > cutoff {
            rank += 1;
            s / (s * s + opts.ridge)
        } else {
            0.0
        };
        scaled.row_mut(k).scale_mut(f);
    }
    let data = vt.tr_mul(&scaled);
    LinearMap::new(
        data,
        Provenance {
            solver: Solver::Svd,
            rcond: opts.rcond,
            ridge: opts.ridge,
            train_rows: x.nrows(),
            input_dim: x.ncols(),
            output_dim: y.ncols(),
            rank,
        },
    )
}

/// `X · map`.
pub fn predict(map: &LinearMap, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if x.ncols() != map.rows() {
        return Err(Error::ShapeMismatch(format!(
            "input has {} columns, map expects {}",
            x.ncols(),
            map.rows()
        )));
    }
    Ok(x * map.matrix())
}
