//! Centering, PCA whitening and back-projection.
//!
//! Input rows are samples (spatial locations for spatial ICA) and columns are
//! variables (time frames). Whitening keeps the top `q` principal directions
//! of the sample covariance (divisor `rows - 1`) and rescales them to unit
//! variance, so `xw` has `rows` rows and `q` columns.

use crate::error::{Error, Result};
use crate::linalg::symmetric_eigen_desc;
use crate::matrix::Matrix;

/// Retained eigenvalues at or below this fraction of the largest are numerical zeros.
pub const RANK_EPS: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct WhitenedData {
    /// `rows x q` whitened data.
    pub xw: Matrix,
    /// Per-variable means removed by centering (length `n`).
    pub mean: Vec<f64>,
    /// `q x n` map from centered data to whitened space: `xw = x_c · whitenerᵀ`.
    pub whitener: Matrix,
    /// `n x q` map back: `x_c ≈ xw · dewhitenerᵀ`.
    pub dewhitener: Matrix,
    /// Retained covariance eigenvalues, descending.
    pub eigenvalues: Vec<f64>,
}

impl WhitenedData {
    pub fn q(&self) -> usize {
        self.xw.cols()
    }
}

pub fn center(x: &Matrix) -> Result<(Matrix, Vec<f64>)> {
    if x.rows() < 2 {
        return Err(Error::Value(format!("centering needs at least 2 rows, got {}", x.rows())));
    }
    let means = x.column_means();
    let centered = Matrix::from_fn(x.rows(), x.cols(), |i, j| x[(i, j)] - means[j]);
    Ok((centered, means))
}

pub fn whiten(x: &Matrix, q: usize) -> Result<WhitenedData> {
    if q == 0 || q > x.cols() {
        return Err(Error::Value(format!("q must lie in 1..={}, got {q}", x.cols())));
    }
    if x.rows() <= q {
        return Err(Error::Value(format!("whitening to q={q} needs more than {q} rows, got {}", x.rows())));
    }
    let (centered, mean) = center(x)?;
    let cov = centered.column_covariance();
    let (values, vectors) = symmetric_eigen_desc(&cov)?;
    let largest = values[0];
    if !(largest > 0.0) {
        return Err(Error::Rank("covariance is zero".into()));
    }
    if let Some(k) = values[..q].iter().position(|&v| v <= RANK_EPS * largest) {
        return Err(Error::Rank(format!(
            "eigenvalue {k} is {:e}, below {RANK_EPS:e} of the largest ({largest:e})",
            values[k]
        )));
    }
    let n = x.cols();
    let eigenvalues: Vec<f64> = values[..q].to_vec();
    let whitener = Matrix::from_fn(q, n, |i, j| vectors[(j, i)] / eigenvalues[i].sqrt());
    let dewhitener = Matrix::from_fn(n, q, |i, j| vectors[(i, j)] * eigenvalues[j].sqrt());
    let xw = centered.matmul(&whitener.transpose())?;
    Ok(WhitenedData {
        xw,
        mean,
        whitener,
        dewhitener,
        eigenvalues,
    })
}

/// Maps `rows x q` whitened-space components back to the `rows x n` centered
/// variable space: `components · dewhitenerᵀ`.
pub fn project_back(w: &WhitenedData, components: &Matrix) -> Result<Matrix> {
    if components.cols() != w.q() {
        return Err(Error::Shape(format!(
            "components have {} columns, whitening kept {}",
            components.cols(),
            w.q()
        )));
    }
    components.matmul(&w.dewhitener.transpose())
}

/// Time courses (`n x q`) paired with spatial maps under a rotation `u`, so
/// that `x_c ≈ maps · timecoursesᵀ` when `maps ≈ xw · u`.
pub fn mixing_timecourses(w: &WhitenedData, u: &Matrix) -> Result<Matrix> {
    if u.rows() != w.q() {
        return Err(Error::Shape(format!("rotation has {} rows, whitening kept {}", u.rows(), w.q())));
    }
    w.dewhitener.matmul(u)
}
