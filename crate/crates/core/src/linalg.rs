//! Thin wrappers over nalgebra decompositions with the sign and ordering
//! conventions the rest of the crate relies on.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::io::RngStream;
use crate::matrix::Matrix;

/// Eigen-decomposition of a symmetric matrix, eigenvalues descending.
///
/// Each eigenvector (column) is oriented so its largest-magnitude entry is
/// positive; ties go to the lowest index.
pub fn symmetric_eigen_desc(m: &Matrix) -> Result<(Vec<f64>, Matrix)> {
    if m.rows() != m.cols() {
        return Err(Error::Shape(format!("eigendecomposition needs a square matrix, got {}x{}", m.rows(), m.cols())));
    }
    if !m.is_finite() {
        return Err(Error::Value("matrix has non-finite entries".into()));
    }
    let eig = SymmetricEigen::new(m.to_dmatrix());
    let n = m.rows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = Matrix::zeros(n, n);
    for (j, &k) in order.iter().enumerate() {
        let col = eig.eigenvectors.column(k);
        let mut pivot = 0;
        for i in 1..n {
            if col[i].abs() > col[pivot].abs() {
                pivot = i;
            }
        }
        let sign = if col[pivot] < 0.0 { -1.0 } else { 1.0 };
        for i in 0..n {
            vectors[(i, j)] = sign * col[i];
        }
    }
    Ok((values, vectors))
}

/// Thin SVD `m = U diag(s) Vᵀ` with singular values descending.
pub struct Svd {
    pub u: Matrix,
    pub singular_values: Vec<f64>,
    pub v_t: Matrix,
}

pub fn svd(m: &Matrix) -> Result<Svd> {
    if !m.is_finite() {
        return Err(Error::Value("matrix has non-finite entries".into()));
    }
    let mut svd = m.to_dmatrix().svd(true, true);
    svd.sort_by_singular_values();
    let u = svd.u.as_ref().expect("requested u");
    let v_t = svd.v_t.as_ref().expect("requested v_t");
    Ok(Svd {
        u: Matrix::from_dmatrix(u),
        singular_values: svd.singular_values.iter().copied().collect(),
        v_t: Matrix::from_dmatrix(v_t),
    })
}

/// Orthogonal factor of the QR decomposition, with `R` normalized to a
/// positive diagonal so the factor is unique.
pub fn qr_orthogonal(m: &Matrix) -> Matrix {
    let qr = m.to_dmatrix().qr();
    let mut q: DMatrix<f64> = qr.q();
    let r = qr.r();
    for j in 0..q.ncols().min(r.nrows()) {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    Matrix::from_dmatrix(&q)
}

/// Haar-distributed random orthogonal `n x n` matrix.
pub fn random_orthogonal(rng: &mut RngStream, n: usize) -> Matrix {
    qr_orthogonal(&rng.normal_matrix(n, n))
}

/// `(W Wᵀ)^{-1/2} W`: the closest matrix to `w` with orthonormal rows.
pub fn symmetric_decorrelation(w: &Matrix) -> Result<Matrix> {
    let gram = w.matmul(&w.transpose())?;
    let (values, vectors) = symmetric_eigen_desc(&gram)?;
    let smallest = values.last().copied().unwrap_or(0.0);
    if !(smallest > 0.0) {
        return Err(Error::Rank("rows are linearly dependent".into()));
    }
    let n = values.len();
    let scaled = Matrix::from_fn(n, n, |i, j| vectors[(i, j)] / values[j].sqrt());
    scaled.matmul(&vectors.transpose())?.matmul(w)
}

/// `‖mᵀm − I‖_F`.
pub fn orthogonality_error(m: &Matrix) -> f64 {
    let gram = m.t_matmul(m).expect("square product");
    gram.sub(&Matrix::identity(m.cols())).expect("same shape").frobenius_norm()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigen_sorted_and_sign_fixed() {
        let m = Matrix::from_rows(&[[2.0, 0.0], [0.0, 5.0]]).unwrap();
        let (vals, vecs) = symmetric_eigen_desc(&m).unwrap();
        assert_eq!(vals, vec![5.0, 2.0]);
        assert_eq!(vecs.data(), &[0.0, 1.0, 1.0, 0.0]);
    }

    #[test]
    fn random_orthogonal_is_orthogonal() {
        let mut rng = RngStream::new(3);
        for n in 1..6 {
            assert!(orthogonality_error(&random_orthogonal(&mut rng, n)) < 1e-12);
        }
    }

    #[test]
    fn decorrelation_yields_orthonormal_rows() {
        let mut rng = RngStream::new(5);
        let w = rng.normal_matrix(4, 4);
        let d = symmetric_decorrelation(&w).unwrap();
        assert!(orthogonality_error(&d.transpose()) < 1e-10);
    }
}
