#![allow(dead_code)]

use sparsica::io::RngStream;
use sparsica::linalg::random_orthogonal;
use sparsica::preprocess::whiten;
use sparsica::Matrix;

/// Exactly whitened `p x q` data built from Gaussian draws.
pub fn random_whitened(rng: &mut RngStream, p: usize, q: usize) -> Matrix {
    let x = rng.normal_matrix(p, q);
    whiten(&x, q).expect("gaussian data has full rank").xw
}

/// Noiseless planted factorization `xw = v0 u0ᵀ`.
pub struct Planted {
    pub xw: Matrix,
    pub v0: Matrix,
    pub u0: Matrix,
}

/// Columns of `v0` have disjoint supports of `support` rows, entries
/// `±amplitude` in pairs so every column has zero mean, then the whole
/// matrix is rescaled to unit column variance. Disjoint supports make the
/// columns orthogonal, so `v0 u0ᵀ` is whitened for any orthogonal `u0`.
pub fn planted(rng: &mut RngStream, p: usize, q: usize, support: usize) -> Planted {
    assert!(support.is_multiple_of(2) && support * q <= p);
    let mut rows: Vec<usize> = (0..p).collect();
    for i in (1..p).rev() {
        let j = (rng.uniform(0.0, 1.0) * (i + 1) as f64) as usize;
        rows.swap(i, j.min(i));
    }
    let scale = ((p - 1) as f64 / support as f64).sqrt();
    let mut v0 = Matrix::zeros(p, q);
    for k in 0..q {
        for (n, &r) in rows[k * support..(k + 1) * support].iter().enumerate() {
            v0[(r, k)] = if n % 2 == 0 { scale } else { -scale };
        }
    }
    let u0 = random_orthogonal(rng, q);
    let xw = v0.matmul(&u0.transpose()).unwrap();
    Planted { xw, v0, u0 }
}

pub fn assert_close(a: f64, b: f64, tol: f64, what: &str) {
    assert!((a - b).abs() <= tol, "{what}: {a} vs {b} (tol {tol})");
}
