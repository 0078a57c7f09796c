//! Classical ICA baselines on whitened data: FastICA, Infomax and AMUSE.
//!
//! Every algorithm returns an orthogonal `mixing` (`Q x Q`) with
//! `sources = xw · mixing`, so the benchmark compares like with like.
//! Third-party backends plug in through [`Unmixer`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::RngStream;
use crate::linalg::{random_orthogonal, symmetric_decorrelation, symmetric_eigen_desc};
use crate::matrix::Matrix;
use crate::sparse_ica::{self, SparseIcaConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UnmixWarning {
    /// Iteration budget exhausted before the stopping rule fired.
    NotConverged,
    /// Eigenvalues closer than the resolution limit; the rotation is not identifiable.
    Degenerate { min_gap: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct UnmixResult {
    /// `P x Q` estimated component maps.
    pub sources: Matrix,
    /// `Q x Q` rotation with `sources = xw · mixing`.
    pub mixing: Matrix,
    pub algorithm: String,
    pub iterations: usize,
    pub converged: bool,
    pub warnings: Vec<UnmixWarning>,
}

/// A blind-source-separation backend operating on whitened data.
pub trait Unmixer: Send + Sync {
    fn name(&self) -> &str;

    /// True when the output ignores `seed`.
    fn is_deterministic(&self) -> bool {
        false
    }

    fn unmix(&self, xw: &Matrix, seed: u64) -> Result<UnmixResult>;

    /// Settings recorded in benchmark reports.
    fn settings(&self) -> serde_json::Value {
        serde_json::Value::Null
    }
}

impl<U: Unmixer + ?Sized> Unmixer for Box<U> {
    fn name(&self) -> &str {
        (**self).name()
    }

    fn is_deterministic(&self) -> bool {
        (**self).is_deterministic()
    }

    fn unmix(&self, xw: &Matrix, seed: u64) -> Result<UnmixResult> {
        (**self).unmix(xw, seed)
    }

    fn settings(&self) -> serde_json::Value {
        (**self).settings()
    }
}

fn check_input(xw: &Matrix, q: usize) -> Result<()> {
    if q == 0 || q > xw.cols() {
        return Err(Error::Value(format!("q must lie in 1..={}, got {q}", xw.cols())));
    }
    if xw.rows() < 2 {
        return Err(Error::Value("need at least two samples".into()));
    }
    if !xw.is_finite() {
        return Err(Error::Value("input has non-finite entries".into()));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FastIca {
    pub max_iters: usize,
    pub tol: f64,
}

impl Default for FastIca {
    fn default() -> Self {
        FastIca {
            max_iters: 200,
            tol: 1e-6,
        }
    }
}

/// Symmetric fixed-point FastICA with `g = tanh`.
///
/// Estimates `q` components; the returned mixing is `Q x q` with orthonormal
/// columns. Stops when every row of the unmixing matrix changes direction by
/// less than `tol` (`max |1 − |⟨wᵢ⁺, wᵢ⟩|| < tol`).
pub fn fastica_fit(xw: &Matrix, q: usize, seed: u64, max_iters: usize, tol: f64) -> Result<UnmixResult> {
    check_input(xw, q)?;
    let (p, dim) = xw.shape();
    let mut rng = RngStream::new(seed);
    let mut w = symmetric_decorrelation(&rng.normal_matrix(q, dim))?;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iters {
        iterations += 1;
        let y = xw.matmul(&w.transpose())?;
        let g = y.map(f64::tanh);
        let mut mean_dg = vec![0.0; q];
        for gi in 0..p {
            for (m, &v) in mean_dg.iter_mut().zip(g.row(gi)) {
                *m += 1.0 - v * v;
            }
        }
        let gx = g.t_matmul(xw)?;
        let next = Matrix::from_fn(q, dim, |i, j| gx[(i, j)] / p as f64 - mean_dg[i] / p as f64 * w[(i, j)]);
        let next = symmetric_decorrelation(&next)?;
        let change = (0..q)
            .map(|i| {
                let dot: f64 = next.row(i).iter().zip(w.row(i)).map(|(a, b)| a * b).sum();
                (dot.abs() - 1.0).abs()
            })
            .fold(0.0, f64::max);
        w = next;
        if change < tol {
            converged = true;
            break;
        }
    }
    let mixing = w.transpose();
    Ok(UnmixResult {
        sources: xw.matmul(&mixing)?,
        mixing,
        algorithm: "fastica".into(),
        iterations,
        converged,
        warnings: if converged { vec![] } else { vec![UnmixWarning::NotConverged] },
    })
}

impl Unmixer for FastIca {
    fn name(&self) -> &str {
        "fastica"
    }

    fn unmix(&self, xw: &Matrix, seed: u64) -> Result<UnmixResult> {
        fastica_fit(xw, xw.cols(), seed, self.max_iters, self.tol)
    }

    fn settings(&self) -> serde_json::Value {
        serde_json::to_value(self).unwrap_or_default()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Infomax {
    pub max_iters: usize,
    /// Initial step size of the natural-gradient ascent.
    pub learning_rate: f64,
    /// The step is halved after every non-finite update; below this the fit fails.
    pub min_learning_rate: f64,
    /// Stop once the largest entry of a weight update falls below this.
    pub tol: f64,
}

impl Default for Infomax {
    fn default() -> Self {
        Infomax {
            max_iters: 4096,
            learning_rate: 0.01,
            min_learning_rate: 1e-6,
            tol: 1e-7,
        }
    }
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Full-batch natural-gradient Infomax with logistic nonlinearity:
/// `W ← W + η (I + (1 − 2σ(Y)) Yᵀ / P) W`, `Y = W xwᵀ`.
///
/// The final `W` is symmetrically decorrelated, which also normalizes its rows.
pub fn infomax_fit(xw: &Matrix, q: usize, seed: u64, config: &Infomax) -> Result<UnmixResult> {
    check_input(xw, q)?;
    if q != xw.cols() {
        return Err(Error::Value(format!("infomax estimates a square unmixing; q={q} but data has {} columns", xw.cols())));
    }
    if !(config.learning_rate >= 0.0) || !(config.min_learning_rate > 0.0) {
        return Err(Error::Value("learning_rate must be non-negative and min_learning_rate positive".into()));
    }
    let p = xw.rows() as f64;
    let mut rng = RngStream::new(seed);
    let mut w = random_orthogonal(&mut rng, q);
    let mut eta = config.learning_rate;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < config.max_iters && eta > 0.0 {
        iterations += 1;
        // Y is P x Q here (row per sample), i.e. the transpose of W xwᵀ
        let y = xw.matmul(&w.transpose())?;
        let phi = y.map(|v| 1.0 - 2.0 * logistic(v));
        let mut grad = phi.t_matmul(&y)?.scale(1.0 / p);
        for i in 0..q {
            grad[(i, i)] += 1.0;
        }
        let step = grad.matmul(&w)?.scale(eta);
        let next = w.add(&step)?;
        if !next.is_finite() {
            eta *= 0.5;
            if eta < config.min_learning_rate {
                return Err(Error::Divergence(format!(
                    "infomax weights became non-finite after {iterations} iterations"
                )));
            }
            continue;
        }
        w = next;
        let change = step.data().iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if change < config.tol {
            converged = true;
            break;
        }
    }
    let w = symmetric_decorrelation(&w)?;
    let mixing = w.transpose();
    Ok(UnmixResult {
        sources: xw.matmul(&mixing)?,
        mixing,
        algorithm: "infomax".into(),
        iterations,
        converged,
        warnings: if converged { vec![] } else { vec![UnmixWarning::NotConverged] },
    })
}

impl Unmixer for Infomax {
    fn name(&self) -> &str {
        "infomax"
    }

    fn unmix(&self, xw: &Matrix, seed: u64) -> Result<UnmixResult> {
        infomax_fit(xw, xw.cols(), seed, self)
    }

    fn settings(&self) -> serde_json::Value {
        serde_json::to_value(self).unwrap_or_default()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Amuse {
    pub lag: usize,
}

impl Default for Amuse {
    fn default() -> Self {
        Amuse { lag: 1 }
    }
}

/// Adjacent eigenvalues closer than this (relative to `max(1, |λ|max)`) are
/// reported as degenerate.
pub const AMUSE_GAP_TOL: f64 = 1e-10;

/// AMUSE: eigenvectors of the symmetrized lag-`lag` covariance
/// `½(C_τ + C_τᵀ)`, `C_τ = Σ_p x_p x_{p+τ}ᵀ / (P − τ)`, ordered by decreasing
/// eigenvalue. The sample axis is the row order of `xw`.
pub fn amuse_fit(xw: &Matrix, lag: usize) -> Result<UnmixResult> {
    check_input(xw, xw.cols())?;
    if lag >= xw.rows() {
        return Err(Error::Value(format!("lag {lag} must be smaller than the {} samples", xw.rows())));
    }
    let (p, q) = xw.shape();
    let mut lagged = Matrix::zeros(q, q);
    for s in 0..p - lag {
        let a = xw.row(s);
        let b = xw.row(s + lag);
        for i in 0..q {
            for j in 0..q {
                lagged[(i, j)] += a[i] * b[j];
            }
        }
    }
    let n = (p - lag) as f64;
    let sym = Matrix::from_fn(q, q, |i, j| 0.5 * (lagged[(i, j)] + lagged[(j, i)]) / n);
    let (values, vectors) = symmetric_eigen_desc(&sym)?;
    let scale = values.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let min_gap = values.windows(2).map(|w| w[0] - w[1]).fold(f64::INFINITY, f64::min);
    let mut warnings = Vec::new();
    if min_gap < AMUSE_GAP_TOL * scale {
        warnings.push(UnmixWarning::Degenerate { min_gap });
    }
    Ok(UnmixResult {
        sources: xw.matmul(&vectors)?,
        mixing: vectors,
        algorithm: "amuse".into(),
        iterations: 1,
        converged: true,
        warnings,
    })
}

impl Unmixer for Amuse {
    fn name(&self) -> &str {
        "amuse"
    }

    fn is_deterministic(&self) -> bool {
        true
    }

    fn unmix(&self, xw: &Matrix, _seed: u64) -> Result<UnmixResult> {
        amuse_fit(xw, self.lag)
    }

    fn settings(&self) -> serde_json::Value {
        serde_json::to_value(self).unwrap_or_default()
    }
}

/// Sparse ICA behind the common interface: `sources = V`, `mixing = U`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SparseIca {
    pub config: SparseIcaConfig,
}

impl Unmixer for SparseIca {
    fn name(&self) -> &str {
        "sparse-ica"
    }

    fn unmix(&self, xw: &Matrix, seed: u64) -> Result<UnmixResult> {
        let model = sparse_ica::fit(xw, &self.config.clone().with_seed(seed))?;
        Ok(UnmixResult {
            sources: model.v,
            mixing: model.u,
            algorithm: "sparse-ica".into(),
            iterations: model.iterations,
            converged: model.converged,
            warnings: if model.converged { vec![] } else { vec![UnmixWarning::NotConverged] },
        })
    }

    fn settings(&self) -> serde_json::Value {
        serde_json::to_value(&self.config).unwrap_or_default()
    }
}

/// Names accepted by [`by_name`], in report order.
pub const ALGORITHMS: [&str; 4] = ["sparse-ica", "fastica", "infomax", "amuse"];

/// Resolves a built-in algorithm. `nu` configures sparse ICA.
pub fn by_name(name: &str, nu: f64) -> Result<Box<dyn Unmixer>> {
    match name {
        "sparse-ica" => Ok(Box::new(SparseIca {
            config: SparseIcaConfig::new(nu),
        })),
        "fastica" => Ok(Box::new(FastIca::default())),
        "infomax" => Ok(Box::new(Infomax::default())),
        "amuse" => Ok(Box::new(Amuse::default())),
        other => Err(Error::Value(format!(
            "unknown algorithm `{other}`; expected one of {}",
            ALGORITHMS.join(", ")
        ))),
    }
}
