//! Sparse ICA by alternating shrinkage and Procrustes steps.
//!
//! Whitened data `X̃` (`P` locations × `Q` components) is factored as
//! `X̃ ≈ V Uᵀ` with `V` sparse and `U` orthogonal by minimizing
//!
//! ```text
//! ½‖X̃ − V Uᵀ‖²_F + w‖V‖₁
//! ```
//!
//! through two closed-form block updates:
//!
//! * V-step: `V ← shrink(X̃ U, t)` entrywise, with `t = √(2ν)` by default;
//! * U-step: `U ← Ũ Ṽᵀ` where `X̃ᵀV = Ũ Σ Ṽᵀ` (orthogonal Procrustes).
//!
//! Both updates are exact block minimizers of the objective whose ℓ1 weight
//! equals the shrinkage threshold, so the recorded objective uses
//! `w = t` and never increases between iterations. [`objective`] itself takes
//! the weight as an explicit argument.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::RngStream;
use crate::linalg::{orthogonality_error, random_orthogonal, svd};
use crate::matrix::Matrix;
use crate::preprocess::RANK_EPS;

/// How far `fit` tolerates the input covariance from the identity (Frobenius).
pub const WHITENESS_TOL: f64 = 1e-6;

/// Shrinkage level applied in the V-step for a given penalty `ν`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Shrinkage {
    /// Threshold `√(2ν)`.
    #[default]
    Sqrt2Nu,
    /// Threshold `ν`, the proximal map of `ν‖·‖₁`. Sensitivity analysis only.
    Nu,
}

impl Shrinkage {
    pub fn threshold(self, nu: f64) -> f64 {
        match self {
            Shrinkage::Sqrt2Nu => (2.0 * nu).sqrt(),
            Shrinkage::Nu => nu,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SparseIcaConfig {
    pub nu: f64,
    pub max_iters: usize,
    /// Stop once `|f_i − f_{i+1}| / max(1, f_i) < tol`.
    pub tol: f64,
    pub restarts: usize,
    pub seed: u64,
    #[serde(default)]
    pub shrinkage: Shrinkage,
}

impl SparseIcaConfig {
    pub fn new(nu: f64) -> Self {
        SparseIcaConfig {
            nu,
            ..Default::default()
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.nu > 0.0 && self.nu.is_finite()) {
            return Err(Error::Value(format!("nu must be positive and finite, got {}", self.nu)));
        }
        if !(self.tol > 0.0) {
            return Err(Error::Value(format!("tol must be positive, got {}", self.tol)));
        }
        if self.restarts == 0 {
            return Err(Error::Value("at least one restart is required".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::Value("max_iters must be at least 1".into()));
        }
        Ok(())
    }
}

impl Default for SparseIcaConfig {
    fn default() -> Self {
        SparseIcaConfig {
            nu: 1.0,
            max_iters: 500,
            tol: 1e-6,
            restarts: 20,
            seed: 0,
            shrinkage: Shrinkage::Sqrt2Nu,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SparseIcaModel {
    /// `P x Q` sparse maps; shrunk entries are exactly `0.0`.
    pub v: Matrix,
    /// `Q x Q` orthogonal rotation.
    pub u: Matrix,
    /// Objective after each full V/U iteration of the winning restart.
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub restart_index: usize,
    /// Restarts that met the tolerance before `max_iters`.
    pub converged_restarts: usize,
    /// U-steps skipped in the winning restart because `X̃ᵀV` was rank deficient.
    pub degenerate_steps: usize,
    pub nu: f64,
    /// ℓ1 weight of the recorded objective (the shrinkage threshold).
    pub penalty_weight: f64,
    pub seed: u64,
}

impl SparseIcaModel {
    pub fn final_objective(&self) -> f64 {
        self.objective_trace.last().copied().unwrap_or(f64::NAN)
    }

    /// Metadata persisted next to the model matrices.
    pub fn metadata(&self) -> ModelMetadata {
        ModelMetadata {
            nu: self.nu,
            iterations: self.iterations,
            converged: self.converged,
            final_objective: self.final_objective(),
            seed: self.seed,
            restart_index: self.restart_index,
            penalty_weight: self.penalty_weight,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelMetadata {
    pub nu: f64,
    pub iterations: usize,
    pub converged: bool,
    pub final_objective: f64,
    pub seed: u64,
    pub restart_index: usize,
    pub penalty_weight: f64,
}

fn shrink(a: f64, t: f64) -> f64 {
    let m = a.abs() - t;
    if m > 0.0 {
        m.copysign(a)
    } else {
        0.0
    }
}

/// `(|a| − √(2ν))₊ · sign(a)`, exactly `0.0` inside the threshold.
pub fn soft_threshold(a: f64, nu: f64) -> Result<f64> {
    if !(nu > 0.0) {
        return Err(Error::Value(format!("nu must be positive, got {nu}")));
    }
    Ok(shrink(a, Shrinkage::Sqrt2Nu.threshold(nu)))
}

fn check_rotation(u: &Matrix, q: usize) -> Result<()> {
    if u.rows() != q || u.cols() != q {
        return Err(Error::Shape(format!("rotation must be {q}x{q}, got {}x{}", u.rows(), u.cols())));
    }
    Ok(())
}

/// `½‖xw − v uᵀ‖²_F + weight·‖v‖₁`.
pub fn objective(xw: &Matrix, v: &Matrix, u: &Matrix, weight: f64) -> Result<f64> {
    let q = xw.cols();
    if v.shape() != xw.shape() {
        return Err(Error::Shape(format!(
            "v is {}x{}, data is {}x{}",
            v.rows(),
            v.cols(),
            xw.rows(),
            xw.cols()
        )));
    }
    check_rotation(u, q)?;
    if orthogonality_error(u) > 1e-8 {
        return Err(Error::Value("u is not orthogonal".into()));
    }
    // ‖X − VUᵀ‖ = ‖XU − V‖ for orthogonal U; the direct form avoids relying on it
    let residual = xw.sub(&v.matmul(&u.transpose())?)?;
    let fit = residual.data().iter().map(|r| r * r).sum::<f64>();
    Ok(0.5 * fit + weight * v.abs_sum())
}

/// Entrywise `(|·| − t)₊ sign(·)` of `xw · u`.
pub fn v_step_with_threshold(xw: &Matrix, u: &Matrix, threshold: f64) -> Result<Matrix> {
    check_rotation(u, xw.cols())?;
    Ok(xw.matmul(u)?.map(|a| shrink(a, threshold)))
}

/// V-step with the `√(2ν)` threshold.
pub fn v_step(xw: &Matrix, u: &Matrix, nu: f64) -> Result<Matrix> {
    if !(nu > 0.0) {
        return Err(Error::Value(format!("nu must be positive, got {nu}")));
    }
    v_step_with_threshold(xw, u, Shrinkage::Sqrt2Nu.threshold(nu))
}

/// Outcome of the Procrustes update.
#[derive(Clone, Debug, PartialEq)]
pub enum UStep {
    Rotation(Matrix),
    /// `X̃ᵀV` has a singular value below `RANK_EPS` of the largest (or is zero);
    /// the maximizer is not unique and the caller keeps its current rotation.
    Degenerate,
}

impl UStep {
    pub fn rotation(self) -> Option<Matrix> {
        match self {
            UStep::Rotation(u) => Some(u),
            UStep::Degenerate => None,
        }
    }
}

/// Orthogonal `U` maximizing `trace(Uᵀ X̃ᵀV)`.
pub fn u_step(xw: &Matrix, v: &Matrix) -> Result<UStep> {
    if v.shape() != xw.shape() {
        return Err(Error::Shape(format!(
            "v is {}x{}, data is {}x{}",
            v.rows(),
            v.cols(),
            xw.rows(),
            xw.cols()
        )));
    }
    procrustes(&xw.t_matmul(v)?)
}

/// Polar factor `Ũ Ṽᵀ` of a square matrix `m = Ũ Σ Ṽᵀ`.
pub fn procrustes(m: &Matrix) -> Result<UStep> {
    if m.rows() != m.cols() {
        return Err(Error::Shape(format!("expected a square matrix, got {}x{}", m.rows(), m.cols())));
    }
    let dec = svd(m)?;
    let largest = dec.singular_values.first().copied().unwrap_or(0.0);
    let smallest = dec.singular_values.last().copied().unwrap_or(0.0);
    if !(largest > 0.0) || smallest <= RANK_EPS * largest {
        return Ok(UStep::Degenerate);
    }
    Ok(UStep::Rotation(dec.u.matmul(&dec.v_t)?))
}

struct RestartRun {
    v: Matrix,
    u: Matrix,
    trace: Vec<f64>,
    converged: bool,
    degenerate_steps: usize,
}

fn check_whitened(xw: &Matrix) -> Result<()> {
    let q = xw.cols();
    if q < 2 {
        return Err(Error::Value(format!("sparse ICA needs at least 2 components, got {q}")));
    }
    if xw.rows() <= q {
        return Err(Error::Value(format!("need more than {q} rows, got {}", xw.rows())));
    }
    if !xw.is_finite() {
        return Err(Error::Value("input has non-finite entries".into()));
    }
    let err = xw
        .column_covariance()
        .sub(&Matrix::identity(q))?
        .frobenius_norm();
    if !(err <= WHITENESS_TOL) {
        return Err(Error::Value(format!(
            "input is not whitened: ‖cov − I‖_F = {err:e} exceeds {WHITENESS_TOL:e}"
        )));
    }
    Ok(())
}

fn run_restart(xw: &Matrix, config: &SparseIcaConfig, restart: usize) -> Result<RestartRun> {
    let q = xw.cols();
    let threshold = config.shrinkage.threshold(config.nu);
    let mut rng = RngStream::new(config.seed).substream(restart as u64);
    let mut u = random_orthogonal(&mut rng, q);
    let mut v = Matrix::zeros(xw.rows(), q);
    let mut trace = Vec::new();
    let mut converged = false;
    let mut degenerate_steps = 0;
    for _ in 0..config.max_iters {
        v = v_step_with_threshold(xw, &u, threshold)?;
        match u_step(xw, &v)? {
            UStep::Rotation(next) => u = next,
            UStep::Degenerate => degenerate_steps += 1,
        }
        let f = objective(xw, &v, &u, threshold)?;
        if !f.is_finite() {
            return Err(Error::Divergence(format!("objective became {f} in restart {restart}")));
        }
        let previous = trace.last().copied();
        trace.push(f);
        if let Some(prev) = previous {
            if (prev - f).abs() / prev.max(1.0) < config.tol {
                converged = true;
                break;
            }
        }
    }
    Ok(RestartRun {
        v,
        u,
        trace,
        converged,
        degenerate_steps,
    })
}

/// Runs `config.restarts` independent alternating minimizations and keeps
/// the one with the lowest final objective (ties: lowest restart index).
pub fn fit(xw: &Matrix, config: &SparseIcaConfig) -> Result<SparseIcaModel> {
    config.validate()?;
    check_whitened(xw)?;
    let runs: Vec<RestartRun> = (0..config.restarts)
        .into_par_iter()
        .map(|r| run_restart(xw, config, r))
        .collect::<Result<_>>()?;
    let converged_restarts = runs.iter().filter(|r| r.converged).count();
    let mut best = 0;
    for (i, run) in runs.iter().enumerate().skip(1) {
        if run.trace.last() < runs[best].trace.last() {
            best = i;
        }
    }
    let winner = runs.into_iter().nth(best).expect("at least one restart");
    Ok(SparseIcaModel {
        iterations: winner.trace.len(),
        v: winner.v,
        u: winner.u,
        objective_trace: winner.trace,
        converged: winner.converged,
        restart_index: best,
        converged_restarts,
        degenerate_steps: winner.degenerate_steps,
        nu: config.nu,
        penalty_weight: config.shrinkage.threshold(config.nu),
        seed: config.seed,
    })
}

/// Information-criterion score `PQ·ln(RSS/PQ) + k·ln(PQ)`, `k` = nonzeros of `V`.
pub fn bic_score(xw: &Matrix, model: &SparseIcaModel) -> Result<f64> {
    let pq = (xw.rows() * xw.cols()) as f64;
    let residual = xw.sub(&model.v.matmul(&model.u.transpose())?)?;
    let rss = residual
        .data()
        .iter()
        .map(|r| r * r)
        .sum::<f64>()
        .max(f64::MIN_POSITIVE);
    let k = model.v.count_nonzero() as f64;
    Ok(pq * (rss / pq).ln() + k * pq.ln())
}

/// Fits once per grid value and returns the `ν` with the lowest
/// [`bic_score`] (ties: first in grid order) with the full score table.
pub fn select_nu(xw: &Matrix, grid: &[f64], config: &SparseIcaConfig) -> Result<(f64, Vec<(f64, f64)>)> {
    if grid.is_empty() {
        return Err(Error::Value("nu grid is empty".into()));
    }
    if let Some(bad) = grid.iter().find(|&&nu| !(nu > 0.0 && nu.is_finite())) {
        return Err(Error::Value(format!("nu grid values must be positive, got {bad}")));
    }
    let mut table = Vec::with_capacity(grid.len());
    for &nu in grid {
        let cfg = SparseIcaConfig { nu, ..config.clone() };
        let model = fit(xw, &cfg)?;
        table.push((nu, bic_score(xw, &model)?));
    }
    let mut best = 0;
    for (i, &(_, score)) in table.iter().enumerate().skip(1) {
        if score < table[best].1 {
            best = i;
        }
    }
    Ok((table[best].0, table))
}

/// `n` values log-spaced over `[low, high]`.
pub fn log_grid(low: f64, high: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![low],
        _ => {
            let (a, b) = (low.ln(), high.ln());
            let mut grid: Vec<f64> = (0..n)
                .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
                .collect();
            grid[0] = low;
            grid[n - 1] = high;
            grid
        }
    }
}

/// Default search grid for [`select_nu`]: 13 values from 0.01 to 10.
pub fn default_nu_grid() -> Vec<f64> {
    log_grid(0.01, 10.0, 13)
}
