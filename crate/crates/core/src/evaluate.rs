//! Component matching and the repeated-trial benchmark.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assignment::max_profit_assignment;
use crate::baselines::Unmixer;
use crate::error::{Error, Result};
use crate::io::{derive_seed, RNG_ALGORITHM};
use crate::matrix::Matrix;
use crate::preprocess::{whiten, WhitenedData};
use crate::simgen::{self, SimParams, SimulatedDataset, N_SOURCES};
use crate::sparse_ica::{self, SparseIcaConfig};

/// Signed Pearson correlation. Fails on length mismatch, fewer than two
/// entries, or a constant vector.
pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Shape(format!("vectors of length {} and {}", a.len(), b.len())));
    }
    if a.len() < 2 {
        return Err(Error::Value("correlation needs at least two entries".into()));
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (&x, &y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(Error::Value("correlation undefined for a constant vector".into()));
    }
    Ok((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

/// `|pearson(a, b)|`: spatial similarity insensitive to ICA's sign ambiguity.
pub fn spatial_similarity(a: &[f64], b: &[f64]) -> Result<f64> {
    pearson(a, b).map(f64::abs)
}

/// Optimal one-to-one pairing of estimated and true components.
///
/// Indexed by true component `j`: `permutation[j]` is the matched estimated
/// column, `signs[j]` makes the matched correlation non-negative and
/// `per_component_corr[j]` is its absolute value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    pub permutation: Vec<usize>,
    pub signs: Vec<i8>,
    pub per_component_corr: Vec<f64>,
    pub mean_corr: f64,
}

/// Matches the columns of `estimated` to those of `truth` (both `P x Q`)
/// maximizing the summed absolute correlation.
pub fn match_components(estimated: &Matrix, truth: &Matrix) -> Result<MatchResult> {
    if estimated.shape() != truth.shape() {
        return Err(Error::Shape(format!(
            "estimated is {}x{}, truth is {}x{}",
            estimated.rows(),
            estimated.cols(),
            truth.rows(),
            truth.cols()
        )));
    }
    let q = truth.cols();
    let est_cols: Vec<Vec<f64>> = (0..q).map(|j| estimated.column(j)).collect();
    let true_cols: Vec<Vec<f64>> = (0..q).map(|j| truth.column(j)).collect();
    let signed: Vec<Vec<f64>> = true_cols
        .iter()
        .map(|t| est_cols.iter().map(|e| pearson(t, e)).collect::<Result<Vec<_>>>())
        .collect::<Result<_>>()?;
    let profit: Vec<Vec<f64>> = signed.iter().map(|r| r.iter().map(|c| c.abs()).collect()).collect();
    let permutation = max_profit_assignment(&profit);
    let signs: Vec<i8> = permutation
        .iter()
        .enumerate()
        .map(|(j, &e)| if signed[j][e] < 0.0 { -1 } else { 1 })
        .collect();
    let per_component_corr: Vec<f64> = permutation.iter().enumerate().map(|(j, &e)| profit[j][e]).collect();
    let mean_corr = per_component_corr.iter().sum::<f64>() / q.max(1) as f64;
    Ok(MatchResult {
        permutation,
        signs,
        per_component_corr,
        mean_corr,
    })
}

/// Everything an algorithm sees in one benchmark trial.
pub struct Trial<'a> {
    pub index: usize,
    /// Seed for the algorithm's own randomness in this trial.
    pub seed: u64,
    pub dataset: &'a SimulatedDataset,
    pub whitened: &'a WhitenedData,
}

/// Something that produces `P x Q` component maps for a trial.
///
/// Every [`Unmixer`] is a benchmark algorithm; custom implementations can
/// also consult the trial's ground truth (useful for plumbing checks).
pub trait BenchmarkAlgorithm: Sync {
    fn name(&self) -> &str;

    fn settings(&self) -> serde_json::Value {
        serde_json::Value::Null
    }

    fn run_trial(&self, trial: &Trial<'_>) -> Result<Matrix>;
}

impl<U: Unmixer> BenchmarkAlgorithm for U {
    fn name(&self) -> &str {
        Unmixer::name(self)
    }

    fn settings(&self) -> serde_json::Value {
        Unmixer::settings(self)
    }

    fn run_trial(&self, trial: &Trial<'_>) -> Result<Matrix> {
        Ok(self.unmix(&trial.whitened.xw, trial.seed)?.sources)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum TrialOutcome {
    Ok(MatchResult),
    Failed { error: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    /// Seed handed to the algorithm.
    pub seed: u64,
    pub outcome: TrialOutcome,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    /// Mean of per-trial `mean_corr` over successful trials.
    pub mean: Option<f64>,
    /// Sample SD (divisor `n − 1`) of the same values.
    pub sd: Option<f64>,
    pub n: usize,
    pub failures: usize,
}

impl Aggregate {
    pub fn from_values(values: &[f64], failures: usize) -> Self {
        let n = values.len();
        let mean = (n > 0).then(|| values.iter().sum::<f64>() / n as f64);
        let sd = mean.filter(|_| n > 1).map(|m| {
            (values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1) as f64).sqrt()
        });
        Aggregate { mean, sd, n, failures }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmReport {
    pub name: String,
    pub settings: serde_json::Value,
    pub trials: Vec<TrialRecord>,
    pub aggregate: Aggregate,
}

impl AlgorithmReport {
    pub fn trial_means(&self) -> Vec<f64> {
        self.trials
            .iter()
            .filter_map(|t| match &t.outcome {
                TrialOutcome::Ok(m) => Some(m.mean_corr),
                TrialOutcome::Failed { .. } => None,
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkConfig {
    pub n_trials: usize,
    pub base_seed: u64,
    pub q: usize,
    pub params: SimParams,
    pub rng_algorithm: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub config: BenchmarkConfig,
    /// Dataset seed of each trial.
    pub trial_seeds: Vec<u64>,
    pub algorithms: Vec<AlgorithmReport>,
}

impl BenchmarkReport {
    pub fn algorithm(&self, name: &str) -> Option<&AlgorithmReport> {
        self.algorithms.iter().find(|a| a.name == name)
    }
}

/// Dataset seed for trial `t`.
pub fn trial_seed(base_seed: u64, trial: usize) -> u64 {
    derive_seed(base_seed, trial as u64)
}

/// Dataset seed reserved for tuning; never used by a trial.
pub fn heldout_seed(base_seed: u64) -> u64 {
    derive_seed(base_seed, u64::MAX)
}

fn name_tag(name: &str) -> u64 {
    // FNV-1a, so adding an algorithm leaves the others' seeds unchanged
    name.bytes()
        .fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3))
}

pub fn algorithm_seed(dataset_seed: u64, name: &str) -> u64 {
    derive_seed(dataset_seed, name_tag(name))
}

/// Whitened spatial-ICA input for a dataset: pixels as rows, `q` components.
pub fn whiten_dataset(ds: &SimulatedDataset, q: usize) -> Result<WhitenedData> {
    whiten(&ds.observed.transpose(), q)
}

/// Picks `ν` by [`sparse_ica::select_nu`] on a dataset generated from the
/// held-out seed of `base_seed`.
pub fn select_benchmark_nu(
    params: &SimParams,
    base_seed: u64,
    grid: &[f64],
    config: &SparseIcaConfig,
) -> Result<(f64, Vec<(f64, f64)>)> {
    let seed = heldout_seed(base_seed);
    let ds = simgen::generate(&params.clone().with_seed(seed))?;
    let w = whiten_dataset(&ds, N_SOURCES)?;
    sparse_ica::select_nu(&w.xw, grid, &config.clone().with_seed(seed))
}

/// Runs `n_trials` simulated trials. Trial `t` regenerates its dataset from
/// `trial_seed(base_seed, t)`, whitens it to three components, runs every
/// algorithm and matches the maps against the ground-truth sources. Failures
/// are recorded and excluded from the aggregates.
pub fn run_benchmark(
    algorithms: &[&dyn BenchmarkAlgorithm],
    n_trials: usize,
    params: &SimParams,
    base_seed: u64,
) -> Result<BenchmarkReport> {
    if n_trials < 2 {
        return Err(Error::Value(format!("need at least 2 trials, got {n_trials}")));
    }
    if algorithms.is_empty() {
        return Err(Error::Value("no algorithms selected".into()));
    }
    params.validate()?;
    let trial_seeds: Vec<u64> = (0..n_trials).map(|t| trial_seed(base_seed, t)).collect();
    let per_trial: Vec<Vec<TrialRecord>> = trial_seeds
        .par_iter()
        .enumerate()
        .map(|(t, &seed)| run_one_trial(algorithms, t, seed, params))
        .collect();

    let reports = algorithms
        .iter()
        .enumerate()
        .map(|(a, alg)| {
            let trials: Vec<TrialRecord> = per_trial.iter().map(|recs| recs[a].clone()).collect();
            let failures = trials
                .iter()
                .filter(|t| matches!(t.outcome, TrialOutcome::Failed { .. }))
                .count();
            let mut report = AlgorithmReport {
                name: alg.name().to_string(),
                settings: alg.settings(),
                trials,
                aggregate: Aggregate::from_values(&[], 0),
            };
            report.aggregate = Aggregate::from_values(&report.trial_means(), failures);
            report
        })
        .collect();

    Ok(BenchmarkReport {
        config: BenchmarkConfig {
            n_trials,
            base_seed,
            q: N_SOURCES,
            params: params.clone(),
            rng_algorithm: RNG_ALGORITHM.to_string(),
        },
        trial_seeds,
        algorithms: reports,
    })
}

fn run_one_trial(
    algorithms: &[&dyn BenchmarkAlgorithm],
    index: usize,
    seed: u64,
    params: &SimParams,
) -> Vec<TrialRecord> {
    let prepared = simgen::generate(&params.clone().with_seed(seed))
        .and_then(|ds| whiten_dataset(&ds, N_SOURCES).map(|w| (ds, w)));
    algorithms
        .iter()
        .map(|alg| {
            let alg_seed = algorithm_seed(seed, alg.name());
            let outcome = match &prepared {
                Err(e) => TrialOutcome::Failed { error: e.to_string() },
                Ok((ds, w)) => {
                    let trial = Trial {
                        index,
                        seed: alg_seed,
                        dataset: ds,
                        whitened: w,
                    };
                    match alg
                        .run_trial(&trial)
                        .and_then(|maps| match_components(&maps, &ds.truth_maps()))
                    {
                        Ok(m) => TrialOutcome::Ok(m),
                        Err(e) => TrialOutcome::Failed { error: e.to_string() },
                    }
                }
            };
            TrialRecord {
                trial: index,
                seed: alg_seed,
                outcome,
            }
        })
        .collect()
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// `algorithm,trial,component,similarity` rows for every successful match.
pub fn trials_csv(report: &BenchmarkReport) -> String {
    let mut out = String::from("algorithm,trial,component,similarity\n");
    for alg in &report.algorithms {
        for t in &alg.trials {
            if let TrialOutcome::Ok(m) = &t.outcome {
                for (j, c) in m.per_component_corr.iter().enumerate() {
                    let _ = writeln!(out, "{},{},{},{}", alg.name, t.trial, j, c);
                }
            }
        }
    }
    out
}

/// `algorithm,mean,sd,n`, one row per algorithm.
pub fn summary_csv(report: &BenchmarkReport) -> String {
    let mut out = String::from("algorithm,mean,sd,n\n");
    for alg in &report.algorithms {
        let a = &alg.aggregate;
        let _ = writeln!(out, "{},{},{},{}", alg.name, opt(a.mean), opt(a.sd), a.n);
    }
    out
}

/// Per-trial mean similarity (`algorithm,trial,mean_corr`) for plotting.
pub fn plot_data_csv(report: &BenchmarkReport) -> String {
    let mut out = String::from("algorithm,trial,mean_corr\n");
    for alg in &report.algorithms {
        for t in &alg.trials {
            if let TrialOutcome::Ok(m) = &t.outcome {
                let _ = writeln!(out, "{},{},{}", alg.name, t.trial, m.mean_corr);
            }
        }
    }
    out
}

/// Writes `report.json`, `trials.csv`, `summary.csv` and `plot_data.csv` into `dir`.
pub fn write_report(report: &BenchmarkReport, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let files = [
        ("report.json", serde_json::to_string_pretty(report)? + "\n"),
        ("trials.csv", trials_csv(report)),
        ("summary.csv", summary_csv(report)),
        ("plot_data.csv", plot_data_csv(report)),
    ];
    for (name, body) in files {
        let path = dir.join(name);
        fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn similarity_identity_and_sign() {
        let a = [1.0, 2.0, 4.0, -1.0];
        let neg: Vec<f64> = a.iter().map(|x| -x).collect();
        assert!((spatial_similarity(&a, &a).unwrap() - 1.0).abs() < 1e-15);
        assert!((spatial_similarity(&a, &neg).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn similarity_errors() {
        assert!(matches!(spatial_similarity(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]), Err(Error::Value(_))));
        assert!(matches!(spatial_similarity(&[1.0, 2.0], &[1.0, 2.0, 3.0]), Err(Error::Shape(_))));
        assert!(spatial_similarity(&[1.0], &[2.0]).is_err());
    }

    #[test]
    fn match_identity() {
        let truth = crate::io::RngStream::new(1).normal_matrix(40, 3);
        let m = match_components(&truth, &truth).unwrap();
        assert_eq!(m.permutation, vec![0, 1, 2]);
        assert_eq!(m.signs, vec![1, 1, 1]);
        assert!((m.mean_corr - 1.0).abs() < 1e-12);
    }

    #[test]
    fn match_permuted_and_negated() {
        let truth = crate::io::RngStream::new(2).normal_matrix(40, 3);
        // estimated column e holds truth column src[e]; the estimated column
        // carrying truth 1 is negated
        let src = [2usize, 0, 1];
        let est = Matrix::from_fn(40, 3, |i, e| {
            let s = if src[e] == 1 { -1.0 } else { 1.0 };
            s * truth[(i, src[e])]
        });
        let m = match_components(&est, &truth).unwrap();
        assert_eq!(m.permutation, vec![1, 2, 0]);
        assert_eq!(m.signs, vec![1, -1, 1]);
        assert!(m.per_component_corr.iter().all(|c| (c - 1.0).abs() < 1e-12));
    }

    #[test]
    fn match_constant_column_errors() {
        let truth = crate::io::RngStream::new(3).normal_matrix(10, 2);
        let mut est = truth.clone();
        for i in 0..10 {
            est[(i, 0)] = 1.0;
        }
        assert!(matches!(match_components(&est, &truth), Err(Error::Value(_))));
    }

    #[test]
    fn aggregate_sd_uses_n_minus_one() {
        let a = Aggregate::from_values(&[1.0, 3.0], 1);
        assert_eq!(a.mean, Some(2.0));
        assert_eq!(a.sd, Some(2f64.sqrt()));
        assert_eq!((a.n, a.failures), (2, 1));
        assert_eq!(Aggregate::from_values(&[0.5], 0).sd, None);
    }

    #[test]
    fn heldout_seed_is_not_a_trial_seed() {
        let h = heldout_seed(11);
        assert!((0..1000).all(|t| trial_seed(11, t) != h));
    }
}
