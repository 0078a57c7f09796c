// Plug a new method into the benchmark: plain PCA maps with no rotation.

use sparsica::evaluate::{run_benchmark, BenchmarkAlgorithm, Trial};
use sparsica::simgen::SimParams;
use sparsica::Matrix;

struct Pca;

impl BenchmarkAlgorithm for Pca {
    fn name(&self) -> &str {
        "pca"
    }

    fn run_trial(&self, trial: &Trial<'_>) -> sparsica::Result<Matrix> {
        Ok(trial.whitened.xw.clone())
    }
}

pub fn run_example() -> sparsica::Result<()> {
    let fastica = sparsica::baselines::FastIca::default();
    let algos: [&dyn BenchmarkAlgorithm; 2] = [&Pca, &fastica];
    let report = run_benchmark(&algos, 4, &SimParams::default(), 9)?;
    for alg in &report.algorithms {
        println!("{:<8} mean similarity {:.3}", alg.name, alg.aggregate.mean.unwrap_or(f64::NAN));
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> sparsica::Result<()> {
    run_example()
}
